//! Exact simulation of single-mode bosonic states on a truncated Fock space.
//!
//! Everything here is a pure function of its inputs. States live in the
//! lowest `dim` number states; the default truncation is [`DEFAULT_DIM`].

mod calibrate;
mod dynamics;
mod fidelity;
mod states;
mod wigner;

pub use calibrate::calibrate_loss_for_fidelity;
pub use dynamics::{
    apply_loss, apply_thermal, kerr_evolve, KerrEvolutionSpec, MasterEquation, DEFAULT_STEP,
};
pub use fidelity::{fidelity, sqrt_psd};
pub use states::{make_cat, make_coherent, make_snap_state};
pub use wigner::{wigner, WignerEvaluator};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const DEFAULT_DIM: usize = 32;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const PSD_TOL: f64 = 1e-8;
/// Maximum population allowed in the top tenth of the Fock levels.
pub const TAIL_MASS_TOL: f64 = 1e-4;

/// Pure state amplitudes in the Fock basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// Normalizes `amplitudes` and wraps them.
    pub fn from_amplitudes(amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::invalid("state vector needs dim >= 2"));
        }
        let norm = amplitudes.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::invalid("state vector has zero or non-finite norm"));
        }
        Ok(Self {
            amplitudes: amplitudes / C64::new(norm, 0.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(n, c)| n as f64 * c.norm_sqr())
            .sum()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            entries: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }
}

/// A mixed state on the truncated Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    /// Wraps a matrix after checking Hermiticity, unit trace and positivity.
    pub fn from_matrix(entries: DMatrix<C64>) -> Result<Self> {
        let rho = Self { entries };
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps a matrix without validation. Callers own the invariants.
    pub(crate) fn from_matrix_unchecked(entries: DMatrix<C64>) -> Self {
        Self { entries }
    }

    pub fn vacuum(dim: usize) -> Self {
        let mut entries = DMatrix::zeros(dim, dim);
        entries[(0, 0)] = C64::new(1.0, 0.0);
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn purity(&self) -> f64 {
        // tr(ρ²) = Σ |ρ_mn|² for Hermitian ρ
        self.entries.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn mean_photon_number(&self) -> f64 {
        (0..self.dim()).map(|n| n as f64 * self.entries[(n, n)].re).sum()
    }

    pub fn population(&self, n: usize) -> f64 {
        self.entries[(n, n)].re
    }

    /// Population of the top 10% of Fock levels (at least one level).
    pub fn tail_mass(&self) -> f64 {
        let dim = self.dim();
        let top = (dim / 10).max(1);
        (dim - top..dim).map(|n| self.entries[(n, n)].re).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.entries[(i, j)] - self.entries[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = self.entries.clone().symmetric_eigenvalues();
        let mut v: Vec<f64> = eig.iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.nrows() != self.entries.ncols() || self.dim() < 2 {
            return Err(Error::invalid("density matrix must be square with dim >= 2"));
        }
        if self.entries.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::invalid("density matrix has non-finite entries"));
        }
        let herm = self.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::invalid(format!(
                "density matrix not Hermitian (error {herm:.3e})"
            )));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::invalid(format!("density matrix trace {tr} != 1")));
        }
        let min_eig = self.eigenvalues()[0];
        if min_eig < -PSD_TOL {
            return Err(Error::invalid(format!(
                "density matrix not positive semidefinite (min eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(())
    }

    /// Fails when the top Fock levels carry more than [`TAIL_MASS_TOL`].
    pub fn check_truncation(&self) -> Result<()> {
        let tail = self.tail_mass();
        if tail > TAIL_MASS_TOL {
            return Err(Error::invalid(format!(
                "truncation too small: tail mass {tail:.3e} exceeds {TAIL_MASS_TOL:e} at dim {}",
                self.dim()
            )));
        }
        Ok(())
    }

    /// Convex combination Σ w_i ρ_i. Weights must be non-negative and sum to 1.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("empty mixture"))?;
        let dim = first.1.dim();
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if parts.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("mixture weights must be a probability vector"));
        }
        let mut entries = DMatrix::zeros(dim, dim);
        for (w, rho) in parts {
            if rho.dim() != dim {
                return Err(Error::invalid("mixture components differ in dimension"));
            }
            entries += rho.entries() * C64::new(*w, 0.0);
        }
        Ok(Self { entries })
    }

    /// Restores exact Hermiticity after numerical evolution.
    pub(crate) fn symmetrize(&mut self) {
        let adj = self.entries.adjoint();
        self.entries = (&self.entries + adj) * C64::new(0.5, 0.0);
    }
}

impl From<&StateVector> for DensityMatrix {
    fn from(psi: &StateVector) -> Self {
        psi.to_density()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_is_valid() {
        let rho = DensityMatrix::vacuum(8);
        rho.validate().unwrap();
        assert_eq!(rho.purity(), 1.0);
        assert_eq!(rho.tail_mass(), 0.0);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = DMatrix::<C64>::zeros(3, 3);
        m[(0, 0)] = C64::new(1.0, 0.0);
        m[(0, 1)] = C64::new(0.1, 0.0);
        assert!(DensityMatrix::from_matrix(m).is_err());
    }

    #[test]
    fn rejects_negative_eigenvalue() {
        let mut m = DMatrix::<C64>::zeros(2, 2);
        m[(0, 0)] = C64::new(1.1, 0.0);
        m[(1, 1)] = C64::new(-0.1, 0.0);
        assert!(DensityMatrix::from_matrix(m).is_err());
    }

    #[test]
    fn mixture_is_valid_state() {
        let a = DensityMatrix::vacuum(4);
        let mut e = DMatrix::<C64>::zeros(4, 4);
        e[(2, 2)] = C64::new(1.0, 0.0);
        let b = DensityMatrix::from_matrix(e).unwrap();
        let mix = DensityMatrix::mixture(&[(0.25, &a), (0.75, &b)]).unwrap();
        mix.validate().unwrap();
        assert!((mix.mean_photon_number() - 1.5).abs() < 1e-15);
    }
}
