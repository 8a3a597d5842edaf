use nalgebra::DVector;

use super::{StateVector, C64};
use crate::error::{Error, Result};

fn check_dim(alpha: C64, dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::invalid(format!("Fock truncation {dim} must be >= 2")));
    }
    if alpha.norm_sqr() > dim as f64 / 4.0 {
        return Err(Error::invalid(format!(
            "|alpha|^2 = {:.4} exceeds dim/4 = {:.2}; truncation inadequate",
            alpha.norm_sqr(),
            dim as f64 / 4.0
        )));
    }
    Ok(())
}

/// Unnormalized, untruncated coherent amplitudes e^{-|α|²/2} αⁿ/√(n!).
pub(crate) fn coherent_amplitudes(alpha: C64, dim: usize) -> DVector<C64> {
    let mut amps = DVector::zeros(dim);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        amps[n] = c;
    }
    amps
}

/// Coherent state |α⟩, renormalized after truncation.
pub fn make_coherent(alpha: C64, dim: usize) -> Result<StateVector> {
    check_dim(alpha, dim)?;
    StateVector::from_amplitudes(coherent_amplitudes(alpha, dim))
}

/// Two-component (|α⟩+|−α⟩) or four-component (|α⟩+|iα⟩+|−α⟩+|−iα⟩) cat state.
pub fn make_cat(alpha: C64, components: usize, dim: usize) -> Result<StateVector> {
    if alpha.norm() == 0.0 {
        return Err(Error::invalid("cat state amplitude must be non-zero"));
    }
    check_dim(alpha, dim)?;
    let phases: &[C64] = match components {
        2 => &[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
        4 => &[
            C64::new(1.0, 0.0),
            C64::new(0.0, 1.0),
            C64::new(-1.0, 0.0),
            C64::new(0.0, -1.0),
        ],
        other => {
            return Err(Error::invalid(format!(
                "cat state needs 2 or 4 components, got {other}"
            )))
        }
    };
    let mut amps = DVector::zeros(dim);
    for &ph in phases {
        amps += coherent_amplitudes(alpha * ph, dim);
    }
    StateVector::from_amplitudes(amps)
}

/// SNAP(θ)|α⟩ with SNAP(θ) = Σₙ e^{iθₙ}|n⟩⟨n|; missing θₙ are zero.
pub fn make_snap_state(alpha: C64, thetas: &[f64], dim: usize) -> Result<StateVector> {
    if thetas.len() > dim {
        return Err(Error::invalid(format!(
            "{} SNAP phases exceed truncation {dim}",
            thetas.len()
        )));
    }
    let coherent = make_coherent(alpha, dim)?;
    let mut amps = coherent.amplitudes().clone();
    for (n, theta) in thetas.iter().enumerate() {
        amps[n] *= C64::from_polar(1.0, *theta);
    }
    StateVector::from_amplitudes(amps)
}
