use nalgebra::{DMatrix, SymmetricEigen};

use super::{DensityMatrix, C64, PSD_TOL};
use crate::error::{Error, Result};

/// Principal square root of a positive semidefinite Hermitian matrix.
///
/// Eigenvalues in (−[`PSD_TOL`], 0) are clipped to zero; anything more
/// negative is rejected.
pub fn sqrt_psd(m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let eig = SymmetricEigen::new(m.clone());
    let mut roots = Vec::with_capacity(eig.eigenvalues.len());
    for &lam in eig.eigenvalues.iter() {
        if lam < -PSD_TOL {
            return Err(Error::invalid(format!(
                "matrix is not positive semidefinite (eigenvalue {lam:.3e})"
            )));
        }
        roots.push(C64::new(lam.max(0.0).sqrt(), 0.0));
    }
    let v = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * roots[j]);
    Ok(scaled * v.adjoint())
}

/// Uhlmann fidelity (tr√(√ρ σ √ρ))².
///
/// Evaluated as the squared trace norm of √ρ√σ, whose singular values are
/// the square roots of the eigenvalues of √ρ σ √ρ. Working with singular
/// values avoids taking square roots of round-off-level eigenvalues.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::invalid(format!(
            "fidelity of states with dims {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let a = sqrt_psd(rho.entries())?;
    let b = sqrt_psd(sigma.entries())?;
    let prod = a * b;
    let sv = prod.singular_values();
    let tr: f64 = sv.iter().sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}
