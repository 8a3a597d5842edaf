//! Gaussian-unitary distortions as phase-space affine maps.
//!
//! A displacement, rotation by φ and squeeze by ζ act on Wigner
//! coordinates as
//!
//! ```text
//! x' = ζ (x cos φ + p sin φ) + ζ Δx
//! p' = (−x sin φ + p cos φ)/ζ + Δp/ζ
//! ```
//!
//! The map is symplectic (unit Jacobian). Transformed images are produced
//! by evaluating the exact Wigner function at the mapped coordinates.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sampling::assemble_image;
use super::{DataImage, GridSpec};
use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, WignerEvaluator, C64};

pub const ZETA_MIN: f64 = 5.0 / 6.0;
pub const ZETA_MAX: f64 = 6.0 / 5.0;
/// Default bound on |x'| and |p'| for mapped coordinates.
pub const DEFAULT_EVAL_BOUND: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub phi: f64,
    pub dx: f64,
    pub dp: f64,
    pub zeta: f64,
}

impl AffineParams {
    pub const IDENTITY: AffineParams = AffineParams {
        phi: 0.0,
        dx: 0.0,
        dp: 0.0,
        zeta: 1.0,
    };

    /// φ ∈ [0, π), Δx, Δp ∈ (−1, 1), ζ ∈ [5/6, 6/5], all uniform.
    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        let phi = rng.random_range(0.0..PI);
        let mut shift = || loop {
            let v: f64 = rng.random_range(-1.0..1.0);
            if v != -1.0 {
                break v;
            }
        };
        let dx = shift();
        let dp = shift();
        let zeta = rng.random_range(ZETA_MIN..=ZETA_MAX);
        Self { phi, dx, dp, zeta }
    }

    /// Checks the sampling ranges.
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..PI).contains(&self.phi)
            && self.dx > -1.0
            && self.dx < 1.0
            && self.dp > -1.0
            && self.dp < 1.0
            && (ZETA_MIN..=ZETA_MAX).contains(&self.zeta);
        if !ok {
            return Err(Error::invalid(format!("affine parameters out of range: {self:?}")));
        }
        Ok(())
    }

    pub fn map(&self, x: f64, p: f64) -> (f64, f64) {
        let (s, c) = self.phi.sin_cos();
        let z = self.zeta;
        (z * (x * c + p * s) + z * self.dx, (-x * s + p * c) / z + self.dp / z)
    }

    /// Linear part as a row-major 2×2 matrix.
    pub fn linear_part(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.phi.sin_cos();
        let z = self.zeta;
        [[z * c, z * s], [-s / z, c / z]]
    }

    pub fn jacobian_det(&self) -> f64 {
        let m = self.linear_part();
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }
}

/// Like [`super::make_data_image`] but reads the Wigner function at the
/// affinely mapped coordinates of every selected pixel.
///
/// Uses the same pixel selection and per-pixel seeds as the untransformed
/// sampler, so identity parameters reproduce it exactly.
#[allow(clippy::too_many_arguments)]
pub fn affine_sample(
    state: &DensityMatrix,
    params: &AffineParams,
    grid: &GridSpec,
    fraction: f64,
    shots: u32,
    seed: u64,
    eval_bound: f64,
) -> Result<DataImage> {
    let ev = WignerEvaluator::new(state);
    let mut img = assemble_image(grid, fraction, shots, seed, "", |i| {
        let (x, p) = grid.coords(i);
        let (xm, pm) = params.map(x, p);
        if xm.abs() > eval_bound || pm.abs() > eval_bound {
            return Err(Error::invalid(format!(
                "pixel {i} at ({x}, {p}) maps to ({xm}, {pm}), outside the evaluation bound {eval_bound}"
            )));
        }
        Ok(ev.eval(C64::new(xm, pm)))
    })?;
    img.affine = Some(*params);
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{make_cat, DEFAULT_DIM};
    use crate::measure::{make_data_image, seeds::rng_from};
    use proptest::prelude::*;

    #[test]
    fn identity_matches_plain_sampler() {
        let rho = make_cat(C64::new(1.3, 0.0), 2, DEFAULT_DIM).unwrap().to_density();
        let grid = GridSpec::new(32, 3.0).unwrap();
        let plain = make_data_image(&rho, &grid, 0.75, 300, 5).unwrap();
        let mut mapped =
            affine_sample(&rho, &AffineParams::IDENTITY, &grid, 0.75, 300, 5, DEFAULT_EVAL_BOUND).unwrap();
        assert_eq!(mapped.affine, Some(AffineParams::IDENTITY));
        mapped.affine = None;
        assert_eq!(plain, mapped);
    }

    #[test]
    fn half_turn_leaves_cat_invariant() {
        let rho = make_cat(C64::new(1.6, 0.0), 2, DEFAULT_DIM).unwrap().to_density();
        let ev = WignerEvaluator::new(&rho);
        let grid = GridSpec::new(32, 3.0).unwrap();
        let turn = AffineParams {
            phi: PI,
            ..AffineParams::IDENTITY
        };
        for i in 0..grid.pixels() {
            let (x, p) = grid.coords(i);
            let (xm, pm) = turn.map(x, p);
            let a = ev.eval(C64::new(x, p));
            let b = ev.eval(C64::new(xm, pm));
            assert!((a - b).abs() < 1e-8, "pixel {i}");
        }
    }

    #[test]
    fn out_of_bound_pixel_is_reported() {
        let rho = DensityMatrix::vacuum(DEFAULT_DIM);
        let grid = GridSpec::new(16, 3.0).unwrap();
        let params = AffineParams {
            phi: 0.7,
            dx: 0.9,
            dp: -0.9,
            zeta: ZETA_MAX,
        };
        let err = affine_sample(&rho, &params, &grid, 1.0, 10, 0, 3.0).unwrap_err();
        assert!(err.to_string().contains("pixel"));
    }

    #[test]
    fn sampled_params_in_range() {
        let mut rng = rng_from(11);
        for _ in 0..1000 {
            AffineParams::sample(&mut rng).validate().unwrap();
        }
    }

    proptest! {
        #[test]
        fn unit_jacobian(phi in 0.0..PI, dx in -0.99..0.99f64, dp in -0.99..0.99f64, zeta in ZETA_MIN..ZETA_MAX) {
            let a = AffineParams { phi, dx, dp, zeta };
            prop_assert!((a.jacobian_det() - 1.0).abs() < 1e-12);
        }
    }
}
