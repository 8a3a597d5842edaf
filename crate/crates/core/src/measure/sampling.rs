//! Finite-shot displaced-parity sampling.
//!
//! A parity measurement after D(−α) returns +1 with probability
//! p₊ = (1 + (π/2)W(α))/2. With k positive outcomes in `shots` repetitions
//! the Wigner estimate is (2/π)(2k/shots − 1).

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2};

use rand::seq::index;
use rand_distr::{Binomial, Distribution};

use super::seeds::{derive_seed, rng_from, stream};
use super::{DataImage, GridSpec, Shots};
use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, WignerEvaluator, C64};

const PROBABILITY_SLACK: f64 = 1e-9;

/// Probability of the +1 parity outcome for Wigner value `w`.
pub fn parity_probability(w: f64) -> Result<f64> {
    let p = 0.5 * (1.0 + FRAC_PI_2 * w);
    if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&p) {
        return Err(Error::invalid(format!(
            "Wigner value {w} gives parity probability {p} outside [0, 1]"
        )));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// One finite-shot estimate of a pixel whose exact Wigner value is `w`.
pub fn sample_wigner_value(w: f64, shots: u32, seed: u64) -> Result<f64> {
    if shots == 0 {
        return Err(Error::invalid("shots must be >= 1"));
    }
    let p = parity_probability(w)?;
    let dist = Binomial::new(shots as u64, p)
        .map_err(|e| Error::numerical(format!("binomial({shots}, {p}): {e}")))?;
    let k = dist.sample(&mut rng_from(seed)) as f64;
    Ok(FRAC_2_PI * (2.0 * k / shots as f64 - 1.0))
}

/// Finite-shot estimate of W(α) for `state`.
pub fn sample_pixel(state: &DensityMatrix, alpha: C64, shots: u32, seed: u64) -> Result<f64> {
    let w = WignerEvaluator::new(state).eval(alpha);
    sample_wigner_value(w, shots, seed)
}

/// Sorted indices of the present pixels for an image seed.
pub fn select_pixels(grid: &GridSpec, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    let n = grid.present_count(fraction)?;
    let mut rng = rng_from(derive_seed(seed, &[stream::MASK]));
    let mut chosen = index::sample(&mut rng, grid.pixels(), n).into_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

pub(crate) fn pixel_seed(image_seed: u64, index: usize) -> u64 {
    derive_seed(image_seed, &[stream::PIXEL, index as u64])
}

/// Builds an image by evaluating `value_at` at each selected pixel.
pub(crate) fn assemble_image(
    grid: &GridSpec,
    fraction: f64,
    shots: u32,
    seed: u64,
    descriptor: &str,
    mut value_at: impl FnMut(usize) -> Result<f64>,
) -> Result<DataImage> {
    grid.validate()?;
    if shots == 0 {
        return Err(Error::invalid("shots must be >= 1"));
    }
    let chosen = select_pixels(grid, fraction, seed)?;
    let mut mask = vec![false; grid.pixels()];
    let mut estimates = vec![0.0; grid.pixels()];
    for idx in chosen {
        let w = value_at(idx)?;
        mask[idx] = true;
        estimates[idx] = sample_wigner_value(w, shots, pixel_seed(seed, idx))?;
    }
    Ok(DataImage {
        grid: *grid,
        mask,
        estimates,
        shots: Shots::Count(shots),
        fraction,
        seed,
        descriptor: descriptor.to_string(),
        affine: None,
    })
}

/// Samples `round(fraction·side²)` pixels uniformly without replacement
/// and estimates each with `shots` parity measurements.
pub fn make_data_image(
    state: &DensityMatrix,
    grid: &GridSpec,
    fraction: f64,
    shots: u32,
    seed: u64,
) -> Result<DataImage> {
    let ev = WignerEvaluator::new(state);
    assemble_image(grid, fraction, shots, seed, "", |i| Ok(ev.eval(grid.alpha(i))))
}

/// Exact Wigner values of one state over a whole grid, reused across images.
#[derive(Clone, Debug)]
pub struct WignerGrid {
    grid: GridSpec,
    values: Vec<f64>,
    descriptor: String,
}

impl WignerGrid {
    pub fn new(state: &DensityMatrix, grid: &GridSpec, descriptor: impl Into<String>) -> Self {
        let ev = WignerEvaluator::new(state);
        let values = (0..grid.pixels()).map(|i| ev.eval(grid.alpha(i))).collect();
        Self {
            grid: *grid,
            values,
            descriptor: descriptor.into(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same output as [`make_data_image`] for the same state and seed.
    pub fn sample(&self, fraction: f64, shots: u32, seed: u64) -> Result<DataImage> {
        assemble_image(&self.grid, fraction, shots, seed, &self.descriptor, |i| {
            Ok(self.values[i])
        })
    }
}
