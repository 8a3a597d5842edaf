//! Equal-error-rate threshold calibration.

use serde::{Deserialize, Serialize};

use crate::embednet::{NetworkParams, Representation};
use crate::error::{Error, Result};
use crate::measure::DataImage;

/// Acceptance threshold on the embedding distance with its error rates on
/// the calibration data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    /// Fraction of same-state pairs rejected.
    pub frr: f64,
    /// Fraction of different-state pairs accepted.
    pub far: f64,
    /// Set when every distance coincides, so no threshold can separate.
    #[serde(default)]
    pub degenerate: bool,
}

impl Threshold {
    pub fn fixed(value: f64) -> Result<Self> {
        if !(0.0..=2.0).contains(&value) {
            return Err(Error::invalid(format!("threshold {value} outside [0, 2]")));
        }
        Ok(Self {
            value,
            frr: f64::NAN,
            far: f64::NAN,
            degenerate: false,
        })
    }

    pub fn accepts(&self, distance: f64) -> bool {
        distance <= self.value
    }
}

/// (FRR, FAR) for a threshold; pairs at exactly the threshold are accepted.
pub fn error_rates(genuine: &[f64], impostor: &[f64], value: f64) -> (f64, f64) {
    let frr = genuine.iter().filter(|&&d| d > value).count() as f64 / genuine.len() as f64;
    let far = impostor.iter().filter(|&&d| d <= value).count() as f64 / impostor.len() as f64;
    (frr, far)
}

/// Candidate thresholds: 0, midpoints between consecutive distinct sorted
/// distances, and the largest distance.
pub fn candidate_thresholds(genuine: &[f64], impostor: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let mut c = vec![0.0];
    c.extend(all.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    if let Some(&max) = all.last() {
        c.push(max);
    }
    c.dedup();
    c
}

/// Threshold minimizing |FRR − FAR| over the candidates. When a contiguous
/// run of candidates ties, the midpoint of the run is returned provided it
/// attains the same optimum; otherwise the first optimal candidate.
pub fn calibrate_from_distances(genuine: &[f64], impostor: &[f64]) -> Result<Threshold> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::invalid(
            "calibration needs both same-state and different-state pairs",
        ));
    }
    if genuine.iter().chain(impostor).any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::invalid("distances must be finite and non-negative"));
    }
    let candidates = candidate_thresholds(genuine, impostor);
    let gap = |v: f64| {
        let (frr, far) = error_rates(genuine, impostor, v);
        (frr - far).abs()
    };
    let gaps: Vec<f64> = candidates.iter().map(|&c| gap(c)).collect();
    let best = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let first = gaps.iter().position(|&g| g == best).expect("non-empty");
    let mut last = first;
    while last + 1 < gaps.len() && gaps[last + 1] == best {
        last += 1;
    }
    let mid = 0.5 * (candidates[first] + candidates[last]);
    let value = if gap(mid) == best { mid } else { candidates[first] };
    let value = value.clamp(0.0, 2.0);
    let (frr, far) = error_rates(genuine, impostor, value);
    let lo = genuine.iter().chain(impostor).copied().fold(f64::INFINITY, f64::min);
    let hi = genuine.iter().chain(impostor).copied().fold(0.0, f64::max);
    Ok(Threshold {
        value,
        frr,
        far,
        degenerate: hi == lo,
    })
}

/// All within-group and between-group distances.
pub fn pair_distances(groups: &[Vec<Representation>]) -> (Vec<f64>, Vec<f64>) {
    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    for (s, gs) in groups.iter().enumerate() {
        for (i, a) in gs.iter().enumerate() {
            for b in &gs[i + 1..] {
                genuine.push(a.distance(b));
            }
            for other in &groups[s + 1..] {
                for b in other {
                    impostor.push(a.distance(b));
                }
            }
        }
    }
    (genuine, impostor)
}

/// Calibrates on validation images grouped by state.
pub fn calibrate_threshold(params: &NetworkParams, validation: &[Vec<&DataImage>]) -> Result<Threshold> {
    if validation.len() < 2 {
        return Err(Error::invalid("calibration needs at least 2 states"));
    }
    if validation.iter().all(|g| g.len() < 2) {
        return Err(Error::invalid("calibration needs a state with at least 2 images"));
    }
    let reps = validation
        .iter()
        .map(|g| params.embed(g))
        .collect::<Result<Vec<_>>>()?;
    let (genuine, impostor) = pair_distances(&reps);
    calibrate_from_distances(&genuine, &impostor)
}
