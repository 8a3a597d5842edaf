//! Rejection rates over freshly sampled image pairs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Threshold;
use crate::embednet::NetworkParams;
use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::measure::seeds::{derive_seed, stream};
use crate::measure::{DataImage, ImageConfig, WignerGrid};

/// A reference state ρ, a candidate σ and their fidelity.
#[derive(Clone, Debug)]
pub struct TestPair {
    pub label: String,
    pub reference: DensityMatrix,
    pub candidate: DensityMatrix,
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub label: String,
    pub fidelity: f64,
    pub rejected: usize,
    pub trials: usize,
}

impl PairOutcome {
    pub fn rate(&self) -> f64 {
        self.rejected as f64 / self.trials as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fidelity: f64,
    pub rejection_rate: f64,
    pub n_trials: usize,
}

/// Counts rejections over `trials` image pairs produced by `make_pair`.
pub fn count_rejections(
    params: &NetworkParams,
    threshold: &Threshold,
    trials: usize,
    mut make_pair: impl FnMut(usize) -> Result<(DataImage, DataImage)>,
) -> Result<usize> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let mut images = Vec::with_capacity(2 * trials);
    for t in 0..trials {
        let (a, b) = make_pair(t)?;
        images.push(a);
        images.push(b);
    }
    let refs: Vec<&DataImage> = images.iter().collect();
    let reps = params.embed(&refs)?;
    Ok(reps
        .chunks(2)
        .filter(|p| !threshold.accepts(p[0].distance(&p[1])))
        .count())
}

/// Seed of image `side` (0 = reference, 1 = candidate) of a trial.
pub fn trial_seed(seed: u64, pair: usize, trial: usize, side: u64) -> u64 {
    derive_seed(seed, &[stream::TRIAL, pair as u64, trial as u64, side])
}

/// Rejection rate of every pair over fresh images per trial.
pub fn pair_rejections(
    params: &NetworkParams,
    threshold: &Threshold,
    pairs: &[TestPair],
    trials: usize,
    config: &ImageConfig,
    seed: u64,
) -> Result<Vec<PairOutcome>> {
    pairs
        .iter()
        .enumerate()
        .map(|(p, pair)| {
            let ref_grid = WignerGrid::new(&pair.reference, &config.grid, format!("{}:reference", pair.label));
            let cand_grid = WignerGrid::new(&pair.candidate, &config.grid, format!("{}:candidate", pair.label));
            let rejected = count_rejections(params, threshold, trials, |t| {
                Ok((
                    ref_grid.sample(config.fraction, config.shots, trial_seed(seed, p, t, 0))?,
                    cand_grid.sample(config.fraction, config.shots, trial_seed(seed, p, t, 1))?,
                ))
            })?;
            Ok(PairOutcome {
                label: pair.label.clone(),
                fidelity: pair.fidelity,
                rejected,
                trials,
            })
        })
        .collect()
}

/// Pools outcomes whose fidelities round to the same hundredth.
pub fn bin_by_fidelity(outcomes: &[PairOutcome]) -> Vec<CurvePoint> {
    let mut bins: Vec<(i64, usize, usize)> = Vec::new();
    for o in outcomes {
        let key = (o.fidelity * 100.0).round() as i64;
        match bins.iter_mut().find(|b| b.0 == key) {
            Some(b) => {
                b.1 += o.rejected;
                b.2 += o.trials;
            }
            None => bins.push((key, o.rejected, o.trials)),
        }
    }
    bins.sort_by_key(|b| b.0);
    bins.into_iter()
        .map(|(key, rejected, trials)| CurvePoint {
            fidelity: key as f64 / 100.0,
            rejection_rate: rejected as f64 / trials as f64,
            n_trials: trials,
        })
        .collect()
}

/// Rejection rate against fidelity, binned to 0.01.
pub fn rejection_curve(
    params: &NetworkParams,
    threshold: &Threshold,
    pairs: &[TestPair],
    trials: usize,
    config: &ImageConfig,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    Ok(bin_by_fidelity(&pair_rejections(params, threshold, pairs, trials, config, seed)?))
}

/// `fidelity, rejection_rate, n_trials` records.
pub fn curve_to_text(points: &[CurvePoint]) -> String {
    let mut s = String::from("fidelity, rejection_rate, n_trials\n");
    for p in points {
        let _ = writeln!(s, "{:.2}, {:.6}, {}", p.fidelity, p.rejection_rate, p.n_trials);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embednet::{NetworkLayout, NetworkParams};
    use crate::fock::{apply_loss, fidelity, make_cat, DEFAULT_DIM, C64};
    use crate::measure::GridSpec;

    fn setup() -> (NetworkParams, Vec<TestPair>, ImageConfig) {
        let params = NetworkParams::init(NetworkLayout::default_for(16), 1).unwrap();
        let rho = make_cat(C64::new(1.2, 0.0), 2, DEFAULT_DIM).unwrap().to_density();
        let sigma = apply_loss(&rho, 0.2).unwrap();
        let f = fidelity(&rho, &sigma).unwrap();
        let pairs = vec![
            TestPair {
                label: "same".into(),
                reference: rho.clone(),
                candidate: rho.clone(),
                fidelity: 1.0,
            },
            TestPair {
                label: "lossy".into(),
                reference: rho,
                candidate: sigma,
                fidelity: f,
            },
        ];
        let config = ImageConfig {
            grid: GridSpec::new(16, 3.0).unwrap(),
            fraction: 0.75,
            shots: 50,
        };
        (params, pairs, config)
    }

    #[test]
    fn extreme_thresholds() {
        let (params, pairs, config) = setup();
        let all = rejection_curve(&params, &Threshold::fixed(2.0).unwrap(), &pairs, 10, &config, 3).unwrap();
        assert!(all.iter().all(|p| p.rejection_rate == 0.0));
        let none = rejection_curve(&params, &Threshold::fixed(0.0).unwrap(), &pairs, 10, &config, 3).unwrap();
        assert!(none.iter().all(|p| p.rejection_rate == 1.0));
        assert_eq!(none.last().unwrap().fidelity, 1.0);
        assert!(none.iter().all(|p| p.n_trials == 10));
    }

    #[test]
    fn deterministic_and_binned() {
        let (params, pairs, config) = setup();
        let t = Threshold::fixed(0.01).unwrap();
        let a = pair_rejections(&params, &t, &pairs, 5, &config, 9).unwrap();
        let b = pair_rejections(&params, &t, &pairs, 5, &config, 9).unwrap();
        assert_eq!(a, b);
        let mut twice = a.clone();
        twice.push(a[0].clone());
        let binned = bin_by_fidelity(&twice);
        assert_eq!(binned.len(), 2);
        assert_eq!(binned[1].n_trials, 10);
        let text = curve_to_text(&binned);
        assert!(text.starts_with("fidelity, rejection_rate, n_trials\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
