//! Threshold calibration, pairwise verification, rejection curves and
//! two-dimensional projections of learned representations.

mod curve;
mod pair;
mod threshold;
mod tsne;

pub use curve::{
    bin_by_fidelity, count_rejections, curve_to_text, pair_rejections, rejection_curve, trial_seed, CurvePoint,
    PairOutcome, TestPair,
};
pub use pair::{distance, verify_pair, ImageProvenance, Verdict, VerificationReport};
pub use threshold::{
    calibrate_from_distances, calibrate_threshold, candidate_thresholds, error_rates, pair_distances, Threshold,
};
pub use tsne::{joint_affinities, project_2d, Projection, TsneConfig};
