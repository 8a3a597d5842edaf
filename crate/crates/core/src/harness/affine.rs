//! Verification up to displacement, rotation and squeezing of SNAP states.

use std::fmt::Write as _;

use serde::Serialize;

use super::{stage, RunContext};
use crate::error::Result;
use crate::harness::spec::AffineSpec;
use crate::measure::{build_dataset, DataImage, GridSpec, ImageConfig, StateDescriptor, StateFamily};
use crate::verify::{Threshold, Verdict};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceEntry {
    pub state_a: String,
    pub image_a: usize,
    pub state_b: String,
    pub image_b: usize,
    pub distance: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffineOutcome {
    pub threshold: Threshold,
    /// Fraction of same-label test pairs accepted.
    pub accept_same: f64,
    /// Fraction of different-label test pairs rejected.
    pub reject_different: f64,
    pub same_pairs: usize,
    pub different_pairs: usize,
    pub table: Vec<DistanceEntry>,
}

/// One label per (θ₀, θ₁) combination, each image under its own random
/// affine map.
pub fn snap_grid_family(alpha: f64, thetas: &[f64]) -> StateFamily {
    let mut states = Vec::new();
    for &t0 in thetas {
        for &t1 in thetas {
            states.push(StateDescriptor::snap(alpha, vec![t0, t1]));
        }
    }
    StateFamily::new(states).with_affine()
}

#[derive(Serialize)]
struct Report {
    scenario: &'static str,
    threshold: f64,
    validation_frr: f64,
    validation_far: f64,
    accept_same: f64,
    reject_different: f64,
    same_pairs: usize,
    different_pairs: usize,
}

pub(super) fn run_affine(ctx: &RunContext, spec: &AffineSpec) -> Result<AffineOutcome> {
    let grid = GridSpec::new(spec.side, spec.extent)?;
    let image = ImageConfig {
        grid,
        fraction: spec.present_pixels as f64 / grid.pixels() as f64,
        shots: spec.shots,
    };
    let recipe = ctx.recipe(snap_grid_family(spec.alpha, &spec.train_thetas), spec.k, image)?;
    let model = ctx.model(&recipe, "affine")?;
    ctx.write_model("affine", &model)?;

    let seed = ctx.seed(stage::TEST_DATA);
    let test_family = snap_grid_family(spec.alpha, &spec.test_thetas);
    let test = build_dataset(
        &test_family,
        spec.test_images_per_state,
        &image,
        seed,
        ctx.spec.simulator.dim,
    )
    .map_err(|e| e.in_stage("affine/test-data", seed))?;
    let flat: Vec<&DataImage> = test.images.iter().flatten().collect();
    let reps = model.params.embed(&flat).map_err(|e| e.in_stage("affine/embed", seed))?;
    let m = spec.test_images_per_state;
    let t = model.threshold;
    let (mut same, mut same_ok, mut diff, mut diff_ok) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..reps.len() {
        for j in i + 1..reps.len() {
            let accepted = t.accepts(reps[i].distance(&reps[j]));
            if i / m == j / m {
                same += 1;
                same_ok += accepted as usize;
            } else {
                diff += 1;
                diff_ok += !accepted as usize;
            }
        }
    }

    // first two images of each shown state, and each state against the next
    let shown = spec.table_states.min(test.states.len());
    let mut table = Vec::new();
    let mut entry = |sa: usize, ia: usize, sb: usize, ib: usize| {
        let d = reps[sa * m + ia].distance(&reps[sb * m + ib]);
        table.push(DistanceEntry {
            state_a: test.states[sa].to_string(),
            image_a: ia,
            state_b: test.states[sb].to_string(),
            image_b: ib,
            distance: d,
            verdict: if t.accepts(d) { Verdict::Accept } else { Verdict::Reject },
        });
    };
    for s in 0..shown {
        entry(s, 0, s, 1);
        if s + 1 < shown {
            entry(s, 0, s + 1, 0);
        }
    }

    let outcome = AffineOutcome {
        threshold: t,
        accept_same: same_ok as f64 / same as f64,
        reject_different: diff_ok as f64 / diff as f64,
        same_pairs: same,
        different_pairs: diff,
        table,
    };
    let mut text = String::from("state_a, image_a, state_b, image_b, distance, verdict\n");
    for e in &outcome.table {
        let verdict = match e.verdict {
            Verdict::Accept => "accept",
            Verdict::Reject => "reject",
        };
        let _ = writeln!(
            text,
            "{}, {}, {}, {}, {:.6}, {verdict}",
            e.state_a, e.image_a, e.state_b, e.image_b, e.distance
        );
    }
    ctx.out.write("distance_table.txt", &text)?;
    let report = Report {
        scenario: "affine-equivalence",
        threshold: t.value,
        validation_frr: t.frr,
        validation_far: t.far,
        accept_same: outcome.accept_same,
        reject_different: outcome.reject_different,
        same_pairs: same,
        different_pairs: diff,
    };
    ctx.out
        .write("report.toml", &toml::to_string(&report).expect("report serializes"))?;
    log::info!(
        "affine: accept-same {:.3}, reject-different {:.3}, threshold {:.3}",
        outcome.accept_same,
        outcome.reject_different,
        t.value
    );
    Ok(outcome)
}
