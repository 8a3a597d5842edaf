//! Verification of subsampled external grids against each other.

use std::path::PathBuf;

use serde::Serialize;

use super::{stage, RunContext};
use crate::error::Result;
use crate::harness::spec::ExternalSpec;
use crate::measure::seeds::derive_seed;
use crate::measure::{ingest_external_grid, write_external_grid, GridSpec, ImageConfig, StateDescriptor, StateFamily, WignerGrid};
use crate::verify::{verify_pair, Threshold, VerificationReport};

#[derive(Clone, Debug, PartialEq)]
pub struct ExternalOutcome {
    pub threshold: Threshold,
    pub grid_file: PathBuf,
    pub reports: Vec<VerificationReport>,
    pub acceptance_rate: f64,
}

/// SNAP states with θ₀ = θ₁ = θ for each listed θ.
pub fn snap_diagonal_family(alpha: f64, thetas: &[f64]) -> StateFamily {
    StateFamily::new(
        thetas
            .iter()
            .map(|&t| StateDescriptor::snap(alpha, vec![t, t]))
            .collect(),
    )
}

/// Seeds of the two subsamples in one trial.
pub fn ingest_seeds(seed: u64, trial: usize) -> (u64, u64) {
    (
        derive_seed(seed, &[stage::INGEST, trial as u64, 0]),
        derive_seed(seed, &[stage::INGEST, trial as u64, 1]),
    )
}

/// Verifies `trials` pairs of independent subsamples of one grid file.
pub fn verify_subsample_pairs(
    params: &crate::embednet::NetworkParams,
    threshold: &Threshold,
    grid_file: &std::path::Path,
    fraction: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<VerificationReport>> {
    (0..trials)
        .map(|t| {
            let (sa, sb) = ingest_seeds(seed, t);
            let a = ingest_external_grid(grid_file, fraction, sa)?;
            let b = ingest_external_grid(grid_file, fraction, sb)?;
            verify_pair(params, &a, &b, threshold)
        })
        .collect()
}

#[derive(Serialize)]
struct Report {
    scenario: &'static str,
    grid_file: String,
    threshold: f64,
    validation_frr: f64,
    validation_far: f64,
    trials: usize,
    accepted: usize,
    acceptance_rate: f64,
}

pub(super) fn run_external(ctx: &RunContext, spec: &ExternalSpec) -> Result<ExternalOutcome> {
    let grid = GridSpec::new(spec.side, spec.extent)?;
    let image = ImageConfig {
        grid,
        fraction: spec.train_fraction,
        shots: spec.shots,
    };
    let recipe = ctx.recipe(snap_diagonal_family(spec.alpha, &spec.train_thetas), spec.k, image)?;
    let model = ctx.model(&recipe, "snap")?;
    ctx.write_model("snap", &model)?;

    let grid_file = match &spec.grid_file {
        Some(path) => path.clone(),
        None => {
            // finite-shot measurement of every pixel of the stand-in state
            let seed = ctx.seed(stage::STANDIN);
            let desc = StateDescriptor::snap(spec.alpha, vec![spec.standin_theta, spec.standin_theta]);
            let rho = desc.realize(ctx.spec.simulator.dim).map_err(|e| e.in_stage("standin", seed))?;
            let full = WignerGrid::new(&rho, &grid, desc.to_string())
                .sample(1.0, spec.shots, seed)
                .map_err(|e| e.in_stage("standin", seed))?;
            ctx.out
                .write("standin_grid.txt", &write_external_grid(&grid, &full.estimates))?
        }
    };
    let seed = ctx.seed(stage::INGEST);
    let reports = verify_subsample_pairs(
        &model.params,
        &model.threshold,
        &grid_file,
        spec.subsample_fraction,
        spec.trials,
        seed,
    )
    .map_err(|e| e.in_stage("ingest", seed))?;
    let accepted = reports.iter().filter(|r| r.accepted()).count();
    let acceptance_rate = accepted as f64 / reports.len() as f64;

    let mut text = String::from("distance, threshold, verdict, state_a, seed_a, state_b, seed_b\n");
    for r in &reports {
        text.push_str(&r.to_record());
        text.push('\n');
    }
    ctx.out.write("verification.txt", &text)?;
    let report = Report {
        scenario: "external-ingest",
        grid_file: grid_file
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        threshold: model.threshold.value,
        validation_frr: model.threshold.frr,
        validation_far: model.threshold.far,
        trials: reports.len(),
        accepted,
        acceptance_rate,
    };
    ctx.out
        .write("report.toml", &toml::to_string(&report).expect("report serializes"))?;
    log::info!("external: acceptance {acceptance_rate:.3} over {} trials", reports.len());
    Ok(ExternalOutcome {
        threshold: model.threshold,
        grid_file,
        reports,
        acceptance_rate,
    })
}
