//! Ideal versus lossy Kerr evolution, compared snapshot by snapshot.

use std::fmt::Write as _;

use serde::Serialize;

use super::{stage, RunContext};
use crate::error::Result;
use crate::fock::{fidelity, kerr_evolve, KerrEvolutionSpec, DEFAULT_STEP};
use crate::harness::spec::DynamicsSpec;
use crate::measure::{Channel, GridSpec, ImageConfig, StateDescriptor, StateFamily};
use crate::verify::{pair_rejections, PairOutcome, TestPair, Threshold};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DynamicsRow {
    pub time: f64,
    pub rejection_rate: f64,
    pub n_trials: usize,
    /// Mean fidelity between the ideal and lossy states at this time.
    pub mean_fidelity: f64,
}

/// One measurement scenario (pixel budget) with its own model.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsScenario {
    pub fraction: f64,
    pub present: usize,
    pub threshold: Threshold,
    pub rows: Vec<DynamicsRow>,
    pub outcomes: Vec<PairOutcome>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsOutcome {
    pub scenarios: Vec<DynamicsScenario>,
}

/// Snapshots of the noiseless evolution of each training amplitude.
pub fn dynamics_training_family(spec: &DynamicsSpec) -> StateFamily {
    let mut states = Vec::new();
    for &a in &spec.train_alphas {
        for &t in &spec.train_times {
            states.push(StateDescriptor::coherent(a).then(Channel::Kerr { t, eta: 0.0 }));
        }
    }
    StateFamily::new(states)
}

/// Pairs (ideal, lossy) at every test time, amplitude-major.
pub fn dynamics_test_pairs(spec: &DynamicsSpec, dim: usize) -> Result<Vec<TestPair>> {
    let mut pairs = Vec::new();
    for &a in &spec.test_alphas {
        let initial = StateDescriptor::coherent(a).realize(dim)?;
        let evolve = |eta: f64| {
            kerr_evolve(
                &initial,
                &KerrEvolutionSpec {
                    loss_rate: eta,
                    snapshot_times: spec.test_times.clone(),
                    integrator_step: DEFAULT_STEP,
                },
            )
        };
        let ideal = evolve(0.0)?;
        let lossy = evolve(spec.loss_rate)?;
        for ((t, i), l) in spec.test_times.iter().zip(ideal).zip(lossy) {
            let f = fidelity(&i, &l)?;
            pairs.push(TestPair {
                label: format!("coherent({a})|t={t}"),
                reference: i,
                candidate: l,
                fidelity: f,
            });
        }
    }
    Ok(pairs)
}

fn rows(spec: &DynamicsSpec, outcomes: &[PairOutcome]) -> Vec<DynamicsRow> {
    let n_t = spec.test_times.len();
    spec.test_times
        .iter()
        .enumerate()
        .map(|(i, &time)| {
            let at: Vec<&PairOutcome> = outcomes.iter().skip(i).step_by(n_t).collect();
            let rejected: usize = at.iter().map(|o| o.rejected).sum();
            let n_trials: usize = at.iter().map(|o| o.trials).sum();
            DynamicsRow {
                time,
                rejection_rate: rejected as f64 / n_trials as f64,
                n_trials,
                mean_fidelity: at.iter().map(|o| o.fidelity).sum::<f64>() / at.len() as f64,
            }
        })
        .collect()
}

#[derive(Serialize)]
struct ScenarioSummary {
    fraction: f64,
    present_pixels: usize,
    threshold: f64,
    validation_frr: f64,
    validation_far: f64,
}

#[derive(Serialize)]
struct Report {
    scenario: &'static str,
    measurement: Vec<ScenarioSummary>,
}

pub(super) fn run_dynamics(ctx: &RunContext, spec: &DynamicsSpec) -> Result<DynamicsOutcome> {
    let grid = GridSpec::new(spec.side, spec.extent)?;
    let pairs =
        dynamics_test_pairs(spec, ctx.spec.simulator.dim).map_err(|e| e.in_stage("test-pairs", ctx.spec.seed))?;
    let family = dynamics_training_family(spec);
    let mut scenarios = Vec::new();
    for &fraction in &spec.fractions {
        let present = grid.present_count(fraction)?;
        let name = format!("points_{present}");
        let image = ImageConfig {
            grid,
            fraction,
            shots: spec.shots,
        };
        let recipe = ctx.recipe(family.clone(), spec.k, image)?;
        let model = ctx.model(&recipe, &name)?;
        ctx.write_model(&name, &model)?;
        let seed = ctx.seed(stage::TRIALS);
        let outcomes = pair_rejections(&model.params, &model.threshold, &pairs, ctx.spec.verify.trials, &image, seed)
            .map_err(|e| e.in_stage(format!("{name}/verify"), seed))?;
        let rows = rows(spec, &outcomes);
        let mut text = String::from("time, rejection_rate, n_trials, mean_fidelity\n");
        for r in &rows {
            let _ = writeln!(
                text,
                "{:.2}, {:.6}, {}, {:.10}",
                r.time, r.rejection_rate, r.n_trials, r.mean_fidelity
            );
        }
        ctx.out.write(&format!("dynamics_{name}.txt"), &text)?;
        let mut pairs_text = String::from("label, fidelity, rejected, trials\n");
        for o in &outcomes {
            let _ = writeln!(pairs_text, "{}, {:.10}, {}, {}", o.label, o.fidelity, o.rejected, o.trials);
        }
        ctx.out.write(&format!("pairs_{name}.txt"), &pairs_text)?;
        log::info!("{name}: {} time rows done", rows.len());
        scenarios.push(DynamicsScenario {
            fraction,
            present,
            threshold: model.threshold,
            rows,
            outcomes,
        });
    }
    let report = Report {
        scenario: "kerr-dynamics",
        measurement: scenarios
            .iter()
            .map(|s| ScenarioSummary {
                fraction: s.fraction,
                present_pixels: s.present,
                threshold: s.threshold.value,
                validation_frr: s.threshold.frr,
                validation_far: s.threshold.far,
            })
            .collect(),
    };
    ctx.out
        .write("report.toml", &toml::to_string(&report).expect("report serializes"))?;
    Ok(DynamicsOutcome { scenarios })
}
