//! Cat-state verification and the two- versus four-component comparison.

use std::fmt::Write as _;

use serde::Serialize;

use super::{stage, RunContext};
use crate::error::{Error, Result};
use crate::fock::{apply_loss, calibrate_loss_for_fidelity, fidelity};
use crate::harness::spec::{CatFamilySpec, CatSpec, ComplexitySpec};
use crate::measure::{Channel, DataImage, GridSpec, ImageConfig, StateDescriptor, StateFamily};
use crate::verify::{
    bin_by_fidelity, curve_to_text, pair_rejections, project_2d, CurvePoint, PairOutcome, Projection, TestPair,
    Threshold, TsneConfig,
};

/// One rejection-rate curve and the model behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveResult {
    pub name: String,
    pub model: String,
    pub components: usize,
    pub fraction: f64,
    pub shots: u32,
    pub threshold: Threshold,
    pub outcomes: Vec<PairOutcome>,
    pub points: Vec<CurvePoint>,
}

impl CurveResult {
    /// Trial-weighted rejection rate over pairs with fidelity in `[lo, hi]`.
    pub fn mean_rate(&self, lo: f64, hi: f64) -> Option<f64> {
        let (r, n) = self
            .outcomes
            .iter()
            .filter(|o| o.fidelity >= lo && o.fidelity <= hi)
            .fold((0, 0), |(r, n), o| (r + o.rejected, n + o.trials));
        (n > 0).then(|| r as f64 / n as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatOutcome {
    pub curves: Vec<CurveResult>,
    pub projection: Option<Projection>,
}

impl CatOutcome {
    pub fn curve(&self, name: &str) -> Option<&CurveResult> {
        self.curves.iter().find(|c| c.name == name)
    }
}

/// Ideal cats plus their thermally degraded versions.
pub fn cat_training_family(f: &CatFamilySpec, components: usize) -> StateFamily {
    let ideal = f.train_alphas.iter().map(|&a| StateDescriptor::cat(a, components));
    let noisy = f.train_alphas.iter().map(|&a| {
        StateDescriptor::cat(a, components).then(Channel::Thermal {
            nbar: f.thermal.nbar,
            tau: f.thermal.tau,
        })
    });
    StateFamily::new(ideal.chain(noisy).collect())
}

/// Loss-degraded test pairs. The trusted state ρ is the ideal cat after the
/// loss that brings its fidelity down to `reference_fidelity`; each
/// candidate σ is the ideal cat after the loss giving F(ρ, σ) = target.
pub fn cat_test_pairs(f: &CatFamilySpec, components: usize, dim: usize) -> Result<Vec<TestPair>> {
    let mut pairs = Vec::new();
    for &alpha in &f.test_alphas {
        let ideal = StateDescriptor::cat(alpha, components).realize(dim)?;
        let tau_ref = calibrate_loss_for_fidelity(&ideal, &ideal, f.reference_fidelity)?;
        let rho = apply_loss(&ideal, tau_ref)?;
        for &target in &f.target_fidelities {
            let sigma = if target == 1.0 {
                rho.clone()
            } else {
                let tau = calibrate_loss_for_fidelity(&rho, &ideal, target)?;
                apply_loss(&ideal, tau)?
            };
            let fid = if target == 1.0 { 1.0 } else { fidelity(&rho, &sigma)? };
            pairs.push(TestPair {
                label: format!("cat{components}({alpha})|F={target}"),
                reference: rho.clone(),
                candidate: sigma,
                fidelity: fid,
            });
        }
    }
    Ok(pairs)
}

fn model_name(components: usize, fraction: f64, shots: u32) -> String {
    format!("cat{components}_f{fraction:.3}_s{shots}")
}

fn pairs_to_text(outcomes: &[PairOutcome]) -> String {
    let mut s = String::from("label, fidelity, rejected, trials\n");
    for o in outcomes {
        let _ = writeln!(s, "{}, {:.10}, {}, {}", o.label, o.fidelity, o.rejected, o.trials);
    }
    s
}

/// Trains (or loads) the model for one measurement budget and measures the
/// rejection rate of every test pair with it.
fn run_curve(
    ctx: &RunContext,
    family: &CatFamilySpec,
    components: usize,
    fraction: f64,
    shots: u32,
    pairs: &[TestPair],
    name: &str,
) -> Result<CurveResult> {
    let image = ImageConfig {
        grid: GridSpec::new(family.side, family.extent)?,
        fraction,
        shots,
    };
    let model_name = model_name(components, fraction, shots);
    let recipe = ctx.recipe(cat_training_family(family, components), family.k, image)?;
    let model = ctx.model(&recipe, &model_name)?;
    ctx.write_model(&model_name, &model)?;
    let seed = ctx.seed(stage::TRIALS);
    let outcomes = pair_rejections(&model.params, &model.threshold, pairs, ctx.spec.verify.trials, &image, seed)
        .map_err(|e| e.in_stage(format!("{name}/verify"), seed))?;
    let points = bin_by_fidelity(&outcomes);
    ctx.out.write(&format!("curve_{name}.txt"), &curve_to_text(&points))?;
    ctx.out.write(&format!("pairs_{name}.txt"), &pairs_to_text(&outcomes))?;
    log::info!("{name}: {} pairs x {} trials done", pairs.len(), ctx.spec.verify.trials);
    Ok(CurveResult {
        name: name.to_string(),
        model: model_name,
        components,
        fraction,
        shots,
        threshold: model.threshold,
        outcomes,
        points,
    })
}

#[derive(Serialize)]
struct CurveSummary<'a> {
    name: &'a str,
    model: &'a str,
    components: usize,
    fraction: f64,
    shots: u32,
    threshold: f64,
    validation_frr: f64,
    validation_far: f64,
}

#[derive(Serialize)]
struct CurveReport<'a> {
    scenario: &'a str,
    curve: Vec<CurveSummary<'a>>,
}

fn write_report(ctx: &RunContext, curves: &[CurveResult]) -> Result<()> {
    let report = CurveReport {
        scenario: ctx.spec.kind().name(),
        curve: curves
            .iter()
            .map(|c| CurveSummary {
                name: &c.name,
                model: &c.model,
                components: c.components,
                fraction: c.fraction,
                shots: c.shots,
                threshold: c.threshold.value,
                validation_frr: c.threshold.frr,
                validation_far: c.threshold.far,
            })
            .collect(),
    };
    ctx.out
        .write("report.toml", &toml::to_string(&report).expect("report serializes"))
        .map(|_| ())
}

/// t-SNE of the default model's training images of ideal cats.
fn cat_projection(ctx: &RunContext, spec: &CatSpec) -> Result<Option<Projection>> {
    if spec.tsne_alphas.is_empty() {
        return Ok(None);
    }
    let f = &spec.family;
    let image = ImageConfig {
        grid: GridSpec::new(f.side, f.extent)?,
        fraction: spec.default_fraction,
        shots: spec.default_shots,
    };
    let recipe = ctx.recipe(cat_training_family(f, 2), f.k, image)?;
    let model = ctx.model(&recipe, "tsne")?;
    let dataset = recipe
        .dataset()
        .map_err(|e| e.in_stage("tsne/data", recipe.data_seed))?;
    let mut images: Vec<&DataImage> = Vec::new();
    let mut labels = Vec::new();
    for &alpha in &spec.tsne_alphas {
        let want = StateDescriptor::cat(alpha, 2);
        let s = dataset
            .states
            .iter()
            .position(|d| *d == want)
            .ok_or_else(|| Error::invalid(format!("t-SNE amplitude {alpha} is not a training state")))?;
        for img in &dataset.train_groups()[s] {
            images.push(img);
            labels.push(format!("{alpha}"));
        }
    }
    let seed = ctx.seed(stage::TSNE);
    let reps = model.params.embed(&images)?;
    let config = TsneConfig {
        perplexity: ctx.spec.verify.tsne_perplexity,
        iterations: ctx.spec.verify.tsne_iterations,
        seed,
        ..TsneConfig::default()
    };
    let projection = project_2d(&reps, &config).map_err(|e| e.in_stage("tsne", seed))?;
    ctx.out.write("tsne.txt", &projection.to_text(&labels))?;
    Ok(Some(projection))
}

pub(super) fn run_cat(ctx: &RunContext, spec: &CatSpec) -> Result<CatOutcome> {
    let f = &spec.family;
    let pairs = cat_test_pairs(f, 2, ctx.spec.simulator.dim).map_err(|e| e.in_stage("test-pairs", ctx.spec.seed))?;
    let mut curves = Vec::new();
    for &fraction in &spec.fractions {
        let name = format!("fraction_{fraction:.3}");
        curves.push(run_curve(ctx, f, 2, fraction, spec.default_shots, &pairs, &name)?);
    }
    for &shots in &spec.shot_counts {
        let name = format!("shots_{shots}");
        curves.push(run_curve(ctx, f, 2, spec.default_fraction, shots, &pairs, &name)?);
    }
    let projection = cat_projection(ctx, spec)?;
    write_report(ctx, &curves)?;
    Ok(CatOutcome { curves, projection })
}

pub(super) fn run_complexity(ctx: &RunContext, spec: &ComplexitySpec) -> Result<CatOutcome> {
    let mut curves = Vec::new();
    for &c in &spec.components {
        let pairs = cat_test_pairs(&spec.family, c, ctx.spec.simulator.dim)
            .map_err(|e| e.in_stage(format!("cat{c}/test-pairs"), ctx.spec.seed))?;
        for &fraction in &spec.fractions {
            let name = format!("cat{c}_fraction_{fraction:.3}");
            curves.push(run_curve(ctx, &spec.family, c, fraction, spec.shots, &pairs, &name)?);
        }
    }
    write_report(ctx, &curves)?;
    Ok(CatOutcome {
        curves,
        projection: None,
    })
}
