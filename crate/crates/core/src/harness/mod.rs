//! End-to-end experiment recipes driven by a versioned [`ExperimentSpec`].
//!
//! Every random draw descends from the spec's master seed, and trained
//! models are cached by a hash of everything that determines them, so a
//! rerun of the same spec reproduces the output tree byte for byte whether
//! or not the cache is warm.

mod affine;
mod cat;
mod dynamics;
mod external;
mod model;
mod output;
mod spec;
mod stats;

use std::cell::RefCell;
use std::collections::HashMap;
use std::path::Path;

pub use affine::{snap_grid_family, AffineOutcome, DistanceEntry};
pub use cat::{cat_test_pairs, cat_training_family, CatOutcome, CurveResult};
pub use dynamics::{dynamics_test_pairs, dynamics_training_family, DynamicsOutcome, DynamicsRow, DynamicsScenario};
pub use external::{ingest_seeds, snap_diagonal_family, verify_subsample_pairs, ExternalOutcome};
pub use model::{obtain_model, train_on, ModelCache, ModelRecipe, TrainedModel};
pub use output::{OutputTree, OUTPUT_FORMAT_VERSION};
pub use spec::{
    AffineSpec, CatFamilySpec, CatSpec, ComplexitySpec, DynamicsSpec, ExperimentSpec, ExternalSpec, Scenario,
    ScenarioKind, SimulatorBlock, ThermalBlock, TrainingBlock, VerifyBlock, SPEC_FORMAT_VERSION,
};
pub use stats::{ranks, spearman};

use crate::error::{Error, Result};
use crate::measure::seeds::derive_seed;
use crate::measure::{GridSpec, ImageConfig, StateFamily};

/// Seed-derivation tags of the experiment stages.
pub mod stage {
    pub const DATA: u64 = 0x4441_5441;
    pub const TRAIN: u64 = 0x5452_4149;
    pub const TRIALS: u64 = 0x5452_4953;
    pub const TEST_DATA: u64 = 0x5445_5354;
    pub const STANDIN: u64 = 0x5354_4e44;
    pub const INGEST: u64 = 0x494e_4745;
    pub const TSNE: u64 = 0x5453_4e45;
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentOutcome {
    Cat(CatOutcome),
    Complexity(CatOutcome),
    Dynamics(DynamicsOutcome),
    Affine(AffineOutcome),
    External(ExternalOutcome),
}

/// Shared state of one experiment run.
pub(crate) struct RunContext<'a> {
    pub spec: &'a ExperimentSpec,
    pub out: &'a OutputTree,
    pub cache: Option<&'a ModelCache>,
    models: RefCell<HashMap<String, TrainedModel>>,
}

impl<'a> RunContext<'a> {
    fn new(spec: &'a ExperimentSpec, out: &'a OutputTree, cache: Option<&'a ModelCache>) -> Self {
        Self {
            spec,
            out,
            cache,
            models: RefCell::new(HashMap::new()),
        }
    }

    pub fn seed(&self, tag: u64) -> u64 {
        derive_seed(self.spec.seed, &[tag])
    }

    pub fn recipe(&self, family: StateFamily, k: usize, image: ImageConfig) -> Result<ModelRecipe> {
        recipe_for(self.spec, family, k, image)
    }

    /// Each distinct recipe is trained at most once per run.
    pub fn model(&self, recipe: &ModelRecipe, stage: &str) -> Result<TrainedModel> {
        let key = recipe.key();
        if let Some(m) = self.models.borrow().get(&key) {
            return Ok(m.clone());
        }
        let m = obtain_model(recipe, self.cache, stage)?;
        self.models.borrow_mut().insert(key, m.clone());
        Ok(m)
    }

    /// Checkpoint, training log and threshold of a model.
    pub fn write_model(&self, name: &str, model: &TrainedModel) -> Result<()> {
        self.out.write_model(&format!("model_{name}.json"), &model.params)?;
        self.out
            .write(&format!("train_log_{name}.txt"), &model.log.to_text(false))?;
        let t = &model.threshold;
        self.out.write(
            &format!("threshold_{name}.txt"),
            &format!(
                "value = {:e}\nfrr = {:e}\nfar = {:e}\ndegenerate = {}\n",
                t.value, t.frr, t.far, t.degenerate
            ),
        )?;
        Ok(())
    }
}

fn recipe_for(spec: &ExperimentSpec, family: StateFamily, k: usize, image: ImageConfig) -> Result<ModelRecipe> {
    Ok(ModelRecipe {
        family,
        k,
        image,
        data_seed: derive_seed(spec.seed, &[stage::DATA]),
        dim: spec.simulator.dim,
        layout: spec.training.layout(image.grid.side)?,
        training: spec.training.config(derive_seed(spec.seed, &[stage::TRAIN])),
    })
}

/// Recipe of the scenario's headline model: the default budget of the cat
/// study, the first listed family and largest fraction of the complexity
/// study, the first measurement scenario of the dynamics study.
pub fn default_recipe(spec: &ExperimentSpec) -> Result<ModelRecipe> {
    spec.validate()?;
    let image = |side, extent, fraction, shots| -> Result<ImageConfig> {
        Ok(ImageConfig {
            grid: GridSpec::new(side, extent)?,
            fraction,
            shots,
        })
    };
    match &spec.scenario {
        Scenario::CatVerification(c) => {
            let f = &c.family;
            let img = image(f.side, f.extent, c.default_fraction, c.default_shots)?;
            recipe_for(spec, cat_training_family(f, 2), f.k, img)
        }
        Scenario::ComplexityComparison(c) => {
            let f = &c.family;
            let fraction = c.fractions.iter().copied().fold(f64::MIN, f64::max);
            let img = image(f.side, f.extent, fraction, c.shots)?;
            recipe_for(spec, cat_training_family(f, c.components[0]), f.k, img)
        }
        Scenario::KerrDynamics(d) => {
            let img = image(d.side, d.extent, d.fractions[0], d.shots)?;
            recipe_for(spec, dynamics_training_family(d), d.k, img)
        }
        Scenario::AffineEquivalence(a) => {
            let fraction = a.present_pixels as f64 / (a.side * a.side) as f64;
            let img = image(a.side, a.extent, fraction, a.shots)?;
            recipe_for(spec, snap_grid_family(a.alpha, &a.train_thetas), a.k, img)
        }
        Scenario::ExternalIngest(e) => {
            let img = image(e.side, e.extent, e.train_fraction, e.shots)?;
            recipe_for(spec, snap_diagonal_family(e.alpha, &e.train_thetas), e.k, img)
        }
    }
}

/// Runs the experiment described by `spec`, writing into `out_dir`.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path, cache: Option<&ModelCache>) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let out = OutputTree::create(out_dir, spec)?;
    let ctx = RunContext::new(spec, &out, cache);
    log::info!("{} (seed {}) -> {}", spec.kind(), spec.seed, out_dir.display());
    Ok(match &spec.scenario {
        Scenario::CatVerification(s) => ExperimentOutcome::Cat(cat::run_cat(&ctx, s)?),
        Scenario::ComplexityComparison(s) => ExperimentOutcome::Complexity(cat::run_complexity(&ctx, s)?),
        Scenario::KerrDynamics(s) => ExperimentOutcome::Dynamics(dynamics::run_dynamics(&ctx, s)?),
        Scenario::AffineEquivalence(s) => ExperimentOutcome::Affine(affine::run_affine(&ctx, s)?),
        Scenario::ExternalIngest(s) => ExperimentOutcome::External(external::run_external(&ctx, s)?),
    })
}

fn expect(spec: &ExperimentSpec, kind: ScenarioKind) -> Result<()> {
    if spec.kind() != kind {
        return Err(Error::invalid(format!("spec describes `{}`, not `{kind}`", spec.kind())));
    }
    Ok(())
}

pub fn run_cat_experiment(spec: &ExperimentSpec, out_dir: &Path, cache: Option<&ModelCache>) -> Result<CatOutcome> {
    expect(spec, ScenarioKind::CatVerification)?;
    match run_experiment(spec, out_dir, cache)? {
        ExperimentOutcome::Cat(o) => Ok(o),
        _ => unreachable!("scenario checked"),
    }
}

pub fn run_complexity_experiment(
    spec: &ExperimentSpec,
    out_dir: &Path,
    cache: Option<&ModelCache>,
) -> Result<CatOutcome> {
    expect(spec, ScenarioKind::ComplexityComparison)?;
    match run_experiment(spec, out_dir, cache)? {
        ExperimentOutcome::Complexity(o) => Ok(o),
        _ => unreachable!("scenario checked"),
    }
}

pub fn run_dynamics_experiment(
    spec: &ExperimentSpec,
    out_dir: &Path,
    cache: Option<&ModelCache>,
) -> Result<DynamicsOutcome> {
    expect(spec, ScenarioKind::KerrDynamics)?;
    match run_experiment(spec, out_dir, cache)? {
        ExperimentOutcome::Dynamics(o) => Ok(o),
        _ => unreachable!("scenario checked"),
    }
}

pub fn run_affine_experiment(
    spec: &ExperimentSpec,
    out_dir: &Path,
    cache: Option<&ModelCache>,
) -> Result<AffineOutcome> {
    expect(spec, ScenarioKind::AffineEquivalence)?;
    match run_experiment(spec, out_dir, cache)? {
        ExperimentOutcome::Affine(o) => Ok(o),
        _ => unreachable!("scenario checked"),
    }
}

pub fn run_external_ingest(
    spec: &ExperimentSpec,
    out_dir: &Path,
    cache: Option<&ModelCache>,
) -> Result<ExternalOutcome> {
    expect(spec, ScenarioKind::ExternalIngest)?;
    match run_experiment(spec, out_dir, cache)? {
        ExperimentOutcome::External(o) => Ok(o),
        _ => unreachable!("scenario checked"),
    }
}
