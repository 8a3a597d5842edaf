//! Experiment specifications: versioned TOML with one block per stage.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embednet::{ConvSpec, NetworkLayout, Optimizer, StepDecay, TrainConfig};
use crate::error::{Error, Result};
use crate::fock::DEFAULT_DIM;
use crate::measure::{default_extent, GridSpec};

pub const SPEC_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    CatVerification,
    ComplexityComparison,
    KerrDynamics,
    AffineEquivalence,
    ExternalIngest,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::CatVerification,
        ScenarioKind::ComplexityComparison,
        ScenarioKind::KerrDynamics,
        ScenarioKind::AffineEquivalence,
        ScenarioKind::ExternalIngest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::CatVerification => "cat-verification",
            ScenarioKind::ComplexityComparison => "complexity-comparison",
            ScenarioKind::KerrDynamics => "kerr-dynamics",
            ScenarioKind::AffineEquivalence => "affine-equivalence",
            ScenarioKind::ExternalIngest => "external-ingest",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scenario `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatorBlock {
    /// Fock truncation.
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingBlock {
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub optimizer: Optimizer,
    pub dropout: f64,
    pub embedding_dim: usize,
    /// Convolution strides; the side-dependent default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strides: Option<Vec<usize>>,
}

impl Default for TrainingBlock {
    fn default() -> Self {
        Self {
            max_epochs: 500,
            learning_rate: 0.01,
            decay_factor: 0.5,
            decay_every: 100,
            optimizer: Optimizer::ADAM,
            dropout: 0.25,
            embedding_dim: 32,
            strides: None,
        }
    }
}

impl TrainingBlock {
    pub fn layout(&self, side: usize) -> Result<NetworkLayout> {
        let mut layout = NetworkLayout::default_for(side);
        layout.dropout = self.dropout;
        layout.embedding_dim = self.embedding_dim;
        if let Some(strides) = &self.strides {
            if strides.len() != layout.convs.len() {
                return Err(Error::invalid(format!(
                    "{} strides given for {} convolutions",
                    strides.len(),
                    layout.convs.len()
                )));
            }
            for (c, &s) in layout.convs.iter_mut().zip(strides) {
                *c = ConvSpec { stride: s, ..*c };
            }
        }
        layout.validate()?;
        Ok(layout)
    }

    pub fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            max_epochs: self.max_epochs,
            learning_rate: self.learning_rate,
            decay: StepDecay {
                factor: self.decay_factor,
                every: self.decay_every,
            },
            mean_over_anchors: false,
            optimizer: self.optimizer,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    /// Image pairs per test pair.
    pub trials: usize,
    pub tsne_perplexity: f64,
    pub tsne_iterations: usize,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        Self {
            trials: 100,
            tsne_perplexity: 15.0,
            tsne_iterations: 500,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalBlock {
    pub nbar: f64,
    pub tau: f64,
}

/// Training and test states shared by the cat-based scenarios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatFamilySpec {
    pub side: usize,
    pub extent: f64,
    /// Images per state.
    pub k: usize,
    pub train_alphas: Vec<f64>,
    /// Each ideal cat is also trained in this thermally degraded version.
    pub thermal: ThermalBlock,
    pub test_alphas: Vec<f64>,
    /// Fidelity of the trusted state with its ideal counterpart.
    pub reference_fidelity: f64,
    /// Fidelities of the untrusted states with the trusted one.
    pub target_fidelities: Vec<f64>,
}

impl Default for CatFamilySpec {
    fn default() -> Self {
        Self {
            side: 32,
            extent: default_extent(32),
            k: 20,
            train_alphas: (0..=10).map(|i| round6(1.0 + 0.1 * i as f64)).collect(),
            thermal: ThermalBlock { nbar: 0.1, tau: 0.1 },
            test_alphas: vec![1.0, 1.2, 1.4, 1.6, 1.8],
            reference_fidelity: 0.99,
            target_fidelities: vec![0.85, 0.87, 0.89, 0.91, 0.93, 0.96, 0.98, 1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatSpec {
    pub family: CatFamilySpec,
    pub default_fraction: f64,
    pub default_shots: u32,
    /// Fraction sweep, at `default_shots`.
    pub fractions: Vec<f64>,
    /// Shot sweep, at `default_fraction`.
    pub shot_counts: Vec<u32>,
    /// Ideal-cat amplitudes shown in the t-SNE projection.
    pub tsne_alphas: Vec<f64>,
}

impl Default for CatSpec {
    fn default() -> Self {
        Self {
            family: CatFamilySpec::default(),
            default_fraction: 0.75,
            default_shots: 300,
            fractions: vec![0.5, 0.625, 0.75],
            shot_counts: vec![50, 100, 300],
            tsne_alphas: (0..10).map(|i| round6(1.0 + 0.1 * i as f64)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexitySpec {
    pub family: CatFamilySpec,
    /// Number of coherent components per cat.
    pub components: Vec<usize>,
    pub fractions: Vec<f64>,
    pub shots: u32,
}

impl Default for ComplexitySpec {
    fn default() -> Self {
        Self {
            // a four-component cat at α = 1 is nearly vacuum; loss cannot take
            // it below F ≈ 0.95, so the shared amplitudes start at 1.2
            family: CatFamilySpec {
                test_alphas: vec![1.2, 1.4, 1.6, 1.8],
                ..CatFamilySpec::default()
            },
            components: vec![2, 4],
            fractions: vec![0.5, 0.625, 0.75],
            shots: 300,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    pub side: usize,
    pub extent: f64,
    pub k: usize,
    pub train_alphas: Vec<f64>,
    /// Snapshots of the noiseless evolution used as training states.
    pub train_times: Vec<f64>,
    pub test_alphas: Vec<f64>,
    pub test_times: Vec<f64>,
    pub loss_rate: f64,
    pub shots: u32,
    /// One measurement scenario (and model) per fraction.
    pub fractions: Vec<f64>,
}

impl Default for DynamicsSpec {
    fn default() -> Self {
        Self {
            side: 48,
            extent: default_extent(48),
            k: 10,
            train_alphas: (0..=10).map(|i| round6(1.0 + 0.1 * i as f64)).collect(),
            // t = 1 is a full revival of t = 0, so it would duplicate a label
            train_times: (0..10).map(|i| round6(0.1 * i as f64)).collect(),
            test_alphas: vec![1.0, 1.25, 1.5, 1.75, 2.0],
            test_times: (0..=10).map(|i| round6(0.1 * i as f64)).collect(),
            loss_rate: 0.5,
            shots: 500,
            fractions: vec![1.0, 0.75],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSpec {
    pub side: usize,
    pub extent: f64,
    /// Coherent amplitude before the SNAP gate.
    pub alpha: f64,
    pub k: usize,
    /// (θ₀, θ₁) grids; every combination is one label.
    pub train_thetas: Vec<f64>,
    pub test_thetas: Vec<f64>,
    pub present_pixels: usize,
    pub shots: u32,
    pub test_images_per_state: usize,
    /// Test states shown in the distance table.
    pub table_states: usize,
}

impl Default for AffineSpec {
    fn default() -> Self {
        use std::f64::consts::PI;
        Self {
            side: 81,
            extent: default_extent(81),
            alpha: 1.0,
            k: 20,
            train_thetas: (2..=6).map(|i| i as f64 * PI / 4.0).collect(),
            test_thetas: [5.0, 7.0, 9.0, 11.0].iter().map(|i| i * PI / 8.0).collect(),
            present_pixels: 4900,
            shots: 500,
            test_images_per_state: 10,
            table_states: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSpec {
    pub side: usize,
    pub extent: f64,
    pub alpha: f64,
    pub k: usize,
    /// Training labels: θ₀ = θ₁ = θ for each entry.
    pub train_thetas: Vec<f64>,
    pub train_fraction: f64,
    pub shots: u32,
    /// Measured grid; a simulated stand-in is written when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_file: Option<PathBuf>,
    /// θ₀ = θ₁ of the simulated stand-in.
    pub standin_theta: f64,
    pub subsample_fraction: f64,
    pub trials: usize,
}

impl Default for ExternalSpec {
    fn default() -> Self {
        use std::f64::consts::PI;
        Self {
            side: 81,
            extent: default_extent(81),
            alpha: 1.0,
            k: 20,
            train_thetas: (4..=12).map(|i| i as f64 * PI / 8.0).collect(),
            train_fraction: 0.05,
            shots: 500,
            grid_file: None,
            standin_theta: PI,
            subsample_fraction: 0.05,
            trials: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    CatVerification(CatSpec),
    ComplexityComparison(ComplexitySpec),
    KerrDynamics(DynamicsSpec),
    AffineEquivalence(AffineSpec),
    ExternalIngest(ExternalSpec),
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Scenario::CatVerification(_) => ScenarioKind::CatVerification,
            Scenario::ComplexityComparison(_) => ScenarioKind::ComplexityComparison,
            Scenario::KerrDynamics(_) => ScenarioKind::KerrDynamics,
            Scenario::AffineEquivalence(_) => ScenarioKind::AffineEquivalence,
            Scenario::ExternalIngest(_) => ScenarioKind::ExternalIngest,
        }
    }

    pub fn default_for(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::CatVerification => Scenario::CatVerification(CatSpec::default()),
            ScenarioKind::ComplexityComparison => Scenario::ComplexityComparison(ComplexitySpec::default()),
            ScenarioKind::KerrDynamics => Scenario::KerrDynamics(DynamicsSpec::default()),
            ScenarioKind::AffineEquivalence => Scenario::AffineEquivalence(AffineSpec::default()),
            ScenarioKind::ExternalIngest => Scenario::ExternalIngest(ExternalSpec::default()),
        }
    }
}

/// A complete, self-contained experiment description. Outputs are a pure
/// function of this value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub format_version: u32,
    pub seed: u64,
    pub simulator: SimulatorBlock,
    pub training: TrainingBlock,
    pub verify: VerifyBlock,
    pub scenario: Scenario,
}

impl ExperimentSpec {
    pub fn default_for(kind: ScenarioKind, seed: u64) -> Self {
        let mut training = TrainingBlock::default();
        if kind == ScenarioKind::KerrDynamics {
            training.strides = Some(vec![2, 2, 2]);
        }
        Self {
            format_version: SPEC_FORMAT_VERSION,
            seed,
            simulator: SimulatorBlock { dim: DEFAULT_DIM },
            training,
            verify: VerifyBlock::default(),
            scenario: Scenario::default_for(kind),
        }
    }

    pub fn kind(&self) -> ScenarioKind {
        self.scenario.kind()
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != SPEC_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "spec format {} is not supported (expected {SPEC_FORMAT_VERSION})",
                self.format_version
            )));
        }
        // TOML integers are signed 64-bit
        if self.seed > i64::MAX as u64 {
            return Err(Error::invalid(format!("seed {} exceeds 2^63 - 1", self.seed)));
        }
        if self.simulator.dim < 2 {
            return Err(Error::invalid("simulator.dim must be >= 2"));
        }
        if self.verify.trials == 0 {
            return Err(Error::invalid("verify.trials must be >= 1"));
        }
        self.training.config(self.seed).validate()?;
        let nonempty = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::invalid(format!("{name} must not be empty")))
            } else {
                Ok(())
            }
        };
        let grid = |side: usize, extent: f64| -> Result<()> {
            GridSpec::new(side, extent)?;
            self.training.layout(side).map(|_| ())
        };
        match &self.scenario {
            Scenario::CatVerification(c) => {
                validate_family(&c.family)?;
                grid(c.family.side, c.family.extent)?;
                nonempty("fractions", c.fractions.len())?;
                nonempty("shot_counts", c.shot_counts.len())?;
            }
            Scenario::ComplexityComparison(c) => {
                validate_family(&c.family)?;
                grid(c.family.side, c.family.extent)?;
                nonempty("components", c.components.len())?;
                nonempty("fractions", c.fractions.len())?;
            }
            Scenario::KerrDynamics(d) => {
                grid(d.side, d.extent)?;
                nonempty("train_alphas", d.train_alphas.len())?;
                nonempty("train_times", d.train_times.len())?;
                nonempty("test_alphas", d.test_alphas.len())?;
                nonempty("test_times", d.test_times.len())?;
                nonempty("fractions", d.fractions.len())?;
                if d.test_times.iter().any(|t| *t < 0.0) {
                    return Err(Error::invalid("test_times must be >= 0"));
                }
            }
            Scenario::AffineEquivalence(a) => {
                grid(a.side, a.extent)?;
                if a.present_pixels == 0 || a.present_pixels > a.side * a.side {
                    return Err(Error::invalid(format!(
                        "present_pixels {} outside [1, {}]",
                        a.present_pixels,
                        a.side * a.side
                    )));
                }
                if a.test_images_per_state < 2 {
                    return Err(Error::invalid("test_images_per_state must be >= 2"));
                }
                if a.test_thetas.len() < 2 {
                    return Err(Error::invalid("test_thetas needs at least 2 values"));
                }
            }
            Scenario::ExternalIngest(e) => {
                grid(e.side, e.extent)?;
                if e.trials == 0 {
                    return Err(Error::invalid("trials must be >= 1"));
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

fn validate_family(f: &CatFamilySpec) -> Result<()> {
    if f.train_alphas.is_empty() || f.test_alphas.is_empty() || f.target_fidelities.is_empty() {
        return Err(Error::invalid("cat family needs training amplitudes, test amplitudes and target fidelities"));
    }
    if !(f.reference_fidelity > 0.0 && f.reference_fidelity <= 1.0) {
        return Err(Error::invalid(format!("reference_fidelity {} outside (0, 1]", f.reference_fidelity)));
    }
    if let Some(t) = f.target_fidelities.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(Error::invalid(format!("target fidelity {t} outside (0, 1]")));
    }
    Ok(())
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}
