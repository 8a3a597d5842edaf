use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cvverify::embednet::{train, NetworkLayout, NetworkParams, Optimizer, StepDecay, TrainConfig};
use cvverify::harness::{default_recipe, run_experiment, verify_subsample_pairs, ExperimentSpec, ModelCache, ScenarioKind};
use cvverify::measure::{DataImage, LabeledDataset};
use cvverify::verify::{calibrate_threshold, project_2d, verify_pair, Threshold, TsneConfig};
use cvverify::{Error, Result};

/// Cross-platform verification of continuous-variable states from
/// finite-shot Wigner data.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Adam,
    Gd,
}

#[derive(Subcommand)]
enum Command {
    /// Print the default spec of a scenario as TOML.
    DefaultSpec {
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulate the training dataset of a spec's headline model.
    GenData {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long)]
        shots: Option<u32>,
        /// Output directory (manifest.json plus images).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an embedding network on a saved dataset.
    Train {
        /// Dataset manifest.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        #[arg(long, default_value_t = 0.01)]
        learning_rate: f64,
        #[arg(long, value_enum, default_value = "adam")]
        optimizer: OptimizerArg,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch loss log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Equal-error-rate threshold on a dataset's validation split.
    Calibrate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two data images.
    Verify {
        #[arg(long)]
        model: PathBuf,
        /// Threshold file from `calibrate`, or a number.
        #[arg(long)]
        threshold: String,
        image_a: PathBuf,
        image_b: PathBuf,
    },
    /// t-SNE projection of a dataset's representations.
    Project {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 15.0)]
        perplexity: f64,
        #[arg(long, default_value_t = 500)]
        iterations: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one of the experiment scenarios end to end.
    Experiment {
        scenario: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Spec file; the scenario's defaults when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Directory of trained models reused across runs.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Verify pairs of random subsamples of an external grid.
    Ingest {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        threshold: String,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        fraction: f64,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
}

fn load_threshold(arg: &str) -> Result<Threshold> {
    if let Ok(v) = arg.parse::<f64>() {
        return Threshold::fixed(v);
    }
    let path = Path::new(arg);
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(arg, e.to_string()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::DefaultSpec { scenario, seed } => {
            print!("{}", ExperimentSpec::default_for(scenario.parse()?, seed).to_toml());
        }
        Command::GenData {
            spec,
            seed,
            fraction,
            shots,
            out,
        } => {
            let mut spec = ExperimentSpec::load(&spec)?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            let mut recipe = default_recipe(&spec)?;
            recipe.image.fraction = fraction.unwrap_or(recipe.image.fraction);
            recipe.image.shots = shots.unwrap_or(recipe.image.shots);
            let manifest = recipe
                .dataset()
                .map_err(|e| e.in_stage("gen-data", recipe.data_seed))?
                .save(&out)?;
            println!("{}", manifest.display());
        }
        Command::Train {
            data,
            seed,
            epochs,
            learning_rate,
            optimizer,
            out,
            log,
        } => {
            let dataset = LabeledDataset::load(&data)?;
            let side = dataset
                .image_side()
                .ok_or_else(|| Error::invalid("dataset has no images"))?;
            let config = TrainConfig {
                max_epochs: epochs,
                learning_rate,
                decay: StepDecay { factor: 0.5, every: 100 },
                mean_over_anchors: false,
                optimizer: match optimizer {
                    OptimizerArg::Adam => Optimizer::ADAM,
                    OptimizerArg::Gd => Optimizer::GradientDescent,
                },
                seed,
            };
            let (params, train_log) =
                train(&dataset, NetworkLayout::default_for(side), &config).map_err(|e| e.in_stage("train", seed))?;
            params.save(&out)?;
            if let Some(path) = log {
                write(&path, &train_log.to_text(true))?;
            }
        }
        Command::Calibrate { model, data, out } => {
            let params = NetworkParams::load(&model)?;
            let dataset = LabeledDataset::load(&data)?;
            let t = calibrate_threshold(&params, &dataset.validation_groups())?;
            write(&out, &serde_json::to_string_pretty(&t).expect("threshold serializes"))?;
            println!("threshold {} (FRR {}, FAR {})", t.value, t.frr, t.far);
        }
        Command::Verify {
            model,
            threshold,
            image_a,
            image_b,
        } => {
            let params = NetworkParams::load(&model)?;
            let t = load_threshold(&threshold)?;
            let a = DataImage::load(&image_a)?;
            let b = DataImage::load(&image_b)?;
            println!("{}", verify_pair(&params, &a, &b, &t)?.to_record());
        }
        Command::Project {
            model,
            data,
            seed,
            perplexity,
            iterations,
            out,
        } => {
            let params = NetworkParams::load(&model)?;
            let dataset = LabeledDataset::load(&data)?;
            let images: Vec<&DataImage> = dataset.images.iter().flatten().collect();
            let labels: Vec<String> = images.iter().map(|i| i.descriptor.clone()).collect();
            let reps = params.embed(&images)?;
            let config = TsneConfig {
                perplexity,
                iterations,
                seed,
                ..TsneConfig::default()
            };
            write(&out, &project_2d(&reps, &config)?.to_text(&labels))?;
        }
        Command::Experiment {
            scenario,
            seed,
            out,
            spec,
            cache,
            trials,
            epochs,
        } => {
            let kind: ScenarioKind = scenario.parse()?;
            let mut spec = match spec {
                Some(path) => ExperimentSpec::load(&path)?,
                None => ExperimentSpec::default_for(kind, seed),
            };
            if spec.kind() != kind {
                return Err(Error::invalid(format!("spec file describes `{}`, not `{kind}`", spec.kind())));
            }
            spec.seed = seed;
            if let Some(t) = trials {
                spec.verify.trials = t;
            }
            if let Some(e) = epochs {
                spec.training.max_epochs = e;
            }
            let cache = cache.map(ModelCache::new);
            run_experiment(&spec, &out, cache.as_ref())?;
            println!("{}", out.display());
        }
        Command::Ingest {
            model,
            threshold,
            grid,
            seed,
            fraction,
            trials,
        } => {
            let params = NetworkParams::load(&model)?;
            let t = load_threshold(&threshold)?;
            let reports = verify_subsample_pairs(&params, &t, &grid, fraction, trials, seed)?;
            println!("distance, threshold, verdict, state_a, seed_a, state_b, seed_b");
            for r in &reports {
                println!("{}", r.to_record());
            }
            let accepted = reports.iter().filter(|r| r.accepted()).count();
            eprintln!("accepted {accepted} of {}", reports.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
