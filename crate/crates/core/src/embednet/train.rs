use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::loss::{grad, TripletBatch};
use super::network::{dropout_seeds, NetworkParams};
use super::NetworkLayout;
use crate::error::{Error, Result};
use crate::measure::{DataImage, LabeledDataset};

/// Learning rate `δ · factor^⌊epoch / every⌋`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDecay {
    pub factor: f64,
    pub every: usize,
}

/// Parameter update rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Optimizer {
    /// ξ ← ξ − δ∇L.
    GradientDescent,
    /// Bias-corrected Adam with the usual moment decay rates.
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub const ADAM: Optimizer = Optimizer::Adam {
        beta1: 0.9,
        beta2: 0.999,
        epsilon: 1e-8,
    };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub decay: StepDecay,
    /// Divide the epoch gradient by the number of anchors before the step.
    #[serde(default)]
    pub mean_over_anchors: bool,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 500,
            learning_rate: 0.01,
            decay: StepDecay {
                factor: 0.5,
                every: 100,
            },
            mean_over_anchors: false,
            optimizer: Optimizer::GradientDescent,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate {} must be > 0", self.learning_rate)));
        }
        if !(self.decay.factor > 0.0 && self.decay.factor <= 1.0) || self.decay.every == 0 {
            return Err(Error::invalid(format!("invalid learning-rate decay {:?}", self.decay)));
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.decay.factor.powi((epoch / self.decay.every) as i32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub learning_rate: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    /// One `epoch, loss, learning_rate[, wall_seconds]` line per epoch.
    /// Wall time is optional because it is the only non-reproducible field.
    pub fn to_text(&self, with_wall_time: bool) -> String {
        let mut s = String::new();
        if with_wall_time {
            s.push_str("epoch, loss, learning_rate, wall_seconds\n");
        } else {
            s.push_str("epoch, loss, learning_rate\n");
        }
        for r in &self.records {
            let _ = write!(s, "{}, {:.16e}, {:.16e}", r.epoch, r.loss, r.learning_rate);
            if with_wall_time {
                let _ = write!(s, ", {:.3}", r.wall_seconds);
            }
            s.push('\n');
        }
        s
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// Mean loss over the `window` epochs ending at `epoch` (1-based).
    pub fn moving_average(&self, epoch: usize, window: usize) -> Option<f64> {
        if epoch == 0 || epoch > self.records.len() || window == 0 || window > epoch {
            return None;
        }
        let slice = &self.records[epoch - window..epoch];
        Some(slice.iter().map(|r| r.loss).sum::<f64>() / window as f64)
    }
}

/// Trains on the training split of `dataset` from a fresh initialization.
pub fn train(dataset: &LabeledDataset, layout: NetworkLayout, config: &TrainConfig) -> Result<(NetworkParams, TrainLog)> {
    let params = NetworkParams::init(layout, config.seed)?;
    train_groups(params, &dataset.train_groups(), config, |_| {})
}

/// Full-batch triplet training: representations of all images are computed
/// once per epoch, followed by one gradient step. `progress` sees each
/// epoch record as it is produced.
pub fn train_groups(
    mut params: NetworkParams,
    groups: &[Vec<&DataImage>],
    config: &TrainConfig,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<(NetworkParams, TrainLog)> {
    config.validate()?;
    if groups.len() < 2 {
        return Err(Error::invalid("training needs at least 2 states (no negatives otherwise)"));
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::invalid(format!("state {i} has no training images")));
    }
    for img in groups.iter().flatten() {
        params.check_input(img)?;
    }
    let start = Instant::now();
    let mut log = TrainLog::default();
    let mut moments: Option<(Vec<f64>, Vec<f64>)> = None;
    for epoch in 0..config.max_epochs {
        let batch = TripletBatch::sample(groups, config.seed, epoch)?;
        let seeds = dropout_seeds(config.seed, epoch, batch.images.len());
        let (loss, g) = grad(&params, &batch, Some(&seeds))
            .map_err(|e| Error::numerical(format!("epoch {epoch}: {e}")))?;
        let lr = config.learning_rate_at(epoch);
        let scale = if config.mean_over_anchors {
            lr / batch.anchor_count() as f64
        } else {
            lr
        };
        match config.optimizer {
            Optimizer::GradientDescent => {
                for (p, d) in params.values_mut().iter_mut().zip(&g) {
                    *p -= scale * d;
                }
            }
            Optimizer::Adam { beta1, beta2, epsilon } => {
                let n = params.values().len();
                let (m, v) = moments.get_or_insert_with(|| (vec![0.0; n], vec![0.0; n]));
                let t = (epoch + 1) as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let gs = scale / lr;
                for i in 0..n {
                    let gi = g[i] * gs;
                    m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                    params.values_mut()[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + epsilon);
                }
            }
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            loss,
            learning_rate: lr,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        progress(&record);
        log.records.push(record);
    }
    Ok((params, log))
}
