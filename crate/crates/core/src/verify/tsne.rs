//! Exact t-SNE for visualizing representations.
//!
//! Conditional affinities p_{j|i} ∝ exp(−β_i d²_ij) with β_i found by
//! bisection so that the entropy matches ln(perplexity); P is symmetrized
//! as (p_{j|i} + p_{i|j}) / 2n. The layout follows gradient descent on
//! KL(P‖Q) with a Student-t kernel, momentum 0.5 then 0.8 after
//! iteration 250, and per-coordinate adaptive gains.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embednet::Representation;
use crate::error::{Error, Result};
use crate::measure::seeds::{derive_seed, rng_from, stream};

const ENTROPY_TOL: f64 = 1e-5;
const MAX_BISECTION: usize = 200;
const MOMENTUM_SWITCH: usize = 250;
const MIN_GAIN: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 15.0,
            iterations: 500,
            learning_rate: 100.0,
            exaggeration: 4.0,
            exaggeration_iterations: 50,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub points: Vec<[f64; 2]>,
    /// KL(P‖Q) after each iteration, measured against the unexaggerated P.
    pub kl_history: Vec<f64>,
}

impl Projection {
    /// `x, y, label` records.
    pub fn to_text(&self, labels: &[String]) -> String {
        let mut s = String::from("x, y, label\n");
        for (p, l) in self.points.iter().zip(labels) {
            let _ = writeln!(s, "{:.16e}, {:.16e}, {l}", p[0], p[1]);
        }
        s
    }
}

fn squared_distances(x: &[&[f64]]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = x[i].iter().zip(x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Row `i` of the conditional affinities at precision `beta`, and its entropy.
fn conditional_row(d2: &[f64], i: usize, beta: f64) -> (Vec<f64>, f64) {
    let n = d2.len();
    let min = (0..n).filter(|&j| j != i).map(|j| d2[j]).fold(f64::INFINITY, f64::min);
    let mut p: Vec<f64> = (0..n)
        .map(|j| if j == i { 0.0 } else { (-beta * (d2[j] - min)).exp() })
        .collect();
    let sum: f64 = p.iter().sum();
    let mut h = 0.0;
    for v in p.iter_mut() {
        *v /= sum;
        if *v > 0.0 {
            h -= *v * v.ln();
        }
    }
    (p, h)
}

/// Symmetrized joint affinities (row-major n × n).
pub fn joint_affinities(x: &[&[f64]], perplexity: f64) -> Result<Vec<f64>> {
    let n = x.len();
    let d2 = squared_distances(x);
    let target = perplexity.ln();
    let mut cond = vec![0.0; n * n];
    for i in 0..n {
        let row = &d2[i * n..(i + 1) * n];
        let (mut lo, mut hi) = (0.0, f64::INFINITY);
        let mut beta = 1.0;
        let mut found = None;
        for _ in 0..MAX_BISECTION {
            let (p, h) = conditional_row(row, i, beta);
            if !h.is_finite() {
                break;
            }
            if (h - target).abs() < ENTROPY_TOL {
                found = Some(p);
                break;
            }
            if h > target {
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        // all-equal distances give uniform rows, whose entropy ln(n−1) may
        // never reach the target; that geometry has no meaningful bandwidth
        let p = found.ok_or_else(|| {
            Error::numerical(format!(
                "bandwidth search for point {i} did not reach perplexity {perplexity}"
            ))
        })?;
        cond[i * n..(i + 1) * n].copy_from_slice(&p);
    }
    let mut joint = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            joint[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64);
        }
    }
    Ok(joint)
}

fn kl_and_gradient(p: &[f64], y: &[[f64; 2]], scale: f64, grad: &mut [[f64; 2]]) -> f64 {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut z = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            z += 2.0 * v;
        }
    }
    let mut kl = 0.0;
    for i in 0..n {
        grad[i] = [0.0, 0.0];
        for j in 0..n {
            if i == j {
                continue;
            }
            let q = (num[i * n + j] / z).max(1e-300);
            let pij = p[i * n + j];
            if pij > 0.0 {
                kl += pij * (pij / q).ln();
            }
            let m = 4.0 * (scale * pij - q) * num[i * n + j];
            grad[i][0] += m * (y[i][0] - y[j][0]);
            grad[i][1] += m * (y[i][1] - y[j][1]);
        }
    }
    kl
}

/// Two-dimensional t-SNE layout of the representations.
pub fn project_2d(reps: &[Representation], config: &TsneConfig) -> Result<Projection> {
    let n = reps.len();
    if n < 3 {
        return Err(Error::invalid("t-SNE needs at least 3 points"));
    }
    if !(config.perplexity > 0.0 && config.perplexity < n as f64) {
        return Err(Error::invalid(format!(
            "perplexity {} must be in (0, {n})",
            config.perplexity
        )));
    }
    let x: Vec<&[f64]> = reps.iter().map(|r| r.as_slice()).collect();
    let p = joint_affinities(&x, config.perplexity)?;
    let mut rng = rng_from(derive_seed(config.seed, &[stream::TSNE]));
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            [1e-2 * a, 1e-2 * b]
        })
        .collect();
    let mut velocity = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut grad = vec![[0.0; 2]; n];
    let mut kl_history = Vec::with_capacity(config.iterations);
    for it in 0..config.iterations {
        let scale = if it < config.exaggeration_iterations {
            config.exaggeration
        } else {
            1.0
        };
        let momentum = if it < MOMENTUM_SWITCH { 0.5 } else { 0.8 };
        kl_and_gradient(&p, &y, scale, &mut grad);
        for i in 0..n {
            for d in 0..2 {
                let same_sign = (grad[i][d] > 0.0) == (velocity[i][d] > 0.0);
                gains[i][d] = if same_sign { gains[i][d] * 0.8 } else { gains[i][d] + 0.2 };
                gains[i][d] = gains[i][d].max(MIN_GAIN);
                velocity[i][d] = momentum * velocity[i][d] - config.learning_rate * gains[i][d] * grad[i][d];
                y[i][d] += velocity[i][d];
            }
        }
        let mean = [
            y.iter().map(|v| v[0]).sum::<f64>() / n as f64,
            y.iter().map(|v| v[1]).sum::<f64>() / n as f64,
        ];
        for v in y.iter_mut() {
            v[0] -= mean[0];
            v[1] -= mean[1];
        }
        let kl = kl_and_gradient(&p, &y, 1.0, &mut grad);
        if !kl.is_finite() {
            return Err(Error::numerical(format!("t-SNE objective diverged at iteration {it}")));
        }
        kl_history.push(kl);
    }
    Ok(Projection { points: y, kl_history })
}
