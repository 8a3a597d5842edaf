//! Triplet loss over one epoch.
//!
//! For every state `i₁` with training images `r_1 … r_K`, K negatives are
//! drawn from the images of all other states. Each `r_{i₂}` then serves as
//! the anchor of
//!
//! ```text
//! Σ_k ‖r_{i₂} − r_k‖ − K · min_k ‖r_{i₂} − n_k‖
//! ```
//!
//! Conventions: the minimum over negatives picks the lowest index among
//! ties, and a distance of exactly zero contributes a zero subgradient.

use rand::seq::index;

use super::network::{euclidean, NetworkParams, Representation};
use crate::error::{Error, Result};
use crate::measure::seeds::{derive_seed, rng_from, stream};
use crate::measure::DataImage;

/// Loss for one anchor. `K` is the number of positives.
pub fn triplet_loss(anchor: &Representation, positives: &[Representation], negatives: &[Representation]) -> f64 {
    let k = positives.len() as f64;
    let pos: f64 = positives.iter().map(|p| anchor.distance(p)).sum();
    let neg = negatives
        .iter()
        .map(|n| anchor.distance(n))
        .fold(f64::INFINITY, f64::min);
    pos - k * neg
}

/// Index of the nearest negative, lowest index on ties.
fn nearest(anchor: &[f64], reps: &[Vec<f64>], candidates: &[usize]) -> (usize, f64) {
    let mut best = (candidates[0], euclidean(anchor, &reps[candidates[0]]));
    for &c in &candidates[1..] {
        let d = euclidean(anchor, &reps[c]);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Adds `w·∂‖a − b‖/∂a` to `ga` and its negative to `gb`.
fn accumulate(grads: &mut [Vec<f64>], a: usize, b: usize, reps: &[Vec<f64>], w: f64) {
    let d = euclidean(&reps[a], &reps[b]);
    if d == 0.0 || a == b {
        return;
    }
    for j in 0..reps[a].len() {
        let g = w * (reps[a][j] - reps[b][j]) / d;
        grads[a][j] += g;
        grads[b][j] -= g;
    }
}

/// Images grouped by state plus the sampled negatives of one epoch. All
/// indices refer to positions in `images`.
pub struct TripletBatch<'a> {
    pub images: Vec<&'a DataImage>,
    pub groups: Vec<Vec<usize>>,
    pub negatives: Vec<Vec<usize>>,
}

impl<'a> TripletBatch<'a> {
    /// Flattens per-state image groups and draws K negatives per state
    /// without replacement from the other states' images.
    pub fn sample(groups: &[Vec<&'a DataImage>], seed: u64, epoch: usize) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::invalid("triplet training needs at least 2 states"));
        }
        let mut images = Vec::new();
        let mut idx = Vec::new();
        for g in groups {
            if g.is_empty() {
                return Err(Error::invalid("every state needs at least one training image"));
            }
            idx.push((images.len()..images.len() + g.len()).collect::<Vec<_>>());
            images.extend(g.iter().copied());
        }
        let negatives = idx
            .iter()
            .enumerate()
            .map(|(s, own)| {
                let pool: Vec<usize> = (0..images.len()).filter(|i| !own.contains(i)).collect();
                let mut rng = rng_from(derive_seed(seed, &[stream::NEGATIVES, epoch as u64, s as u64]));
                let k = own.len().min(pool.len());
                index::sample(&mut rng, pool.len(), k)
                    .into_iter()
                    .map(|j| pool[j])
                    .collect()
            })
            .collect();
        Ok(Self {
            images,
            groups: idx,
            negatives,
        })
    }

    /// Epoch loss and its gradient with respect to every representation.
    pub fn loss_and_rep_grad(&self, reps: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
        let dim = reps.first().map_or(0, |r| r.len());
        let mut grads = vec![vec![0.0; dim]; reps.len()];
        let mut loss = 0.0;
        for (own, negs) in self.groups.iter().zip(&self.negatives) {
            let k = own.len() as f64;
            for &a in own {
                for &p in own {
                    loss += euclidean(&reps[a], &reps[p]);
                    accumulate(&mut grads, a, p, reps, 1.0);
                }
                let (n, d) = nearest(&reps[a], reps, negs);
                loss -= k * d;
                accumulate(&mut grads, a, n, reps, -k);
            }
        }
        (loss, grads)
    }

    pub fn anchor_count(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }
}

/// Epoch loss and parameter gradient. `dropout` holds one seed per image
/// of the batch in training mode.
pub fn grad(params: &NetworkParams, batch: &TripletBatch, dropout: Option<&[u64]>) -> Result<(f64, Vec<f64>)> {
    for img in &batch.images {
        params.check_input(img)?;
    }
    let reps = representations(params, &batch.images, dropout);
    let (loss, d_reps) = batch.loss_and_rep_grad(&reps);
    if !loss.is_finite() {
        return Err(Error::numerical(format!("non-finite epoch loss {loss}")));
    }
    let g = params.pullback(&batch.images, dropout, &d_reps)?;
    Ok((loss, g))
}

pub(crate) fn representations(params: &NetworkParams, images: &[&DataImage], dropout: Option<&[u64]>) -> Vec<Vec<f64>> {
    use rayon::prelude::*;
    use super::network::CHUNK;
    let chunks: Vec<_> = images
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let seeds = dropout.map(|s| &s[c * CHUNK..c * CHUNK + chunk.len()]);
            params.forward_chunk(chunk, seeds, false).0
        })
        .collect();
    chunks
        .iter()
        .flat_map(|m| m.columns().into_iter().map(|c| c.to_vec()).collect::<Vec<_>>())
        .collect()
}
