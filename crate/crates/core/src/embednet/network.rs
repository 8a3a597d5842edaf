use std::f64::consts::FRAC_PI_2;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layers;
use super::layout::{NetworkLayout, INPUT_CHANNELS};
use crate::error::{Error, Result};
use crate::measure::seeds::{derive_seed, rng_from, stream};
use crate::measure::DataImage;

/// Images per forward/backward chunk. Fixed so that gradient sums are
/// reduced in the same order regardless of thread count.
pub(crate) const CHUNK: usize = 16;
const NORM_TOL: f64 = 1e-6;

/// A unit-norm embedding vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Representation(Vec<f64>);

impl Representation {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid(format!("representation norm {n} is not 1")));
        }
        Ok(Self(v))
    }

    /// Rescales a non-zero vector onto the unit sphere.
    pub fn normalized(mut v: Vec<f64>) -> Result<Self> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::invalid("cannot normalize a zero or non-finite vector"));
        }
        v.iter_mut().for_each(|x| *x /= n);
        Ok(Self(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &Representation) -> f64 {
        euclidean(&self.0, &other.0)
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Trainable weights plus the layout they belong to.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    layout: NetworkLayout,
    values: Vec<f64>,
}

/// Intermediate values of one chunk kept for the backward pass.
pub(crate) struct Cache {
    batch: usize,
    cols: Vec<Array2<f64>>,
    activations: Vec<Array2<f64>>,
    pool_arg: Vec<u32>,
    dropout: Option<Array2<f64>>,
    features: Array2<f64>,
    reps: Array2<f64>,
    norms: Vec<f64>,
}

impl NetworkParams {
    /// Uniform fan-in initialization: ±√(6/fan_in) for the ReLU layers,
    /// ±√(3/fan_in) for the dense layer; zero biases.
    pub fn init(layout: NetworkLayout, seed: u64) -> Result<Self> {
        layout.validate()?;
        let mut rng = rng_from(derive_seed(seed, &[stream::INIT]));
        let mut values = Vec::with_capacity(layout.param_count());
        let n_conv = layout.convs.len();
        for (i, (_, shape)) in layout.tensors().into_iter().enumerate() {
            let len: usize = shape.iter().product();
            if shape.len() == 1 {
                values.extend(std::iter::repeat_n(0.0, len));
                continue;
            }
            let fan_in = shape[1] as f64;
            let gain = if i / 2 < n_conv { 6.0 } else { 3.0 };
            let a = (gain / fan_in).sqrt();
            values.extend((0..len).map(|_| rng.random_range(-a..a)));
        }
        Ok(Self { layout, values })
    }

    pub fn from_values(layout: NetworkLayout, values: Vec<f64>) -> Result<Self> {
        layout.validate()?;
        if values.len() != layout.param_count() {
            return Err(Error::invalid(format!(
                "layout needs {} parameters, got {}",
                layout.param_count(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("parameter {i} is not finite")));
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> &NetworkLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Offsets of every tensor, in storage order.
    fn offsets(&self) -> Vec<(usize, Vec<usize>)> {
        let mut off = 0;
        self.layout
            .tensors()
            .into_iter()
            .map(|(_, shape)| {
                let start = off;
                off += shape.iter().product::<usize>();
                (start, shape)
            })
            .collect()
    }

    fn matrix<'a>(&'a self, offsets: &[(usize, Vec<usize>)], t: usize) -> ArrayView2<'a, f64> {
        let (start, shape) = &offsets[t];
        let len = shape[0] * shape[1];
        ArrayView2::from_shape((shape[0], shape[1]), &self.values[*start..start + len]).expect("shape")
    }

    fn vector<'a>(&'a self, offsets: &[(usize, Vec<usize>)], t: usize) -> ArrayView1<'a, f64> {
        let (start, shape) = &offsets[t];
        ArrayView1::from(&self.values[*start..start + shape[0]])
    }

    pub(crate) fn check_input(&self, image: &DataImage) -> Result<()> {
        if image.side() != self.layout.input_side {
            return Err(Error::invalid(format!(
                "image side {} does not match network input side {}",
                image.side(),
                self.layout.input_side
            )));
        }
        Ok(())
    }

    /// Inference-mode embedding of one image.
    pub fn forward(&self, image: &DataImage) -> Result<Representation> {
        Ok(self.embed(&[image])?.pop().expect("one image"))
    }

    /// Inference-mode embeddings, in input order.
    pub fn embed(&self, images: &[&DataImage]) -> Result<Vec<Representation>> {
        for img in images {
            self.check_input(img)?;
        }
        let chunks: Vec<Array2<f64>> = images
            .par_chunks(CHUNK)
            .map(|chunk| self.forward_chunk(chunk, None, false).0)
            .collect();
        let mut out = Vec::with_capacity(images.len());
        for reps in chunks {
            for col in reps.axis_iter(Axis(1)) {
                out.push(Representation(col.to_vec()));
            }
        }
        Ok(out)
    }

    fn input_matrix(&self, images: &[&DataImage]) -> Array2<f64> {
        let hw = self.layout.input_side * self.layout.input_side;
        let mut x = Array2::<f64>::zeros((INPUT_CHANNELS, images.len() * hw));
        for (b, img) in images.iter().enumerate() {
            for i in img.present_indices() {
                // parity expectation value, in [−1, 1]
                x[[0, b * hw + i]] = FRAC_PI_2 * img.estimates[i];
                x[[1, b * hw + i]] = 1.0;
            }
        }
        x
    }

    fn dropout_mask(&self, seeds: &[u64]) -> Array2<f64> {
        let f = self.layout.feature_len();
        let p = self.layout.dropout;
        let keep = 1.0 / (1.0 - p);
        let mut m = Array2::<f64>::zeros((f, seeds.len()));
        for (b, &s) in seeds.iter().enumerate() {
            let mut rng = rng_from(s);
            for j in 0..f {
                if rng.random::<f64>() >= p {
                    m[[j, b]] = keep;
                }
            }
        }
        m
    }

    /// Forward pass for a chunk. `dropout` holds one seed per image in
    /// training mode.
    pub(crate) fn forward_chunk(
        &self,
        images: &[&DataImage],
        dropout: Option<&[u64]>,
        keep_cache: bool,
    ) -> (Array2<f64>, Option<Cache>) {
        let batch = images.len();
        let offsets = self.offsets();
        let geoms = self.layout.conv_geoms();
        let mut x = self.input_matrix(images);
        let mut cols_cache = Vec::new();
        let mut act_cache = Vec::new();
        for (l, g) in geoms.iter().enumerate() {
            let (mut out, cols) =
                layers::conv_forward(&x.view(), batch, g, &self.matrix(&offsets, 2 * l), &self.vector(&offsets, 2 * l + 1));
            layers::relu_inplace(&mut out);
            if keep_cache {
                cols_cache.push(cols);
                act_cache.push(out.clone());
            }
            x = out;
        }
        let last = geoms.last().expect("at least one conv");
        let (pooled, arg) = layers::maxpool_forward(&x.view(), batch, last.ho, last.wo, self.layout.pool);
        let mut features = layers::flatten(&pooled.view(), batch);
        let mask = dropout.filter(|_| self.layout.dropout > 0.0).map(|s| self.dropout_mask(s));
        if let Some(m) = &mask {
            features *= m;
        }
        let d = geoms.len() * 2;
        let z = layers::dense_forward(&features.view(), &self.matrix(&offsets, d), &self.vector(&offsets, d + 1));
        let (reps, norms) = layers::l2_normalize(&z.view());
        let cache = keep_cache.then(|| Cache {
            batch,
            cols: cols_cache,
            activations: act_cache,
            pool_arg: arg,
            dropout: mask,
            features,
            reps: reps.clone(),
            norms,
        });
        (reps, cache)
    }

    /// Parameter gradient of Σ_b ⟨d_reps[:, b], r_b⟩ for a cached chunk.
    pub(crate) fn backward_chunk(&self, cache: &Cache, d_reps: &ArrayView2<f64>) -> Vec<f64> {
        let offsets = self.offsets();
        let geoms = self.layout.conv_geoms();
        let mut grad = vec![0.0; self.values.len()];
        let mut put = |t: usize, data: &[f64]| {
            let start = offsets[t].0;
            grad[start..start + data.len()].copy_from_slice(data);
        };
        let d_z = layers::l2_backward(d_reps, &cache.reps.view(), &cache.norms);
        let d = geoms.len() * 2;
        let (dw, db, mut d_feat) = layers::dense_backward(&d_z.view(), &cache.features.view(), &self.matrix(&offsets, d));
        put(d, dw.as_slice().expect("standard layout"));
        put(d + 1, db.as_slice().expect("standard layout"));
        if let Some(m) = &cache.dropout {
            d_feat *= m;
        }
        let last = geoms.last().expect("conv");
        let channels = self.layout.convs.last().expect("conv").channels;
        let d_pooled = layers::unflatten(&d_feat.view(), channels);
        let mut d_act = layers::maxpool_backward(&d_pooled.view(), &cache.pool_arg, cache.batch * last.ho * last.wo);
        for l in (0..geoms.len()).rev() {
            layers::relu_backward_inplace(&mut d_act, &cache.activations[l].view());
            let (dw, db, d_in) = layers::conv_backward(
                &d_act.view(),
                &cache.cols[l].view(),
                cache.batch,
                &geoms[l],
                &self.matrix(&offsets, 2 * l),
                l > 0,
            );
            put(2 * l, dw.as_slice().expect("standard layout"));
            put(2 * l + 1, db.as_slice().expect("standard layout"));
            if let Some(d_in) = d_in {
                d_act = d_in;
            }
        }
        grad
    }

    /// Gradient of Σ_i ⟨d_reps[i], f(image_i)⟩, recomputing the forward pass
    /// chunk by chunk. Chunk gradients are added in chunk order.
    pub(crate) fn pullback(
        &self,
        images: &[&DataImage],
        dropout: Option<&[u64]>,
        d_reps: &[Vec<f64>],
    ) -> Result<Vec<f64>> {
        let n = self.layout.embedding_dim;
        let parts: Vec<Vec<f64>> = images
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let lo = c * CHUNK;
                let seeds = dropout.map(|s| &s[lo..lo + chunk.len()]);
                let (_, cache) = self.forward_chunk(chunk, seeds, true);
                let mut d = Array2::<f64>::zeros((n, chunk.len()));
                for (b, dr) in d_reps[lo..lo + chunk.len()].iter().enumerate() {
                    for (j, v) in dr.iter().enumerate() {
                        d[[j, b]] = *v;
                    }
                }
                self.backward_chunk(&cache.expect("cache requested"), &d.view())
            })
            .collect();
        let mut grad = vec![0.0; self.values.len()];
        for part in parts {
            for (g, p) in grad.iter_mut().zip(part) {
                *g += p;
            }
        }
        self.check_gradient(&grad)?;
        Ok(grad)
    }

    fn check_gradient(&self, grad: &[f64]) -> Result<()> {
        let mut start = 0;
        for (name, shape) in self.layout.tensors() {
            let len: usize = shape.iter().product();
            let bad = grad[start..start + len].iter().filter(|v| !v.is_finite()).count();
            if bad > 0 {
                return Err(Error::numerical(format!(
                    "{bad} non-finite gradient entries in layer {name}"
                )));
            }
            start += len;
        }
        Ok(())
    }
}

/// Per-image dropout seeds for one training epoch.
pub fn dropout_seeds(seed: u64, epoch: usize, count: usize) -> Vec<u64> {
    (0..count)
        .map(|i| derive_seed(seed, &[stream::DROPOUT, epoch as u64, i as u64]))
        .collect()
}
