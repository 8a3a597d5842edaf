//! Layer kernels with hand-written backward passes.
//!
//! Activations of a chunk of `B` images are stored channel-major as a
//! `C × (B·H·W)` matrix whose column index is `b·H·W + y·W + x`. Convolutions
//! go through im2col so that both passes are single matrix products.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

/// Shape bookkeeping for one "same"-padded convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub ho: usize,
    pub wo: usize,
}

impl ConvGeom {
    pub fn new(cin: usize, h: usize, w: usize, k: usize, stride: usize) -> Self {
        let pad = k / 2;
        let ho = (h + 2 * pad - k) / stride + 1;
        let wo = (w + 2 * pad - k) / stride + 1;
        Self {
            cin,
            h,
            w,
            k,
            stride,
            pad,
            ho,
            wo,
        }
    }

    pub fn patch_len(&self) -> usize {
        self.cin * self.k * self.k
    }
}

pub fn im2col(input: &ArrayView2<f64>, batch: usize, g: &ConvGeom) -> Array2<f64> {
    let (hw, ohw) = (g.h * g.w, g.ho * g.wo);
    let mut cols = Array2::<f64>::zeros((g.patch_len(), batch * ohw));
    for c in 0..g.cin {
        let src = input.row(c);
        for ky in 0..g.k {
            for kx in 0..g.k {
                let mut dst = cols.row_mut((c * g.k + ky) * g.k + kx);
                let dst = dst.as_slice_mut().expect("contiguous");
                for b in 0..batch {
                    for oy in 0..g.ho {
                        let y = (oy * g.stride + ky) as isize - g.pad as isize;
                        if y < 0 || y >= g.h as isize {
                            continue;
                        }
                        let row_base = b * hw + y as usize * g.w;
                        let out_base = b * ohw + oy * g.wo;
                        for ox in 0..g.wo {
                            let x = (ox * g.stride + kx) as isize - g.pad as isize;
                            if x >= 0 && x < g.w as isize {
                                dst[out_base + ox] = src[row_base + x as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

pub fn col2im(cols: &ArrayView2<f64>, batch: usize, g: &ConvGeom) -> Array2<f64> {
    let (hw, ohw) = (g.h * g.w, g.ho * g.wo);
    let mut out = Array2::<f64>::zeros((g.cin, batch * hw));
    for c in 0..g.cin {
        let mut dst = out.row_mut(c);
        let dst = dst.as_slice_mut().expect("contiguous");
        for ky in 0..g.k {
            for kx in 0..g.k {
                let src = cols.row((c * g.k + ky) * g.k + kx);
                for b in 0..batch {
                    for oy in 0..g.ho {
                        let y = (oy * g.stride + ky) as isize - g.pad as isize;
                        if y < 0 || y >= g.h as isize {
                            continue;
                        }
                        let row_base = b * hw + y as usize * g.w;
                        let out_base = b * ohw + oy * g.wo;
                        for ox in 0..g.wo {
                            let x = (ox * g.stride + kx) as isize - g.pad as isize;
                            if x >= 0 && x < g.w as isize {
                                dst[row_base + x as usize] += src[out_base + ox];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Returns the pre-activation output and the im2col matrix for backward.
pub fn conv_forward(
    input: &ArrayView2<f64>,
    batch: usize,
    g: &ConvGeom,
    weight: &ArrayView2<f64>,
    bias: &ArrayView1<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let cols = im2col(input, batch, g);
    let mut out = weight.dot(&cols);
    for (mut row, &b) in out.axis_iter_mut(Axis(0)).zip(bias.iter()) {
        row += b;
    }
    (out, cols)
}

/// Gradients `(d_weight, d_bias, d_input)`.
pub fn conv_backward(
    d_out: &ArrayView2<f64>,
    cols: &ArrayView2<f64>,
    batch: usize,
    g: &ConvGeom,
    weight: &ArrayView2<f64>,
    need_input: bool,
) -> (Array2<f64>, Array1<f64>, Option<Array2<f64>>) {
    let d_w = d_out.dot(&cols.t());
    let d_b = d_out.sum_axis(Axis(1));
    let d_in = need_input.then(|| {
        let d_cols = weight.t().dot(d_out);
        col2im(&d_cols.view(), batch, g)
    });
    (d_w, d_b, d_in)
}

pub fn relu_inplace(x: &mut Array2<f64>) {
    x.mapv_inplace(|v| v.max(0.0));
}

/// Masks `d` where the ReLU output was zero.
pub fn relu_backward_inplace(d: &mut Array2<f64>, out: &ArrayView2<f64>) {
    d.zip_mut_with(out, |g, &o| {
        if o <= 0.0 {
            *g = 0.0
        }
    });
}

/// Non-overlapping `size × size` max pool (trailing rows/columns dropped).
/// Returns the pooled map and, per output, the flat input column of the max.
pub fn maxpool_forward(
    input: &ArrayView2<f64>,
    batch: usize,
    h: usize,
    w: usize,
    size: usize,
) -> (Array2<f64>, Vec<u32>) {
    let (hp, wp) = (h / size, w / size);
    let c = input.nrows();
    let mut out = Array2::<f64>::zeros((c, batch * hp * wp));
    let mut arg = vec![0u32; c * batch * hp * wp];
    for ch in 0..c {
        let src = input.row(ch);
        for b in 0..batch {
            for py in 0..hp {
                for px in 0..wp {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0;
                    for dy in 0..size {
                        for dx in 0..size {
                            let idx = b * h * w + (py * size + dy) * w + px * size + dx;
                            // first maximum wins on ties
                            if src[idx] > best {
                                best = src[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let o = b * hp * wp + py * wp + px;
                    out[[ch, o]] = best;
                    arg[ch * batch * hp * wp + o] = best_idx as u32;
                }
            }
        }
    }
    (out, arg)
}

pub fn maxpool_backward(d_out: &ArrayView2<f64>, arg: &[u32], in_cols: usize) -> Array2<f64> {
    let (c, n) = d_out.dim();
    let mut d_in = Array2::<f64>::zeros((c, in_cols));
    for ch in 0..c {
        for o in 0..n {
            d_in[[ch, arg[ch * n + o] as usize]] += d_out[[ch, o]];
        }
    }
    d_in
}

/// Reorders `C × (B·P)` pooled maps into `(C·P) × B` feature columns.
pub fn flatten(maps: &ArrayView2<f64>, batch: usize) -> Array2<f64> {
    let c = maps.nrows();
    let p = maps.ncols() / batch;
    let mut out = Array2::<f64>::zeros((c * p, batch));
    for ch in 0..c {
        for b in 0..batch {
            for q in 0..p {
                out[[ch * p + q, b]] = maps[[ch, b * p + q]];
            }
        }
    }
    out
}

pub fn unflatten(features: &ArrayView2<f64>, channels: usize) -> Array2<f64> {
    let (f, batch) = features.dim();
    let p = f / channels;
    let mut out = Array2::<f64>::zeros((channels, batch * p));
    for ch in 0..channels {
        for b in 0..batch {
            for q in 0..p {
                out[[ch, b * p + q]] = features[[ch * p + q, b]];
            }
        }
    }
    out
}

pub fn dense_forward(
    input: &ArrayView2<f64>,
    weight: &ArrayView2<f64>,
    bias: &ArrayView1<f64>,
) -> Array2<f64> {
    let mut out = weight.dot(input);
    for (mut row, &b) in out.axis_iter_mut(Axis(0)).zip(bias.iter()) {
        row += b;
    }
    out
}

pub fn dense_backward(
    d_out: &ArrayView2<f64>,
    input: &ArrayView2<f64>,
    weight: &ArrayView2<f64>,
) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
    (d_out.dot(&input.t()), d_out.sum_axis(Axis(1)), weight.t().dot(d_out))
}

/// Column-wise `z / ‖z‖`; also returns the norms.
pub fn l2_normalize(z: &ArrayView2<f64>) -> (Array2<f64>, Vec<f64>) {
    let mut out = z.to_owned();
    let mut norms = Vec::with_capacity(z.ncols());
    for mut col in out.axis_iter_mut(Axis(1)) {
        let n = col.dot(&col).sqrt();
        col /= n;
        norms.push(n);
    }
    (out, norms)
}

/// Backward of the normalization: `(d − r⟨r, d⟩)/‖z‖` per column.
pub fn l2_backward(d_r: &ArrayView2<f64>, r: &ArrayView2<f64>, norms: &[f64]) -> Array2<f64> {
    let mut d_z = d_r.to_owned();
    for ((mut dz, rc), &n) in d_z.axis_iter_mut(Axis(1)).zip(r.axis_iter(Axis(1))).zip(norms) {
        let proj = rc.dot(&dz);
        dz.scaled_add(-proj, &rc);
        dz /= n;
    }
    d_z
}
