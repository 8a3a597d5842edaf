use serde::{Deserialize, Serialize};

use super::layers::ConvGeom;
use crate::error::{Error, Result};

/// Estimates and mask.
pub const INPUT_CHANNELS: usize = 2;
pub const DEFAULT_EMBEDDING_DIM: usize = 32;
pub const DEFAULT_DROPOUT: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// Architecture of the embedding network: "same"-padded ReLU convolutions,
/// one max pool, dropout, a dense layer and L2 normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkLayout {
    pub input_side: usize,
    pub convs: Vec<ConvSpec>,
    pub pool: usize,
    pub dropout: f64,
    pub embedding_dim: usize,
}

impl NetworkLayout {
    /// 16/32/64 channels with 3×3 kernels. The first convolution keeps full
    /// resolution; the later ones use stride 2 (stride 2 throughout for
    /// inputs wider than 64 pixels) to keep single-core training short.
    pub fn default_for(side: usize) -> Self {
        let first = if side > 64 { 2 } else { 1 };
        Self {
            input_side: side,
            convs: vec![
                ConvSpec {
                    channels: 16,
                    kernel: 3,
                    stride: first,
                },
                ConvSpec {
                    channels: 32,
                    kernel: 3,
                    stride: 2,
                },
                ConvSpec {
                    channels: 64,
                    kernel: 3,
                    stride: 2,
                },
            ],
            pool: 2,
            dropout: DEFAULT_DROPOUT,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_side < 2 {
            return Err(Error::invalid("network input side must be >= 2"));
        }
        if self.convs.is_empty() {
            return Err(Error::invalid("network needs at least one convolution"));
        }
        for (i, c) in self.convs.iter().enumerate() {
            if c.channels == 0 || c.kernel == 0 || c.kernel % 2 == 0 || c.stride == 0 {
                return Err(Error::invalid(format!(
                    "convolution {i}: channels and stride must be positive, kernel odd ({c:?})"
                )));
            }
        }
        if self.pool == 0 {
            return Err(Error::invalid("pool size must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.embedding_dim == 0 {
            return Err(Error::invalid("embedding dimension must be >= 1"));
        }
        let side = self.conv_geoms().last().map(|g| g.ho).unwrap_or(0);
        if side < self.pool {
            return Err(Error::invalid(format!(
                "feature map of side {side} is smaller than the {0}x{0} pool",
                self.pool
            )));
        }
        Ok(())
    }

    pub(crate) fn conv_geoms(&self) -> Vec<ConvGeom> {
        let mut cin = INPUT_CHANNELS;
        let mut side = self.input_side;
        self.convs
            .iter()
            .map(|c| {
                let g = ConvGeom::new(cin, side, side, c.kernel, c.stride);
                cin = c.channels;
                side = g.ho;
                g
            })
            .collect()
    }

    /// Side of the map after the last convolution.
    pub fn conv_output_side(&self) -> usize {
        self.conv_geoms().last().map(|g| g.ho).unwrap_or(self.input_side)
    }

    pub fn pooled_side(&self) -> usize {
        self.conv_output_side() / self.pool
    }

    pub fn feature_len(&self) -> usize {
        let ch = self.convs.last().map(|c| c.channels).unwrap_or(INPUT_CHANNELS);
        ch * self.pooled_side() * self.pooled_side()
    }

    /// Named tensors in storage order with their shapes.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (i, (c, g)) in self.convs.iter().zip(self.conv_geoms()).enumerate() {
            out.push((format!("conv{i}.weight"), vec![c.channels, g.patch_len()]));
            out.push((format!("conv{i}.bias"), vec![c.channels]));
        }
        out.push(("dense.weight".into(), vec![self.embedding_dim, self.feature_len()]));
        out.push(("dense.bias".into(), vec![self.embedding_dim]));
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shapes() {
        let l = NetworkLayout::default_for(32);
        l.validate().unwrap();
        assert_eq!(l.conv_output_side(), 8);
        assert_eq!(l.feature_len(), 64 * 16);
        let expected = 16 * 18 + 16 + 32 * 144 + 32 + 64 * 288 + 64 + 32 * 1024 + 32;
        assert_eq!(l.param_count(), expected);
        let big = NetworkLayout::default_for(81);
        big.validate().unwrap();
        assert_eq!(big.conv_output_side(), 11);
        assert_eq!(big.pooled_side(), 5);
        assert_eq!(NetworkLayout::default_for(48).pooled_side(), 6);
    }

    #[test]
    fn rejects_bad_layouts() {
        let mut l = NetworkLayout::default_for(32);
        l.dropout = 1.0;
        assert!(l.validate().is_err());
        let mut l = NetworkLayout::default_for(32);
        l.convs[0].kernel = 2;
        assert!(l.validate().is_err());
        let l = NetworkLayout::default_for(2);
        assert!(l.validate().is_err());
    }
}
