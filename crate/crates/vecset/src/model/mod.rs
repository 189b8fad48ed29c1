//! The set-latent shape representation: encoders that aggregate a point
//! cloud into a fixed-size latent set, a self-attention latent decoder, the
//! attention-interpolated occupancy field, the variational bottleneck, and
//! the RBF / kernel-regression baseline approximators.

pub mod attention;
pub mod autoencoder;
pub mod baseline;
pub mod bottleneck;
pub mod embed;
pub mod encoder;
pub mod field;
pub mod nn;

pub use attention::{attention, AttentionBlock};
pub use autoencoder::{EncodedShape, FieldVariant, ShapeAutoencoder};
pub use baseline::{
    kernel_regression_weights, mean_nearest_spacing, rbf_eval, rbf_fit, GaussianKernel,
    IrregularGridModel, RbfModel,
};
pub use bottleneck::{GaussianVars, KlBottleneck};
pub use embed::PosEmbed;
pub use encoder::{FpsSeed, ShapeEncoder};
pub use field::{FieldHead, LatentDecoder};
pub use nn::{LayerNorm, Linear, Mlp, Module};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// Queries are embeddings of a farthest-point subsample of the input.
    PointQuery,
    /// Queries are a learned M×C parameter set.
    Learnable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// Attention interpolation over the latent set, then one affine map.
    Attention,
    /// Gaussian kernel regression over anchor positions, then an MLP.
    /// The spatial-interpolation baseline for comparisons.
    KernelRegression,
}

/// Hyperparameters of the shape autoencoder.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Latent set size M.
    pub latent_count: usize,
    /// Latent width C.
    pub width: usize,
    /// Bottleneck width C0.
    pub bottleneck_width: usize,
    /// Attention heads H (must divide C, with C/H >= 8).
    pub heads: usize,
    /// Self-attention blocks in the latent decoder.
    pub decoder_depth: usize,
    /// Fourier frequency bands F in the positional embedding.
    pub freq_bands: usize,
    /// Heads of the field-query attention.
    pub field_heads: usize,
    pub encoder: EncoderKind,
    pub field: FieldKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        // Desk-scale defaults; the full-scale setting uses M = C = 512.
        ModelConfig {
            latent_count: 32,
            width: 64,
            bottleneck_width: 32,
            heads: 4,
            decoder_depth: 4,
            freq_bands: 8,
            field_heads: 1,
            encoder: EncoderKind::PointQuery,
            field: FieldKind::Attention,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_count == 0 || self.width == 0 || self.bottleneck_width == 0 {
            return Err(Error::config("latent_count, width, bottleneck_width must be positive"));
        }
        if self.heads == 0 || self.width % self.heads != 0 {
            return Err(Error::config(format!(
                "heads ({}) must divide width ({})",
                self.heads, self.width
            )));
        }
        if self.width / self.heads < 8 {
            return Err(Error::config(format!(
                "head width {} < 8; reduce heads or widen the model",
                self.width / self.heads
            )));
        }
        if self.field_heads == 0 || self.width % self.field_heads != 0 {
            return Err(Error::config(format!(
                "field_heads ({}) must divide width ({})",
                self.field_heads, self.width
            )));
        }
        if self.freq_bands == 0 {
            return Err(Error::config("freq_bands must be positive"));
        }
        Ok(())
    }
}
