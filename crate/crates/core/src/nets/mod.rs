//! Generator and discriminator architectures built from the numeric core.
//!
//! Both networks share the same encoder: stride-2 convolutions followed by
//! batch normalisation (skipped on the first layer) and leaky ReLU. The
//! generator mirrors the encoder with transposed convolutions, adds each
//! encoder output onto the decoder output of equal resolution, and ends in a
//! `tanh` image head. The discriminator flattens the encoder output into a
//! fully connected feature layer followed by a single sigmoid unit.

mod discriminator;
mod generator;
mod layers;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{Real, Tensor, TensorError};

pub use discriminator::{DiscOutput, Discriminator, DiscriminatorCache};
pub use generator::{Generator, GeneratorCache};
pub use layers::{BatchNormLayer, Block, Linear};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("input must be [N, {channels}, {size}, {size}], got {got:?}")]
    Resolution { channels: usize, size: usize, got: Vec<usize> },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type NetResult<T> = std::result::Result<T, NetError>;

/// Standard deviation of the zero-mean Gaussian used for every weight tensor.
pub const INIT_STD: f64 = 0.02;

fn default_size() -> usize {
    64
}
fn default_channels() -> usize {
    3
}
fn default_encoder() -> Vec<usize> {
    vec![64, 128, 256, 512]
}
fn default_kernel() -> usize {
    4
}
fn default_stride() -> usize {
    2
}
fn default_slope() -> f64 {
    0.2
}
fn default_true() -> bool {
    true
}
fn default_feature_dim() -> usize {
    512
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default = "default_size")]
    pub input_size: usize,
    #[serde(default = "default_channels")]
    pub input_channels: usize,
    /// Output channels of each encoder layer; the decoder mirrors the list.
    #[serde(default = "default_encoder")]
    pub encoder_channels: Vec<usize>,
    #[serde(default = "default_kernel")]
    pub kernel: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
    #[serde(default = "default_true")]
    pub skip_connections: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            input_size: default_size(),
            input_channels: default_channels(),
            encoder_channels: default_encoder(),
            kernel: default_kernel(),
            stride: default_stride(),
            leaky_slope: default_slope(),
            skip_connections: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorConfig {
    #[serde(default = "default_size")]
    pub input_size: usize,
    #[serde(default = "default_channels")]
    pub input_channels: usize,
    #[serde(default = "default_encoder")]
    pub encoder_channels: Vec<usize>,
    #[serde(default = "default_kernel")]
    pub kernel: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
    /// Width of the fully connected feature layer.
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            input_size: default_size(),
            input_channels: default_channels(),
            encoder_channels: default_encoder(),
            kernel: default_kernel(),
            stride: default_stride(),
            leaky_slope: default_slope(),
            feature_dim: default_feature_dim(),
        }
    }
}

/// Validates the shared encoder geometry and returns the per-layer padding
/// and the spatial sizes after each layer.
pub(crate) fn encoder_geometry(
    input_size: usize,
    input_channels: usize,
    channels: &[usize],
    kernel: usize,
    stride: usize,
    slope: f64,
) -> NetResult<(usize, Vec<usize>)> {
    let fail = |msg: String| Err(NetError::Config(msg));
    if channels.is_empty() {
        return fail("encoder needs at least one layer".into());
    }
    if input_channels == 0 || channels.contains(&0) {
        return fail("channel counts must be positive".into());
    }
    if stride == 0 || kernel < stride || !(kernel - stride).is_multiple_of(2) {
        return fail(format!("kernel {kernel} and stride {stride} must differ by an even amount"));
    }
    if !(slope > 0.0 && slope < 1.0) {
        return fail(format!("leaky slope {slope} must lie in (0, 1)"));
    }
    let padding = (kernel - stride) / 2;
    let mut sizes = Vec::with_capacity(channels.len());
    let mut size = input_size;
    for layer in 0..channels.len() {
        if !size.is_multiple_of(stride) || size < stride {
            return fail(format!(
                "input size {input_size} cannot be halved {} times (layer {layer} sees {size})",
                channels.len()
            ));
        }
        size /= stride;
        sizes.push(size);
    }
    Ok((padding, sizes))
}

pub(crate) fn check_input<T: Real>(x: &Tensor<T>, channels: usize, size: usize) -> NetResult<()> {
    match x.shape() {
        [n, c, h, w] if *n > 0 && *c == channels && *h == size && *w == size => Ok(()),
        other => Err(NetError::Resolution { channels, size, got: other.to_vec() }),
    }
}

/// Common parameter plumbing for optimisation and checkpointing.
pub trait Network<T: Real> {
    /// Learnable tensors with stable, unique names, in a fixed order.
    fn named_params(&self) -> Vec<(String, &Tensor<T>)>;
    /// Same tensors and order as [`Network::named_params`].
    fn params_mut(&mut self) -> Vec<&mut Tensor<T>>;
    /// Non-learnable state (batch-norm running statistics).
    fn named_buffers(&self) -> Vec<(String, &[T])>;
    fn buffers_mut(&mut self) -> Vec<&mut Vec<T>>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.len()).sum()
    }

    fn param_sizes(&self) -> Vec<usize> {
        self.named_params().iter().map(|(_, t)| t.len()).collect()
    }
}

/// Draws every weight tensor (rank ≥ 2) from `N(0, INIT_STD²)`. Biases and
/// batch-norm parameters keep their constructor values (0, and γ=1/β=0).
pub(crate) fn init_weights<T: Real>(net: &mut impl Network<T>, rng: &mut ChaCha8Rng) {
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    for p in net.params_mut() {
        if p.shape().len() >= 2 {
            for v in p.data_mut() {
                *v = T::lit(normal.sample(rng));
            }
        }
    }
}

/// The four networks of a coupled run: `g_a` maps B→A, `g_b` maps A→B, and
/// `d_a`/`d_b` judge realness within A and B.
#[derive(Debug, Clone, PartialEq)]
pub struct Networks<T> {
    pub g_a: Generator<T>,
    pub g_b: Generator<T>,
    pub d_a: Discriminator<T>,
    pub d_b: Discriminator<T>,
}

/// Builds and seeds all four networks. Identical seeds give bit-identical
/// parameters.
pub fn init_networks<T: Real>(
    gen_cfg: &GeneratorConfig,
    disc_cfg: &DiscriminatorConfig,
    seed: u64,
) -> NetResult<Networks<T>> {
    if gen_cfg.input_size != disc_cfg.input_size || gen_cfg.input_channels != disc_cfg.input_channels {
        return Err(NetError::Config(format!(
            "generator produces {}x{}x{} images but discriminator expects {}x{}x{}",
            gen_cfg.input_channels,
            gen_cfg.input_size,
            gen_cfg.input_size,
            disc_cfg.input_channels,
            disc_cfg.input_size,
            disc_cfg.input_size
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g_a = Generator::new(gen_cfg.clone())?;
    let mut g_b = Generator::new(gen_cfg.clone())?;
    let mut d_a = Discriminator::new(disc_cfg.clone())?;
    let mut d_b = Discriminator::new(disc_cfg.clone())?;
    init_weights(&mut g_a, &mut rng);
    init_weights(&mut g_b, &mut rng);
    init_weights(&mut d_a, &mut rng);
    init_weights(&mut d_b, &mut rng);
    Ok(Networks { g_a, g_b, d_a, d_b })
}
