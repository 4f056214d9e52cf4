//! Coupled adversarial training with cyclic reconstruction losses.

mod checkpoint;
mod log;
mod run;
mod step;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use log::{read_loss_log, LossLogWriter, LOSS_LOG_HEADER};
pub use run::{checkpoint_path, continue_training, train, TrainOptions};
pub use step::{
    cyclic_losses, generator_objective, translate_chain, IdentityTranslator, TranslationChain, Translator,
};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{DataError, SamplerState};
use crate::nets::{init_networks, DiscriminatorConfig, GeneratorConfig, NetError, Network, Networks};
use crate::tensor::{AdamConfig, OptimizerState, Real, TensorError};

#[derive(Debug, thiserror::Error)]
pub enum TrainingError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("non-finite {field} ({value}) at step {step}; last checkpoint: {}", last_checkpoint_label(.last_checkpoint))]
    NonFinite { step: u64, field: &'static str, value: f64, last_checkpoint: Option<PathBuf> },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("checkpoint {path}: {detail}")]
    Checkpoint { path: PathBuf, detail: String },
    #[error("loss log {path}, line {line}: {detail}")]
    LossLog { path: PathBuf, line: usize, detail: String },
}

fn last_checkpoint_label(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

pub type TrainingResult<T> = std::result::Result<T, TrainingError>;

/// Optimisation hyperparameters of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Images per domain per step; at least 2 for batch normalisation.
    pub batch_size: usize,
    pub total_steps: u64,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Weight of the two cyclic reconstruction terms in the generator loss.
    pub cyclic_weight: f64,
    pub seed: u64,
    /// Steps between checkpoints; 0 disables periodic checkpoints.
    pub checkpoint_interval: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            batch_size: 4,
            total_steps: 2000,
            lr_generator: 2e-4,
            lr_discriminator: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            cyclic_weight: 10.0,
            seed: 0,
            checkpoint_interval: 500,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> TrainingResult<()> {
        let bad = |m: String| Err(TrainingError::Config(m));
        if self.batch_size < 2 {
            return bad(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        if !(self.cyclic_weight.is_finite() && self.cyclic_weight >= 0.0) {
            return bad(format!("cyclic_weight must be finite and non-negative, got {}", self.cyclic_weight));
        }
        for (name, lr) in [("lr_generator", self.lr_generator), ("lr_discriminator", self.lr_discriminator)] {
            if !(lr.is_finite() && lr >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {lr}"));
            }
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        Ok(())
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig { lr, beta1: self.beta1, beta2: self.beta2, ..AdamConfig::default() }
    }

    /// Seeds of the per-domain batch samplers, distinct from the init seed.
    fn sampler_seeds(&self) -> [u64; 2] {
        [self.seed.wrapping_add(1), self.seed.wrapping_add(2)]
    }
}

/// Losses of one training step. `_a` fields belong to domain A (`d_a`,
/// `g_a` producing A-images, and the A→B→A reconstruction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: u64,
    pub d_loss_a: f64,
    pub d_loss_b: f64,
    pub g_adv_loss_a: f64,
    pub g_adv_loss_b: f64,
    pub cyclic_loss_a: f64,
    pub cyclic_loss_b: f64,
}

impl LossRecord {
    pub fn values(&self) -> [(&'static str, f64); 6] {
        [
            ("d_loss_A", self.d_loss_a),
            ("d_loss_B", self.d_loss_b),
            ("g_adv_loss_A", self.g_adv_loss_a),
            ("g_adv_loss_B", self.g_adv_loss_b),
            ("cyclic_loss_A", self.cyclic_loss_a),
            ("cyclic_loss_B", self.cyclic_loss_b),
        ]
    }

    /// Same record with the A and B fields exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            step: self.step,
            d_loss_a: self.d_loss_b,
            d_loss_b: self.d_loss_a,
            g_adv_loss_a: self.g_adv_loss_b,
            g_adv_loss_b: self.g_adv_loss_a,
            cyclic_loss_a: self.cyclic_loss_b,
            cyclic_loss_b: self.cyclic_loss_a,
        }
    }
}

/// Everything needed to continue a run bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerState<T = f32> {
    pub config: TrainingConfig,
    pub generator_config: GeneratorConfig,
    pub discriminator_config: DiscriminatorConfig,
    pub nets: Networks<T>,
    pub opt_g_a: OptimizerState<T>,
    pub opt_g_b: OptimizerState<T>,
    pub opt_d_a: OptimizerState<T>,
    pub opt_d_b: OptimizerState<T>,
    /// Completed steps.
    pub step: u64,
    /// Batch sampler positions for domains A and B.
    pub samplers: [SamplerState; 2],
}

impl<T: Real> TrainerState<T> {
    pub fn new(
        config: TrainingConfig,
        generator_config: GeneratorConfig,
        discriminator_config: DiscriminatorConfig,
    ) -> TrainingResult<Self> {
        config.validate()?;
        let nets = init_networks(&generator_config, &discriminator_config, config.seed)?;
        Ok(Self::from_networks(config, generator_config, discriminator_config, nets))
    }

    /// Fresh optimiser and sampler state around existing networks.
    pub fn from_networks(
        config: TrainingConfig,
        generator_config: GeneratorConfig,
        discriminator_config: DiscriminatorConfig,
        nets: Networks<T>,
    ) -> Self {
        let g = config.adam(config.lr_generator);
        let d = config.adam(config.lr_discriminator);
        let [sa, sb] = config.sampler_seeds();
        Self {
            opt_g_a: OptimizerState::new(g, &nets.g_a.param_sizes()),
            opt_g_b: OptimizerState::new(g, &nets.g_b.param_sizes()),
            opt_d_a: OptimizerState::new(d, &nets.d_a.param_sizes()),
            opt_d_b: OptimizerState::new(d, &nets.d_b.param_sizes()),
            step: 0,
            samplers: [
                SamplerState { seed: sa, epoch: 0, cursor: 0 },
                SamplerState { seed: sb, epoch: 0, cursor: 0 },
            ],
            config,
            generator_config,
            discriminator_config,
            nets,
        }
    }

    /// The same run with the roles of domains A and B exchanged.
    pub fn swap_domains(self) -> Self {
        let Networks { g_a, g_b, d_a, d_b } = self.nets;
        Self {
            nets: Networks { g_a: g_b, g_b: g_a, d_a: d_b, d_b: d_a },
            opt_g_a: self.opt_g_b,
            opt_g_b: self.opt_g_a,
            opt_d_a: self.opt_d_b,
            opt_d_b: self.opt_d_a,
            samplers: [self.samplers[1], self.samplers[0]],
            ..self
        }
    }
}
