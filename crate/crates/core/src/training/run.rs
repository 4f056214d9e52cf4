use std::path::{Path, PathBuf};

use super::{
    save_checkpoint, LossLogWriter, LossRecord, TrainerState, TrainingConfig, TrainingError, TrainingResult,
};
use crate::data::BatchSampler;
use crate::nets::{DiscriminatorConfig, GeneratorConfig};
use crate::tensor::{Real, Tensor};

/// Where a run writes its artefacts. Both are optional.
#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Directory for periodic checkpoints.
    pub checkpoint_dir: Option<PathBuf>,
    /// CSV loss log; appended to when it already exists.
    pub loss_log: Option<PathBuf>,
}

/// File name of the checkpoint taken after `step`.
pub fn checkpoint_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("step_{step:08}.ckpt"))
}

/// Fresh run over `config.total_steps` steps. `data_a` and `data_b` are
/// `[N, C, H, W]` image stacks with no correspondence between them.
pub fn train<T: Real>(
    config: TrainingConfig,
    generator: GeneratorConfig,
    discriminator: DiscriminatorConfig,
    data_a: &Tensor<T>,
    data_b: &Tensor<T>,
    options: &TrainOptions,
) -> TrainingResult<(TrainerState<T>, Vec<LossRecord>)> {
    let mut state = TrainerState::new(config, generator, discriminator)?;
    let log = continue_training(&mut state, data_a, data_b, options)?;
    Ok((state, log))
}

/// Runs from `state.step` up to `state.config.total_steps`, returning the
/// records of the steps taken.
pub fn continue_training<T: Real>(
    state: &mut TrainerState<T>,
    data_a: &Tensor<T>,
    data_b: &Tensor<T>,
    options: &TrainOptions,
) -> TrainingResult<Vec<LossRecord>> {
    state.config.validate()?;
    let batch = state.config.batch_size;
    let mut sampler_a = BatchSampler::resume(data_a.shape()[0], batch, state.samplers[0])?;
    let mut sampler_b = BatchSampler::resume(data_b.shape()[0], batch, state.samplers[1])?;
    if let Some(dir) = &options.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|source| TrainingError::Io { path: dir.clone(), source })?;
    }
    let mut writer = options.loss_log.as_deref().map(LossLogWriter::append).transpose()?;
    let mut last_checkpoint: Option<PathBuf> = None;
    let mut records = Vec::new();

    while state.step < state.config.total_steps {
        let batch_a = data_a.select_batch(&sampler_a.next_indices())?;
        let batch_b = data_b.select_batch(&sampler_b.next_indices())?;
        state.samplers = [sampler_a.state(), sampler_b.state()];
        let record = match state.train_step(&batch_a, &batch_b) {
            Ok(r) => r,
            Err(TrainingError::NonFinite { step, field, value, .. }) => {
                log::error!("halting: non-finite {field} at step {step}");
                return Err(TrainingError::NonFinite { step, field, value, last_checkpoint });
            }
            Err(e) => return Err(e),
        };
        if let Some(w) = writer.as_mut() {
            w.write(&record)?;
        }
        let interval = state.config.checkpoint_interval;
        if let Some(dir) = &options.checkpoint_dir {
            if (interval > 0 && state.step.is_multiple_of(interval)) || state.step == state.config.total_steps {
                let path = checkpoint_path(dir, state.step);
                save_checkpoint(state, &path)?;
                last_checkpoint = Some(path);
            }
        }
        if state.step.is_multiple_of(100) {
            log::info!(
                "step {}: cyclic {:.4}/{:.4}, d {:.3}/{:.3}",
                state.step,
                record.cyclic_loss_a,
                record.cyclic_loss_b,
                record.d_loss_a,
                record.d_loss_b
            );
        }
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::{load_checkpoint, read_loss_log};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (TrainingConfig, GeneratorConfig, DiscriminatorConfig, Tensor<f64>, Tensor<f64>) {
        let g = GeneratorConfig { input_size: 16, encoder_channels: vec![4, 8], ..Default::default() };
        let d = DiscriminatorConfig { input_size: 16, encoder_channels: vec![4, 8], feature_dim: 8, ..Default::default() };
        let t = TrainingConfig { batch_size: 2, total_steps: 6, checkpoint_interval: 3, seed: 2, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = Tensor::from_fn(&[5, 3, 16, 16], |_| rng.gen_range(-1.0..1.0));
        let b = Tensor::from_fn(&[5, 3, 16, 16], |_| rng.gen_range(-1.0..1.0));
        (t, g, d, a, b)
    }

    #[test]
    fn resume_from_checkpoint_replays_exactly() {
        let (t, g, d, a, b) = setup();
        let dir = tempfile::tempdir().unwrap();
        let opts = TrainOptions {
            checkpoint_dir: Some(dir.path().to_path_buf()),
            loss_log: Some(dir.path().join("loss.csv")),
        };
        let (full, log) = train(t, g, d, &a, &b, &opts).unwrap();
        assert_eq!(log.len(), 6);
        assert_eq!(read_loss_log(&dir.path().join("loss.csv")).unwrap(), log);

        let mut resumed = load_checkpoint::<f64>(&checkpoint_path(dir.path(), 3)).unwrap();
        let tail = continue_training(&mut resumed, &a, &b, &TrainOptions::default()).unwrap();
        assert_eq!(tail, log[3..]);
        assert_eq!(resumed, full);
    }

    #[test]
    fn dataset_smaller_than_batch_rejected() {
        let (mut t, g, d, a, b) = setup();
        t.batch_size = 6;
        let err = train(t, g, d, &a, &b, &TrainOptions::default()).unwrap_err();
        assert!(matches!(err, TrainingError::Data(_)), "{err}");
    }
}
