use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use placegan::data::{split_dataset_with, stack_records};
use placegan::training::{continue_training, load_checkpoint, read_loss_log, LossLogWriter, TrainOptions};
use placegan::{LossRecord, TrainerState};

use crate::sequences::load_sequence;
use crate::RunConfig;

pub const LOSS_LOG_FILE: &str = "losses.csv";

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training seed [default: config `training.seed`, 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Total optimisation steps [default: config `training.total_steps`, 2000]
    #[arg(long)]
    pub steps: Option<u64>,
    /// Keep every n-th frame [default: config `data.stride`, 1]
    #[arg(long)]
    pub stride: Option<usize>,
    /// Run directory; receives checkpoints/, losses.csv and config.toml
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    /// Continue from the newest checkpoint in the run directory [default: off]
    #[arg(long, default_value_t = false)]
    pub resume: bool,
}

/// Newest `step_*.ckpt` in `dir`.
pub(crate) fn latest_checkpoint(dir: &Path) -> Result<Option<PathBuf>> {
    if !dir.is_dir() {
        return Ok(None);
    }
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let step = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("step_")?.strip_suffix(".ckpt")?.parse::<u64>().ok());
        if let Some(step) = step {
            if best.as_ref().is_none_or(|(s, _)| step > *s) {
                best = Some((step, path));
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}

/// Drops log rows past `step`, left behind by an interrupted run.
fn truncate_log(path: &Path, step: u64) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let keep: Vec<LossRecord> = read_loss_log(path)?.into_iter().filter(|r| r.step <= step).collect();
    fs::remove_file(path)?;
    let mut w = LossLogWriter::append(path)?;
    for r in &keep {
        w.write(r)?;
    }
    Ok(())
}

pub fn train(config: &RunConfig, args: &TrainArgs) -> Result<TrainerState<f32>> {
    let mut config = config.clone();
    if let Some(seed) = args.seed {
        config.training.seed = seed;
    }
    if let Some(steps) = args.steps {
        config.training.total_steps = steps;
    }
    if let Some(stride) = args.stride {
        config.data.stride = stride;
    }
    config.training.validate()?;

    let size = config.generator.input_size;
    let seq_a = load_sequence(&config.data.dir_a, size, config.data.stride, "A", &config.data)?;
    let seq_b = load_sequence(&config.data.dir_b, size, config.data.stride, "B", &config.data)?;
    let split = split_dataset_with(&seq_a, &seq_b, config.data.train_fraction)?;
    log::info!("training on {} A and {} B frames", split.train_a.len(), split.train_b.len());
    let data_a = stack_records(&split.train_a)?;
    let data_b = stack_records(&split.train_b)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let ckpt_dir = args.out.join("checkpoints");
    let log_path = args.out.join(LOSS_LOG_FILE);
    let mut state = if args.resume {
        let Some(path) = latest_checkpoint(&ckpt_dir)? else {
            bail!("--resume: no checkpoint in {}", ckpt_dir.display());
        };
        log::info!("resuming from {}", path.display());
        let mut state = load_checkpoint::<f32>(&path)?;
        if state.generator_config != config.generator || state.discriminator_config != config.discriminator {
            bail!("network config differs from the checkpoint {}", path.display());
        }
        state.config.total_steps = config.training.total_steps;
        truncate_log(&log_path, state.step)?;
        state
    } else {
        if log_path.exists() {
            fs::remove_file(&log_path)?;
        }
        while let Some(stale) = latest_checkpoint(&ckpt_dir)? {
            log::warn!("removing stale {}", stale.display());
            fs::remove_file(&stale)?;
        }
        TrainerState::new(config.training.clone(), config.generator.clone(), config.discriminator.clone())?
    };
    fs::write(args.out.join("config.toml"), config.render())?;

    let options = TrainOptions { checkpoint_dir: Some(ckpt_dir), loss_log: Some(log_path) };
    let records = continue_training(&mut state, &data_a, &data_b, &options)?;
    if let Some(last) = records.last() {
        log::info!(
            "finished at step {}: cyclic {:.4}/{:.4}",
            last.step,
            last.cyclic_loss_a,
            last.cyclic_loss_b
        );
    }
    Ok(state)
}
