use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use placegan::data::write_synthetic_dataset;
use placegan::SynthConfig;

use crate::RunConfig;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// World seed [default: config `synth.seed`, 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Frames per domain [default: config `synth.count`, 2000]
    #[arg(long)]
    pub count: Option<usize>,
    /// Image side in pixels [default: config `synth.size`, 64]
    #[arg(long)]
    pub size: Option<usize>,
    /// Output directory; receives A/, B/ and manifest.csv
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
}

pub fn synth(config: &RunConfig, args: &SynthArgs) -> Result<()> {
    let s = &config.synth;
    let cfg = SynthConfig {
        seed: args.seed.unwrap_or(s.seed),
        count: args.count.unwrap_or(s.count),
        size: args.size.unwrap_or(s.size),
        speed: s.speed,
        stationary: s.stationary(),
    };
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_synthetic_dataset(&args.out, &cfg).with_context(|| format!("writing dataset to {}", args.out.display()))?;
    log::info!("wrote {} frames per domain to {}", cfg.count, args.out.display());
    Ok(())
}
