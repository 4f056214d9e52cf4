//! Command-line pipeline: synthesize data, train the coupled networks,
//! translate images, evaluate place recognition and plot PR curves.

pub mod config;
mod match_eval;
mod plot;
mod sequences;
mod synth;
mod train;
mod translate;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

pub use config::{Direction, RunConfig};
pub use match_eval::{match_eval, MatchEvalArgs, SUMMARY_FILE};
pub use plot::{parse_svg_curves, plot, render_svg, PlotArgs};
pub use synth::{synth, SynthArgs};
pub use train::{train, TrainArgs, LOSS_LOG_FILE};
pub use translate::{translate, TranslateArgs, TranslationReport};

/// Written into an output directory when a command fails part way.
pub const FAILURE_MARKER: &str = "FAILED";

#[derive(Debug, Parser)]
#[command(name = "placegan", version, about = "Coupled GAN translation and cross-season place recognition")]
pub struct Cli {
    /// Run config (TOML) [default: built-in defaults, see `placegan config`]
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a paired two-domain synthetic journey to disk.
    Synth(SynthArgs),
    /// Train the generators and discriminators.
    Train(TrainArgs),
    /// Translate a directory of images with a trained generator.
    Translate(TranslateArgs),
    /// Translate, embed, match and evaluate a query sequence against a database.
    MatchEval(MatchEvalArgs),
    /// Draw PR curve files as an SVG plot.
    Plot(PlotArgs),
    /// Print the effective config with every default filled in.
    Config(ConfigArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Write to this file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

/// Runs `f` with `out` as its output directory. On failure a marker file with
/// the error is left in `out`; a stale marker is removed on success.
pub fn guarded<T>(out: &Path, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let marker = out.join(FAILURE_MARKER);
    let _ = fs::remove_file(&marker);
    let result = f();
    if let Err(e) = &result {
        if out.is_dir() {
            let _ = fs::write(&marker, format!("{e:#}\n"));
        }
    }
    result
}

pub fn run(cli: Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(args) => guarded(&args.out.clone(), || synth(&config, &args)),
        Command::Train(args) => guarded(&args.out.clone(), || train(&config, &args).map(|_| ())),
        Command::Translate(args) => guarded(&args.out.clone(), || translate(&config, &args).map(|r| println!("{r}"))),
        Command::MatchEval(args) => guarded(&args.out.clone(), || match_eval(&config, &args).map(|_| ())),
        Command::Plot(args) => plot(&args),
        Command::Config(args) => {
            let text = config.render();
            match args.out {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display())),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    }
}
