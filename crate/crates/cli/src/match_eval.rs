use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use placegan::placerec::{
    distance_matrix, summarize, sweep_sequence_lengths, threshold_grid, write_heatmap, write_pr_csv, PrSummary,
};
use placegan::training::load_checkpoint;
use placegan::{GroundTruth, PrCurve};

use crate::sequences::{embed, load_sequence};
use crate::{Direction, RunConfig};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const HEATMAP_FILE: &str = "heatmap.png";

#[derive(Debug, Args)]
pub struct MatchEvalArgs {
    /// Checkpoint written by `train`
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Query sequence directory (frame i is the same place as database frame i)
    #[arg(long)]
    pub query: PathBuf,
    /// Database sequence directory
    #[arg(long)]
    pub database: PathBuf,
    /// Output directory for pr_n*.csv, heatmap.png and summary.csv
    #[arg(long, default_value = "eval")]
    pub out: PathBuf,
    /// Query domain and embedding [default: config `eval.direction`, b-to-a]
    #[arg(long, value_enum)]
    pub direction: Option<Direction>,
    /// Comma-separated sequence lengths [default: config `eval.lengths`, 1,2,5,10]
    #[arg(long, value_delimiter = ',')]
    pub lengths: Option<Vec<usize>>,
    /// Number of distance thresholds on [0, 2] [default: config `eval.threshold_points`, 200]
    #[arg(long)]
    pub threshold_grid: Option<usize>,
    /// Correct-match tolerance in frames [default: config `eval.tolerance_frames`, 2]
    #[arg(long)]
    pub tolerance_frames: Option<usize>,
    /// Keep every n-th frame of both sequences [default: config `data.stride`, 1]
    #[arg(long)]
    pub stride: Option<usize>,
}

pub fn pr_file_name(length: usize) -> String {
    format!("pr_n{length}.csv")
}

pub fn match_eval(config: &RunConfig, args: &MatchEvalArgs) -> Result<(Vec<PrCurve>, Vec<PrSummary>)> {
    let eval = &config.eval;
    let direction = args.direction.unwrap_or(eval.direction);
    let lengths = args.lengths.clone().unwrap_or_else(|| eval.lengths.clone());
    let points = args.threshold_grid.unwrap_or(eval.threshold_points);
    let tolerance = args.tolerance_frames.unwrap_or(eval.tolerance_frames);
    let stride = args.stride.unwrap_or(config.data.stride);
    if lengths.is_empty() {
        bail!("no sequence lengths given");
    }
    if points < 2 {
        bail!("threshold grid needs at least 2 points, got {points}");
    }

    let state = load_checkpoint::<f32>(&args.checkpoint)?;
    let nets = &state.nets;
    // (query domain, database domain, query generator, discriminator)
    let (qd, dd, g, d) = match direction {
        Direction::BToA => ("B", "A", Some(&nets.g_a), &nets.d_a),
        Direction::AToB => ("A", "B", Some(&nets.g_b), &nets.d_b),
        Direction::A => ("B", "A", None, &nets.d_a),
        Direction::B => ("A", "B", None, &nets.d_b),
    };
    let size = state.discriminator_config.input_size;
    let queries = load_sequence(&args.query, size, stride, qd, &config.data)?;
    let database = load_sequence(&args.database, size, stride, dd, &config.data)?;
    let fq = embed(d, g, &queries, qd)?;
    let fd = embed(d, None, &database, dd)?;

    let gt = GroundTruth::identity(fq.len(), tolerance);
    let curves = sweep_sequence_lengths(&fq, &fd, &lengths, &gt, &threshold_grid(points), eval.normalization)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for c in &curves {
        write_pr_csv(std::slice::from_ref(c), &args.out.join(pr_file_name(c.sequence_length)))?;
    }
    let m = distance_matrix(&fq, &fd)?;
    write_heatmap(&m, eval.heatmap_clip, &args.out.join(HEATMAP_FILE))?;

    let summaries: Vec<PrSummary> = curves.iter().map(summarize).collect();
    let mut text = String::from("n,max_precision,recall_at_full_precision,max_recall,area\n");
    for s in &summaries {
        let _ = writeln!(
            text,
            "{},{:?},{:?},{:?},{:?}",
            s.sequence_length, s.max_precision, s.recall_at_full_precision, s.max_recall, s.area
        );
        log::info!(
            "n={}: max precision {:.3}, recall at full precision {:.3}, max recall {:.3}",
            s.sequence_length,
            s.max_precision,
            s.recall_at_full_precision,
            s.max_recall
        );
    }
    fs::write(args.out.join(SUMMARY_FILE), text)?;
    Ok((curves, summaries))
}
