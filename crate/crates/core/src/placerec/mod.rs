//! Nearest-neighbour place recognition over feature distances and its
//! precision-recall evaluation.

mod export;
mod matrix;
mod pr;

pub use export::{heatmap_pixels, read_pr_csv, write_heatmap, write_pr_csv, PR_CSV_HEADER};
pub use matrix::{distance_matrix, nearest_neighbor, DistanceMatrix, Match};
pub use pr::{
    evaluate_pr, max_attainable_recall, sequence_matches, summarize, sweep_sequence_lengths, threshold_grid,
    GroundTruth, PrCurve, PrPoint, PrSummary, DEFAULT_THRESHOLD_POINTS, DEFAULT_TOLERANCE,
};

use std::path::PathBuf;

use crate::features::FeatureError;

#[derive(Debug, thiserror::Error)]
pub enum PlaceRecError {
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("feature dimensions differ: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("{matches} matches for {queries} queries")]
    Coverage { matches: usize, queries: usize },
    #[error("sequence length {length} invalid for {frames} frames")]
    SequenceLength { length: usize, frames: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
}

pub type PlaceRecResult<T> = std::result::Result<T, PlaceRecError>;
