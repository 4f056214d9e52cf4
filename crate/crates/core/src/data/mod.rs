//! Image ingestion, the temporal train/test split, the synthetic two-domain
//! journey generator, Canny edges and seeded batching.

mod batch;
mod canny;
mod images;
mod split;
mod synth;

pub use batch::{epoch_order, BatchSampler, SamplerState};
pub use canny::{canny_edges, canny_mask, edge_record, gaussian_blur, grayscale, sobel, CANNY_HIGH, CANNY_LOW, CANNY_SIGMA};
pub use images::{
    image_to_tensor, list_images, load_image_dir, resize_bilinear, save_png, stack_records, tensor_to_image, ImageRecord,
    LoadOptions, LoadedImages,
};
pub use split::{split_dataset, split_dataset_with, split_ranges, DatasetSplit};
pub use synth::{
    camera_positions, render_regions, synthesize, synthesize_paired_domains, write_synthetic_dataset, Region, StationaryRuns,
    SynthConfig, MANIFEST_HEADER,
};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("batch size {batch_size} does not fit {records} records")]
    BatchSize { batch_size: usize, records: usize },
    #[error("sampler state: {0}")]
    Sampler(String),
    #[error("no decodable images in {0}")]
    EmptyDirectory(PathBuf),
    #[error("sequences differ in length: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("invalid thresholds: need 0 < low ({low}) < high ({high})")]
    Thresholds { low: f64, high: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
}

pub type DataResult<T> = std::result::Result<T, DataError>;
