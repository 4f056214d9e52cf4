//! Loading image sequences and pushing them through the trained networks.

use std::path::Path;

use anyhow::{Context, Result};
use placegan::data::{edge_record, load_image_dir, stack_records, LoadOptions};
use placegan::features::extract_features;
use placegan::{Discriminator, FeatureVector, Generator, ImageRecord};

use crate::config::DataSection;

/// Images per network call; bounds peak memory.
const CHUNK: usize = 32;

pub(crate) fn load_sequence(dir: &Path, size: usize, stride: usize, domain: &str, data: &DataSection) -> Result<Vec<ImageRecord>> {
    let options = LoadOptions { size, stride, domain: domain.to_string() };
    let loaded = load_image_dir(dir, &options).with_context(|| format!("loading {}", dir.display()))?;
    if domain == "B" && data.b_as_edges {
        return loaded
            .records
            .iter()
            .map(|r| edge_record(r, data.canny_low, data.canny_high).map_err(Into::into))
            .collect();
    }
    Ok(loaded.records)
}

/// Features of `records`, optionally translated by `g` first. Frame labels
/// follow the record order.
pub(crate) fn embed(
    d: &Discriminator<f32>,
    g: Option<&Generator<f32>>,
    records: &[ImageRecord],
    domain: &str,
) -> Result<Vec<FeatureVector>> {
    let mut out = Vec::with_capacity(records.len());
    for (k, chunk) in records.chunks(CHUNK).enumerate() {
        let mut x = stack_records(chunk)?;
        if let Some(g) = g {
            x = g.infer(&x)?;
        }
        out.extend(extract_features(d, &x, k * CHUNK, domain)?);
    }
    Ok(out)
}
