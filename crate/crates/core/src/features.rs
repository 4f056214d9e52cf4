//! Discriminator features, unit normalisation, sequence stacking and cosine
//! distance.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::nets::{Discriminator, NetError};
use crate::tensor::{Real, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("cannot normalise or compare a zero vector")]
    ZeroVector,
    #[error("feature lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("frame {frame} missing from window {start}..={end}")]
    MissingFrame { frame: usize, start: usize, end: usize },
    #[error("invalid sequence window: {0}")]
    Window(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("feature file {path}: {detail}")]
    Format { path: PathBuf, detail: String },
}

pub type FeatureResult<T> = std::result::Result<T, FeatureError>;

/// Feature-layer activations of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub source_frame: usize,
    pub domain: String,
}

/// Concatenated member features over the trailing window
/// `start_frame ..= start_frame + length - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceFeature {
    pub values: Vec<f64>,
    pub start_frame: usize,
    pub length: usize,
}

impl SequenceFeature {
    pub fn end_frame(&self) -> usize {
        self.start_frame + self.length - 1
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

impl AsRef<[f64]> for SequenceFeature {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Where unit normalisation happens when building sequence features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StackNormalization {
    /// Each member is normalised before stacking.
    #[default]
    PerFrame,
    /// Raw members are stacked; only the stacked vector is normalised.
    StackedOnly,
}

/// Feature vectors for a batch of images `[N, C, H, W]`, labelled with
/// consecutive frame indices from `first_frame`.
pub fn extract_features<T: Real>(
    d: &Discriminator<T>,
    images: &Tensor<T>,
    first_frame: usize,
    domain: &str,
) -> FeatureResult<Vec<FeatureVector>> {
    let out = d.infer(images)?;
    let dim = d.feature_dim();
    Ok(out
        .features
        .data()
        .chunks(dim)
        .enumerate()
        .map(|(i, row)| FeatureVector {
            values: row.iter().map(|v| v.to_f64().unwrap()).collect(),
            source_frame: first_frame + i,
            domain: domain.to_string(),
        })
        .collect())
}

/// Feature vector of a single image `[C, H, W]` or `[1, C, H, W]`.
pub fn extract_feature<T: Real>(
    d: &Discriminator<T>,
    image: &Tensor<T>,
    frame: usize,
    domain: &str,
) -> FeatureResult<FeatureVector> {
    let batch = match image.shape() {
        [c, h, w] => image.clone().reshape(&[1, *c, *h, *w]).map_err(NetError::from)?,
        _ => image.clone(),
    };
    if batch.shape().first() != Some(&1) {
        return Err(FeatureError::Window(format!("expected one image, got shape {:?}", image.shape())));
    }
    Ok(extract_features(d, &batch, frame, domain)?.remove(0))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales `values` to unit Euclidean length.
pub fn normalize_values(values: &[f64]) -> FeatureResult<Vec<f64>> {
    let n = norm(values);
    if n == 0.0 || !n.is_finite() {
        return Err(FeatureError::ZeroVector);
    }
    Ok(values.iter().map(|v| v / n).collect())
}

pub fn normalize(f: &FeatureVector) -> FeatureResult<FeatureVector> {
    Ok(FeatureVector { values: normalize_values(&f.values)?, ..f.clone() })
}

/// Stacks the features of frames `t - n + 1 ..= t` in temporal order.
///
/// `features` must be sorted by `source_frame`. Members are used as given.
pub fn stack_sequence(features: &[FeatureVector], n: usize, t: usize) -> FeatureResult<SequenceFeature> {
    if n == 0 || n > t + 1 {
        return Err(FeatureError::Window(format!("length {n} ending at frame {t}")));
    }
    let start = t + 1 - n;
    let dim = features.first().map_or(0, |f| f.values.len());
    let mut values = Vec::with_capacity(n * dim);
    for frame in start..=t {
        let idx = features
            .binary_search_by_key(&frame, |f| f.source_frame)
            .map_err(|_| FeatureError::MissingFrame { frame, start, end: t })?;
        let member = &features[idx].values;
        if member.len() != dim {
            return Err(FeatureError::LengthMismatch(dim, member.len()));
        }
        values.extend_from_slice(member);
    }
    Ok(SequenceFeature { values, start_frame: start, length: n })
}

/// Sequence features for every frame that has a complete trailing window of
/// `n` frames, normalised according to `mode`. Output is ordered by end frame.
pub fn stack_all(
    features: &[FeatureVector],
    n: usize,
    mode: StackNormalization,
) -> FeatureResult<Vec<SequenceFeature>> {
    let members: Vec<FeatureVector> = match mode {
        StackNormalization::PerFrame => features.iter().map(normalize).collect::<FeatureResult<_>>()?,
        StackNormalization::StackedOnly => features.to_vec(),
    };
    let mut out = Vec::new();
    for f in &members {
        let t = f.source_frame;
        if t + 1 < n {
            continue;
        }
        match stack_sequence(&members, n, t) {
            Ok(mut s) => {
                s.values = normalize_values(&s.values)?;
                out.push(s);
            }
            Err(FeatureError::MissingFrame { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1 - cos` from a dot product and the two squared norms, clamped to
/// `[0, 2]`. Identical vectors give exactly 0.
pub(crate) fn distance_from_parts(dot: f64, sq_a: f64, sq_b: f64) -> f64 {
    (1.0 - dot / (sq_a * sq_b).sqrt()).clamp(0.0, 2.0)
}

/// Cosine distance `1 - a·b / (|a||b|)` in `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> FeatureResult<f64> {
    if a.len() != b.len() {
        return Err(FeatureError::LengthMismatch(a.len(), b.len()));
    }
    let (sa, sb) = (dot(a, a), dot(b, b));
    if sa == 0.0 || sb == 0.0 {
        return Err(FeatureError::ZeroVector);
    }
    Ok(distance_from_parts(dot(a, b), sa, sb))
}

const FEATURE_MAGIC: &[u8; 8] = b"PLGNFEAT";
const FEATURE_VERSION: u32 = 1;

/// Contents of a feature file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub feature_dim: usize,
    pub normalized: bool,
    pub features: Vec<FeatureVector>,
}

/// Binary record stream: a header (magic, version, feature_dim, normalised
/// flag, count) then per record the frame index, domain label, dimension
/// and little-endian f64 values.
pub fn write_features(path: &Path, file: &FeatureFile) -> FeatureResult<()> {
    let mut out = Vec::new();
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(file.feature_dim as u32).to_le_bytes());
    out.push(file.normalized as u8);
    out.extend_from_slice(&(file.features.len() as u64).to_le_bytes());
    for f in &file.features {
        if f.values.len() != file.feature_dim {
            return Err(FeatureError::LengthMismatch(file.feature_dim, f.values.len()));
        }
        out.extend_from_slice(&(f.source_frame as u64).to_le_bytes());
        out.extend_from_slice(&(f.domain.len() as u16).to_le_bytes());
        out.extend_from_slice(f.domain.as_bytes());
        out.extend_from_slice(&(f.values.len() as u32).to_le_bytes());
        for v in &f.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|source| FeatureError::Io { path: path.to_path_buf(), source })
}

pub fn read_features(path: &Path) -> FeatureResult<FeatureFile> {
    let bytes = fs::read(path).map_err(|source| FeatureError::Io { path: path.to_path_buf(), source })?;
    let bad = |detail: &str| FeatureError::Format { path: path.to_path_buf(), detail: detail.to_string() };
    let mut pos = 0usize;
    let mut take = |n: usize| -> FeatureResult<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
        pos += n;
        Ok(s)
    };
    if take(8)? != FEATURE_MAGIC {
        return Err(bad("bad magic"));
    }
    if u32::from_le_bytes(take(4)?.try_into().unwrap()) != FEATURE_VERSION {
        return Err(bad("unsupported version"));
    }
    let feature_dim = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let normalized = take(1)?[0] != 0;
    let count = u64::from_le_bytes(take(8)?.try_into().unwrap());
    let mut features = Vec::new();
    for _ in 0..count {
        let source_frame = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let dlen = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
        let domain = String::from_utf8(take(dlen)?.to_vec()).map_err(|_| bad("domain is not UTF-8"))?;
        let dim = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        if dim != feature_dim {
            return Err(bad("record dimension differs from header"));
        }
        let values = take(8 * dim)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        features.push(FeatureVector { values, source_frame, domain });
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(FeatureFile { feature_dim, normalized, features })
}

/// CSV export (`frame,domain,f0,f1,...`) for inspection.
pub fn write_features_text(path: &Path, features: &[FeatureVector]) -> FeatureResult<()> {
    let io = |source| FeatureError::Io { path: path.to_path_buf(), source };
    let dim = features.first().map_or(0, |f| f.values.len());
    let mut out = String::from("frame,domain");
    for i in 0..dim {
        out.push_str(&format!(",f{i}"));
    }
    out.push('\n');
    for f in features {
        out.push_str(&format!("{},{}", f.source_frame, f.domain));
        for v in &f.values {
            out.push_str(&format!(",{v:?}"));
        }
        out.push('\n');
    }
    fs::File::create(path).and_then(|mut w| w.write_all(out.as_bytes())).map_err(io)
}
