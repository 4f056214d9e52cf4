use super::{DataError, DataResult};

/// Test/train partition of two frame-aligned sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<R> {
    /// First half of each sequence, still frame-aligned.
    pub test_a: Vec<R>,
    pub test_b: Vec<R>,
    /// First half of A's second half.
    pub train_a: Vec<R>,
    /// Second half of B's second half.
    pub train_b: Vec<R>,
}

/// Frame ranges `(test, train_a, train_b)` for sequences of `len` frames.
pub fn split_ranges(len: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>, std::ops::Range<usize>) {
    let half = len / 2;
    let quarter = half + (len - half) / 2;
    (0..half, half..quarter, quarter..len)
}

/// Test on the first half; train A on the third quarter and B on the last
/// quarter, so no cross-domain pair is ever seen in training.
pub fn split_dataset<R: Clone>(seq_a: &[R], seq_b: &[R]) -> DataResult<DatasetSplit<R>> {
    split_dataset_with(seq_a, seq_b, 1.0)
}

/// As [`split_dataset`], keeping only the leading `train_fraction` of each
/// training range.
pub fn split_dataset_with<R: Clone>(seq_a: &[R], seq_b: &[R], train_fraction: f64) -> DataResult<DatasetSplit<R>> {
    if seq_a.len() != seq_b.len() {
        return Err(DataError::LengthMismatch { a: seq_a.len(), b: seq_b.len() });
    }
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(DataError::Invalid(format!("train_fraction must lie in (0, 1], got {train_fraction}")));
    }
    let (test, ta, tb) = split_ranges(seq_a.len());
    let keep = |r: std::ops::Range<usize>| {
        let n = ((r.len() as f64) * train_fraction).round() as usize;
        r.start..r.start + n.max(1).min(r.len())
    };
    Ok(DatasetSplit {
        test_a: seq_a[test.clone()].to_vec(),
        test_b: seq_b[test].to_vec(),
        train_a: seq_a[keep(ta)].to_vec(),
        train_b: seq_b[keep(tb)].to_vec(),
    })
}
