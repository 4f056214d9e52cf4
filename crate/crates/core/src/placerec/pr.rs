use super::{distance_matrix, nearest_neighbor, Match, PlaceRecError, PlaceRecResult};
use crate::features::{stack_all, FeatureVector, StackNormalization};

pub const DEFAULT_TOLERANCE: usize = 2;
pub const DEFAULT_THRESHOLD_POINTS: usize = 200;

/// `points` evenly spaced thresholds over `[0, 2]`, both ends included.
pub fn threshold_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![2.0],
        _ => (0..points).map(|i| 2.0 * i as f64 / (points - 1) as f64).collect(),
    }
}

/// Query `i` shows the same place as database frame `alignment[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub alignment: Vec<usize>,
    /// Matches within this many frames of the aligned frame count as correct.
    pub tolerance: usize,
}

impl GroundTruth {
    /// Query frame `i` corresponds to database frame `i`.
    pub fn identity(frames: usize, tolerance: usize) -> Self {
        Self { alignment: (0..frames).collect(), tolerance }
    }

    pub fn len(&self) -> usize {
        self.alignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alignment.is_empty()
    }

    pub fn is_correct(&self, query: usize, db_frame: usize) -> bool {
        self.alignment[query].abs_diff(db_frame) <= self.tolerance
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision and recall per distance threshold for one sequence length.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub sequence_length: usize,
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    /// Area under the curve as a right-endpoint sum over increasing recall.
    pub fn area(&self) -> f64 {
        let mut prev = 0.0;
        let mut area = 0.0;
        for p in &self.points {
            area += (p.recall - prev) * p.precision;
            prev = p.recall;
        }
        area
    }

    pub fn max_recall(&self) -> f64 {
        self.points.iter().map(|p| p.recall).fold(0.0, f64::max)
    }
}

/// Scores matches against ground truth at every threshold.
///
/// `matches[i]` is the best database frame for query `i`, or `None` when the
/// query could not be matched (it still counts towards recall's
/// denominator). A match is accepted when its distance is at most the
/// threshold; precision is 1 when nothing is accepted. Thresholds must be
/// non-decreasing.
pub fn evaluate_pr(matches: &[Option<Match>], ground_truth: &GroundTruth, thresholds: &[f64]) -> PlaceRecResult<PrCurve> {
    if matches.is_empty() {
        return Err(PlaceRecError::Empty("query set"));
    }
    if matches.len() != ground_truth.len() {
        return Err(PlaceRecError::Coverage { matches: matches.len(), queries: ground_truth.len() });
    }
    if thresholds.iter().any(|t| !t.is_finite()) || thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(PlaceRecError::Invalid("thresholds must be finite and non-decreasing".into()));
    }
    let mut scored: Vec<(f64, bool)> = matches
        .iter()
        .enumerate()
        .filter_map(|(q, m)| m.map(|m| (m.distance, ground_truth.is_correct(q, m.index))))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = matches.len() as f64;
    let (mut accepted, mut correct, mut next) = (0usize, 0usize, 0usize);
    let mut points = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        while next < scored.len() && scored[next].0 <= threshold {
            accepted += 1;
            correct += scored[next].1 as usize;
            next += 1;
        }
        let precision = if accepted == 0 { 1.0 } else { correct as f64 / accepted as f64 };
        points.push(PrPoint { threshold, precision, recall: correct as f64 / total });
    }
    Ok(PrCurve { sequence_length: 1, points })
}

/// Upper bound on recall when the first `length - 1` of `queries` frames
/// cannot form a window.
pub fn max_attainable_recall(length: usize, queries: usize) -> f64 {
    (queries + 1).saturating_sub(length) as f64 / queries as f64
}

/// Nearest database window for every query frame with a complete trailing
/// window of `length` frames. The result is indexed like `queries`; match
/// indices are database frame numbers (window end frames).
pub fn sequence_matches(
    queries: &[FeatureVector],
    database: &[FeatureVector],
    length: usize,
    mode: StackNormalization,
) -> PlaceRecResult<Vec<Option<Match>>> {
    let frames = queries.len().min(database.len());
    if length == 0 || length > frames {
        return Err(PlaceRecError::SequenceLength { length, frames });
    }
    let q = stack_all(queries, length, mode)?;
    let d = stack_all(database, length, mode)?;
    if q.is_empty() || d.is_empty() {
        return Err(PlaceRecError::SequenceLength { length, frames });
    }
    let nn = nearest_neighbor(&distance_matrix(&q, &d)?);
    let mut out = vec![None; queries.len()];
    for (seq, m) in q.iter().zip(nn) {
        let pos = queries
            .binary_search_by_key(&seq.end_frame(), |f| f.source_frame)
            .expect("window end frame is a query frame");
        out[pos] = Some(Match { index: d[m.index].end_frame(), distance: m.distance });
    }
    Ok(out)
}

/// One curve per sequence length.
pub fn sweep_sequence_lengths(
    queries: &[FeatureVector],
    database: &[FeatureVector],
    lengths: &[usize],
    ground_truth: &GroundTruth,
    thresholds: &[f64],
    mode: StackNormalization,
) -> PlaceRecResult<Vec<PrCurve>> {
    lengths
        .iter()
        .map(|&n| {
            let matches = sequence_matches(queries, database, n, mode)?;
            let mut curve = evaluate_pr(&matches, ground_truth, thresholds)?;
            curve.sequence_length = n;
            Ok(curve)
        })
        .collect()
}

/// Headline numbers of one curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrSummary {
    pub sequence_length: usize,
    /// Best precision among thresholds with non-zero recall (0 if none).
    pub max_precision: f64,
    /// Largest recall reached at precision 1.
    pub recall_at_full_precision: f64,
    pub max_recall: f64,
    pub area: f64,
}

pub fn summarize(curve: &PrCurve) -> PrSummary {
    let max_precision = curve.points.iter().filter(|p| p.recall > 0.0).map(|p| p.precision).fold(0.0, f64::max);
    let recall_at_full_precision =
        curve.points.iter().filter(|p| p.precision == 1.0).map(|p| p.recall).fold(0.0, f64::max);
    PrSummary {
        sequence_length: curve.sequence_length,
        max_precision,
        recall_at_full_precision,
        max_recall: curve.max_recall(),
        area: curve.area(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_endpoints() {
        let g = threshold_grid(DEFAULT_THRESHOLD_POINTS);
        assert_eq!(g.len(), 200);
        assert_eq!((g[0], g[199]), (0.0, 2.0));
    }

    #[test]
    fn all_correct_and_all_wrong() {
        let gt = GroundTruth::identity(4, 0);
        let good: Vec<_> = (0..4).map(|i| Some(Match { index: i, distance: 0.1 * i as f64 })).collect();
        let curve = evaluate_pr(&good, &gt, &threshold_grid(50)).unwrap();
        assert!(curve.points.iter().all(|p| p.precision == 1.0));
        assert_eq!(curve.max_recall(), 1.0);

        let bad: Vec<_> = (0..4).map(|i| Some(Match { index: i + 3, distance: 0.3 })).collect();
        let curve = evaluate_pr(&bad, &gt, &threshold_grid(50)).unwrap();
        for p in &curve.points {
            assert_eq!(p.precision, if p.threshold >= 0.3 { 0.0 } else { 1.0 });
            assert_eq!(p.recall, 0.0);
        }
    }

    #[test]
    fn tolerance_window() {
        let gt = GroundTruth::identity(3, 2);
        assert!(gt.is_correct(0, 2));
        assert!(!gt.is_correct(0, 3));
        assert!(gt.is_correct(2, 0));
    }

    #[test]
    fn unmatched_queries_bound_recall() {
        let gt = GroundTruth::identity(4, 0);
        let m = vec![None, Some(Match { index: 1, distance: 0.0 }), Some(Match { index: 2, distance: 0.0 }), None];
        let curve = evaluate_pr(&m, &gt, &[0.0, 2.0]).unwrap();
        assert_eq!(curve.max_recall(), 0.5);
    }

    #[test]
    fn rejects_bad_inputs() {
        let gt = GroundTruth::identity(2, 0);
        assert!(evaluate_pr(&[], &GroundTruth::identity(0, 0), &[1.0]).is_err());
        assert!(evaluate_pr(&[None], &gt, &[1.0]).is_err());
        assert!(evaluate_pr(&[None, None], &gt, &[1.0, 0.5]).is_err());
    }

    fn features(n: usize, dim: usize, seed: u64) -> Vec<FeatureVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| FeatureVector {
                values: (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                source_frame: i,
                domain: "a".into(),
            })
            .collect()
    }

    #[test]
    fn self_matching_sweep_reaches_exclusion_bound() {
        let f = features(12, 5, 3);
        let gt = GroundTruth::identity(12, 0);
        let curves =
            sweep_sequence_lengths(&f, &f, &[1, 3, 5], &gt, &threshold_grid(20), StackNormalization::PerFrame).unwrap();
        for c in &curves {
            assert_eq!(c.max_recall(), max_attainable_recall(c.sequence_length, 12));
            assert!(c.points.iter().all(|p| p.precision == 1.0));
        }
        assert_eq!(max_attainable_recall(5, 12), 8.0 / 12.0);
        assert!(sequence_matches(&f, &f, 13, StackNormalization::PerFrame).is_err());
        assert!(sequence_matches(&f, &f, 0, StackNormalization::PerFrame).is_err());
    }

    #[test]
    fn area_of_perfect_curve_is_max_recall() {
        let f = features(10, 4, 1);
        let gt = GroundTruth::identity(10, 0);
        let c = &sweep_sequence_lengths(&f, &f, &[3], &gt, &threshold_grid(10), StackNormalization::PerFrame).unwrap()[0];
        assert!((c.area() - 0.8).abs() < 1e-12);
        let s = summarize(c);
        assert_eq!((s.max_precision, s.recall_at_full_precision, s.sequence_length), (1.0, 0.8, 3));
    }
}
