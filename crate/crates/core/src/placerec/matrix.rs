use super::{PlaceRecError, PlaceRecResult};
use crate::features::{distance_from_parts, dot, FeatureError};

/// Query-by-database cosine distances, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> PlaceRecResult<Self> {
        if rows == 0 || cols == 0 {
            return Err(PlaceRecError::Empty("distance matrix"));
        }
        if values.len() != rows * cols {
            return Err(PlaceRecError::Invalid(format!("{} values for a {rows}x{cols} matrix", values.len())));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect(), ..*self }
    }
}

/// Exhaustive pairwise cosine distances between `queries` and `database`.
pub fn distance_matrix<Q: AsRef<[f64]>, D: AsRef<[f64]>>(queries: &[Q], database: &[D]) -> PlaceRecResult<DistanceMatrix> {
    if queries.is_empty() {
        return Err(PlaceRecError::Empty("query set"));
    }
    if database.is_empty() {
        return Err(PlaceRecError::Empty("database"));
    }
    let dim = queries[0].as_ref().len();
    for v in queries.iter().map(AsRef::as_ref).chain(database.iter().map(AsRef::as_ref)) {
        if v.len() != dim {
            return Err(PlaceRecError::Dimension(dim, v.len()));
        }
    }
    let squares = |set: &[&[f64]]| -> PlaceRecResult<Vec<f64>> {
        set.iter()
            .map(|v| {
                let s = dot(v, v);
                if s == 0.0 {
                    Err(PlaceRecError::Feature(FeatureError::ZeroVector))
                } else {
                    Ok(s)
                }
            })
            .collect()
    };
    let q: Vec<&[f64]> = queries.iter().map(AsRef::as_ref).collect();
    let d: Vec<&[f64]> = database.iter().map(AsRef::as_ref).collect();
    let (sq, sd) = (squares(&q)?, squares(&d)?);
    let mut values = Vec::with_capacity(q.len() * d.len());
    for (qi, &qs) in q.iter().zip(&sq) {
        for (dj, &ds) in d.iter().zip(&sd) {
            values.push(distance_from_parts(dot(qi, dj), qs, ds));
        }
    }
    DistanceMatrix::new(q.len(), d.len(), values)
}

/// Best database entry for one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub index: usize,
    pub distance: f64,
}

/// Per-row minimum; ties go to the lowest column index.
pub fn nearest_neighbor(m: &DistanceMatrix) -> Vec<Match> {
    (0..m.rows())
        .map(|r| {
            let mut best = Match { index: 0, distance: m.get(r, 0) };
            for (c, &v) in m.row(r).iter().enumerate().skip(1) {
                if v < best.distance {
                    best = Match { index: c, distance: v };
                }
            }
            best
        })
        .collect()
}
