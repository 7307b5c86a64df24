//! The protected resource: deterministic k-means clustering.
//!
//! Centroids start at the first `k` points in input order. Each iteration
//! assigns every point to its nearest centroid (ties go to the lower index),
//! then moves each centroid to the mean of its points. A centroid with no
//! points stays where it was. Iteration stops once assignments repeat or
//! `max_iters` is reached.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MiningError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("k = {k} exceeds the number of points ({points})")]
    KTooLarge { k: usize, points: usize },
    #[error("line {line}: expected {expected} fields, found {found}")]
    DimensionMismatch {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: `{field}` is not a finite number")]
    BadNumber { line: u64, field: String },
    #[error("{0}")]
    BadParameter(String),
}

impl MiningError {
    pub fn code(&self) -> &'static str {
        match self {
            MiningError::EmptyDataset => "EMPTY_DATASET",
            MiningError::KTooLarge { .. } => "K_TOO_LARGE",
            MiningError::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            MiningError::BadNumber { .. } | MiningError::BadParameter(_) => "BAD_REQUEST",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self, MiningError> {
        let dim = points.first().ok_or(MiningError::EmptyDataset)?.len();
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(MiningError::DimensionMismatch {
                    line: i as u64 + 1,
                    expected: dim,
                    found: p.len(),
                });
            }
            if let Some(x) = p.iter().find(|x| !x.is_finite()) {
                return Err(MiningError::BadNumber {
                    line: i as u64 + 1,
                    field: x.to_string(),
                });
            }
        }
        Ok(Dataset { points, dim })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One point per line, comma-separated numeric fields, no header.
pub fn parse_dataset(text: &str) -> Result<Dataset, MiningError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut dim = None;
    for row in reader.records() {
        let row = row.map_err(|e| MiningError::BadParameter(e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        let expected = *dim.get_or_insert(row.len());
        if row.len() != expected {
            return Err(MiningError::DimensionMismatch {
                line,
                expected,
                found: row.len(),
            });
        }
        let point = row
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| MiningError::BadNumber {
                        line,
                        field: field.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        points.push(point);
    }
    Dataset::new(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub iterations_run: usize,
    pub sse: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Sum of squared distances from each point to its assigned centroid.
pub fn sse(data: &Dataset, centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    data.points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum()
}

/// Validates `k` and `max_iters` against `data` without clustering.
pub fn check_params(data: &Dataset, k: usize, max_iters: usize) -> Result<(), MiningError> {
    if data.is_empty() {
        return Err(MiningError::EmptyDataset);
    }
    if k == 0 {
        return Err(MiningError::BadParameter("k must be at least 1".into()));
    }
    if k > data.len() {
        return Err(MiningError::KTooLarge {
            k,
            points: data.len(),
        });
    }
    if max_iters == 0 {
        return Err(MiningError::BadParameter(
            "max_iters must be at least 1".into(),
        ));
    }
    Ok(())
}

pub fn kmeans(data: &Dataset, k: usize, max_iters: usize) -> Result<ClusteringResult, MiningError> {
    kmeans_traced(data, k, max_iters, |_| {})
}

/// [`kmeans`], reporting the SSE after every completed iteration.
pub fn kmeans_traced(
    data: &Dataset,
    k: usize,
    max_iters: usize,
    mut on_iteration: impl FnMut(f64),
) -> Result<ClusteringResult, MiningError> {
    check_params(data, k, max_iters)?;

    let mut centroids: Vec<Vec<f64>> = data.points[..k].to_vec();
    let mut assignments: Vec<usize> = Vec::new();
    let mut iterations_run = 0;

    while iterations_run < max_iters {
        iterations_run += 1;
        let next: Vec<usize> = data.points.iter().map(|p| nearest(p, &centroids)).collect();
        let changed = next != assignments;
        assignments = next;

        let mut sums = vec![vec![0.0; data.dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in data.points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for ((c, s), &n) in centroids.iter_mut().zip(sums).zip(&counts) {
            if n > 0 {
                *c = s.into_iter().map(|v| v / n as f64).collect();
            }
        }
        on_iteration(sse(data, &centroids, &assignments));
        if !changed {
            break;
        }
    }

    let sse = sse(data, &centroids, &assignments);
    Ok(ClusteringResult {
        centroids,
        assignments,
        iterations_run,
        sse,
    })
}
