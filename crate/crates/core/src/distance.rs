//! Dense Euclidean distance matrices and k-nearest-neighbour queries.
//!
//! Neighbour order is always ascending distance with ties broken by
//! ascending index. For square self-distance matrices the diagonal is never
//! reported as a neighbour.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureSet;

/// Squared Euclidean distance accumulated in four lanes.
#[inline]
pub fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            let t = x[l] - y[l];
            acc[l] += t * t;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let t = x - y;
        tail += t * t;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    sq_euclidean(a, b).sqrt()
}

/// Total order on `(distance, index)` pairs.
#[inline]
pub(crate) fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Row-major `rows × cols` matrix of non-negative distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    self_excluded: bool,
}

impl DistanceMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, self_excluded: bool) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::LengthMismatch {
                field: "distance values",
                expected: rows * cols,
                found: values.len(),
            });
        }
        if self_excluded && rows != cols {
            return Err(Error::InvalidParameter(
                "self exclusion requires a square matrix".into(),
            ));
        }
        if let Some(bad) = values.iter().position(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "distance entry {bad} is negative or NaN"
            )));
        }
        Ok(Self {
            rows,
            cols,
            values,
            self_excluded,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn self_excluded(&self) -> bool {
        self.self_excluded
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Applies `f` to every entry. `f` must map non-negative values to
    /// non-negative values.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Result<DistanceMatrix> {
        DistanceMatrix::new(
            self.rows,
            self.cols,
            self.values.par_iter().map(|&v| f(v)).collect(),
            self.self_excluded,
        )
    }

    /// Column indices of row `i` in neighbour order, skipping the diagonal
    /// when self-excluded.
    pub fn ranked(&self, i: usize) -> Vec<usize> {
        let mut order: Vec<(f64, usize)> = self
            .row(i)
            .iter()
            .copied()
            .enumerate()
            .filter(|&(j, _)| !(self.self_excluded && j == i))
            .map(|(j, d)| (d, j))
            .collect();
        order.sort_unstable_by(by_distance_then_index);
        order.into_iter().map(|(_, j)| j).collect()
    }

    /// The `k` nearest columns of row `i`.
    pub fn neighbors(&self, i: usize, k: usize) -> Vec<usize> {
        let mut r = self.ranked(i);
        r.truncate(k);
        r
    }
}

/// Euclidean distances between every row of `a` and every row of `b`, or
/// between rows of `a` itself when `b` is `None` (square, self-excluded).
///
/// Rows are computed in parallel; each entry depends only on its two input
/// rows, so the result does not depend on the thread count.
pub fn pairwise_distances(a: &FeatureSet, b: Option<&FeatureSet>) -> Result<DistanceMatrix> {
    let (other, self_excluded) = match b {
        Some(b) => {
            if b.dim() != a.dim() {
                return Err(Error::DimensionMismatch {
                    expected: a.dim(),
                    found: b.dim(),
                });
            }
            (b, false)
        }
        None => (a, true),
    };
    let cols = other.len();
    let mut values = vec![0.0; a.len() * cols];
    if cols > 0 {
        values
            .par_chunks_mut(cols)
            .zip(a.as_slice().par_chunks(a.dim()))
            .for_each(|(out, x)| {
                for (o, y) in out.iter_mut().zip(other.rows()) {
                    *o = euclidean(x, y);
                }
            });
    }
    Ok(DistanceMatrix {
        rows: a.len(),
        cols,
        values,
        self_excluded,
    })
}

/// The `k` nearest other rows of every row of `set`, without materializing
/// the full distance matrix. Each list is sorted nearest first.
pub fn knn_self(set: &FeatureSet, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = set.len();
    if k >= n {
        return Err(Error::TooFewSamples { n, k });
    }
    Ok((0..n)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |buf: &mut Vec<(f64, usize)>, i| {
                let x = set.row(i);
                buf.clear();
                buf.extend(
                    set.rows()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(j, y)| (euclidean(x, y), j)),
                );
                top_k(buf, k)
            },
        )
        .collect())
}

/// Selects the `k` smallest entries of `buf` in neighbour order.
pub(crate) fn top_k(buf: &mut [(f64, usize)], k: usize) -> Vec<usize> {
    let k = k.min(buf.len());
    if k == 0 {
        return Vec::new();
    }
    if k < buf.len() {
        buf.select_nth_unstable_by(k - 1, by_distance_then_index);
    }
    let head = &mut buf[..k];
    head.sort_unstable_by(by_distance_then_index);
    head.iter().map(|&(_, j)| j).collect()
}
