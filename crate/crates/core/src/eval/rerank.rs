//! k-reciprocal re-ranking.
//!
//! Query and gallery are pooled. Every sample is encoded as a sparse weight
//! vector over its expanded k-reciprocal neighbourhood, the encodings are
//! smoothed over each sample's `k2` nearest neighbours, and the Jaccard
//! distance between encodings is blended with the original Euclidean
//! distance.
//!
//! Only the `k1 + 1` nearest entries of every ranking are kept, so memory is
//! `O(N·k1 + n_query·n_gallery)` rather than `O(N²)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{euclidean, sq_euclidean, top_k, DistanceMatrix};
use crate::error::{Error, Result};
use crate::features::FeatureSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RerankParams {
    pub k1: usize,
    pub k2: usize,
    /// Weight of the original distance in the blend.
    pub lambda: f64,
}

impl Default for RerankParams {
    fn default() -> Self {
        Self {
            k1: 20,
            k2: 6,
            lambda: 0.3,
        }
    }
}

type SparseRow = Vec<(usize, f64)>;

/// Returns the re-ranked `n_query × n_gallery` distance matrix.
pub fn k_reciprocal_rerank(query: &FeatureSet, gallery: &FeatureSet, params: RerankParams) -> Result<DistanceMatrix> {
    let RerankParams { k1, k2, lambda } = params;
    if k2 == 0 || k2 > k1 {
        return Err(Error::InvalidParameter(format!(
            "rerank requires k1 >= k2 >= 1 (got k1 = {k1}, k2 = {k2})"
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("lambda must be in [0, 1], got {lambda}")));
    }
    if query.dim() != gallery.dim() {
        return Err(Error::DimensionMismatch {
            expected: query.dim(),
            found: gallery.dim(),
        });
    }
    let pooled = query.normalized_cow()?.concat(&*gallery.normalized_cow()?)?;
    let n = pooled.len();
    if n <= k1 {
        return Err(Error::TooFewSamples { n, k: k1 });
    }
    let n_query = query.len();
    let n_gallery = gallery.len();

    // nearest-first rankings (self first), truncated to k1 + 1, plus the
    // per-row maximum squared distance used to scale the weights
    let (ranks, row_max): (Vec<Vec<usize>>, Vec<f64>) = (0..n)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |buf: &mut Vec<(f64, usize)>, i| {
                let x = pooled.row(i);
                buf.clear();
                let mut max = 0.0f64;
                for (j, y) in pooled.rows().enumerate() {
                    let d = sq_euclidean(x, y);
                    max = max.max(d);
                    if j != i {
                        buf.push((d, j));
                    }
                }
                let mut rank = Vec::with_capacity(k1 + 1);
                rank.push(i);
                rank.extend(top_k(buf, k1));
                (rank, max)
            },
        )
        .unzip();

    let half = (k1 as f64 / 2.0).round_ties_even() as usize;
    let reciprocal = |i: usize, k: usize| -> Vec<usize> {
        ranks[i][..=k]
            .iter()
            .copied()
            .filter(|&j| ranks[j][..=k].contains(&i))
            .collect()
    };

    let encodings: Vec<SparseRow> = (0..n)
        .into_par_iter()
        .map(|i| {
            let core = reciprocal(i, k1);
            let mut expanded = core.clone();
            for &c in &core {
                let cand = reciprocal(c, half);
                let overlap = cand.iter().filter(|j| core.contains(j)).count();
                if overlap as f64 > 2.0 / 3.0 * cand.len() as f64 {
                    expanded.extend_from_slice(&cand);
                }
            }
            expanded.sort_unstable();
            expanded.dedup();
            let x = pooled.row(i);
            let scale = if row_max[i] > 0.0 { row_max[i] } else { 1.0 };
            let mut row: SparseRow = expanded
                .into_iter()
                .map(|j| (j, (-sq_euclidean(x, pooled.row(j)) / scale).exp()))
                .collect();
            let total: f64 = row.iter().map(|(_, w)| w).sum();
            row.iter_mut().for_each(|(_, w)| *w /= total);
            row
        })
        .collect();

    let encodings: Vec<SparseRow> = if k2 == 1 {
        encodings
    } else {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut pairs: Vec<(usize, f64)> = ranks[i][..k2]
                    .iter()
                    .flat_map(|&r| encodings[r].iter().copied())
                    .collect();
                pairs.sort_unstable_by_key(|&(j, _)| j);
                let mut merged: SparseRow = Vec::with_capacity(pairs.len());
                for (j, w) in pairs {
                    match merged.last_mut() {
                        Some((last, acc)) if *last == j => *acc += w,
                        _ => merged.push((j, w)),
                    }
                }
                merged.iter_mut().for_each(|(_, w)| *w /= k2 as f64);
                merged
            })
            .collect()
    };

    // column → gallery rows with a non-zero weight there
    let mut inverted: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (g, row) in encodings[n_query..].iter().enumerate() {
        for &(c, w) in row {
            inverted[c].push((g, w));
        }
    }

    let mut values = vec![0.0; n_query * n_gallery];
    if n_gallery > 0 {
        values
            .par_chunks_mut(n_gallery)
            .enumerate()
            .for_each(|(i, out)| {
                let mut shared = vec![0.0; n_gallery];
                for &(c, w) in &encodings[i] {
                    for &(g, wg) in &inverted[c] {
                        shared[g] += w.min(wg);
                    }
                }
                let x = pooled.row(i);
                for (g, o) in out.iter_mut().enumerate() {
                    let jaccard = 1.0 - shared[g] / (2.0 - shared[g]);
                    let original = euclidean(x, pooled.row(n_query + g));
                    *o = (jaccard * (1.0 - lambda) + original * lambda).max(0.0);
                }
            });
    }
    DistanceMatrix::new(n_query, n_gallery, values, false)
}
