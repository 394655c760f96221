//! Retrieval evaluation: mAP and CMC under the standard re-identification
//! protocol, identity density, and k-reciprocal re-ranking.

mod density;
mod rerank;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{by_distance_then_index, pairwise_distances, DistanceMatrix};
use crate::error::{Error, Result};
use crate::features::{is_junk, FeatureSet};
use crate::manifest::Stage;

pub use density::id2;
pub use rerank::{k_reciprocal_rerank, RerankParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalProtocol {
    /// Drop gallery entries sharing both identity and camera with the query.
    pub cam_filter: bool,
    /// Identities excluded from evaluation. `None` means every negative id.
    pub junk_ids: Option<BTreeSet<i64>>,
    pub max_rank: usize,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            cam_filter: true,
            junk_ids: None,
            max_rank: 50,
        }
    }
}

impl EvalProtocol {
    pub fn is_junk(&self, id: i64) -> bool {
        match &self.junk_ids {
            Some(set) => set.contains(&id),
            None => is_junk(id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub map: f64,
    /// `cmc[k - 1]` is the fraction of valid queries matched within rank `k`.
    pub cmc: Vec<f64>,
    pub id2: f64,
    pub n_valid_queries: usize,
    pub manifest: Vec<Stage>,
}

impl EvalResult {
    pub fn rank1(&self) -> f64 {
        self.cmc[0]
    }

    pub fn rank(&self, k: usize) -> f64 {
        self.cmc[(k - 1).min(self.cmc.len() - 1)]
    }
}

/// Per-query outcome: average precision and the 0-based rank of the first
/// correct match among the retained gallery entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryOutcome {
    pub average_precision: f64,
    pub first_match: usize,
}

/// Ranks the gallery for one query and scores it. Returns `None` when the
/// query is junk or has no valid match.
pub fn score_query(
    distances: &[f64],
    query_id: i64,
    query_cam: Option<i64>,
    gallery: &FeatureSet,
    protocol: &EvalProtocol,
) -> Option<QueryOutcome> {
    if protocol.is_junk(query_id) {
        return None;
    }
    let mut order: Vec<(f64, usize)> = distances.iter().copied().zip(0..).collect();
    order.sort_unstable_by(by_distance_then_index);

    let mut rank = 0usize;
    let mut hits = 0usize;
    let mut precision_sum = 0.0;
    let mut first_match = None;
    for (_, g) in order {
        let gid = gallery.ids()[g];
        if protocol.is_junk(gid) {
            continue;
        }
        let same_id = gid == query_id;
        if protocol.cam_filter && same_id {
            if let (Some(qc), Some(gc)) = (query_cam, gallery.cams()[g]) {
                if qc == gc {
                    continue;
                }
            }
        }
        rank += 1;
        if same_id {
            hits += 1;
            precision_sum += hits as f64 / rank as f64;
            first_match.get_or_insert(rank - 1);
        }
    }
    first_match.map(|first_match| QueryOutcome {
        average_precision: precision_sum / hits as f64,
        first_match,
    })
}

/// Evaluates `query` against `gallery`. Distances default to Euclidean on
/// L2-normalized features; pass `distances` (for example re-ranked ones) to
/// override. Identity density is measured over the union of both sets.
pub fn evaluate(
    query: &FeatureSet,
    gallery: &FeatureSet,
    protocol: &EvalProtocol,
    distances: Option<&DistanceMatrix>,
) -> Result<EvalResult> {
    if protocol.max_rank == 0 {
        return Err(Error::InvalidParameter("max_rank must be >= 1".into()));
    }
    if query.dim() != gallery.dim() {
        return Err(Error::DimensionMismatch {
            expected: query.dim(),
            found: gallery.dim(),
        });
    }
    let q = query.normalized_cow()?;
    let g = gallery.normalized_cow()?;
    let owned;
    let dist = match distances {
        Some(d) => {
            if d.rows() != q.len() || d.cols() != g.len() {
                return Err(Error::Misalignment(format!(
                    "distance matrix is {}x{}, expected {}x{}",
                    d.rows(),
                    d.cols(),
                    q.len(),
                    g.len()
                )));
            }
            d
        }
        None => {
            owned = pairwise_distances(&q, Some(&g))?;
            &owned
        }
    };

    let outcomes: Vec<QueryOutcome> = (0..q.len())
        .into_par_iter()
        .filter_map(|i| score_query(dist.row(i), q.ids()[i], q.cams()[i], &g, protocol))
        .collect();
    if outcomes.is_empty() {
        return Err(Error::NoValidQueries);
    }
    let n = outcomes.len() as f64;
    let map = outcomes.iter().map(|o| o.average_precision).sum::<f64>() / n;
    let mut counts = vec![0usize; protocol.max_rank];
    for o in &outcomes {
        if o.first_match < protocol.max_rank {
            counts[o.first_match] += 1;
        }
    }
    let mut cmc = Vec::with_capacity(protocol.max_rank);
    let mut running = 0usize;
    for c in counts {
        running += c;
        cmc.push(running as f64 / n);
    }

    let union = q.concat(&g)?;
    let id2 = density::id2_with(&union, |id| protocol.is_junk(id))?;

    Ok(EvalResult {
        map,
        cmc,
        id2,
        n_valid_queries: outcomes.len(),
        manifest: vec![Stage::Evaluate {
            cam_filter: protocol.cam_filter,
            max_rank: protocol.max_rank,
            precomputed_distances: distances.is_some(),
        }],
    })
}
