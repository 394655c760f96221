use serde::{Deserialize, Serialize};

/// One processing step applied to a feature set, recorded so results can
/// be traced back to the exact transformation chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum Stage {
    Normalize,
    Aggregate {
        eta: f64,
        aux_per_sample: usize,
        source: String,
    },
    Nfc {
        k1: usize,
        k2: usize,
    },
    Rerank {
        k1: usize,
        k2: usize,
        lambda: f64,
    },
    Evaluate {
        cam_filter: bool,
        max_rank: usize,
        precomputed_distances: bool,
    },
}
