//! Training-free feature centralization and re-identification evaluation
//! on embedding vectors.
//!
//! Feature sets are `n × d` row-major `f64` matrices with identity labels.
//! Most operations L2-normalize their input first and return normalized
//! output. Row-parallel work runs on the global rayon pool; results do not
//! depend on the thread count.

// `!(x >= 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod centralize;
pub mod cleanse;
pub mod distance;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod manifest;
pub mod stats;
pub mod synth;

pub use centralize::{
    aggregate, mutual_neighbors, nfc, pipeline, pipeline_with_order, select_representative, AggregateParams,
    AuxFeatureSet, NfcParams, PipelineOrder, PipelineOutput,
};
pub use cleanse::{build_manifests, outlier_filter, CleanseReport, OutlierConfig};
pub use distance::{euclidean, knn_self, pairwise_distances, sq_euclidean, DistanceMatrix};
pub use error::{Error, ErrorKind, Result};
pub use eval::{evaluate, id2, k_reciprocal_rerank, EvalProtocol, EvalResult, RerankParams};
pub use features::{identity_center, l2_normalize, FeatureSet};
pub use manifest::Stage;
pub use stats::{fit_identity_stats, mahalanobis, IdentityStats, Mahalanobis};
pub use synth::{generate, SynthConfig};
