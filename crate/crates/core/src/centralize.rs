//! Feature centralization: mutual-neighbour aggregation (NFC), auxiliary
//! feature aggregation and representative-sample selection.
//!
//! All outputs are L2-normalized. Inputs that are not flagged normalized are
//! normalized first, so a global positive rescaling of the inputs never
//! changes a result.

use rayon::prelude::*;

use crate::distance::{by_distance_then_index, euclidean, knn_self};
use crate::error::{Error, Result};
use crate::features::{normalize_in_place, FeatureSet};
use crate::manifest::Stage;

/// `M` auxiliary feature vectors per sample of an aligned [`FeatureSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct AuxFeatureSet {
    data: Vec<f64>,
    n: usize,
    m: usize,
    dim: usize,
    source_tag: String,
    sample_names: Vec<Option<String>>,
}

impl AuxFeatureSet {
    /// `data` holds `n · m` rows of length `dim`, grouped by sample: rows
    /// `i·m .. (i+1)·m` belong to sample `i`.
    pub fn new(data: Vec<f64>, n: usize, m: usize, dim: usize, source_tag: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("feature dimension must be >= 1".into()));
        }
        if data.len() != n * m * dim {
            return Err(Error::LengthMismatch {
                field: "aux data",
                expected: n * m * dim,
                found: data.len(),
            });
        }
        Ok(Self {
            data,
            n,
            m,
            dim,
            source_tag: source_tag.into(),
            sample_names: vec![None; n],
        })
    }

    /// An auxiliary set with `M = 0` aligned to `n` samples.
    pub fn empty(n: usize, dim: usize, source_tag: impl Into<String>) -> Result<Self> {
        Self::new(Vec::new(), n, 0, dim, source_tag)
    }

    pub fn with_sample_names(mut self, names: Vec<Option<String>>) -> Result<Self> {
        if names.len() != self.n {
            return Err(Error::LengthMismatch {
                field: "aux sample names",
                expected: self.n,
                found: names.len(),
            });
        }
        self.sample_names = names;
        Ok(self)
    }

    pub fn samples(&self) -> usize {
        self.n
    }

    pub fn per_sample(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn sample_names(&self) -> &[Option<String>] {
        &self.sample_names
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// The `m`-th auxiliary vector of sample `i`.
    pub fn get(&self, i: usize, m: usize) -> &[f64] {
        let start = (i * self.m + m) * self.dim;
        &self.data[start..start + self.dim]
    }

    /// All auxiliary vectors of sample `i`, back to back.
    pub fn of_sample(&self, i: usize) -> &[f64] {
        &self.data[i * self.m * self.dim..(i + 1) * self.m * self.dim]
    }

    /// Keeps only the first `m` auxiliaries of every sample.
    pub fn truncate(&self, m: usize) -> AuxFeatureSet {
        let m = m.min(self.m);
        let mut data = Vec::with_capacity(self.n * m * self.dim);
        for i in 0..self.n {
            data.extend_from_slice(&self.of_sample(i)[..m * self.dim]);
        }
        AuxFeatureSet {
            data,
            n: self.n,
            m,
            dim: self.dim,
            source_tag: self.source_tag.clone(),
            sample_names: self.sample_names.clone(),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> AuxFeatureSet {
        let mut data = Vec::with_capacity(indices.len() * self.m * self.dim);
        for &i in indices {
            data.extend_from_slice(self.of_sample(i));
        }
        AuxFeatureSet {
            data,
            n: indices.len(),
            m: self.m,
            dim: self.dim,
            source_tag: self.source_tag.clone(),
            sample_names: indices.iter().map(|&i| self.sample_names[i].clone()).collect(),
        }
    }

    /// Checks shape and, where both sides carry names, sample names. A set
    /// with no samples and `M = 0` (an empty auxiliary file) fits any set.
    pub fn check_aligned(&self, set: &FeatureSet) -> Result<()> {
        if self.n == 0 && self.m == 0 {
            return Ok(());
        }
        if self.n != set.len() {
            return Err(Error::Misalignment(format!(
                "aux set covers {} samples, feature set has {}",
                self.n,
                set.len()
            )));
        }
        if self.m > 0 && self.dim != set.dim() {
            return Err(Error::Misalignment(format!(
                "aux dimension {} differs from feature dimension {}",
                self.dim,
                set.dim()
            )));
        }
        for (i, (a, b)) in self.sample_names.iter().zip(set.names()).enumerate() {
            if let (Some(a), Some(b)) = (a, b) {
                if a != b {
                    return Err(Error::Misalignment(format!(
                        "sample {i}: aux belongs to `{a}`, feature row is `{b}`"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Neighbour counts for NFC: `k1` outward neighbours, `k2` for the
/// reciprocity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NfcParams {
    pub k1: usize,
    pub k2: usize,
}

impl Default for NfcParams {
    fn default() -> Self {
        Self { k1: 2, k2: 2 }
    }
}

impl NfcParams {
    fn validate(&self, n: usize) -> Result<()> {
        if self.k1 == 0 || self.k2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "k1 and k2 must be >= 1 (got k1 = {}, k2 = {})",
                self.k1, self.k2
            )));
        }
        let k = self.k1.max(self.k2);
        if n <= k {
            return Err(Error::TooFewSamples { n, k });
        }
        Ok(())
    }
}

/// Weight `η` of the auxiliary mean relative to the original feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateParams {
    pub eta: f64,
}

impl Default for AggregateParams {
    fn default() -> Self {
        Self { eta: 1.0 }
    }
}

/// For every row `i`, the mutual neighbours `{ j ∈ top-k1(i) : i ∈ top-k2(j) }`
/// in the order they appear in `top-k1(i)`.
pub fn mutual_neighbors(set: &FeatureSet, params: NfcParams) -> Result<Vec<Vec<usize>>> {
    params.validate(set.len())?;
    let set = set.normalized_cow()?;
    let k = params.k1.max(params.k2);
    let knn = knn_self(&set, k)?;
    Ok((0..set.len())
        .into_par_iter()
        .map(|i| {
            knn[i][..params.k1]
                .iter()
                .copied()
                .filter(|&j| knn[j][..params.k2].contains(&i))
                .collect()
        })
        .collect())
}

/// Neighbour Feature Centralization: each row becomes the normalized sum of
/// itself and its mutual neighbours. Sums use the original rows only, so the
/// result does not depend on processing order.
pub fn nfc(set: &FeatureSet, params: NfcParams) -> Result<FeatureSet> {
    params.validate(set.len())?;
    let set = set.normalized_cow()?;
    let mutual = mutual_neighbors(&set, params)?;
    let d = set.dim();
    let mut data = vec![0.0; set.len() * d];
    data.par_chunks_mut(d)
        .enumerate()
        .try_for_each(|(i, out)| {
            out.copy_from_slice(set.row(i));
            for &j in &mutual[i] {
                for (o, x) in out.iter_mut().zip(set.row(j)) {
                    *o += x;
                }
            }
            normalize_in_place(out).ok_or(Error::ZeroVector { row: i })
        })?;
    Ok(set.with_data(data, true))
}

/// Auxiliary aggregation: row `i` becomes
/// `normalize(f_i + η/M · Σ_m aux_{i,m})`. With `M = 0` this is plain
/// normalization.
pub fn aggregate(set: &FeatureSet, aux: &AuxFeatureSet, params: AggregateParams) -> Result<FeatureSet> {
    if !(params.eta >= 0.0) || !params.eta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "eta must be a finite value >= 0, got {}",
            params.eta
        )));
    }
    aux.check_aligned(set)?;
    let set = set.normalized_cow()?;
    let m = aux.per_sample();
    if m == 0 {
        return Ok(set.into_owned());
    }
    let d = set.dim();
    let weight = params.eta / m as f64;
    let mut data = vec![0.0; set.len() * d];
    data.par_chunks_mut(d)
        .enumerate()
        .try_for_each(|(i, out)| {
            let mut unit = vec![0.0; d];
            let mut acc = vec![0.0; d];
            for k in 0..m {
                unit.copy_from_slice(aux.get(i, k));
                normalize_in_place(&mut unit).ok_or(Error::ZeroVector { row: i * m + k })?;
                for (a, u) in acc.iter_mut().zip(&unit) {
                    *a += u;
                }
            }
            for ((o, f), a) in out.iter_mut().zip(set.row(i)).zip(&acc) {
                *o = f + weight * a;
            }
            normalize_in_place(out).ok_or(Error::ZeroVector { row: i })
        })?;
    Ok(set.with_data(data, true))
}

/// Index of the sample of `id` closest to the identity center; ties go to
/// the lower index.
pub fn select_representative(set: &FeatureSet, id: i64) -> Result<usize> {
    let set = set.normalized_cow()?;
    let members = set.indices_of(id);
    if members.is_empty() {
        return Err(Error::UnknownId(id));
    }
    let center = crate::features::mean_of_rows(&set, &members);
    let best = members
        .iter()
        .map(|&i| (euclidean(set.row(i), &center), i))
        .min_by(by_distance_then_index)
        .map(|(_, i)| i);
    Ok(best.expect("members is non-empty"))
}

/// Order in which [`pipeline_with_order`] applies its two stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PipelineOrder {
    /// Auxiliary aggregation, then NFC on the aggregated features.
    #[default]
    AggregateFirst,
    NfcFirst,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub features: FeatureSet,
    pub stages: Vec<Stage>,
}

/// Normalization, then auxiliary aggregation (when `aux` is given), then NFC
/// (when `nfc_params` is given).
pub fn pipeline(
    set: &FeatureSet,
    aux: Option<&AuxFeatureSet>,
    agg: AggregateParams,
    nfc_params: Option<NfcParams>,
) -> Result<PipelineOutput> {
    pipeline_with_order(set, aux, agg, nfc_params, PipelineOrder::AggregateFirst)
}

pub fn pipeline_with_order(
    set: &FeatureSet,
    aux: Option<&AuxFeatureSet>,
    agg: AggregateParams,
    nfc_params: Option<NfcParams>,
    order: PipelineOrder,
) -> Result<PipelineOutput> {
    let mut stages = vec![Stage::Normalize];
    let mut current = crate::features::l2_normalize(set)?;

    let run_aggregate = |current: &FeatureSet, stages: &mut Vec<Stage>| -> Result<Option<FeatureSet>> {
        match aux {
            Some(aux) if aux.per_sample() > 0 => {
                stages.push(Stage::Aggregate {
                    eta: agg.eta,
                    aux_per_sample: aux.per_sample(),
                    source: aux.source_tag().to_string(),
                });
                aggregate(current, aux, agg).map(Some)
            }
            Some(aux) => {
                aux.check_aligned(current)?;
                Ok(None)
            }
            None => Ok(None),
        }
    };
    let run_nfc = |current: &FeatureSet, stages: &mut Vec<Stage>| -> Result<Option<FeatureSet>> {
        match nfc_params {
            Some(p) => {
                stages.push(Stage::Nfc { k1: p.k1, k2: p.k2 });
                nfc(current, p).map(Some)
            }
            None => Ok(None),
        }
    };

    match order {
        PipelineOrder::AggregateFirst => {
            if let Some(next) = run_aggregate(&current, &mut stages)? {
                current = next;
            }
            if let Some(next) = run_nfc(&current, &mut stages)? {
                current = next;
            }
        }
        PipelineOrder::NfcFirst => {
            if let Some(next) = run_nfc(&current, &mut stages)? {
                current = next;
            }
            if let Some(next) = run_aggregate(&current, &mut stages)? {
                current = next;
            }
        }
    }
    Ok(PipelineOutput {
        features: current,
        stages,
    })
}
