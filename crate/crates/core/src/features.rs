//! Feature matrices with identity/camera labels, normalization and
//! identity centers.
//!
//! Rows live in a single row-major `Vec<f64>`. Embeddings arrive from disk
//! as 32-bit floats and are widened on load; every reduction runs in 64-bit.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows with a Euclidean norm at or below this value are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

/// Tolerance for the unit-norm invariant of a normalized set.
pub const UNIT_NORM_TOL: f64 = 1e-5;

/// Identity labels below zero mark junk samples.
pub fn is_junk(id: i64) -> bool {
    id < 0
}

/// `n` samples of dimension `d` with identity labels and optional camera
/// labels and sample names.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    data: Vec<f64>,
    dim: usize,
    ids: Vec<i64>,
    cams: Vec<Option<i64>>,
    names: Vec<Option<String>>,
    normalized: bool,
}

impl FeatureSet {
    /// Builds a set from row-major `data`. Camera labels and names start out
    /// absent; attach them with [`FeatureSet::with_cams`] and
    /// [`FeatureSet::with_names`].
    pub fn new(data: Vec<f64>, dim: usize, ids: Vec<i64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("feature dimension must be >= 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        let n = data.len() / dim;
        if ids.len() != n {
            return Err(Error::LengthMismatch {
                field: "ids",
                expected: n,
                found: ids.len(),
            });
        }
        Ok(Self {
            data,
            dim,
            cams: vec![None; n],
            names: vec![None; n],
            ids,
            normalized: false,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], ids: Vec<i64>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(data, dim, ids)
    }

    pub fn with_cams(mut self, cams: Vec<Option<i64>>) -> Result<Self> {
        if cams.len() != self.len() {
            return Err(Error::LengthMismatch {
                field: "cams",
                expected: self.len(),
                found: cams.len(),
            });
        }
        self.cams = cams;
        Ok(self)
    }

    pub fn with_names(mut self, names: Vec<Option<String>>) -> Result<Self> {
        if names.len() != self.len() {
            return Err(Error::LengthMismatch {
                field: "names",
                expected: self.len(),
                found: names.len(),
            });
        }
        self.names = names;
        Ok(self)
    }

    /// Flags the set as normalized after checking every row is unit length
    /// within [`UNIT_NORM_TOL`].
    pub fn assume_normalized(mut self) -> Result<Self> {
        for (i, row) in self.rows().enumerate() {
            if (norm(row) - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvalidParameter(format!(
                    "row {i} is not unit length"
                )));
            }
        }
        self.normalized = true;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn ids(&self) -> &[i64] {
        &self.ids
    }

    pub fn cams(&self) -> &[Option<i64>] {
        &self.cams
    }

    pub fn names(&self) -> &[Option<String>] {
        &self.names
    }

    /// Distinct identity labels in ascending order.
    pub fn unique_ids(&self) -> Vec<i64> {
        let mut ids = self.ids.clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Row indices grouped by identity, in ascending identity order.
    pub fn indices_by_id(&self) -> BTreeMap<i64, Vec<usize>> {
        let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (i, &id) in self.ids.iter().enumerate() {
            groups.entry(id).or_default().push(i);
        }
        groups
    }

    pub fn indices_of(&self, id: i64) -> Vec<usize> {
        self.ids
            .iter()
            .enumerate()
            .filter_map(|(i, &x)| (x == id).then_some(i))
            .collect()
    }

    /// Rows at `indices`, in that order, with their labels.
    pub fn subset(&self, indices: &[usize]) -> FeatureSet {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureSet {
            data,
            dim: self.dim,
            ids: indices.iter().map(|&i| self.ids[i]).collect(),
            cams: indices.iter().map(|&i| self.cams[i]).collect(),
            names: indices.iter().map(|&i| self.names[i].clone()).collect(),
            normalized: self.normalized,
        }
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &FeatureSet) -> Result<FeatureSet> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut out = self.clone();
        out.data.extend_from_slice(&other.data);
        out.ids.extend_from_slice(&other.ids);
        out.cams.extend_from_slice(&other.cams);
        out.names.extend(other.names.iter().cloned());
        out.normalized = self.normalized && other.normalized;
        Ok(out)
    }

    /// Same labels, new feature values. `data` must have the same shape.
    pub(crate) fn with_data(&self, data: Vec<f64>, normalized: bool) -> FeatureSet {
        debug_assert_eq!(data.len(), self.data.len());
        FeatureSet {
            data,
            dim: self.dim,
            ids: self.ids.clone(),
            cams: self.cams.clone(),
            names: self.names.clone(),
            normalized,
        }
    }

    /// Returns the set itself when already normalized, otherwise a
    /// normalized copy.
    pub(crate) fn normalized_cow(&self) -> Result<std::borrow::Cow<'_, FeatureSet>> {
        if self.normalized {
            Ok(std::borrow::Cow::Borrowed(self))
        } else {
            l2_normalize(self).map(std::borrow::Cow::Owned)
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scales `row` to unit length in place. Fails when the norm is at or below
/// [`ZERO_NORM`].
pub(crate) fn normalize_in_place(row: &mut [f64]) -> Option<()> {
    let n = norm(row);
    if n <= ZERO_NORM || !n.is_finite() {
        return None;
    }
    row.iter_mut().for_each(|x| *x /= n);
    Some(())
}

/// Scales every row to unit Euclidean length. Labels are carried over.
///
/// A set that is already flagged normalized is returned as is, which makes
/// the operation exactly idempotent.
pub fn l2_normalize(set: &FeatureSet) -> Result<FeatureSet> {
    if set.normalized {
        return Ok(set.clone());
    }
    let mut data = set.data.clone();
    data.par_chunks_mut(set.dim)
        .enumerate()
        .try_for_each(|(i, row)| normalize_in_place(row).ok_or(Error::ZeroVector { row: i }))?;
    Ok(set.with_data(data, true))
}

/// Arithmetic mean of the normalized rows carrying `id`. The mean itself is
/// not re-normalized.
pub fn identity_center(set: &FeatureSet, id: i64) -> Result<Vec<f64>> {
    let set = set.normalized_cow()?;
    let members = set.indices_of(id);
    if members.is_empty() {
        return Err(Error::UnknownId(id));
    }
    Ok(mean_of_rows(&set, &members))
}

pub(crate) fn mean_of_rows(set: &FeatureSet, members: &[usize]) -> Vec<f64> {
    let mut center = vec![0.0; set.dim()];
    for &i in members {
        for (c, x) in center.iter_mut().zip(set.row(i)) {
            *c += x;
        }
    }
    let n = members.len() as f64;
    center.iter_mut().for_each(|c| *c /= n);
    center
}
