//! Data cleansing: per-identity Mahalanobis quantile filtering and pose
//! screening, producing the reference (`S_ref`) and target (`S_trg`)
//! manifests.

pub mod pose;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{is_junk, FeatureSet};
use crate::stats::{fit_rows, Mahalanobis, DEFAULT_EPSILON_SCALE};

pub use pose::{normalize_pose, pose_valid, Keypoint, PoseIssue, PoseRecord, PoseValidConfig, PoseVerdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierConfig {
    /// Quantile `p`; samples outside `[Q_p, Q_{1-p}]` are removed.
    pub quantile: f64,
    /// Identities with fewer samples pass through unfiltered.
    pub min_samples: usize,
    pub epsilon_scale: f64,
}

impl Default for OutlierConfig {
    fn default() -> Self {
        Self {
            quantile: 0.005,
            min_samples: 10,
            epsilon_scale: DEFAULT_EPSILON_SCALE,
        }
    }
}

impl OutlierConfig {
    pub fn with_quantile(quantile: f64) -> Self {
        Self {
            quantile,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RemovalReason {
    OutlierLow { distance: f64 },
    OutlierHigh { distance: f64 },
    PoseInvalid { issues: Vec<PoseIssue> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub index: usize,
    pub name: Option<String>,
    #[serde(flatten)]
    pub reason: RemovalReason,
}

/// What the outlier filter did with one identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum IdOutcome {
    Filtered { count: usize, lower: f64, upper: f64 },
    TooFewForStats { count: usize },
    Junk { count: usize },
    SingularCovariance { count: usize },
}

/// Partition of the input rows into kept and removed, in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanseReport {
    pub kept: Vec<usize>,
    pub removed: Vec<Removal>,
    pub per_id: BTreeMap<i64, IdOutcome>,
}

impl CleanseReport {
    pub fn total(&self) -> usize {
        self.kept.len() + self.removed.len()
    }
}

/// Linear-interpolation quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-identity Mahalanobis quantile filter.
///
/// For every identity with at least `min_samples` rows, the identity's mean
/// and covariance are fitted on its normalized rows and each row is kept
/// iff its Mahalanobis distance lies in `[Q_p, Q_{1-p}]` of that identity's
/// distances. Smaller identities and junk ids are kept as is.
pub fn outlier_filter(set: &FeatureSet, config: &OutlierConfig) -> Result<CleanseReport> {
    let p = config.quantile;
    if !(0.0..0.5).contains(&p) {
        return Err(Error::InvalidParameter(format!("quantile must be in [0, 0.5), got {p}")));
    }
    let set = set.normalized_cow()?;
    let groups: Vec<(i64, Vec<usize>)> = set.indices_by_id().into_iter().collect();

    let per_group: Vec<(IdOutcome, Vec<Option<RemovalReason>>)> = groups
        .par_iter()
        .map(|(id, members)| {
            let count = members.len();
            if is_junk(*id) {
                return Ok((IdOutcome::Junk { count }, vec![None; count]));
            }
            if count < config.min_samples.max(1) {
                return Ok((IdOutcome::TooFewForStats { count }, vec![None; count]));
            }
            let stats = fit_rows(&set, members, *id);
            let metric = match Mahalanobis::new(&stats, config.epsilon_scale) {
                Ok(m) => m,
                Err(Error::SingularCovariance { .. }) => {
                    return Ok((IdOutcome::SingularCovariance { count }, vec![None; count]))
                }
                Err(e) => return Err(e),
            };
            let distances = members
                .iter()
                .map(|&i| metric.distance(set.row(i)))
                .collect::<Result<Vec<f64>>>()?;
            let mut sorted = distances.clone();
            sorted.sort_unstable_by(f64::total_cmp);
            let lower = quantile_sorted(&sorted, p);
            let upper = quantile_sorted(&sorted, 1.0 - p);
            let verdicts = distances
                .into_iter()
                .map(|distance| {
                    if distance < lower {
                        Some(RemovalReason::OutlierLow { distance })
                    } else if distance > upper {
                        Some(RemovalReason::OutlierHigh { distance })
                    } else {
                        None
                    }
                })
                .collect();
            Ok((IdOutcome::Filtered { count, lower, upper }, verdicts))
        })
        .collect::<Result<_>>()?;

    let mut reasons: Vec<Option<RemovalReason>> = vec![None; set.len()];
    let mut per_id = BTreeMap::new();
    for ((id, members), (outcome, verdicts)) in groups.iter().zip(per_group) {
        per_id.insert(*id, outcome);
        for (&i, v) in members.iter().zip(verdicts) {
            reasons[i] = v;
        }
    }
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (i, reason) in reasons.into_iter().enumerate() {
        match reason {
            None => kept.push(i),
            Some(reason) => removed.push(Removal {
                index: i,
                name: set.names()[i].clone(),
                reason,
            }),
        }
    }
    Ok(CleanseReport { kept, removed, per_id })
}

/// Builds `S_ref` (outlier filter only) and `S_trg` (outlier filter and a
/// valid pose). Poses are matched to rows by sample name; rows without a
/// name or without a pose fail the pose check.
pub fn build_manifests(
    set: &FeatureSet,
    poses: &[PoseRecord],
    outliers: &OutlierConfig,
    pose_config: &PoseValidConfig,
) -> Result<(CleanseReport, CleanseReport)> {
    let mut by_name: HashMap<&str, &PoseRecord> = HashMap::with_capacity(poses.len());
    for p in poses {
        if by_name.insert(p.name.as_str(), p).is_some() {
            return Err(Error::Misalignment(format!("duplicate pose for sample `{}`", p.name)));
        }
    }
    let reference = outlier_filter(set, outliers)?;

    let verdicts: Vec<(usize, PoseVerdict)> = reference
        .kept
        .par_iter()
        .map(|&i| {
            let verdict = match set.names()[i].as_deref().and_then(|n| by_name.get(n)) {
                Some(pose) => pose_valid(pose, pose_config),
                None => PoseVerdict::invalid(PoseIssue::NoPose),
            };
            (i, verdict)
        })
        .collect();

    let mut kept = Vec::new();
    let mut removed = reference.removed.clone();
    for (i, verdict) in verdicts {
        if verdict.valid {
            kept.push(i);
        } else {
            removed.push(Removal {
                index: i,
                name: set.names()[i].clone(),
                reason: RemovalReason::PoseInvalid { issues: verdict.issues },
            });
        }
    }
    removed.sort_by_key(|r| r.index);
    let target = CleanseReport {
        kept,
        removed,
        per_id: reference.per_id.clone(),
    };
    Ok((reference, target))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert!((quantile_sorted(&v, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile_sorted(&v, 0.1) - 1.3).abs() < 1e-12);
        assert_eq!(quantile_sorted(&[7.0], 0.3), 7.0);
    }

    fn ring(n: usize, id: i64) -> Vec<(Vec<f64>, i64)> {
        (0..n)
            .map(|k| {
                let t = k as f64 * 0.37;
                (vec![1.0, 0.1 * t.sin(), 0.1 * (2.3 * t).cos()], id)
            })
            .collect()
    }

    fn set_of(rows: Vec<(Vec<f64>, i64)>) -> FeatureSet {
        let (rows, ids): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        FeatureSet::from_rows(&rows, ids).unwrap()
    }

    #[test]
    fn zero_quantile_keeps_everything() {
        let s = set_of(ring(30, 1));
        let r = outlier_filter(&s, &OutlierConfig::with_quantile(0.0)).unwrap();
        assert_eq!(r.kept.len(), 30);
        assert!(matches!(r.per_id[&1], IdOutcome::Filtered { count: 30, .. }));
    }

    #[test]
    fn small_and_junk_ids_pass_through() {
        let mut rows = ring(12, 1);
        rows.extend(ring(4, 2));
        rows.extend(ring(20, -1));
        let s = set_of(rows);
        let r = outlier_filter(&s, &OutlierConfig::with_quantile(0.2)).unwrap();
        assert_eq!(r.per_id[&2], IdOutcome::TooFewForStats { count: 4 });
        assert_eq!(r.per_id[&-1], IdOutcome::Junk { count: 20 });
        assert!(r.removed.iter().all(|x| x.index < 12));
        assert!(!r.removed.is_empty());
        assert_eq!(r.total(), s.len());
    }

    #[test]
    fn quantile_range_checked() {
        let s = set_of(ring(3, 0));
        assert!(outlier_filter(&s, &OutlierConfig::with_quantile(0.5)).is_err());
        assert!(outlier_filter(&s, &OutlierConfig::with_quantile(-0.1)).is_err());
    }

    #[test]
    fn unnamed_rows_fail_pose_screen() {
        let s = set_of(ring(12, 1));
        let (r, t) =
            build_manifests(&s, &[], &OutlierConfig::with_quantile(0.0), &PoseValidConfig::default()).unwrap();
        assert_eq!(r.kept.len(), 12);
        assert!(t.kept.is_empty());
        assert!(matches!(
            &t.removed[0].reason,
            RemovalReason::PoseInvalid { issues } if issues == &vec![PoseIssue::NoPose]
        ));
    }

    #[test]
    fn duplicate_pose_names_rejected() {
        let s = set_of(ring(2, 1));
        let p = PoseRecord::new("a", [Keypoint::new(0.0, 0.0, 0.0); 18]).unwrap();
        let err = build_manifests(&s, &[p.clone(), p], &OutlierConfig::default(), &PoseValidConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::Misalignment(_)));
    }
}
