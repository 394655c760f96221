//! Per-identity Gaussian statistics and the Mahalanobis distance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::FeatureSet;

/// Default relative regularization: `ε = scale · trace(Σ) / d`.
pub const DEFAULT_EPSILON_SCALE: f64 = 1e-6;

/// Absolute floor on the ridge added to the covariance diagonal.
pub const EPSILON_FLOOR: f64 = 1e-12;

/// Mean and population covariance of one identity.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityStats {
    pub id: i64,
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub count: usize,
}

/// Fits mean and covariance (divisor `n`, not `n - 1`) to the rows of
/// `id`, using the features exactly as stored.
pub fn fit_identity_stats(set: &FeatureSet, id: i64) -> Result<IdentityStats> {
    let members = set.indices_of(id);
    if members.is_empty() {
        return Err(Error::UnknownId(id));
    }
    Ok(fit_rows(set, &members, id))
}

pub(crate) fn fit_rows(set: &FeatureSet, members: &[usize], id: i64) -> IdentityStats {
    let d = set.dim();
    let n = members.len();
    let mean = crate::features::mean_of_rows(set, members);
    let mut centered = DMatrix::<f64>::zeros(n, d);
    for (r, &i) in members.iter().enumerate() {
        for (c, (x, m)) in set.row(i).iter().zip(&mean).enumerate() {
            centered[(r, c)] = x - m;
        }
    }
    let mut cov = centered.tr_mul(&centered) / n as f64;
    // gemm output is symmetric up to rounding; force it exactly
    for r in 0..d {
        for c in (r + 1)..d {
            let v = 0.5 * (cov[(r, c)] + cov[(c, r)]);
            cov[(r, c)] = v;
            cov[(c, r)] = v;
        }
    }
    IdentityStats {
        id,
        mean,
        covariance: cov,
        count: n,
    }
}

/// Mahalanobis metric with the Cholesky factor of the regularized
/// covariance `Σ + εI` precomputed.
#[derive(Debug, Clone)]
pub struct Mahalanobis {
    id: i64,
    mean: DVector<f64>,
    lower: DMatrix<f64>,
    epsilon: f64,
}

impl Mahalanobis {
    pub fn new(stats: &IdentityStats, epsilon_scale: f64) -> Result<Self> {
        if !(epsilon_scale >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon scale must be >= 0, got {epsilon_scale}"
            )));
        }
        let d = stats.mean.len();
        let epsilon = (epsilon_scale * stats.covariance.trace() / d as f64).max(EPSILON_FLOOR);
        let mut reg = stats.covariance.clone();
        for i in 0..d {
            reg[(i, i)] += epsilon;
        }
        let chol = reg
            .cholesky()
            .ok_or(Error::SingularCovariance { id: stats.id })?;
        Ok(Self {
            id: stats.id,
            mean: DVector::from_column_slice(&stats.mean),
            lower: chol.unpack(),
            epsilon,
        })
    }

    /// The ridge actually added to the diagonal.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn distance(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: f.len(),
            });
        }
        let diff = DVector::from_column_slice(f) - &self.mean;
        // ‖L⁻¹(f − μ)‖ = √((f − μ)ᵀ Σ⁻¹ (f − μ))
        let y = self
            .lower
            .solve_lower_triangular(&diff)
            .ok_or(Error::SingularCovariance { id: self.id })?;
        Ok(y.norm())
    }
}

/// One-shot Mahalanobis distance of `f` under `stats`.
pub fn mahalanobis(f: &[f64], stats: &IdentityStats, epsilon_scale: f64) -> Result<f64> {
    Mahalanobis::new(stats, epsilon_scale)?.distance(f)
}
