//! Synthetic identities: Gaussian clouds around centers on the unit sphere.
//!
//! The random stream is part of the file contract, so other implementations
//! can reproduce generated sets bit for bit (up to libm rounding in
//! `ln`/`cos`/`sqrt`):
//!
//! * generator: ChaCha20, 256-bit key = `seed` as little-endian `u64` in
//!   bytes 0..8 and zero elsewhere, nonce and stream 0; a `u64` draw takes
//!   two consecutive 32-bit output words, low word first;
//! * uniform: `(next_u64 >> 11) · 2⁻⁵³`;
//! * normal: Box–Muller cosine branch, `√(−2 ln(1 − u₁)) · cos(2π u₂)`,
//!   consuming two uniforms per draw;
//! * draw order: all identity centers (`dim` normals each), then for every
//!   identity and sample in turn the sample's `dim` normals followed by the
//!   `dim` normals of each of its `M` auxiliaries.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::centralize::AuxFeatureSet;
use crate::error::{Error, Result};
use crate::features::{normalize_in_place, FeatureSet};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_ids: usize,
    pub samples_per_id: usize,
    pub dim: usize,
    /// Per-coordinate standard deviation of samples around their center.
    pub sigma: f64,
    pub aux_per_sample: usize,
    /// Per-coordinate standard deviation of auxiliaries around the center.
    pub aux_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_ids: 50,
            samples_per_id: 10,
            dim: 128,
            sigma: 0.3,
            aux_per_sample: 0,
            aux_sigma: 0.3,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_ids == 0 {
            return bad("n_ids must be >= 1".into());
        }
        if self.samples_per_id == 0 {
            return bad("samples_per_id must be >= 1".into());
        }
        if self.dim < 2 {
            return bad(format!("dim must be >= 2, got {}", self.dim));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return bad(format!("sigma must be > 0, got {}", self.sigma));
        }
        if !(self.aux_sigma >= 0.0) || !self.aux_sigma.is_finite() {
            return bad(format!("aux_sigma must be >= 0, got {}", self.aux_sigma));
        }
        Ok(())
    }
}

/// The documented portable random stream.
#[derive(Debug, Clone)]
pub struct SynthRng {
    inner: ChaCha20Rng,
}

impl SynthRng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Self {
            inner: ChaCha20Rng::from_seed(key),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// `center + sigma · N(0, I)`, then scaled to unit length.
    pub fn unit_around(&mut self, center: &[f64], sigma: f64) -> Vec<f64> {
        let mut v: Vec<f64> = center.iter().map(|c| c + sigma * self.normal()).collect();
        if normalize_in_place(&mut v).is_none() {
            // probability zero for sigma > 0; fall back to the center itself
            v.copy_from_slice(center);
        }
        v
    }

    /// Uniform direction on the unit sphere.
    pub fn unit_vector(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let mut v: Vec<f64> = (0..dim).map(|_| self.normal()).collect();
            if normalize_in_place(&mut v).is_some() {
                return v;
            }
        }
    }
}

/// Draws a labelled feature set and its auxiliaries.
///
/// Identities are `0..n_ids`; within an identity, sample `s` gets camera
/// `s mod 2` and name `id{id:04}_s{s:03}`. Both sets come back normalized.
pub fn generate(config: &SynthConfig) -> Result<(FeatureSet, AuxFeatureSet)> {
    config.validate()?;
    let SynthConfig {
        n_ids,
        samples_per_id,
        dim,
        sigma,
        aux_per_sample: m,
        aux_sigma,
        seed,
    } = *config;
    let mut rng = SynthRng::new(seed);
    let centers: Vec<Vec<f64>> = (0..n_ids).map(|_| rng.unit_vector(dim)).collect();

    let n = n_ids * samples_per_id;
    let mut data = Vec::with_capacity(n * dim);
    let mut aux = Vec::with_capacity(n * m * dim);
    let mut ids = Vec::with_capacity(n);
    let mut cams = Vec::with_capacity(n);
    let mut names = Vec::with_capacity(n);
    for (id, center) in centers.iter().enumerate() {
        for s in 0..samples_per_id {
            data.extend(rng.unit_around(center, sigma));
            for _ in 0..m {
                aux.extend(rng.unit_around(center, aux_sigma));
            }
            ids.push(id as i64);
            cams.push(Some((s % 2) as i64));
            names.push(Some(format!("id{id:04}_s{s:03}")));
        }
    }
    let set = FeatureSet::new(data, dim, ids)?
        .with_cams(cams)?
        .with_names(names.clone())?
        .assume_normalized()?;
    let aux = AuxFeatureSet::new(aux, n, m, dim, "synthetic")?.with_sample_names(names)?;
    Ok((set, aux))
}

/// Row indices of a query/gallery split: the first `queries_per_id` samples
/// of each identity (in row order) are queries, the rest gallery.
pub fn split_queries(set: &FeatureSet, queries_per_id: usize) -> (Vec<usize>, Vec<usize>) {
    let mut query = Vec::new();
    let mut gallery = Vec::new();
    let mut seen = std::collections::HashMap::new();
    for (i, &id) in set.ids().iter().enumerate() {
        let k = seen.entry(id).or_insert(0usize);
        if *k < queries_per_id {
            query.push(i);
        } else {
            gallery.push(i);
        }
        *k += 1;
    }
    (query, gallery)
}
