//! Independent reference implementations used as test oracles. Everything
//! here is deliberately naive: dense matrices, full sorts, explicit loops.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use idcenter::FeatureSet;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn unit(row: &[f64]) -> Vec<f64> {
    let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
    row.iter().map(|x| x / n).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

pub fn rows_of(set: &FeatureSet) -> Vec<Vec<f64>> {
    set.rows().map(<[f64]>::to_vec).collect()
}

/// Gaussian rows with random positive scales. About one row in ten copies an
/// earlier row times a power of two, which normalizes to the bit-identical
/// direction, so exact distance ties occur and exercise the index tie-break.
pub fn random_rows(r: &mut StdRng, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        if !rows.is_empty() && r.random_bool(0.1) {
            let k = r.random_range(0..rows.len());
            let s = [0.5, 1.0, 2.0, 4.0][r.random_range(0..4)];
            let copy = rows[k].iter().map(|x| x * s).collect();
            rows.push(copy);
        } else {
            let s = r.random_range(0.5..2.0);
            rows.push((0..d).map(|_| s * gaussian(r)).collect());
        }
    }
    rows
}

pub fn gaussian(r: &mut StdRng) -> f64 {
    let u1: f64 = 1.0 - r.random::<f64>();
    let u2: f64 = r.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Full ranking of row `i` among the other rows by (distance, index).
fn brute_rank(rows: &[Vec<f64>], i: usize) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = (0..rows.len())
        .filter(|&j| j != i)
        .map(|j| (dist(&rows[i], &rows[j]), j))
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    order.into_iter().map(|(_, j)| j).collect()
}

/// Mutual neighbour lists (in top-k1 order) and centralized rows.
pub fn nfc_oracle(raw: &[Vec<f64>], k1: usize, k2: usize) -> (Vec<Vec<usize>>, Vec<Vec<f64>>) {
    let rows: Vec<Vec<f64>> = raw.iter().map(|r| unit(r)).collect();
    let ranks: Vec<Vec<usize>> = (0..rows.len()).map(|i| brute_rank(&rows, i)).collect();
    let mut mutual = Vec::new();
    let mut out = Vec::new();
    for i in 0..rows.len() {
        let m: Vec<usize> = ranks[i][..k1]
            .iter()
            .copied()
            .filter(|&j| ranks[j][..k2].contains(&i))
            .collect();
        let mut acc = rows[i].clone();
        for &j in &m {
            for (a, x) in acc.iter_mut().zip(&rows[j]) {
                *a += x;
            }
        }
        out.push(unit(&acc));
        mutual.push(m);
    }
    (mutual, out)
}

pub struct Labels {
    pub ids: Vec<i64>,
    pub cams: Vec<Option<i64>>,
}

/// mAP and CMC by exhaustive enumeration: every relevant item's precision
/// is recounted from scratch over the whole prefix of the ranking.
pub fn eval_oracle(
    dist: &[Vec<f64>],
    q: &Labels,
    g: &Labels,
    cam_filter: bool,
    max_rank: usize,
) -> Option<(f64, Vec<f64>)> {
    let mut aps = Vec::new();
    let mut firsts = Vec::new();
    for (i, row) in dist.iter().enumerate() {
        let qid = q.ids[i];
        if qid < 0 {
            continue;
        }
        let mut kept: Vec<usize> = (0..row.len())
            .filter(|&j| g.ids[j] >= 0)
            .filter(|&j| {
                !(cam_filter
                    && g.ids[j] == qid
                    && q.cams[i].is_some()
                    && q.cams[i] == g.cams[j])
            })
            .collect();
        kept.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap().then(a.cmp(&b)));
        let relevant: Vec<usize> = (0..kept.len()).filter(|&p| g.ids[kept[p]] == qid).collect();
        if relevant.is_empty() {
            continue;
        }
        let ap = relevant
            .iter()
            .map(|&p| {
                let hits_up_to = (0..=p).filter(|&r| g.ids[kept[r]] == qid).count();
                hits_up_to as f64 / (p + 1) as f64
            })
            .sum::<f64>()
            / relevant.len() as f64;
        aps.push(ap);
        firsts.push(relevant[0]);
    }
    if aps.is_empty() {
        return None;
    }
    let n = aps.len() as f64;
    let map = aps.iter().sum::<f64>() / n;
    let cmc = (1..=max_rank)
        .map(|k| firsts.iter().filter(|&&f| f < k).count() as f64 / n)
        .collect();
    Some((map, cmc))
}

fn reciprocal(ranks: &[Vec<usize>], i: usize, k: usize) -> Vec<usize> {
    let forward = &ranks[i][..=k];
    forward
        .iter()
        .copied()
        .filter(|&f| ranks[f][..=k].contains(&i))
        .collect()
}

/// Dense k-reciprocal re-ranking on raw rows (normalized here), blending
/// with the plain Euclidean distance.
pub fn rerank_oracle(q: &[Vec<f64>], g: &[Vec<f64>], k1: usize, k2: usize, lambda: f64) -> Vec<Vec<f64>> {
    let feats: Vec<Vec<f64>> = q.iter().chain(g).map(|r| unit(r)).collect();
    let n = feats.len();
    let nq = q.len();
    let d2: Vec<Vec<f64>> = feats
        .iter()
        .map(|a| feats.iter().map(|b| sq_dist(a, b)).collect())
        .collect();
    let scaled: Vec<Vec<f64>> = d2
        .iter()
        .map(|row| {
            let m = row.iter().cloned().fold(0.0, f64::max);
            row.iter().map(|v| if m > 0.0 { v / m } else { *v }).collect()
        })
        .collect();
    let ranks: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| {
                (a != i)
                    .cmp(&(b != i))
                    .then(d2[i][a].partial_cmp(&d2[i][b]).unwrap())
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect();
    let half = (k1 as f64 / 2.0).round_ties_even() as usize;
    let mut v = vec![vec![0.0; n]; n];
    for i in 0..n {
        let core = reciprocal(&ranks, i, k1);
        let mut expanded = core.clone();
        for &c in &core {
            let cand = reciprocal(&ranks, c, half);
            let inter = cand.iter().filter(|x| core.contains(x)).count();
            if inter as f64 > 2.0 / 3.0 * cand.len() as f64 {
                expanded.extend(cand);
            }
        }
        expanded.sort();
        expanded.dedup();
        let total: f64 = expanded.iter().map(|&j| (-scaled[i][j]).exp()).sum();
        for &j in &expanded {
            v[i][j] = (-scaled[i][j]).exp() / total;
        }
    }
    if k2 != 1 {
        v = (0..n)
            .map(|i| {
                (0..n)
                    .map(|c| ranks[i][..k2].iter().map(|&r| v[r][c]).sum::<f64>() / k2 as f64)
                    .collect()
            })
            .collect();
    }
    (0..nq)
        .map(|i| {
            (nq..n)
                .map(|j| {
                    let s: f64 = (0..n).map(|c| v[i][c].min(v[j][c])).sum();
                    let jac = 1.0 - s / (2.0 - s);
                    jac * (1.0 - lambda) + d2[i][j].sqrt() * lambda
                })
                .collect()
        })
        .collect()
}

/// Population covariance with explicit double loops.
pub fn covariance(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in 0..d {
            cov[a][b] = rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / n;
        }
    }
    (mean, cov)
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..d).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        let p = a[col][col];
        a[col].iter_mut().for_each(|v| *v /= p);
        for r in 0..d {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    let pivot_row = a[col].clone();
                    a[r].iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
                }
            }
        }
    }
    a.into_iter().map(|r| r[d..].to_vec()).collect()
}

/// Regularized Mahalanobis distance of `f` to the (unit-normalized) rows.
pub fn mahalanobis_oracle(rows: &[Vec<f64>], f: &[f64], eps_scale: f64) -> f64 {
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| unit(r)).collect();
    let (mean, mut cov) = covariance(&rows);
    let d = mean.len();
    let trace: f64 = (0..d).map(|k| cov[k][k]).sum();
    let eps = (eps_scale * trace / d as f64).max(1e-12);
    for (k, row) in cov.iter_mut().enumerate() {
        row[k] += eps;
    }
    let inv = invert(&cov);
    let diff: Vec<f64> = f.iter().zip(&mean).map(|(a, b)| a - b).collect();
    let mut q = 0.0;
    for a in 0..d {
        for b in 0..d {
            q += diff[a] * inv[a][b] * diff[b];
        }
    }
    q.max(0.0).sqrt()
}

/// Query/gallery label sets drawn with junk ids and same-camera collisions.
pub fn random_eval_instance(r: &mut StdRng) -> (Vec<Vec<f64>>, Labels, Labels) {
    let nq = r.random_range(1..=10);
    let ng = r.random_range(1..=30);
    let n_ids = r.random_range(1..=6);
    let label = |r: &mut StdRng| -> (i64, Option<i64>) {
        let id = if r.random_bool(0.15) { -1 } else { r.random_range(0..n_ids) };
        let cam = if r.random_bool(0.1) { None } else { Some(r.random_range(0..3)) };
        (id, cam)
    };
    let (qi, qc): (Vec<_>, Vec<_>) = (0..nq).map(|_| label(r)).unzip();
    let (gi, gc): (Vec<_>, Vec<_>) = (0..ng).map(|_| label(r)).unzip();
    // coarse values make distance ties common
    let dist = (0..nq)
        .map(|_| (0..ng).map(|_| r.random_range(0..8) as f64 * 0.25).collect())
        .collect();
    (dist, Labels { ids: qi, cams: qc }, Labels { ids: gi, cams: gc })
}

/// Gallery feature set carrying the labels; features are placeholders since
/// distances are supplied separately.
pub fn labelled_set(labels: &Labels) -> FeatureSet {
    let rows: Vec<Vec<f64>> = (0..labels.ids.len()).map(|k| vec![1.0, k as f64]).collect();
    FeatureSet::from_rows(&rows, labels.ids.clone())
        .unwrap()
        .with_cams(labels.cams.clone())
        .unwrap()
}
