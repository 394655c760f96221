mod common;

use idcenter::centralize::{aggregate, mutual_neighbors, nfc, AggregateParams, AuxFeatureSet, NfcParams};
use idcenter::cleanse::{outlier_filter, quantile_sorted, OutlierConfig};
use idcenter::distance::{knn_self, pairwise_distances, DistanceMatrix};
use idcenter::eval::{evaluate, id2, k_reciprocal_rerank, EvalProtocol, RerankParams};
use idcenter::features::FeatureSet;
use idcenter::stats::{fit_identity_stats, mahalanobis, Mahalanobis};
use rand::Rng;

use common::*;

#[test]
fn nfc_matches_brute_force() {
    let mut r = rng(11);
    for _ in 0..100 {
        let k1 = r.random_range(1..=4);
        let k2 = r.random_range(1..=4);
        let n = r.random_range(k1.max(k2) + 1..=40);
        let d = r.random_range(1..=12);
        let rows = random_rows(&mut r, n, d);
        let set = FeatureSet::from_rows(&rows, vec![0; n]).unwrap();
        let (sets, out) = nfc_oracle(&rows, k1, k2);
        let p = NfcParams { k1, k2 };
        assert_eq!(mutual_neighbors(&set, p).unwrap(), sets);
        for (a, b) in nfc(&set, p).unwrap().rows().zip(&out) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn knn_matches_full_sort_of_distance_matrix() {
    let mut r = rng(12);
    let rows = random_rows(&mut r, 30, 5);
    let set = FeatureSet::from_rows(&rows, vec![0; 30]).unwrap();
    let dm = pairwise_distances(&set, None).unwrap();
    let knn = knn_self(&set, 7).unwrap();
    for (i, k) in knn.iter().enumerate() {
        assert_eq!(k, &dm.neighbors(i, 7));
        let mut brute: Vec<(f64, usize)> = (0..30).filter(|&j| j != i).map(|j| (dist(&rows[i], &rows[j]), j)).collect();
        brute.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // raw rows: the set is not normalized, so distances are on raw rows
        let want: Vec<usize> = brute.iter().take(7).map(|p| p.1).collect();
        assert_eq!(k, &want);
    }
}

#[test]
fn aggregate_matches_formula() {
    let mut r = rng(13);
    let (n, m, d) = (6, 3, 5);
    let rows = random_rows(&mut r, n, d);
    let aux_rows = random_rows(&mut r, n * m, d);
    let set = FeatureSet::from_rows(&rows, vec![0; n]).unwrap();
    let aux = AuxFeatureSet::new(aux_rows.concat(), n, m, d, "test").unwrap();
    let eta = 1.7;
    let out = aggregate(&set, &aux, AggregateParams { eta }).unwrap();
    for i in 0..n {
        let f = unit(&rows[i]);
        let mut acc = f.clone();
        for k in 0..m {
            let a = unit(&aux_rows[i * m + k]);
            for (x, y) in acc.iter_mut().zip(&a) {
                *x += eta / m as f64 * y;
            }
        }
        let want = unit(&acc);
        for (x, y) in out.row(i).iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn evaluation_matches_exhaustive_ap() {
    let mut r = rng(14);
    for _ in 0..300 {
        let (dist, ql, gl) = random_eval_instance(&mut r);
        let cam_filter = r.random_bool(0.5);
        let max_rank = r.random_range(1..=40);
        let protocol = EvalProtocol {
            cam_filter,
            max_rank,
            ..EvalProtocol::default()
        };
        let (q, g) = (labelled_set(&ql), labelled_set(&gl));
        let m = DistanceMatrix::new(q.len(), g.len(), dist.concat(), false).unwrap();
        match (evaluate(&q, &g, &protocol, Some(&m)), eval_oracle(&dist, &ql, &gl, cam_filter, max_rank)) {
            (Ok(res), Some((map, cmc))) => {
                assert!((res.map - map).abs() < 1e-12);
                assert_eq!(res.cmc.len(), max_rank);
                for (a, b) in res.cmc.iter().zip(&cmc) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
            (Err(idcenter::Error::NoValidQueries), None) => {}
            (got, want) => panic!("disagreement: {got:?} vs {want:?}"),
        }
    }
}

#[test]
fn rerank_matches_dense_reference() {
    let mut r = rng(15);
    for _ in 0..40 {
        let k1 = r.random_range(1..=8);
        let k2 = r.random_range(1..=k1);
        let lambda = r.random_range(0.0..=1.0);
        let nq = r.random_range(1..=6);
        let ng = r.random_range(k1 + 1..=30);
        let d = r.random_range(2..=6);
        let centers = random_rows(&mut r, 3, d);
        let mut draw = |n: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| {
                    let c = &centers[r.random_range(0..3)];
                    c.iter().map(|x| x + 0.3 * gaussian(&mut r)).collect()
                })
                .collect()
        };
        let (qr, gr) = (draw(nq), draw(ng));
        let q = FeatureSet::from_rows(&qr, vec![0; nq]).unwrap();
        let g = FeatureSet::from_rows(&gr, vec![0; ng]).unwrap();
        let got = k_reciprocal_rerank(&q, &g, RerankParams { k1, k2, lambda }).unwrap();
        let want = rerank_oracle(&qr, &gr, k1, k2, lambda);
        for (i, row) in want.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                assert!((got.get(i, j) - w).abs() < 1e-9, "k1 {k1} k2 {k2}: {} vs {w}", got.get(i, j));
            }
        }
    }
}

#[test]
fn mahalanobis_matches_gauss_jordan() {
    let mut r = rng(16);
    for _ in 0..30 {
        let d = r.random_range(2..=6);
        let n = r.random_range(d + 2..=40);
        // unit rows, as the cleansing filter fits them
        let rows: Vec<Vec<f64>> = random_rows(&mut r, n, d).iter().map(|x| unit(x)).collect();
        let set = FeatureSet::from_rows(&rows, vec![4; n]).unwrap();
        let stats = fit_identity_stats(&set, 4).unwrap();
        let (mean, cov) = covariance(&rows);
        for (a, b) in stats.mean.iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, row) in cov.iter().enumerate() {
            for (b, c) in row.iter().enumerate() {
                assert!((stats.covariance[(a, b)] - c).abs() < 1e-12);
            }
        }
        let probe: Vec<f64> = unit(&(0..d).map(|_| gaussian(&mut r)).collect::<Vec<_>>());
        let want = mahalanobis_oracle(&rows, &probe, 1e-6);
        let got = mahalanobis(&probe, &stats, 1e-6).unwrap();
        assert!((got - want).abs() <= 1e-6 * want.max(1.0), "{got} vs {want}");
    }
}

#[test]
fn mahalanobis_with_identity_covariance_is_euclidean() {
    // four points at ±e1, ±e2 have covariance diag(1/2, 1/2); the 1e-12 ridge floor still applies
    let rows = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
    let set = FeatureSet::from_rows(&rows, vec![0; 4]).unwrap();
    let stats = fit_identity_stats(&set, 0).unwrap();
    let metric = Mahalanobis::new(&stats, 0.0).unwrap();
    let d = metric.distance(&[0.6, 0.8]).unwrap();
    assert!((d - 2f64.sqrt()).abs() < 1e-9);
}

#[test]
fn outlier_filter_matches_quantile_oracle() {
    let mut r = rng(17);
    let rows = random_rows(&mut r, 60, 4);
    let set = FeatureSet::from_rows(&rows, vec![2; 60]).unwrap();
    let p = 0.1;
    let report = outlier_filter(&set, &OutlierConfig::with_quantile(p)).unwrap();
    let dists: Vec<f64> = rows.iter().map(|x| mahalanobis_oracle(&rows, &unit(x), 1e-6)).collect();
    let mut sorted = dists.clone();
    sorted.sort_by(f64::total_cmp);
    // numpy-style linear interpolation, recomputed by hand
    let q = |t: f64| {
        let h = (sorted.len() - 1) as f64 * t;
        let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    assert!((quantile_sorted(&sorted, p) - q(p)).abs() < 1e-15);
    let margin = 1e-7;
    for (i, d) in dists.iter().enumerate() {
        let inside = *d >= q(p) && *d <= q(1.0 - p);
        let clearly = *d > q(p) + margin && *d < q(1.0 - p) - margin;
        let kept = report.kept.contains(&i);
        if clearly || !inside {
            assert_eq!(kept, inside, "row {i}: {d}");
        }
    }
    assert!(report.removed.len() >= 10);
}

#[test]
fn id2_matches_definition() {
    let mut r = rng(18);
    let rows = random_rows(&mut r, 25, 6);
    let ids: Vec<i64> = (0..25).map(|k| [0, 1, 2, -1][k % 4]).collect();
    let set = FeatureSet::from_rows(&rows, ids.clone()).unwrap();
    let mut per_id = Vec::new();
    for id in 0..3 {
        let members: Vec<Vec<f64>> = (0..25).filter(|&k| ids[k] == id).map(|k| unit(&rows[k])).collect();
        let center: Vec<f64> = (0..6).map(|c| members.iter().map(|m| m[c]).sum::<f64>() / members.len() as f64).collect();
        per_id.push(members.iter().map(|m| dist(m, &center)).sum::<f64>() / members.len() as f64);
    }
    let want = per_id.iter().sum::<f64>() / 3.0;
    assert!((id2(&set).unwrap() - want).abs() < 1e-12);
}
