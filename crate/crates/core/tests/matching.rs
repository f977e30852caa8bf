mod support;
use support::{covariance, jacobi_eigenvalues, random_data};

use nuisance_core::matching::{
    dsp_descriptor, match_regions, matching_ap, matching_map, pca_apply, pca_fit, pca_reconstruct, Describe, Descriptor, DetectedRegion,
    MatchRecord, MatchingError, RawPatch,
};
use nuisance_core::{BBox, Image};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn descs(data: &[Vec<f64>]) -> Vec<Descriptor> {
    data.iter().map(|r| Descriptor::new(r.clone(), "t")).collect()
}

fn residual(model: &nuisance_core::matching::PcaModel, d: &[Descriptor]) -> f64 {
    d.iter()
        .map(|x| {
            let p = pca_apply(model, x).unwrap();
            let r = pca_reconstruct(model, &p.values);
            x.values.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .sum::<f64>()
        / d.len() as f64
}

#[test]
fn residual_equals_discarded_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let data = random_data(&mut rng, 60, 10);
        let d = descs(&data);
        let model = pca_fit(&d, 3).unwrap();
        let mut eig = jacobi_eigenvalues(covariance(&data));
        eig.sort_by(|a, b| b.total_cmp(a));
        let discarded: f64 = eig[3..].iter().sum();
        let r = residual(&model, &d);
        assert!((r - discarded).abs() <= 1e-6 * discarded, "{r} vs {discarded}");
        for (a, b) in model.eigenvalues.iter().zip(&eig) {
            assert!((a - b).abs() <= 1e-6 * b);
        }
    }
}

#[test]
fn basis_is_orthonormal_and_sign_fixed() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (n, dim, k) in [(50, 10, 6), (8, 30, 8), (5, 5, 5)] {
        let m = pca_fit(&descs(&random_data(&mut rng, n, dim)), k).unwrap();
        for a in 0..k {
            let big = m.basis[a].iter().cloned().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
            assert!(big > 0.0);
            for b in 0..k {
                let dot: f64 = m.basis[a].iter().zip(&m.basis[b]).map(|(x, y)| x * y).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() <= 1e-6);
            }
        }
    }
}

#[test]
fn exact_subspace_and_monotone_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    // points on a 3-dim affine subspace of R^12
    let dirs: Vec<Vec<f64>> = (0..3).map(|_| (0..12).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let offset: Vec<f64> = (0..12).map(|_| rng.random_range(-5.0..5.0)).collect();
    let data: Vec<Vec<f64>> = (0..40)
        .map(|_| {
            let c: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            (0..12).map(|j| offset[j] + (0..3).map(|a| c[a] * dirs[a][j]).sum::<f64>()).collect()
        })
        .collect();
    let d = descs(&data);
    let m = pca_fit(&d, 3).unwrap();
    for x in &d {
        let r = pca_reconstruct(&m, &pca_apply(&m, x).unwrap().values);
        assert!(x.values.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= 1e-6);
    }
    let noisy = descs(&random_data(&mut rng, 40, 12));
    let res: Vec<f64> = (1..=12).map(|k| residual(&pca_fit(&noisy, k).unwrap(), &noisy)).collect();
    assert!(res.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{res:?}");
}

#[test]
fn full_dim_pca_preserves_match_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let a = descs(&random_data(&mut rng, 25, 8));
        let b = descs(&random_data(&mut rng, 25, 8));
        let ids: Vec<String> = (0..25).map(|i| i.to_string()).collect();
        let all: Vec<Descriptor> = a.iter().chain(&b).cloned().collect();
        let m = pca_fit(&all, 8).unwrap();
        let pa: Vec<_> = a.iter().map(|x| pca_apply(&m, x).unwrap()).collect();
        let pb: Vec<_> = b.iter().map(|x| pca_apply(&m, x).unwrap()).collect();
        let raw = match_regions(&ids, &a, &ids, &b, |i, j| i == j).unwrap();
        let proj = match_regions(&ids, &pa, &ids, &pb, |i, j| i == j).unwrap();
        let pairs = |r: &[MatchRecord]| r.iter().map(|x| (x.index_a, x.index_b)).collect::<Vec<_>>();
        assert_eq!(pairs(&raw), pairs(&proj));
    }
}

#[test]
fn pca_rejects_bad_k() {
    let d = descs(&[vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0]]);
    assert!(matches!(pca_fit(&d, 3), Err(MatchingError::Pca(_))));
    assert!(matches!(pca_fit(&d[..1], 1), Err(MatchingError::Pca(_))));
}

#[test]
fn nearest_neighbour_is_row_minimum() {
    // a_i and b_j on a line so distances are |a_i - b_j|
    let a = [0.0, 5.0, 9.0];
    let b = [4.0, 10.0, 1.0];
    let da: Vec<_> = a.iter().map(|&v| Descriptor::new(vec![v], "t")).collect();
    let db: Vec<_> = b.iter().map(|&v| Descriptor::new(vec![v], "t")).collect();
    let ids: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    let m = match_regions(&ids, &da, &ids, &db, |_, _| true).unwrap();
    for (i, r) in m.iter().enumerate() {
        let (best, dist) = (0..3).map(|j| (j, (a[i] - b[j]).abs())).min_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
        assert_eq!((r.index_b, r.distance), (best, dist));
        assert_eq!(r.region_b, ids[best]);
    }
    let single = match_regions(&ids[..1], &da[..1], &ids[..1], &db[..1], |_, _| false).unwrap();
    assert_eq!(single.len(), 1);
}

/// Precision/recall at every distance threshold, integrated by trapezoids.
fn ap_by_threshold_sweep(records: &[(f64, bool)], correspondable: usize) -> f64 {
    let mut thresholds: Vec<f64> = records.iter().map(|r| r.0).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let mut pts = vec![(0.0, 1.0)];
    for t in thresholds {
        let retrieved = records.iter().filter(|r| r.0 <= t).count();
        let tp = records.iter().filter(|r| r.0 <= t && r.1).count();
        pts.push((tp as f64 / correspondable as f64, tp as f64 / retrieved as f64));
    }
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

fn records(raw: &[(f64, bool)]) -> Vec<MatchRecord> {
    raw.iter()
        .enumerate()
        .map(|(i, &(d, c))| MatchRecord { region_a: i.to_string(), region_b: i.to_string(), index_a: i, index_b: i, distance: d, correct: c })
        .collect()
}

#[test]
fn ap_matches_threshold_sweep() {
    let raw = [(0.1, true), (0.2, false), (0.3, true)];
    let ap = matching_ap(&records(&raw), 2);
    assert!((ap - ap_by_threshold_sweep(&raw, 2)).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let n = rng.random_range(1..30);
        let raw: Vec<(f64, bool)> = (0..n).map(|_| (rng.random::<f64>(), rng.random_bool(0.5))).collect();
        let correspondable = raw.iter().filter(|r| r.1).count().max(1) + rng.random_range(0..3);
        let ap = matching_ap(&records(&raw), correspondable);
        assert!((ap - ap_by_threshold_sweep(&raw, correspondable)).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn ap_invariant_under_monotone_transform(raw in prop::collection::vec((0.0..10.0f64, any::<bool>()), 1..30), extra in 0usize..4) {
        let correspondable = raw.iter().filter(|r| r.1).count() + extra;
        let a = matching_ap(&records(&raw), correspondable.max(1));
        let mapped: Vec<(f64, bool)> = raw.iter().map(|&(d, c)| (d.exp() * 3.0 + 1.0, c)).collect();
        prop_assert_eq!(a, matching_ap(&records(&mapped), correspondable.max(1)));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((0.0..=1.0).contains(&matching_map(&[a, 0.3])));
    }
}

fn region(patch: Image, scale: f64) -> DetectedRegion {
    DetectedRegion { region_id: "r".into(), image_id: "i".into(), patch, scale, bbox: BBox::full(1, 1) }
}

#[test]
fn dsp_is_mean_of_single_size_calls() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let patch = Image::new(40, 40, 1, (0..1600).map(|_| rng.random::<f32>()).collect()).unwrap();
    let r = region(patch, 20.0);
    let raw = RawPatch { side: 9, normalize: false };
    let pooled = dsp_descriptor(&r, 0.7, 1.5, 6, &raw).unwrap();
    let sizes: Vec<f64> = (0..6).map(|i| 0.7 + 0.8 * i as f64 / 5.0).collect();
    let singles: Vec<Descriptor> = sizes.iter().map(|&l| dsp_descriptor(&r, l, l, 1, &raw).unwrap()).collect();
    for j in 0..raw.input_size().0 * raw.input_size().1 {
        let mean = singles.iter().map(|d| d.values[j]).sum::<f64>() / 6.0;
        assert!((pooled.values[j] - mean).abs() < 1e-12);
    }
    assert_eq!(dsp_descriptor(&r, 1.0, 1.0, 1, &raw).unwrap().values.len(), 81);
}
