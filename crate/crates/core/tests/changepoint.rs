mod common;

use common::{point_from_log, random_spd, random_symmetric, rng};
use hawkes_cpd::changepoint::{
    bb_sup_quantile, bootstrap_quantile, detect_multiple, detect_single, sigma2_hat, tn_profile,
    Calibration, CpConfig, Detector, Outcome,
};
use hawkes_cpd::geometry::SpdPoint;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn quick() -> CpConfig {
    CpConfig {
        mc_samples: 4_000,
        ..CpConfig::default()
    }
}

fn mean_of(logs: &[DMatrix<f64>]) -> DMatrix<f64> {
    logs.iter()
        .fold(DMatrix::zeros(logs[0].nrows(), logs[0].ncols()), |a, b| {
            a + b
        })
        / logs.len() as f64
}

fn mean_sq(logs: &[DMatrix<f64>], center: &DMatrix<f64>) -> f64 {
    logs.iter()
        .map(|l| (l - center).norm_squared())
        .sum::<f64>()
        / logs.len() as f64
}

/// `nT_n(k/n)` straight from its definition, with a two-pass `σ̂²`.
fn brute_statistic(ys: &[SpdPoint], k: usize) -> f64 {
    let logs: Vec<DMatrix<f64>> = ys.iter().map(|p| p.log().clone()).collect();
    let n = logs.len() as f64;
    let mu = mean_of(&logs);
    let d2: Vec<f64> = logs.iter().map(|l| (l - &mu).norm_squared()).collect();
    let v = d2.iter().sum::<f64>() / n;
    let sigma2 = d2.iter().map(|x| (x - v).powi(2)).sum::<f64>() / n;
    let (a, b) = logs.split_at(k);
    let (m1, m2) = (mean_of(a), mean_of(b));
    let (v1, v2) = (mean_sq(a, &m1), mean_sq(b, &m2));
    let (v1c, v2c) = (mean_sq(a, &m2), mean_sq(b, &m1));
    let u = k as f64 / n;
    n * u * (1.0 - u) / sigma2 * ((v1 - v2).powi(2) + (v1c - v1 + v2c - v2).powi(2))
}

fn noisy_cluster(
    g: &mut ChaCha8Rng,
    center: &DMatrix<f64>,
    n: usize,
    jitter: f64,
) -> Vec<SpdPoint> {
    let m = center.nrows();
    (0..n)
        .map(|_| point_from_log(center + random_symmetric(g, m, jitter)))
        .collect()
}

/// Cluster whose jitter cycles through a balanced pattern, so every
/// sub-segment is close to homogeneous.
fn cyclic_cluster(center: &DMatrix<f64>, n: usize, jitter: f64) -> Vec<SpdPoint> {
    let m = center.nrows();
    let dirs = [
        DMatrix::from_diagonal(&DVector::from_fn(
            m,
            |i, _| if i % 2 == 0 { 1.0 } else { -1.0 },
        )),
        DMatrix::from_fn(m, m, |i, j| if i != j { 1.0 } else { 0.0 }),
    ];
    let pattern = [(0, 1.0), (1, 2.0), (0, -1.0), (1, -2.0)];
    (0..n)
        .map(|i| {
            let (d, w) = pattern[i % 4];
            point_from_log(center + &dirs[d] * (w * jitter))
        })
        .collect()
}

fn iid(g: &mut ChaCha8Rng, m: usize, n: usize) -> Vec<SpdPoint> {
    (0..n).map(|_| random_spd(g, m, 0.5)).collect()
}

#[test]
fn profile_matches_definition() {
    let mut g = rng(1);
    for _ in 0..20 {
        let m = g.random_range(1..5);
        let n = g.random_range(10..40);
        let ys = iid(&mut g, m, n);
        let p = tn_profile(&ys, &quick()).unwrap();
        for (i, &v) in p.values.iter().enumerate() {
            let b = brute_statistic(&ys, p.first_k + i);
            assert!((v - b).abs() <= 1e-9 * b.abs().max(1.0), "{v} vs {b}");
        }
    }
}

#[test]
fn sigma2_matches_two_pass() {
    let mut g = rng(2);
    let ys = iid(&mut g, 3, 25);
    let logs: Vec<DMatrix<f64>> = ys.iter().map(|p| p.log().clone()).collect();
    let mu = mean_of(&logs);
    let d2: Vec<f64> = logs.iter().map(|l| (l - &mu).norm_squared()).collect();
    let v = d2.iter().sum::<f64>() / 25.0;
    let two_pass = d2.iter().map(|x| (x - v).powi(2)).sum::<f64>() / 25.0;
    assert!((sigma2_hat(&ys).unwrap() - two_pass).abs() < 1e-10 * two_pass);
}

#[test]
fn two_clusters_split_in_the_middle() {
    let mut g = rng(3);
    let a = DMatrix::identity(3, 3) * 0.0;
    let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.5, 0.3]));
    let mut ys = noisy_cluster(&mut g, &a, 10, 0.05);
    ys.extend(noisy_cluster(&mut g, &b, 10, 0.05));
    let t = detect_single(&ys, &quick(), 0).unwrap();
    assert_eq!(t.outcome, Outcome::Change);
    assert_eq!(t.change, Some(10));
    assert_eq!(t.argmax, Some(10));
}

#[test]
fn reversal_maps_split_to_its_mirror() {
    let mut g = rng(12);
    let b = DMatrix::from_diagonal(&DVector::from_vec(vec![0.8, -0.8]));
    let mut ys = noisy_cluster(&mut g, &DMatrix::zeros(2, 2), 12, 0.05);
    ys.extend(noisy_cluster(&mut g, &b, 28, 0.05));
    let fwd = detect_single(&ys, &quick(), 0).unwrap();
    ys.reverse();
    let bwd = detect_single(&ys, &quick(), 0).unwrap();
    assert_eq!(fwd.change, Some(12));
    assert_eq!(bwd.change, Some(40 - 12));
}

#[test]
fn time_reversal_mirrors_the_profile() {
    let mut g = rng(4);
    for _ in 0..10 {
        let n = g.random_range(10..50);
        let ys = iid(&mut g, 3, n);
        let rev: Vec<SpdPoint> = ys.iter().rev().cloned().collect();
        let p = tn_profile(&ys, &quick()).unwrap();
        let q = tn_profile(&rev, &quick()).unwrap();
        assert_eq!(p.values.len(), q.values.len());
        for (a, b) in p.values.iter().zip(q.values.iter().rev()) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}

#[test]
fn invariant_to_log_scaling_translation_and_rotation() {
    let mut g = rng(5);
    let ys = iid(&mut g, 3, 30);
    let base = tn_profile(&ys, &quick()).unwrap();
    let scaled: Vec<SpdPoint> = ys.iter().map(|p| point_from_log(p.log() * 4.0)).collect();
    assert_eq!(tn_profile(&scaled, &quick()).unwrap().values, base.values);
    let shift = random_symmetric(&mut g, 3, 1.0);
    let q = nalgebra::linalg::QR::new(DMatrix::from_fn(3, 3, |_, _| g.random_range(-1.0..1.0))).q();
    let moved: Vec<SpdPoint> = ys
        .iter()
        .map(|p| point_from_log(&q * (p.log() + &shift) * q.transpose()))
        .collect();
    let other = tn_profile(&moved, &quick()).unwrap();
    for (a, b) in base.values.iter().zip(&other.values) {
        assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0));
    }
}

#[test]
fn larger_shift_gives_stronger_evidence() {
    let mut g = rng(6);
    let noise: Vec<DMatrix<f64>> = (0..40).map(|_| random_symmetric(&mut g, 2, 0.3)).collect();
    let direction = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, -0.4]);
    let sup = |size: f64| {
        let ys: Vec<SpdPoint> = noise
            .iter()
            .enumerate()
            .map(|(i, e)| point_from_log(e + &direction * if i >= 20 { size } else { 0.0 }))
            .collect();
        tn_profile(&ys, &quick()).unwrap().sup()
    };
    let mut last = 0.0;
    for size in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let s = sup(size);
        assert!(s >= last, "{size}: {s} < {last}");
        last = s;
    }
}

#[test]
fn threshold_properties() {
    let cfg = quick();
    let q = bb_sup_quantile(&cfg, 11).unwrap();
    assert!(q >= 3.84);
    assert_eq!(q, bb_sup_quantile(&cfg, 11).unwrap());
    let loose = CpConfig {
        alpha: 0.2,
        ..cfg.clone()
    };
    assert!(bb_sup_quantile(&loose, 11).unwrap() < q);
    let narrow = CpConfig {
        c: 0.3,
        ..cfg.clone()
    };
    assert!(bb_sup_quantile(&narrow, 11).unwrap() < q);
}

#[test]
fn threshold_at_a_single_point_is_chi_square() {
    // on [0.499, 0.501] the sup is one squared standard normal
    let cfg = CpConfig {
        c: 0.499,
        mc_samples: 40_000,
        ..CpConfig::default()
    };
    let q = bb_sup_quantile(&cfg, 3).unwrap();
    assert!((q - 3.8415).abs() < 0.2, "{q}");
}

#[test]
fn three_regimes_are_found_exactly() {
    let centers = [
        DMatrix::zeros(3, 3),
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.5, 0.0, -1.0])),
        DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.5, 0.0, 0.5, 1.0]),
    ];
    let mut ys = Vec::new();
    for c in &centers {
        ys.extend(cyclic_cluster(c, 32, 0.05));
    }
    let report = detect_multiple(&ys, &quick(), 0).unwrap();
    assert_eq!(report.change_indices, vec![32, 64]);
    assert_eq!(report.n, 96);
    assert!(!report.depth_exhausted);
}

#[test]
fn no_change_reports_one_profile() {
    let ys = cyclic_cluster(&DMatrix::zeros(2, 2), 60, 0.3);
    let report = detect_multiple(&ys, &quick(), 0).unwrap();
    assert!(
        report.change_indices.is_empty(),
        "{:?}",
        report.change_indices
    );
    assert_eq!(report.tested_segments().count(), 1);
    let seg = &report.segments[0];
    assert_eq!(seg.outcome, Outcome::NoChange);
    assert_eq!(seg.profile.len(), 60 - 2 * 6 + 1);
}

#[test]
fn identical_data_is_degenerate() {
    let ys = vec![point_from_log(DMatrix::identity(2, 2)); 20];
    let t = detect_single(&ys, &quick(), 0).unwrap();
    assert_eq!(t.outcome, Outcome::Degenerate);
    assert!(t.change.is_none());
}

#[test]
fn short_segments_are_not_tested() {
    let mut g = rng(9);
    let ys = iid(&mut g, 2, 5);
    assert_eq!(
        detect_single(&ys, &quick(), 0).unwrap().outcome,
        Outcome::TooShort
    );
}

#[test]
fn results_do_not_depend_on_seed_reuse_or_threads() {
    let mut g = rng(10);
    let mut ys = noisy_cluster(&mut g, &DMatrix::zeros(2, 2), 25, 0.2);
    ys.extend(noisy_cluster(&mut g, &DMatrix::identity(2, 2), 25, 0.2));
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                Detector::new(quick(), 42)
                    .unwrap()
                    .detect_multiple(&ys)
                    .unwrap()
            })
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(1));
    assert_eq!(one.change_indices, vec![25]);
}

#[test]
fn bootstrap_quantile_is_reproducible() {
    let mut g = rng(13);
    let ys = iid(&mut g, 2, 40);
    let cfg = quick();
    let q = bootstrap_quantile(&ys, &cfg, 300, 5).unwrap();
    assert!(q > 0.0 && q.is_finite());
    assert_eq!(q, bootstrap_quantile(&ys, &cfg, 300, 5).unwrap());
    let loose = CpConfig { alpha: 0.3, ..cfg };
    assert!(bootstrap_quantile(&ys, &loose, 300, 5).unwrap() <= q);
}

#[test]
fn bootstrap_holds_size_where_the_limit_does_not() {
    let mut g = rng(14);
    let boot = CpConfig {
        calibration: Calibration::Bootstrap { replicates: 200 },
        ..quick()
    };
    let asym = CpConfig {
        calibration: Calibration::Asymptotic,
        ..quick()
    };
    let (b, a) = (
        Detector::new(boot, 1).unwrap(),
        Detector::new(asym, 1).unwrap(),
    );
    let trials = 100;
    let (mut rb, mut ra) = (0, 0);
    for _ in 0..trials {
        let ys = iid(&mut g, 3, 60);
        rb += b.detect_single(&ys).unwrap().change.is_some() as usize;
        ra += a.detect_single(&ys).unwrap().change.is_some() as usize;
    }
    assert!(rb <= 12, "bootstrap rejected {rb}/{trials}");
    assert!(ra > rb, "asymptotic {ra} vs bootstrap {rb}");
}

#[test]
fn segment_thresholds_follow_the_calibration() {
    let ys = cyclic_cluster(&DMatrix::zeros(2, 2), 40, 0.3);
    let asym = CpConfig {
        calibration: Calibration::Asymptotic,
        ..quick()
    };
    let d = Detector::new(asym, 2).unwrap();
    assert_eq!(
        d.detect_multiple(&ys).unwrap().segments[0].threshold,
        d.threshold
    );
    let r = Detector::new(quick(), 2)
        .unwrap()
        .detect_multiple(&ys)
        .unwrap();
    assert_ne!(r.segments[0].threshold, r.threshold);
}
