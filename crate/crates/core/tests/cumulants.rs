mod common;

use common::{assert_close, brute_c, brute_kc, random_stream, rng};
use hawkes_cpd::cumulants::{
    covariance_density, estimate_c, estimate_cumulants, estimate_kc, estimate_lambda, select_w,
};
use hawkes_cpd::events::EventStream;
use hawkes_cpd::sim::{simulate, HawkesParams};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn poisson(mu: &[f64], horizon: f64, seed: u64) -> EventStream {
    let m = mu.len();
    let p = HawkesParams::new(
        DVector::from_row_slice(mu),
        DMatrix::zeros(m, m),
        DMatrix::from_element(m, m, 1.0),
    )
    .unwrap();
    simulate(&p, horizon, seed).unwrap()
}

fn univariate(mu: f64, alpha: f64, beta: f64, horizon: f64, seed: u64) -> EventStream {
    let p = HawkesParams::new(
        DVector::from_element(1, mu),
        DMatrix::from_element(1, 1, alpha),
        DMatrix::from_element(1, 1, beta),
    )
    .unwrap();
    simulate(&p, horizon, seed).unwrap()
}

#[test]
fn matches_brute_force_on_random_streams() {
    let mut r = rng(11);
    for _ in 0..30 {
        let s = random_stream(&mut r, 600);
        let w = s.horizon() * 0.01 * (1.0 + r.random_range(0.0..10.0));
        let c = estimate_c(&s, w).unwrap();
        let k = estimate_kc(&s, w).unwrap();
        let scale_c = brute_c(&s, w).abs().max().max(1e-12);
        let scale_k = brute_kc(&s, w).abs().max().max(1e-12);
        assert_close(&c, &brute_c(&s, w), 1e-9, scale_c);
        assert_close(&k, &brute_kc(&s, w), 1e-9, scale_k);
    }
}

#[test]
fn simulated_hawkes_matches_brute_force() {
    let h = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.25]);
    let p = HawkesParams::from_kernel_matrix(DVector::from_element(2, 0.3), &h, 1.0).unwrap();
    let s = simulate(&p, 8_000.0, 5).unwrap();
    assert!(s.total_events() > 5_000);
    let set = estimate_cumulants(&s, 10.0).unwrap();
    assert_close(&set.c, &brute_c(&s, 10.0), 1e-10, set.c.abs().max());
    assert_close(&set.kc, &brute_kc(&s, 10.0), 1e-10, set.kc.abs().max());
}

#[test]
fn lambda_of_poisson_within_four_sigma() {
    let s = poisson(&[0.3], 10_000.0, 3);
    let l = estimate_lambda(&s).unwrap()[0];
    assert!((l - 0.3).abs() < 4.0 * (0.3f64 / 10_000.0).sqrt(), "{l}");
}

#[test]
fn poisson_cumulants_are_diagonal() {
    let mu = [0.3, 0.5, 0.8];
    let s = poisson(&mu, 1e5, 21);
    let set = estimate_cumulants(&s, 5.0).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                assert!((set.c[(i, i)] - mu[i]).abs() < 0.15 * mu[i], "C {i}");
                assert!((set.kc[(i, i)] - mu[i]).abs() < 0.15 * mu[i], "K {i}");
            } else {
                assert!(set.c[(i, j)].abs() < 0.05, "C {i}{j}");
                assert!(set.kc[(i, j)].abs() < 0.05, "K {i}{j}");
            }
        }
    }
}

#[test]
fn shift_changes_only_boundary_terms() {
    let h = DMatrix::from_row_slice(2, 2, &[0.2, 0.1, 0.0, 0.3]);
    let p = HawkesParams::from_kernel_matrix(DVector::from_element(2, 0.4), &h, 1.0).unwrap();
    let s = simulate(&p, 5_000.0, 8).unwrap();
    let shift = 37.5;
    let horizon = s.horizon() + shift;
    let padded = EventStream::new(horizon, s.events().to_vec()).unwrap();
    let shifted = EventStream::new(
        horizon,
        s.events()
            .iter()
            .map(|e| e.iter().map(|t| t + shift).collect())
            .collect(),
    )
    .unwrap();
    let w = 4.0;
    let a = estimate_cumulants(&padded, w).unwrap();
    let b = estimate_cumulants(&shifted, w).unwrap();
    assert!((&a.lambda * a.horizon - &b.lambda * b.horizon).abs().max() < 1e-9);
    let bound = 2.0 * w * 2.0 * a.lambda.max().powi(2) / a.horizon;
    assert!((&a.c - &b.c).abs().max() <= bound);
    assert!((&a.kc - &b.kc).abs().max() <= bound);
}

#[test]
fn covariance_density_signs() {
    let s = poisson(&[0.5, 0.5], 50_000.0, 4);
    let delta = 1.0;
    let c = covariance_density(&s, 50.0, delta).unwrap();
    // each entry averages ~N_i Bernoulli-ish bin counts of variance ≈ δΛ_j
    for i in 0..2 {
        let n_i = s.subject(i).len() as f64;
        let se = (n_i * delta * 0.5).sqrt() / (delta * s.horizon());
        for j in 0..2 {
            assert!(
                c[(i, j)].abs() < 3.0 * se,
                "{i}{j}: {} vs se {se}",
                c[(i, j)]
            );
        }
    }
    let u = univariate(0.3, 0.5, 1.0, 50_000.0, 2);
    assert!(covariance_density(&u, 0.1, 0.5).unwrap()[(0, 0)] > 0.0);
}

#[test]
fn select_w_on_poisson_is_first_lag() {
    let s = poisson(&[0.4, 0.4], 50_000.0, 12);
    let delta = 1.0;
    let sel = select_w(&s, delta, 5.0).unwrap();
    assert!(!sel.fallback);
    assert_eq!(sel.tau_c, delta);
    assert_eq!(sel.w, 5.0 * delta);
}

#[test]
fn select_w_tracks_decay_time() {
    for seed in [1, 2, 3] {
        let s = univariate(0.3, 0.5, 1.0, 1e5, seed);
        let sel = select_w(&s, 0.25, 5.0).unwrap();
        assert!(!sel.fallback);
        assert!(
            sel.tau_c > 1.0 / 3.0 && sel.tau_c < 3.0,
            "seed {seed}: τ_c = {}",
            sel.tau_c
        );
        assert_eq!(sel.w, 5.0 * sel.tau_c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn brute_force_agreement(seed in 0u64..1_000_000, frac in 0.001f64..0.2) {
        let mut r = rng(seed);
        let s = random_stream(&mut r, 300);
        let w = s.horizon() * frac;
        let c = estimate_c(&s, w).unwrap();
        let k = estimate_kc(&s, w).unwrap();
        let bc = brute_c(&s, w);
        let bk = brute_kc(&s, w);
        for (x, y) in c.iter().zip(bc.iter()) {
            prop_assert!((x - y).abs() <= 1e-9 * bc.abs().max().max(1e-12));
        }
        for (x, y) in k.iter().zip(bk.iter()) {
            prop_assert!((x - y).abs() <= 1e-9 * bk.abs().max().max(1e-12));
        }
    }
}
