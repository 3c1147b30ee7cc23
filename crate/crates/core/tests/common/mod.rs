#![allow(dead_code)]

use hawkes_cpd::events::EventStream;
use hawkes_cpd::geometry::SpdPoint;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Events of `j` in `(tau - w, tau + w]`, by linear scan.
fn window_count(events: &[f64], tau: f64, w: f64) -> f64 {
    events
        .iter()
        .filter(|&&t| t > tau - w && t <= tau + w)
        .count() as f64
}

/// Direct evaluation of `Ĉ` from its defining sum.
pub fn brute_c(s: &EventStream, w: f64) -> DMatrix<f64> {
    let m = s.dim();
    let t = s.horizon();
    let lambda: Vec<f64> = (0..m).map(|i| s.subject(i).len() as f64 / t).collect();
    DMatrix::from_fn(m, m, |i, j| {
        s.subject(i)
            .iter()
            .map(|&tau| window_count(s.subject(j), tau, w) - 2.0 * w * lambda[j])
            .sum::<f64>()
            / t
    })
}

/// Direct evaluation of `K̂_iij` with an O(n²) pair sum.
pub fn brute_kc(s: &EventStream, w: f64) -> DMatrix<f64> {
    let m = s.dim();
    let t = s.horizon();
    let lambda: Vec<f64> = (0..m).map(|i| s.subject(i).len() as f64 / t).collect();
    DMatrix::from_fn(m, m, |i, j| {
        let mut first = 0.0;
        for &tau in s.subject(i) {
            let ci = window_count(s.subject(i), tau, w) - 2.0 * w * lambda[i];
            let cj = window_count(s.subject(j), tau, w) - 2.0 * w * lambda[j];
            first += ci * cj;
        }
        let mut pairs = 0.0;
        for &a in s.subject(i) {
            for &b in s.subject(j) {
                pairs += (2.0 * w - (a - b).abs()).max(0.0);
            }
        }
        first / t - lambda[i] / t * pairs + 4.0 * w * w * lambda[i] * lambda[i] * lambda[j]
    })
}

/// Random stream with clustered and uniform events, at most `max_events` in total.
pub fn random_stream(rng: &mut ChaCha8Rng, max_events: usize) -> EventStream {
    let m = rng.random_range(1..=4);
    let horizon = rng.random_range(50.0..500.0);
    let total = rng.random_range(0..=max_events);
    let mut events: Vec<Vec<f64>> = vec![Vec::new(); m];
    for _ in 0..total {
        let i = rng.random_range(0..m);
        let t = if rng.random_bool(0.3) && !events[i].is_empty() {
            let base = events[i][rng.random_range(0..events[i].len())];
            (base + rng.random_range(0.0..2.0_f64)).min(horizon)
        } else {
            rng.random_range(0.0..horizon)
        };
        events[i].push(t);
    }
    for e in &mut events {
        e.sort_by(f64::total_cmp);
        e.dedup();
    }
    EventStream::new(horizon, events).unwrap()
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m, m, |_, _| StandardNormal.sample(rng));
    (&g + g.transpose()) * (0.5 * scale)
}

/// Random SPD point `exp(S)` with `S` symmetric Gaussian.
pub fn random_spd(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> SpdPoint {
    SpdPoint::from_log(random_symmetric(rng, m, scale)).unwrap()
}

pub fn point_from_log(log: DMatrix<f64>) -> SpdPoint {
    SpdPoint::from_log(log).unwrap()
}

pub fn random_vector(rng: &mut ChaCha8Rng, m: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(m, |_, _| rng.random_range(lo..hi))
}

/// Random `H` rescaled to spectral radius `rho`.
pub fn random_stable_h(rng: &mut ChaCha8Rng, m: usize, rho: f64) -> DMatrix<f64> {
    let h = DMatrix::from_fn(m, m, |_, _| rng.random_range(0.0..1.0));
    let r = hawkes_cpd::linalg::spectral_radius(&h);
    h * (rho / r)
}

/// `|a − b| ≤ rel · max(|b|, floor)` entrywise.
pub fn assert_close(a: &DMatrix<f64>, b: &DMatrix<f64>, rel: f64, floor: f64) {
    assert_eq!(a.shape(), b.shape());
    for (x, y) in a.iter().zip(b.iter()) {
        let tol = rel * y.abs().max(floor);
        assert!((x - y).abs() <= tol, "{x} vs {y} (tol {tol})\n{a}\n{b}");
    }
}
