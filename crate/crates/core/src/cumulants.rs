//! Integrated-cumulant estimators over a truncation half-width `W`.
//!
//! For subject `j` and an anchor time `τ`, the window count is
//! `ΔN_j(τ) = #{t ∈ Z_j : τ − W < t ≤ τ + W}`; for `j = i` this includes the
//! anchor event itself. With `Λ̂_i = N_i(T)/T`:
//!
//! ```text
//! Ĉ_ij  = 1/T Σ_{τ∈Z_i} (ΔN_j(τ) − 2WΛ̂_j)
//! K̂_ijk = 1/T Σ_{τ∈Z_i} (ΔN_j(τ) − 2WΛ̂_j)(ΔN_k(τ) − 2WΛ̂_k)
//!         − Λ̂_i/T Σ_{τ∈Z_j} Σ_{τ'∈Z_k} (2W − |τ' − τ|)⁺ + 4W²Λ̂_iΛ̂_jΛ̂_k
//! ```
//!
//! Only the `(i, i, j)` slice of the third cumulant, `K̂ᶜ_ij = K̂_iij`, is
//! needed downstream.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::events::EventStream;
use crate::linalg;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantSet {
    #[serde(with = "linalg::vector")]
    pub lambda: DVector<f64>,
    #[serde(rename = "C", with = "linalg::rows")]
    pub c: DMatrix<f64>,
    #[serde(rename = "Kc", with = "linalg::rows")]
    pub kc: DMatrix<f64>,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl CumulantSet {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// Replaces `Ĉ` by its symmetric part.
    pub fn symmetrized(mut self) -> Self {
        self.c = linalg::sym_part(&self.c);
        self
    }
}

fn check_w(stream: &EventStream, w: f64) -> Result<()> {
    if !(w.is_finite() && w > 0.0 && w < stream.horizon() / 2.0) {
        return Err(Error::invalid(format!(
            "half-width W = {w} must lie in (0, T/2) with T = {}",
            stream.horizon()
        )));
    }
    Ok(())
}

pub fn estimate_lambda(stream: &EventStream) -> Result<DVector<f64>> {
    let t = stream.horizon();
    if !(t > 0.0) {
        return Err(Error::invalid("zero horizon"));
    }
    Ok(DVector::from_iterator(
        stream.dim(),
        stream.counts().into_iter().map(|n| n as f64 / t),
    ))
}

/// `#{x ∈ seq : lo < x ≤ hi}` for sorted `seq`.
fn count_in(seq: &[f64], lo: f64, hi: f64) -> usize {
    seq.partition_point(|&x| x <= hi) - seq.partition_point(|&x| x <= lo)
}

/// `Σ_{τ∈a} Σ_{τ'∈b} (2W − |τ' − τ|)⁺` by a sweep over sorted inputs that
/// only visits pairs closer than `2W`.
fn pair_overlap(a: &[f64], b: &[f64], w: f64) -> f64 {
    let two_w = 2.0 * w;
    let mut lo = 0;
    let mut sum = 0.0;
    for &tau in a {
        while lo < b.len() && b[lo] <= tau - two_w {
            lo += 1;
        }
        for &t in &b[lo..] {
            let d = (t - tau).abs();
            if t >= tau + two_w {
                break;
            }
            let v = two_w - d;
            if v > 0.0 {
                sum += v;
            }
        }
    }
    sum
}

/// Centered window counts `ΔN_j(τ) − 2WΛ̂_j` for every `τ ∈ Z_i`, row per event.
fn centered_counts(stream: &EventStream, lambda: &DVector<f64>, w: f64, i: usize) -> Vec<Vec<f64>> {
    let m = stream.dim();
    stream
        .subject(i)
        .iter()
        .map(|&tau| {
            (0..m)
                .map(|j| count_in(stream.subject(j), tau - w, tau + w) as f64 - 2.0 * w * lambda[j])
                .collect()
        })
        .collect()
}

pub fn estimate_c(stream: &EventStream, w: f64) -> Result<DMatrix<f64>> {
    Ok(estimate_cumulants(stream, w)?.c)
}

pub fn estimate_kc(stream: &EventStream, w: f64) -> Result<DMatrix<f64>> {
    Ok(estimate_cumulants(stream, w)?.kc)
}

/// General third-order coefficient `K̂_ijk`.
pub fn estimate_k(stream: &EventStream, w: f64, i: usize, j: usize, k: usize) -> Result<f64> {
    check_w(stream, w)?;
    let m = stream.dim();
    if i >= m || j >= m || k >= m {
        return Err(Error::invalid("cumulant index out of range"));
    }
    let t = stream.horizon();
    let lambda = estimate_lambda(stream)?;
    let mut first = 0.0;
    for &tau in stream.subject(i) {
        let cj = count_in(stream.subject(j), tau - w, tau + w) as f64 - 2.0 * w * lambda[j];
        let ck = count_in(stream.subject(k), tau - w, tau + w) as f64 - 2.0 * w * lambda[k];
        first += cj * ck;
    }
    let pairs = pair_overlap(stream.subject(j), stream.subject(k), w);
    Ok(first / t - lambda[i] / t * pairs + 4.0 * w * w * lambda[i] * lambda[j] * lambda[k])
}

/// `Λ̂`, `Ĉ` and `K̂ᶜ` in one pass over the window counts.
pub fn estimate_cumulants(stream: &EventStream, w: f64) -> Result<CumulantSet> {
    check_w(stream, w)?;
    let m = stream.dim();
    let t = stream.horizon();
    let lambda = estimate_lambda(stream)?;
    let mut c = DMatrix::zeros(m, m);
    let mut kc = DMatrix::zeros(m, m);
    for i in 0..m {
        let rows = centered_counts(stream, &lambda, w, i);
        let mut c_sum = vec![0.0; m];
        let mut k_sum = vec![0.0; m];
        for row in &rows {
            let own = row[i];
            for j in 0..m {
                c_sum[j] += row[j];
                k_sum[j] += own * row[j];
            }
        }
        for j in 0..m {
            c[(i, j)] = c_sum[j] / t;
            let pairs = pair_overlap(stream.subject(i), stream.subject(j), w);
            kc[(i, j)] = k_sum[j] / t - lambda[i] / t * pairs
                + 4.0 * w * w * lambda[i] * lambda[i] * lambda[j];
        }
    }
    Ok(CumulantSet {
        lambda,
        c,
        kc,
        w,
        horizon: t,
    })
}

/// Binned covariance density at lag `lag`:
/// `Ĉ_ij(t) = 1/(δT) Σ_{τ∈Z_i} (N_j(τ+t+δ) − N_j(τ+t) − δΛ̂_j)`.
pub fn covariance_density(stream: &EventStream, lag: f64, delta: f64) -> Result<DMatrix<f64>> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid("bin width must be positive"));
    }
    if !(lag.is_finite() && lag >= 0.0) {
        return Err(Error::invalid("lag must be nonnegative"));
    }
    let m = stream.dim();
    let t = stream.horizon();
    let lambda = estimate_lambda(stream)?;
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let zj = stream.subject(j);
            let sum: f64 = stream
                .subject(i)
                .iter()
                .map(|&tau| count_in(zj, tau + lag, tau + lag + delta) as f64 - delta * lambda[j])
                .sum();
            out[(i, j)] = sum / (delta * t);
        }
    }
    Ok(out)
}

/// Outcome of the automatic half-width choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WSelection {
    #[serde(rename = "W")]
    pub w: f64,
    pub tau_c: f64,
    pub delta: f64,
    pub multiple: f64,
    pub noise_floor: f64,
    /// `true` when no decay was detected and the inter-event fallback was used.
    pub fallback: bool,
}

pub const DEFAULT_W_MULTIPLE: f64 = 5.0;

/// Log-spaced lags `δ·10^(k/10)`, `k = 0..=30`.
pub fn lag_grid(delta: f64) -> Vec<f64> {
    (0..=30)
        .map(|k| delta * 10f64.powf(k as f64 / 10.0))
        .collect()
}

/// Pooled mean inter-event time `T / N`.
pub fn mean_inter_event_time(stream: &EventStream) -> Option<f64> {
    let n = stream.total_events();
    (n > 0).then(|| stream.horizon() / n as f64)
}

/// Picks `W = multiple · τ_c`. `τ_c` is the first lag of the log grid at
/// which `‖Ĉ(t)‖_F` has decayed by a factor `e` from its value at the first
/// lag, or has fallen below the noise floor (twice the median norm over the
/// last decade of lags), whichever comes first.
pub fn select_w(stream: &EventStream, delta: f64, multiple: f64) -> Result<WSelection> {
    let Some(mean_gap) = mean_inter_event_time(stream) else {
        return Err(Error::invalid("cannot select W on an empty stream"));
    };
    if !(multiple.is_finite() && multiple > 0.0) {
        return Err(Error::invalid("W multiple must be positive"));
    }
    let lags = lag_grid(delta);
    let norms = lags
        .iter()
        .map(|&lag| covariance_density(stream, lag, delta).map(|c| c.norm()))
        .collect::<Result<Vec<_>>>()?;
    let mut tail: Vec<f64> = norms[norms.len() - 10..].to_vec();
    tail.sort_by(f64::total_cmp);
    let median = 0.5 * (tail[4] + tail[5]);
    let floor = 2.0 * median;
    let level = floor.max(norms[0] / std::f64::consts::E);
    let crossing = norms.iter().position(|&n| n < level);
    let (tau_c, w, fallback) = match crossing {
        Some(k) => (lags[k], multiple * lags[k], false),
        None => {
            warn!("covariance density never decays below its noise floor; using 100× mean inter-event time");
            (f64::NAN, 100.0 * mean_gap, true)
        }
    };
    Ok(WSelection {
        w,
        tau_c,
        delta,
        multiple,
        noise_floor: floor,
        fallback,
    })
}
