//! Multivariate Hawkes simulation with exponential kernels
//! `φ_ij(t) = α_ij · exp(−β_ij t)`.
//!
//! Sampling uses Ogata thinning. The excitation that subject `j` exerts on
//! subject `i` is kept as a decaying sum `s_ij`, updated in O(1) per event.
//! Amplitudes may be negative; the conditional intensity is floored at zero.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::events::EventStream;
use crate::linalg;
use crate::{Error, Result};

/// Default cap on stationarity rejection draws.
pub const RESAMPLE_CAP: usize = 1000;

/// RNG stream reserved for parameter draws, so they never share a sequence
/// with simulation draws made from the same seed.
const PARAM_STREAM: u64 = 0x5041_5241_4d53;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesParams {
    #[serde(with = "linalg::vector")]
    pub mu: DVector<f64>,
    #[serde(with = "linalg::rows")]
    pub alpha: DMatrix<f64>,
    #[serde(with = "linalg::rows")]
    pub beta: DMatrix<f64>,
}

impl HawkesParams {
    /// Checks shapes, `μ ≥ 0` and `β > 0`. Stationarity is checked separately
    /// (see [`HawkesParams::is_stationary`]) so callers can inspect a
    /// nonstationary candidate.
    pub fn new(mu: DVector<f64>, alpha: DMatrix<f64>, beta: DMatrix<f64>) -> Result<Self> {
        let m = mu.len();
        if m == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if alpha.shape() != (m, m) || beta.shape() != (m, m) {
            return Err(Error::invalid(
                "alpha and beta must be m×m with m = len(mu)",
            ));
        }
        if mu.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::invalid(
                "background rates must be finite and nonnegative",
            ));
        }
        if beta.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(Error::invalid("decays must be finite and positive"));
        }
        if alpha.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("amplitudes must be finite"));
        }
        Ok(Self { mu, alpha, beta })
    }

    /// Parameters whose kernel integral is `h` with a common decay `beta`.
    pub fn from_kernel_matrix(mu: DVector<f64>, h: &DMatrix<f64>, beta: f64) -> Result<Self> {
        let m = mu.len();
        Self::new(mu, h * beta, DMatrix::from_element(m, m, beta))
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn kernel_integral(&self) -> DMatrix<f64> {
        kernel_integral(self)
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.kernel_integral())
    }

    pub fn is_stationary(&self) -> bool {
        self.spectral_radius() < 1.0
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("params serialize");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// `h_ij = α_ij / β_ij`.
pub fn kernel_integral(params: &HawkesParams) -> DMatrix<f64> {
    params.alpha.component_div(&params.beta)
}

pub use crate::linalg::spectral_radius;

/// One Hawkes realisation on `[0, horizon]`, deterministic in `seed`.
pub fn simulate(params: &HawkesParams, horizon: f64, seed: u64) -> Result<EventStream> {
    let rho = params.spectral_radius();
    if !(rho < 1.0) {
        return Err(Error::Nonstationary(rho));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::invalid("horizon must be positive"));
    }
    let m = params.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events: Vec<Vec<f64>> = vec![Vec::new(); m];
    // excitation[i * m + j]: current contribution of subject j's past to λ_i
    let mut excitation = vec![0.0_f64; m * m];
    let mut intensity = vec![0.0_f64; m];
    let mut t = 0.0_f64;

    loop {
        // Positive contributions only decay and negative ones only rise toward
        // zero, so this bound holds until the next accepted event.
        let bound: f64 = (0..m)
            .map(|i| {
                params.mu[i]
                    + excitation[i * m..(i + 1) * m]
                        .iter()
                        .map(|&s| s.max(0.0))
                        .sum::<f64>()
            })
            .sum();
        if bound <= 0.0 {
            break;
        }
        let wait: f64 = Exp1.sample(&mut rng);
        let dt = wait / bound;
        t += dt;
        if t > horizon {
            break;
        }
        let mut total = 0.0;
        for i in 0..m {
            let mut lambda = params.mu[i];
            for j in 0..m {
                let s = &mut excitation[i * m + j];
                if *s != 0.0 {
                    *s *= (-params.beta[(i, j)] * dt).exp();
                }
                lambda += *s;
            }
            intensity[i] = lambda.max(0.0);
            total += intensity[i];
        }
        let u: f64 = rng.random::<f64>() * bound;
        if u >= total {
            continue;
        }
        let mut acc = 0.0;
        let mut fired = m - 1;
        for (i, &l) in intensity.iter().enumerate() {
            acc += l;
            if u < acc {
                fired = i;
                break;
            }
        }
        let seq = &mut events[fired];
        if seq.last().is_some_and(|&last| t <= last) {
            continue;
        }
        seq.push(t);
        for i in 0..m {
            excitation[i * m + fired] += params.alpha[(i, fired)];
        }
    }
    EventStream::new(horizon, events)
}

/// Piecewise-constant regimes simulated back to back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub segments: Vec<Segment>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub params: HawkesParams,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.segments.first() else {
            return Err(Error::invalid("scenario has no segments"));
        };
        let m = first.params.dim();
        for s in &self.segments {
            if !(s.duration.is_finite() && s.duration > 0.0) {
                return Err(Error::invalid("segment durations must be positive"));
            }
            if s.params.dim() != m {
                return Err(Error::invalid("all segments must share one dimension"));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Boundaries between consecutive segments.
    pub fn change_times(&self) -> Vec<f64> {
        let mut t = 0.0;
        let mut out = Vec::new();
        for s in &self.segments[..self.segments.len().saturating_sub(1)] {
            t += s.duration;
            out.push(t);
        }
        out
    }

    /// Hex SHA-256 over the JSON encoding of every segment's parameters.
    pub fn params_hash(&self) -> String {
        let params: Vec<&HawkesParams> = self.segments.iter().map(|s| &s.params).collect();
        let json = serde_json::to_vec(&params).expect("params serialize");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Seed of segment `k`; segment 0 uses the scenario seed itself.
    pub fn segment_seed(&self, k: usize) -> u64 {
        self.seed
            .wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

/// Simulates each segment from an empty history and concatenates them.
/// Returns the stream and the true change times.
pub fn simulate_scenario(scenario: &Scenario) -> Result<(EventStream, Vec<f64>)> {
    scenario.validate()?;
    let m = scenario.segments[0].params.dim();
    let mut events: Vec<Vec<f64>> = vec![Vec::new(); m];
    let mut offset = 0.0;
    for (k, seg) in scenario.segments.iter().enumerate() {
        let part = simulate(&seg.params, seg.duration, scenario.segment_seed(k))?;
        for (dst, src) in events.iter_mut().zip(part.events()) {
            for &t in src {
                let shifted = offset + t;
                // a boundary-hugging event can collide after the shift
                if dst.last().is_none_or(|&last| shifted > last) {
                    dst.push(shifted);
                }
            }
        }
        offset += seg.duration;
    }
    let stream = EventStream::new(scenario.horizon(), events)?;
    Ok((stream, scenario.change_times()))
}

fn draw_beta(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |_, _| 0.5 + rng.random::<f64>())
}

/// Symmetrised amplitudes with `1/8` on the diagonal and `N(0, 1/64)`
/// off-diagonal draws, redrawn until `ρ(α/β) < 1`.
fn draw_alpha(rng: &mut ChaCha8Rng, beta: &DMatrix<f64>, cap: usize) -> Result<DMatrix<f64>> {
    let dim = beta.nrows();
    let normal = Normal::new(0.0, 0.125).expect("valid normal");
    for _ in 0..cap {
        let raw = DMatrix::from_fn(
            dim,
            dim,
            |i, j| {
                if i == j {
                    0.125
                } else {
                    normal.sample(rng)
                }
            },
        );
        let alpha = linalg::sym_part(&raw);
        if linalg::spectral_radius(&alpha.component_div(beta)) < 1.0 {
            return Ok(alpha);
        }
    }
    Err(Error::ResampleCap(cap))
}

fn param_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PARAM_STREAM);
    rng
}

/// The reference synthetic generator: `μ_i = 0.3`, `β_ij = 0.5 + U(0,1)`,
/// symmetrised Gaussian off-diagonal amplitudes.
pub fn reference_params(dim: usize, seed: u64) -> Result<HawkesParams> {
    reference_params_capped(dim, seed, RESAMPLE_CAP)
}

pub fn reference_params_capped(dim: usize, seed: u64, cap: usize) -> Result<HawkesParams> {
    if dim == 0 {
        return Err(Error::invalid("dim must be at least 1"));
    }
    let mut rng = param_rng(seed);
    let beta = draw_beta(&mut rng, dim);
    let alpha = draw_alpha(&mut rng, &beta, cap)?;
    HawkesParams::new(DVector::from_element(dim, 0.3), alpha, beta)
}

/// Regime-switching scenario: `μ` and `β` fixed, off-diagonal amplitudes
/// redrawn for every segment. The first segment's parameters equal
/// `reference_params(dim, seed)` when `mu == 0.3`.
pub fn reference_scenario(
    dim: usize,
    n_segments: usize,
    segment_duration: f64,
    mu: f64,
    seed: u64,
) -> Result<Scenario> {
    if dim == 0 || n_segments == 0 {
        return Err(Error::invalid("dim and segment count must be positive"));
    }
    let mut rng = param_rng(seed);
    let beta = draw_beta(&mut rng, dim);
    let segments = (0..n_segments)
        .map(|_| {
            let alpha = draw_alpha(&mut rng, &beta, RESAMPLE_CAP)?;
            Ok(Segment {
                duration: segment_duration,
                params: HawkesParams::new(DVector::from_element(dim, mu), alpha, beta.clone())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let scenario = Scenario { segments, seed };
    scenario.validate()?;
    Ok(scenario)
}
