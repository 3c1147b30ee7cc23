//! Fréchet-variance change-point scan over a sequence of SPD snapshots.
//!
//! For a split after `k` of `n` observations (`u = k/n`), with segment
//! Fréchet variances `V₁, V₂` and their contaminated versions `V₁ᶜ, V₂ᶜ`
//! (each segment measured around the other segment's mean):
//!
//! ```text
//! T_n(u) = u(1−u)/σ̂² · [ (V₁ − V₂)² + (V₁ᶜ − V₁ + V₂ᶜ − V₂)² ]
//! ```
//!
//! Under homogeneity `sup nT_n(u)` over `u ∈ [c, 1−c]` converges to the
//! supremum of `B(u)²/(u(1−u))` for a Brownian bridge `B`; its upper quantile
//! is estimated by Monte Carlo. At small `n` the limit is reached slowly, so
//! by default each segment is instead calibrated by the bootstrap: the
//! statistic is recomputed on resamples drawn with replacement from the
//! segment. Multiple changes are found by binary segmentation.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{log_mean, SpdPoint};
use crate::{Error, Result};

/// `σ̂²` below this is treated as identical data.
pub const DEGENERATE_SIGMA2: f64 = 1e-14;

pub const DEFAULT_BOOTSTRAP_REPLICATES: usize = 1000;

/// How a segment's rejection threshold is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Calibration {
    /// One Brownian-bridge quantile shared by every segment.
    Asymptotic,
    /// Quantile of `sup nT_n` over `replicates` resamples of the segment.
    Bootstrap { replicates: usize },
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration::Bootstrap {
            replicates: DEFAULT_BOOTSTRAP_REPLICATES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CpConfig {
    /// Interior fraction: splits are searched in `[c, 1 − c]`.
    pub c: f64,
    pub alpha: f64,
    pub mc_samples: usize,
    pub grid: usize,
    pub min_segment: usize,
    pub max_depth: usize,
    pub calibration: Calibration,
}

impl Default for CpConfig {
    fn default() -> Self {
        Self {
            c: 0.1,
            alpha: 0.05,
            mc_samples: 10_000,
            grid: 1000,
            min_segment: 10,
            max_depth: 6,
            calibration: Calibration::default(),
        }
    }
}

impl CpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c < 0.5) {
            return Err(Error::invalid("c must lie in (0, 0.5)"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1)"));
        }
        if self.grid < 100 {
            return Err(Error::invalid(
                "Brownian-bridge grid needs at least 100 points",
            ));
        }
        if self.mc_samples == 0 {
            return Err(Error::invalid("mc_samples must be positive"));
        }
        if self.min_segment < 4 {
            return Err(Error::invalid("min_segment must be at least 4"));
        }
        if let Calibration::Bootstrap { replicates } = self.calibration {
            if replicates < 100 {
                return Err(Error::invalid("bootstrap needs at least 100 replicates"));
            }
        }
        Ok(())
    }

    /// Split indices searched for a segment of length `n`.
    pub fn split_range(&self, n: usize) -> std::ops::RangeInclusive<usize> {
        let edge = (n as f64 * self.c).floor() as usize;
        edge.max(1)..=(n - edge).min(n.saturating_sub(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub v1: f64,
    pub v2: f64,
    pub v1c: f64,
    pub v2c: f64,
}

fn mean_sq_dist(points: &[SpdPoint], center: &DMatrix<f64>) -> f64 {
    points
        .iter()
        .map(|p| (p.log() - center).norm_squared())
        .sum::<f64>()
        / points.len() as f64
}

/// Clean and contaminated Fréchet variances of `ys[..k]` and `ys[k..]`.
pub fn segment_frechet_stats(ys: &[SpdPoint], k: usize) -> Result<SegmentStats> {
    if k == 0 || k >= ys.len() {
        return Err(Error::invalid(format!(
            "split {k} leaves an empty segment of {} points",
            ys.len()
        )));
    }
    let (left, right) = ys.split_at(k);
    let mu1 = log_mean(left)?;
    let mu2 = log_mean(right)?;
    Ok(SegmentStats {
        v1: mean_sq_dist(left, &mu1),
        v2: mean_sq_dist(right, &mu2),
        v1c: mean_sq_dist(left, &mu2),
        v2c: mean_sq_dist(right, &mu1),
    })
}

/// `(1/n) Σ d⁴(μ̂, Y_i) − ((1/n) Σ d²(μ̂, Y_i))²` around the full-sample mean.
pub fn sigma2_hat(ys: &[SpdPoint]) -> Result<f64> {
    if ys.len() < 2 {
        return Err(Error::invalid("σ̂² needs at least two points"));
    }
    let mu = log_mean(ys)?;
    let d2: Vec<f64> = ys.iter().map(|p| (p.log() - &mu).norm_squared()).collect();
    Ok(spread(&d2))
}

/// `(1/n) Σ x⁴ − ((1/n) Σ x²)²` for `d2 = x²`, evaluated in two passes.
fn spread(d2: &[f64]) -> f64 {
    let n = d2.len() as f64;
    let m2 = d2.iter().sum::<f64>() / n;
    d2.iter().map(|x| (x - m2).powi(2)).sum::<f64>() / n
}

/// `nT_n(k/n)` over the interior split range of one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TnProfile {
    /// Split index of `values[0]`.
    pub first_k: usize,
    pub values: Vec<f64>,
    pub sigma2: f64,
    pub degenerate: bool,
}

impl TnProfile {
    /// Largest value, ties to the smallest split index.
    pub fn argmax(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((self.first_k + i, v));
            }
        }
        best
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

pub fn tn_profile(ys: &[SpdPoint], config: &CpConfig) -> Result<TnProfile> {
    config.validate()?;
    let n = ys.len();
    if n < config.min_segment {
        return Err(Error::invalid(format!(
            "segment too short ({n} < min_segment {})",
            config.min_segment
        )));
    }
    let dim = ys[0].dim();
    if ys.iter().any(|p| p.dim() != dim) {
        return Err(Error::invalid("SPD sample mixes dimensions"));
    }
    let logs: Vec<&DMatrix<f64>> = ys.iter().map(SpdPoint::log).collect();
    Ok(profile_of_logs(&logs, config))
}

/// Profile from running sums of the centred log-matrices: with segment
/// means `μ₁, μ₂`, `V = mean ‖X‖² − ‖μ‖²` and `Vᶜ − V = ‖μ₁ − μ₂‖²`.
fn profile_of_logs(logs: &[&DMatrix<f64>], config: &CpConfig) -> TnProfile {
    let n = logs.len();
    let nf = n as f64;
    let range = config.split_range(n);
    let first_k = *range.start();
    let (r, c) = logs[0].shape();
    let mean = logs.iter().fold(DMatrix::zeros(r, c), |acc, l| acc + *l) / nf;
    let centred: Vec<DMatrix<f64>> = logs.iter().map(|l| *l - &mean).collect();
    let sq: Vec<f64> = centred.iter().map(|x| x.norm_squared()).collect();
    let sigma2 = spread(&sq);
    if sigma2 < DEGENERATE_SIGMA2 {
        return TnProfile {
            first_k,
            values: vec![0.0; range.count()],
            sigma2,
            degenerate: true,
        };
    }
    let total = centred.iter().fold(DMatrix::zeros(r, c), |acc, x| acc + x);
    let total_sq: f64 = sq.iter().sum();
    let mut left = DMatrix::zeros(r, c);
    let mut left_sq = 0.0;
    let mut values = Vec::with_capacity(range.clone().count());
    for k in 1..=*range.end() {
        left += &centred[k - 1];
        left_sq += sq[k - 1];
        if k < first_k {
            continue;
        }
        let (kf, rest) = (k as f64, (n - k) as f64);
        let mu1 = &left / kf;
        let mu2 = (&total - &left) / rest;
        let v1 = left_sq / kf - mu1.norm_squared();
        let v2 = (total_sq - left_sq) / rest - mu2.norm_squared();
        let between = (&mu1 - &mu2).norm_squared();
        let u = kf / nf;
        values.push(nf * u * (1.0 - u) / sigma2 * ((v1 - v2).powi(2) + (2.0 * between).powi(2)));
    }
    TnProfile {
        first_k,
        values,
        sigma2,
        degenerate: false,
    }
}

/// Empirical upper `(1−α)` quantile.
fn upper_quantile(mut samples: Vec<f64>, alpha: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let rank = ((1.0 - alpha) * n as f64).ceil() as usize;
    samples[rank.clamp(1, n) - 1]
}

/// `(1−α)` quantile of `sup nT_n` over `replicates` resamples of `ys` drawn
/// with replacement. Replicate `r` draws from ChaCha stream `r` of `seed`.
pub fn bootstrap_quantile(
    ys: &[SpdPoint],
    config: &CpConfig,
    replicates: usize,
    seed: u64,
) -> Result<f64> {
    config.validate()?;
    let n = ys.len();
    if n < 2 || replicates == 0 {
        return Err(Error::invalid(
            "bootstrap needs two points and one replicate",
        ));
    }
    let sups: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r);
            let logs: Vec<&DMatrix<f64>> =
                (0..n).map(|_| ys[rng.random_range(0..n)].log()).collect();
            let p = profile_of_logs(&logs, config);
            if p.degenerate {
                0.0
            } else {
                p.sup()
            }
        })
        .collect();
    Ok(upper_quantile(sups, config.alpha))
}

/// Monte-Carlo `(1−α)` quantile of `sup_{u∈[c,1−c]} B(u)²/(u(1−u))`,
/// with bridges sampled on `grid` equal steps of `[0, 1]`.
pub fn bb_sup_quantile(config: &CpConfig, seed: u64) -> Result<f64> {
    config.validate()?;
    Ok(upper_quantile(bb_sup_samples(config, seed), config.alpha))
}

/// One supremum per replicate; replicate `r` draws from ChaCha stream `r`,
/// so the output does not depend on the thread count.
pub fn bb_sup_samples(config: &CpConfig, seed: u64) -> Vec<f64> {
    let grid = config.grid;
    let step = 1.0 / grid as f64;
    let sd = step.sqrt();
    let lo = config.c - 1e-12;
    let hi = 1.0 - config.c + 1e-12;
    (0..config.mc_samples as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r);
            let mut walk = Vec::with_capacity(grid + 1);
            let mut w = 0.0;
            walk.push(0.0);
            for _ in 0..grid {
                let z: f64 = StandardNormal.sample(&mut rng);
                w += sd * z;
                walk.push(w);
            }
            let end = walk[grid];
            let mut sup = 0.0_f64;
            for (k, &wk) in walk.iter().enumerate() {
                let u = k as f64 * step;
                if u < lo || u > hi {
                    continue;
                }
                let b = wk - u * end;
                sup = sup.max(b * b / (u * (1.0 - u)));
            }
            sup
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Change,
    NoChange,
    /// `σ̂² ≈ 0`: identical data.
    Degenerate,
    TooShort,
    DepthExhausted,
}

impl Outcome {
    pub fn reason(&self) -> &'static str {
        match self {
            Outcome::Change => "change detected",
            Outcome::NoChange => "statistic below threshold",
            Outcome::Degenerate => "degenerate segment (identical data)",
            Outcome::TooShort => "segment too short",
            Outcome::DepthExhausted => "recursion depth exhausted",
        }
    }
}

/// Result of one single-change test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleTest {
    pub outcome: Outcome,
    /// Split index `k̂` (first observation of the second segment), if rejected.
    pub change: Option<usize>,
    pub sup_stat: f64,
    pub argmax: Option<usize>,
    /// Threshold the segment was tested against.
    pub threshold: f64,
    pub profile: Option<TnProfile>,
}

/// Change-point tests sharing one configuration and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    pub config: CpConfig,
    /// Asymptotic quantile; used for every segment under
    /// [`Calibration::Asymptotic`].
    pub threshold: f64,
    seed: u64,
}

/// Seed of the bootstrap for the segment `[start, end)`.
fn segment_seed(seed: u64, start: usize, end: usize) -> u64 {
    let mut z = seed
        ^ (start as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (end as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Detector {
    pub fn new(config: CpConfig, seed: u64) -> Result<Self> {
        let threshold = bb_sup_quantile(&config, seed)?;
        Ok(Self {
            config,
            threshold,
            seed,
        })
    }

    /// Uses `threshold` in place of the Monte-Carlo asymptotic quantile.
    pub fn with_threshold(config: CpConfig, threshold: f64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            threshold,
            seed: 0,
        })
    }

    pub fn detect_single(&self, ys: &[SpdPoint]) -> Result<SingleTest> {
        self.test_segment(ys, 0)
    }

    /// Tests `ys`, which starts at global index `offset`.
    fn test_segment(&self, ys: &[SpdPoint], offset: usize) -> Result<SingleTest> {
        let mut test = SingleTest {
            outcome: Outcome::TooShort,
            change: None,
            sup_stat: 0.0,
            argmax: None,
            threshold: self.threshold,
            profile: None,
        };
        if ys.len() < self.config.min_segment {
            return Ok(test);
        }
        let profile = tn_profile(ys, &self.config)?;
        if profile.degenerate {
            test.outcome = Outcome::Degenerate;
            test.profile = Some(profile);
            return Ok(test);
        }
        let (k, sup) = profile.argmax().expect("nonempty split range");
        test.sup_stat = sup;
        test.argmax = Some(k);
        if let Calibration::Bootstrap { replicates } = self.config.calibration {
            let seed = segment_seed(self.seed, offset, offset + ys.len());
            test.threshold = bootstrap_quantile(ys, &self.config, replicates, seed)?;
        }
        if sup > test.threshold {
            test.outcome = Outcome::Change;
            test.change = Some(k);
        } else {
            test.outcome = Outcome::NoChange;
        }
        test.profile = Some(profile);
        Ok(test)
    }

    pub fn detect_multiple(&self, ys: &[SpdPoint]) -> Result<CpReport> {
        let mut report = CpReport {
            change_indices: Vec::new(),
            threshold: self.threshold,
            n: ys.len(),
            segments: Vec::new(),
            depth_exhausted: false,
        };
        self.segment(ys, 0, ys.len(), 0, None, &mut report)?;
        report.change_indices.sort_unstable();
        Ok(report)
    }

    fn segment(
        &self,
        ys: &[SpdPoint],
        start: usize,
        end: usize,
        depth: usize,
        parent: Option<usize>,
        report: &mut CpReport,
    ) -> Result<()> {
        let id = report.segments.len();
        let mut record = SegmentRecord {
            id,
            parent,
            depth,
            start,
            end,
            outcome: Outcome::DepthExhausted,
            change: None,
            sup_stat: 0.0,
            threshold: self.threshold,
            sigma2: None,
            profile: Vec::new(),
        };
        if depth > self.config.max_depth {
            report.depth_exhausted = true;
            report.segments.push(record);
            return Ok(());
        }
        let test = self.test_segment(&ys[start..end], start)?;
        record.outcome = test.outcome;
        record.sup_stat = test.sup_stat;
        record.threshold = test.threshold;
        record.change = test.change.map(|k| start + k);
        if let Some(p) = &test.profile {
            record.sigma2 = Some(p.sigma2);
            let n = (end - start) as f64;
            record.profile = p
                .values
                .iter()
                .enumerate()
                .map(|(i, &value)| ProfilePoint {
                    index: start + p.first_k + i,
                    u: (p.first_k + i) as f64 / n,
                    value,
                })
                .collect();
        }
        report.segments.push(record);
        if let Some(k) = test.change {
            let split = start + k;
            report.change_indices.push(split);
            self.segment(ys, start, split, depth + 1, Some(id), report)?;
            self.segment(ys, split, end, depth + 1, Some(id), report)?;
        }
        Ok(())
    }
}

pub fn detect_single(ys: &[SpdPoint], config: &CpConfig, seed: u64) -> Result<SingleTest> {
    Detector::new(config.clone(), seed)?.detect_single(ys)
}

pub fn detect_multiple(ys: &[SpdPoint], config: &CpConfig, seed: u64) -> Result<CpReport> {
    Detector::new(config.clone(), seed)?.detect_multiple(ys)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    /// Global index of the first observation after the split.
    pub index: usize,
    pub u: f64,
    pub value: f64,
}

/// One node of the binary-segmentation tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    /// Half-open range `[start, end)` of observation indices.
    pub start: usize,
    pub end: usize,
    pub outcome: Outcome,
    pub change: Option<usize>,
    pub sup_stat: f64,
    pub threshold: f64,
    pub sigma2: Option<f64>,
    pub profile: Vec<ProfilePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpReport {
    pub change_indices: Vec<usize>,
    /// Asymptotic quantile; per-segment thresholds are in `segments`.
    pub threshold: f64,
    pub n: usize,
    pub segments: Vec<SegmentRecord>,
    pub depth_exhausted: bool,
}

impl CpReport {
    /// Segments that were actually scanned.
    pub fn tested_segments(&self) -> impl Iterator<Item = &SegmentRecord> {
        self.segments.iter().filter(|s| !s.profile.is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn point(v: &[f64]) -> SpdPoint {
        SpdPoint::from_log(DMatrix::from_diagonal(&DVector::from_row_slice(v))).unwrap()
    }

    fn quick() -> CpConfig {
        CpConfig {
            mc_samples: 2000,
            grid: 200,
            ..CpConfig::default()
        }
    }

    #[test]
    fn identical_data_is_degenerate() {
        let ys = vec![point(&[0.3, -0.2]); 20];
        let s = segment_frechet_stats(&ys, 7).unwrap();
        for v in [s.v1, s.v2, s.v1c, s.v2c, sigma2_hat(&ys).unwrap()] {
            assert!(v.abs() < 1e-28, "{v}");
        }
        let p = tn_profile(&ys, &quick()).unwrap();
        assert!(p.degenerate);
        assert!(p.values.iter().all(|&v| v == 0.0));
        let t = Detector::with_threshold(quick(), 9.0)
            .unwrap()
            .detect_single(&ys)
            .unwrap();
        assert_eq!(t.outcome, Outcome::Degenerate);
        assert_eq!(t.change, None);
    }

    #[test]
    fn two_cluster_segment_stats() {
        let x = point(&[0.0, 0.0]);
        let z = point(&[1.0, 2.0]);
        let mut ys = vec![x.clone(); 6];
        ys.extend(vec![z.clone(); 4]);
        let s = segment_frechet_stats(&ys, 6).unwrap();
        let d2 = x.distance(&z).powi(2);
        assert_eq!(s.v1, 0.0);
        assert_eq!(s.v2, 0.0);
        assert!((s.v1c - d2).abs() < 1e-12);
        assert!((s.v2c - d2).abs() < 1e-12);
    }

    #[test]
    fn symmetric_two_point_sigma_is_zero() {
        let ys = vec![point(&[0.0, 0.0]), point(&[2.0, -1.0])];
        assert!(sigma2_hat(&ys).unwrap() < 1e-15);
    }

    #[test]
    fn empty_segment_rejected() {
        let ys = vec![point(&[0.0]); 5];
        assert!(segment_frechet_stats(&ys, 0).is_err());
        assert!(segment_frechet_stats(&ys, 5).is_err());
    }

    #[test]
    fn too_short_segment() {
        let ys = vec![point(&[0.0]); 5];
        let t = Detector::with_threshold(quick(), 9.0)
            .unwrap()
            .detect_single(&ys)
            .unwrap();
        assert_eq!(t.outcome, Outcome::TooShort);
        assert_eq!(t.outcome.reason(), "segment too short");
    }

    #[test]
    fn split_range_matches_interior() {
        let cfg = CpConfig::default();
        assert_eq!(cfg.split_range(59), 5..=54);
        assert_eq!(cfg.split_range(20), 2..=18);
        assert_eq!(cfg.split_range(10), 1..=9);
    }

    #[test]
    fn config_validation() {
        assert!(CpConfig {
            c: 0.5,
            ..CpConfig::default()
        }
        .validate()
        .is_err());
        assert!(CpConfig {
            alpha: 0.0,
            ..CpConfig::default()
        }
        .validate()
        .is_err());
        assert!(CpConfig {
            grid: 99,
            ..CpConfig::default()
        }
        .validate()
        .is_err());
        assert!(CpConfig {
            min_segment: 3,
            ..CpConfig::default()
        }
        .validate()
        .is_err());
        assert!(CpConfig::default().validate().is_ok());
    }

    #[test]
    fn quantile_bounds_and_monotonicity() {
        let cfg = quick();
        let q95 = bb_sup_quantile(&cfg, 1).unwrap();
        assert!(q95 >= 3.84, "q = {q95}");
        let q50 = bb_sup_quantile(
            &CpConfig {
                alpha: 0.5,
                ..cfg.clone()
            },
            1,
        )
        .unwrap();
        assert!(q50 < q95);
        assert_eq!(q95, bb_sup_quantile(&cfg, 1).unwrap());
    }

    #[test]
    fn argmax_tie_breaks_to_smallest() {
        let p = TnProfile {
            first_k: 3,
            values: vec![1.0, 5.0, 5.0, 2.0],
            sigma2: 1.0,
            degenerate: false,
        };
        assert_eq!(p.argmax(), Some((4, 5.0)));
    }
}
