//! Signed Laplacians on the SPD cone under the Log-Euclidean metric
//! `d(X, Y) = ‖log X − log Y‖_F`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, sym_apply, sym_eigen};
use crate::{Error, Result};

/// Relative SPD floor: `ε = SPD_FLOOR_REL · mean |L̄_ii|`.
pub const SPD_FLOOR_REL: f64 = 1e-8;
/// Absolute floor used when the Laplacian diagonal vanishes.
pub const SPD_FLOOR_MIN: f64 = 1e-12;

/// `(H + Hᵀ)/2` and the relative size `‖(H − Hᵀ)/2‖_F / ‖(H + Hᵀ)/2‖_F`
/// of the discarded antisymmetric part (0 when both vanish).
pub fn symmetrize(h: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let sym = linalg::sym_part(h);
    let anti = (h - h.transpose()) * 0.5;
    let s = sym.norm();
    let a = anti.norm();
    let rel = if s > 0.0 {
        a / s
    } else if a > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    (sym, rel)
}

/// `L̄ = D̄ − A` with `D̄_ii = Σ_j |A_ij|`, self-loops included.
pub fn signed_laplacian(a: &DMatrix<f64>) -> DMatrix<f64> {
    let m = a.nrows();
    let mut l = -a.clone();
    for i in 0..m {
        l[(i, i)] += a.row(i).iter().map(|x| x.abs()).sum::<f64>();
    }
    l
}

/// Frobenius-nearest symmetric matrix with every eigenvalue `≥ eps`.
/// Returns the projection and whether any eigenvalue was lifted.
pub fn nearest_spd(m: &DMatrix<f64>, eps: f64) -> Result<(DMatrix<f64>, bool)> {
    if !m.is_square() {
        return Err(Error::invalid("nearest_spd needs a square matrix"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("SPD floor must be positive"));
    }
    if !linalg::is_finite(m) {
        return Err(Error::NotSpd("non-finite entries".into()));
    }
    let (values, vectors) = sym_eigen(m);
    let clamped = values.iter().any(|&v| v < eps);
    if !clamped {
        return Ok((linalg::sym_part(m), false));
    }
    Ok((sym_apply(&values, &vectors, |v| v.max(eps)), true))
}

/// Default floor for a Laplacian: relative to its mean absolute diagonal.
pub fn default_floor(l: &DMatrix<f64>, rel: f64) -> f64 {
    let m = l.nrows().max(1) as f64;
    let mean_diag = l.diagonal().iter().map(|x| x.abs()).sum::<f64>() / m;
    (rel * mean_diag).max(SPD_FLOOR_MIN)
}

fn check_symmetric(x: &DMatrix<f64>) -> Result<()> {
    if !x.is_square() {
        return Err(Error::NotSpd("not square".into()));
    }
    if !linalg::is_finite(x) {
        return Err(Error::NotSpd("non-finite entries".into()));
    }
    let scale = linalg::max_abs(x).max(1.0);
    if linalg::max_abs(&(x - x.transpose())) > 1e-10 * scale {
        return Err(Error::NotSpd("not symmetric".into()));
    }
    Ok(())
}

/// Principal matrix logarithm of an SPD matrix.
pub fn spd_log(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(x)?;
    let (values, vectors) = sym_eigen(x);
    if let Some(&v) = values.iter().find(|&&v| v <= 0.0) {
        return Err(Error::NotSpd(format!("eigenvalue {v:e} is not positive")));
    }
    Ok(sym_apply(&values, &vectors, f64::ln))
}

/// Matrix exponential of a symmetric matrix.
pub fn spd_exp(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(s)?;
    let (values, vectors) = sym_eigen(s);
    Ok(sym_apply(&values, &vectors, f64::exp))
}

/// An SPD matrix together with its cached logarithm.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdPoint {
    spd: DMatrix<f64>,
    log: DMatrix<f64>,
}

impl SpdPoint {
    pub fn from_spd(spd: DMatrix<f64>) -> Result<Self> {
        let log = spd_log(&spd)?;
        Ok(Self { spd, log })
    }

    pub fn from_log(log: DMatrix<f64>) -> Result<Self> {
        let spd = spd_exp(&log)?;
        Ok(Self {
            spd,
            log: linalg::sym_part(&log),
        })
    }

    pub fn spd(&self) -> &DMatrix<f64> {
        &self.spd
    }

    pub fn log(&self) -> &DMatrix<f64> {
        &self.log
    }

    pub fn dim(&self) -> usize {
        self.log.nrows()
    }

    pub fn distance(&self, other: &SpdPoint) -> f64 {
        (&self.log - &other.log).norm()
    }
}

pub fn le_distance(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    Ok((spd_log(x)? - spd_log(y)?).norm())
}

/// Average of the log-matrices of `points`.
pub fn log_mean(points: &[SpdPoint]) -> Result<DMatrix<f64>> {
    let first = points
        .first()
        .ok_or_else(|| Error::invalid("Fréchet mean of an empty sample"))?;
    let mut acc = DMatrix::zeros(first.dim(), first.dim());
    for p in points {
        if p.dim() != first.dim() {
            return Err(Error::invalid("SPD sample mixes dimensions"));
        }
        acc += p.log();
    }
    Ok(acc / points.len() as f64)
}

/// `exp((1/n) Σ log X_i)`.
pub fn frechet_mean_points(points: &[SpdPoint]) -> Result<SpdPoint> {
    SpdPoint::from_log(log_mean(points)?)
}

pub fn frechet_mean(xs: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let points = xs
        .iter()
        .cloned()
        .map(SpdPoint::from_spd)
        .collect::<Result<Vec<_>>>()?;
    Ok(frechet_mean_points(&points)?.spd)
}

/// `(1/n) Σ d²(mean, X_i)`.
pub fn frechet_variance_points(points: &[SpdPoint], mean: &SpdPoint) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::invalid("Fréchet variance of an empty sample"));
    }
    Ok(points.iter().map(|p| p.distance(mean).powi(2)).sum::<f64>() / points.len() as f64)
}

pub fn frechet_variance(xs: &[DMatrix<f64>], mean: &DMatrix<f64>) -> Result<f64> {
    let points = xs
        .iter()
        .cloned()
        .map(SpdPoint::from_spd)
        .collect::<Result<Vec<_>>>()?;
    frechet_variance_points(&points, &SpdPoint::from_spd(mean.clone())?)
}

/// Per-window causal network and its SPD representative.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalSnapshot {
    pub window_index: usize,
    pub adjacency: DMatrix<f64>,
    pub laplacian: DMatrix<f64>,
    pub point: SpdPoint,
    pub spd_floor: f64,
    pub floor_applied: bool,
    /// Relative size of the antisymmetric part dropped from `Ĥ`.
    pub antisymmetry: f64,
}

/// Builds the snapshot of one window from its kernel matrix `Ĥ`.
pub fn causal_snapshot(
    window_index: usize,
    h: &DMatrix<f64>,
    floor_rel: f64,
) -> Result<CausalSnapshot> {
    let (adjacency, antisymmetry) = symmetrize(h);
    snapshot_from_adjacency(window_index, adjacency, antisymmetry, floor_rel)
}

pub fn snapshot_from_adjacency(
    window_index: usize,
    adjacency: DMatrix<f64>,
    antisymmetry: f64,
    floor_rel: f64,
) -> Result<CausalSnapshot> {
    let laplacian = signed_laplacian(&adjacency);
    let spd_floor = default_floor(&laplacian, floor_rel);
    let (spd, floor_applied) = nearest_spd(&laplacian, spd_floor)?;
    Ok(CausalSnapshot {
        window_index,
        adjacency,
        laplacian,
        point: SpdPoint::from_spd(spd)?,
        spd_floor,
        floor_applied,
        antisymmetry,
    })
}

/// JSON form of a snapshot: adjacency plus Laplacian spectrum extrema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub window_index: usize,
    #[serde(with = "linalg::rows")]
    pub adjacency: DMatrix<f64>,
    pub laplacian_eig_min: f64,
    pub laplacian_eig_max: f64,
    pub spd_floor: f64,
    pub floor_applied: bool,
    pub antisymmetry: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<Vec<Vec<f64>>>,
}

impl CausalSnapshot {
    pub fn record(&self, include_log: bool) -> SnapshotRecord {
        let (values, _) = sym_eigen(&self.laplacian);
        SnapshotRecord {
            window_index: self.window_index,
            adjacency: self.adjacency.clone(),
            laplacian_eig_min: values[0],
            laplacian_eig_max: values[values.len() - 1],
            spd_floor: self.spd_floor,
            floor_applied: self.floor_applied,
            antisymmetry: self.antisymmetry,
            log: include_log.then(|| linalg::to_rows(self.point.log())),
        }
    }
}

impl SnapshotRecord {
    /// Rebuilds the snapshot from its adjacency.
    pub fn to_snapshot(&self, floor_rel: f64) -> Result<CausalSnapshot> {
        snapshot_from_adjacency(
            self.window_index,
            linalg::sym_part(&self.adjacency),
            self.antisymmetry,
            floor_rel,
        )
    }
}
