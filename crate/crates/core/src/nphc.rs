//! Moment matching for the kernel-integral matrix.
//!
//! With `R = (I − H)⁻¹` and `D = diag(Λ)` the theoretical cumulants are
//!
//! ```text
//! C(R)  = R D Rᵀ
//! Kᶜ(R) = (R∘R) C + 2 (R∘C) Rᵀ − 2 (R∘R) D Rᵀ        (Kᶜ_ij = K_iij)
//! ```
//!
//! `R` is fitted by minimising
//! `L(R) = (1 − κ)‖Kᶜ(R) − K̂ᶜ‖²_F + κ‖C(R) − Ĉ‖²_F` and `Ĥ = I − R̂⁻¹`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cumulants::CumulantSet;
use crate::linalg;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Identity,
    /// `R₀ = diag(√(Ĉ_ii / Λ̂_i))`, identity if any `Λ̂_i = 0`.
    SqrtC,
    Custom(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NphcConfig {
    /// Weight of the covariance term. `None` balances the two terms by the
    /// squared norms of the estimates.
    pub kappa: Option<f64>,
    pub max_iters: usize,
    pub step_size: f64,
    pub tol: f64,
    pub init: Init,
}

impl Default for NphcConfig {
    fn default() -> Self {
        Self {
            kappa: None,
            max_iters: 2000,
            step_size: 0.01,
            tol: 1e-8,
            init: Init::SqrtC,
        }
    }
}

impl NphcConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.kappa {
            if !(0.0..=1.0).contains(&k) {
                return Err(Error::invalid("kappa must lie in [0, 1]"));
            }
        }
        if self.max_iters == 0 || !(self.step_size > 0.0) || !(self.tol > 0.0) {
            return Err(Error::invalid("NPHC iteration bounds must be positive"));
        }
        Ok(())
    }
}

/// `κ = ‖K̂ᶜ‖² / (‖K̂ᶜ‖² + ‖Ĉ‖²)`, or ½ when both vanish.
pub fn balanced_kappa(c_hat: &DMatrix<f64>, kc_hat: &DMatrix<f64>) -> f64 {
    let k2 = kc_hat.norm_squared();
    let c2 = c_hat.norm_squared();
    if k2 + c2 > 0.0 {
        k2 / (k2 + c2)
    } else {
        0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix {
    #[serde(rename = "H", with = "linalg::rows")]
    pub h: DMatrix<f64>,
    #[serde(rename = "R", with = "linalg::rows")]
    pub r: DMatrix<f64>,
    #[serde(rename = "loss")]
    pub fit_loss: f64,
    pub spectral_radius: f64,
    pub kappa: f64,
    pub iterations: usize,
    /// `R̂⁻¹ Λ̂`.
    #[serde(with = "linalg::vector")]
    pub mu_hat: DVector<f64>,
    /// `‖(Ĥ − Ĥᵀ)/2‖_F / ‖Ĥ‖_F`.
    pub antisymmetry: f64,
}

pub fn cumulants_from_r(r: &DMatrix<f64>, lambda: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = DMatrix::from_diagonal(lambda);
    let c = r * &d * r.transpose();
    let r2 = r.component_mul(r);
    let rc = r.component_mul(&c);
    let kc = &r2 * &c + (&rc * r.transpose()) * 2.0 - (&r2 * &d * r.transpose()) * 2.0;
    (c, kc)
}

/// Loss value and its exact gradient with respect to `R`.
pub fn nphc_loss(
    r: &DMatrix<f64>,
    lambda: &DVector<f64>,
    c_hat: &DMatrix<f64>,
    kc_hat: &DMatrix<f64>,
    kappa: f64,
) -> (f64, DMatrix<f64>) {
    let d = DMatrix::from_diagonal(lambda);
    let rt = r.transpose();
    let c = r * &d * &rt;
    let r2 = r.component_mul(r);
    let rc = r.component_mul(&c);
    let s = &r2 * &d;
    let kc = &r2 * &c + (&rc * &rt) * 2.0 - (&s * &rt) * 2.0;

    let ek = kc - kc_hat;
    let ec = &c - c_hat;
    let loss = (1.0 - kappa) * ek.norm_squared() + kappa * ec.norm_squared();

    // reverse pass
    let g = ek * (2.0 * (1.0 - kappa));
    let gt = g.transpose();
    let mut d_c = ec * (2.0 * kappa) + r2.transpose() * &g;
    let mut d_p = &g * c.transpose();
    let d_q = &g * r * 2.0;
    let d_s = &g * r * -2.0;
    let mut d_r = &gt * &rc * 2.0 - &gt * &s * 2.0;
    d_p += d_s * &d;
    d_r += d_q.component_mul(&c);
    d_c += d_q.component_mul(r);
    d_r += r.component_mul(&d_p) * 2.0;
    d_r += (&d_c + d_c.transpose()) * r * &d;
    (loss, d_r)
}

pub fn kernel_matrix_from_r(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = r.nrows();
    let inv = r.clone().try_inverse().ok_or(Error::SingularR)?;
    if !linalg::is_finite(&inv) {
        return Err(Error::SingularR);
    }
    Ok(DMatrix::identity(m, m) - inv)
}

/// `(I − H)⁻¹`.
pub fn r_from_kernel_matrix(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = h.nrows();
    (DMatrix::identity(m, m) - h)
        .try_inverse()
        .ok_or_else(|| Error::invalid("I − H is singular"))
}

fn initial_r(cumulants: &CumulantSet, init: &Init) -> Result<DMatrix<f64>> {
    let m = cumulants.dim();
    match init {
        Init::Identity => Ok(DMatrix::identity(m, m)),
        Init::SqrtC => {
            let l = &cumulants.lambda;
            if l.iter().any(|&x| x <= 0.0) {
                return Ok(DMatrix::identity(m, m));
            }
            Ok(DMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    (cumulants.c[(i, i)] / l[i]).max(0.0).sqrt()
                } else {
                    0.0
                }
            }))
        }
        Init::Custom(rows) => {
            let r = linalg::from_rows(rows).ok_or_else(|| Error::invalid("ragged init matrix"))?;
            if r.shape() != (m, m) {
                return Err(Error::invalid("init matrix has the wrong shape"));
            }
            Ok(r)
        }
    }
}

/// Accepted-iterate losses of a fit, for diagnostics.
#[derive(Debug, Clone, Default)]
pub struct FitTrace {
    pub losses: Vec<f64>,
}

pub fn fit_r(cumulants: &CumulantSet, config: &NphcConfig) -> Result<KernelMatrix> {
    fit_r_traced(cumulants, config).map(|(k, _)| k)
}

const ADAM_B1: f64 = 0.9;
const ADAM_B2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-12;
const MAX_HALVINGS: usize = 40;
/// Growth of the step size after an accepted step, capped at `step_size`.
const LR_RECOVERY: f64 = 1.1;

/// Full-batch Adam on `L(R)`. A step that would raise the loss is retried
/// at half the step size, so accepted losses never increase. After an
/// accepted step the step size grows back towards `step_size`.
pub fn fit_r_traced(
    cumulants: &CumulantSet,
    config: &NphcConfig,
) -> Result<(KernelMatrix, FitTrace)> {
    config.validate()?;
    let finite = cumulants.lambda.iter().all(|x| x.is_finite())
        && linalg::is_finite(&cumulants.c)
        && linalg::is_finite(&cumulants.kc);
    if !finite {
        return Err(Error::invalid("cumulants contain non-finite entries"));
    }
    let m = cumulants.dim();
    let kappa = config
        .kappa
        .unwrap_or_else(|| balanced_kappa(&cumulants.c, &cumulants.kc));
    let lambda = &cumulants.lambda;
    let eval = |r: &DMatrix<f64>| nphc_loss(r, lambda, &cumulants.c, &cumulants.kc, kappa);

    let mut r = initial_r(cumulants, &config.init)?;
    let (mut loss, mut grad) = eval(&r);
    if !loss.is_finite() {
        return Err(Error::Divergence {
            iteration: 0,
            iterate: format!("{:?}", linalg::to_rows(&r)),
        });
    }
    let mut trace = FitTrace { losses: vec![loss] };
    let mut m1 = DMatrix::<f64>::zeros(m, m);
    let mut m2 = DMatrix::<f64>::zeros(m, m);
    let mut lr = config.step_size;
    let mut iterations = 0;
    // Adam step counter for bias correction; restarts with the moments.
    let mut t = 0;

    for it in 1..=config.max_iters {
        if grad.norm() < config.tol {
            break;
        }
        iterations = it;
        t += 1;
        m1 = m1 * ADAM_B1 + &grad * (1.0 - ADAM_B1);
        m2 = m2 * ADAM_B2 + grad.component_mul(&grad) * (1.0 - ADAM_B2);
        let c1 = 1.0 - ADAM_B1.powi(t);
        let c2 = 1.0 - ADAM_B2.powi(t);
        let dir = DMatrix::from_fn(m, m, |i, j| {
            (m1[(i, j)] / c1) / ((m2[(i, j)] / c2).sqrt() + ADAM_EPS)
        });

        let mut step = lr;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand = &r - &dir * step;
            let (cand_loss, cand_grad) = eval(&cand);
            if cand_loss.is_nan() {
                return Err(Error::Divergence {
                    iteration: it,
                    iterate: format!("{:?}", linalg::to_rows(&r)),
                });
            }
            if cand_loss < loss {
                r = cand;
                loss = cand_loss;
                grad = cand_grad;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if accepted {
            lr = (step * LR_RECOVERY).min(config.step_size);
        } else if t == 1 {
            // even a fresh gradient-sign step cannot descend
            break;
        } else {
            // stale momentum points uphill: restart the moments
            m1.fill(0.0);
            m2.fill(0.0);
            t = 0;
            lr = config.step_size;
            continue;
        }
        trace.losses.push(loss);
    }

    let h = kernel_matrix_from_r(&r)?;
    let mu_hat = r
        .clone()
        .try_inverse()
        .map(|inv| inv * lambda)
        .ok_or(Error::SingularR)?;
    let h_norm = h.norm();
    let antisymmetry = if h_norm > 0.0 {
        ((&h - h.transpose()) * 0.5).norm() / h_norm
    } else {
        0.0
    };
    Ok((
        KernelMatrix {
            spectral_radius: linalg::spectral_radius(&h),
            h,
            r,
            fit_loss: loss,
            kappa,
            iterations,
            mu_hat,
            antisymmetry,
        },
        trace,
    ))
}
