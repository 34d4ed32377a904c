//! Dependence of the residual pair `(resid1, resid2)` given the shock time.
//!
//! Given `tau = t` the residuals are a mixture over the entry state `K`
//! with weights `pi_k(t)`, independent within each component. Linear and
//! rank correlations of the shifted pair `(X1, X2) | tau = t` coincide with
//! those of the residuals, so only the residual pair is exposed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, kron_vec, Matrix, Vector};
use crate::model::{ones, CsphModel, Margin, PROB_SUM_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalWeights {
    pub t: f64,
    pub weights: Vector,
}

/// `pi_k(t) = alpha e^{Tt} u_k / alpha e^{Tt} U 1`.
pub fn entry_weights(m: &CsphModel, t: f64) -> Result<ConditionalWeights> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("shock time must be finite and nonnegative, got {t}")));
    }
    let state = m.shock_state(t)?;
    let raw = m.u().tr_mul(&state);
    let total = raw.sum();
    if !(total > f64::MIN_POSITIVE) || !total.is_finite() {
        return Err(Error::Domain(format!("shock density at t = {t} underflows ({total})")));
    }
    let weights = (raw / total).map(|w| w.max(0.0));
    debug_assert!((weights.sum() - 1.0).abs() < 1e3 * PROB_SUM_TOL);
    Ok(ConditionalWeights { t, weights })
}

/// Per-state residual means `(−Q_i)⁻¹ 1`.
fn state_means(m: &CsphModel, margin: Margin) -> Result<Vector> {
    m.residual_moments(margin, 1)
}

pub fn cond_mean(m: &CsphModel, margin: Margin, t: f64) -> Result<f64> {
    Ok(entry_weights(m, t)?.weights.dot(&state_means(m, margin)?))
}

pub fn cond_var(m: &CsphModel, margin: Margin, t: f64) -> Result<f64> {
    let w = entry_weights(m, t)?.weights;
    let mean = w.dot(&state_means(m, margin)?);
    let second = w.dot(&m.residual_moments(margin, 2)?);
    Ok((second - mean * mean).max(0.0))
}

/// `E[resid1 resid2 | tau = t]`.
pub fn cond_cross_moment(m: &CsphModel, t: f64) -> Result<f64> {
    let w = entry_weights(m, t)?.weights;
    let e1 = state_means(m, Margin::First)?;
    let e2 = state_means(m, Margin::Second)?;
    Ok(w.dot(&e1.component_mul(&e2)))
}

pub fn cond_pearson(m: &CsphModel, t: f64) -> Result<f64> {
    let w = entry_weights(m, t)?.weights;
    let e1 = state_means(m, Margin::First)?;
    let e2 = state_means(m, Margin::Second)?;
    let (m1, m2) = (w.dot(&e1), w.dot(&e2));
    let v1 = w.dot(&m.residual_moments(Margin::First, 2)?) - m1 * m1;
    let v2 = w.dot(&m.residual_moments(Margin::Second, 2)?) - m2 * m2;
    if !(v1 > 0.0 && v2 > 0.0) {
        return Err(Error::Domain(format!("conditional variances ({v1}, {v2}) must be positive")));
    }
    let cov = w.dot(&e1.component_mul(&e2)) - m1 * m2;
    Ok((cov / (v1 * v2).sqrt()).clamp(-1.0, 1.0))
}

/// All `c_km = P(Y_k < Y_m)` for independent residuals started in `k` and
/// `m`, as a `p1 × p1` matrix:
/// `1 − (e_k ⊗ e_m)ᵀ (−(Q ⊕ Q))⁻¹ (1 ⊗ q)`.
pub fn kendall_matrix(m: &CsphModel, margin: Margin) -> Result<Matrix> {
    let q = m.q(margin);
    let p1 = q.nrows();
    let sum = matrix::kron_sum(q, q)?;
    let v = matrix::solve_vec(&(-sum), &kron_vec(&ones(p1), m.exit(margin)))?;
    Ok(Matrix::from_fn(p1, p1, |k, j| 1.0 - v[k * p1 + j]))
}

pub fn kendall_coefficient(m: &CsphModel, margin: Margin, k: usize, mstate: usize) -> Result<f64> {
    m.check_state(k)?;
    m.check_state(mstate)?;
    Ok(kendall_matrix(m, margin)?[(k, mstate)])
}

/// Kendall's tau of the residual pair given `tau = t`.
pub fn cond_kendall(m: &CsphModel, t: f64) -> Result<f64> {
    let w = entry_weights(m, t)?.weights;
    let c1 = kendall_matrix(m, Margin::First)?;
    let c2 = kendall_matrix(m, Margin::Second)?;
    let s = (w.transpose() * c1.component_mul(&c2) * &w)[(0, 0)];
    Ok((4.0 * s - 1.0).clamp(-1.0, 1.0))
}

/// Spearman's rho of the residual pair given `tau = t`.
pub fn cond_spearman(m: &CsphModel, t: f64) -> Result<f64> {
    let w = entry_weights(m, t)?.weights;
    let c1 = kendall_matrix(m, Margin::First)?;
    let c2 = kendall_matrix(m, Margin::Second)?;
    // Σ_k pi_k (Σ_m pi_m c1_km)(Σ_n pi_n c2_kn)
    let s = w.dot(&(&c1 * &w).component_mul(&(&c2 * &w)));
    Ok((12.0 * s - 3.0).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependenceRow {
    pub t: f64,
    pub mean1: f64,
    pub mean2: f64,
    pub var1: f64,
    pub var2: f64,
    pub cross_moment: f64,
    pub pearson: f64,
    pub kendall: f64,
    pub spearman: f64,
}

/// Every conditional measure on a grid of shock times.
pub fn dependence_curve(m: &CsphModel, grid: &[f64]) -> Result<Vec<DependenceRow>> {
    grid.par_iter()
        .map(|&t| {
            Ok(DependenceRow {
                t,
                mean1: cond_mean(m, Margin::First, t)?,
                mean2: cond_mean(m, Margin::Second, t)?,
                var1: cond_var(m, Margin::First, t)?,
                var2: cond_var(m, Margin::Second, t)?,
                cross_moment: cond_cross_moment(m, t)?,
                pearson: cond_pearson(m, t)?,
                kendall: cond_kendall(m, t)?,
                spearman: cond_spearman(m, t)?,
            })
        })
        .collect()
}
