//! Maximum-likelihood fitting in the reduced parameterisation
//! `X1 = beta (tau + resid1)`, `X2 = tau + resid2`.
//!
//! The reduced form is the general model with `a1 = beta`, `a2 = 1` and
//! `Q1 / beta`; every general model can be brought to it by rescaling time
//! by `a2`, so nothing is lost by fitting in this form.

mod fit;
mod lbfgs;
mod likelihood;
mod params;

pub use fit::{fit, FitOptions, FitResult, StartSummary};
pub use lbfgs::{maximize, LbfgsOptions, LbfgsOutcome, Objective};
pub use likelihood::{
    gradient, log_likelihood, log_likelihood_detail, LogLikelihood, LOG_DENSITY_FLOOR,
};
pub use params::{UnconstrainedParams, MIN_RATE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Vector};
use crate::model::CsphModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaMode {
    /// Every path starts in the first pre-shock state.
    FixedFirst,
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelStructure {
    pub p0: usize,
    pub p1: usize,
    pub alpha_mode: AlphaMode,
}

impl ModelStructure {
    pub fn new(p0: usize, p1: usize, alpha_mode: AlphaMode) -> Result<Self> {
        if p0 == 0 || p1 == 0 {
            return Err(Error::Dimension(format!(
                "state counts must be at least 1, got p0 = {p0}, p1 = {p1}"
            )));
        }
        Ok(ModelStructure { p0, p1, alpha_mode })
    }
}

/// Reduced model: a base model with unit scales plus the first-margin scale
/// `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    base: CsphModel,
    beta: f64,
}

impl ReducedModel {
    pub fn new(alpha: Vector, t: Matrix, u: Matrix, q1: Matrix, q2: Matrix, beta: f64) -> Result<Self> {
        let base = CsphModel::new(alpha, t, u, q1, q2, 1.0, 1.0)?;
        Self::from_base(base, beta)
    }

    /// `base` must have unit scales.
    pub fn from_base(base: CsphModel, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Domain(format!("beta must be positive and finite, got {beta}")));
        }
        if base.a1() != 1.0 || base.a2() != 1.0 {
            return Err(Error::Domain("reduced base model must have a1 = a2 = 1".into()));
        }
        Ok(ReducedModel { base, beta })
    }

    pub fn base(&self) -> &CsphModel {
        &self.base
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn structure(&self, alpha_mode: AlphaMode) -> ModelStructure {
        ModelStructure {
            p0: self.base.pre_states(),
            p1: self.base.post_states(),
            alpha_mode,
        }
    }

    /// The equivalent general model: `a1 = beta`, `a2 = 1`, `Q1 / beta`.
    pub fn to_csph(&self) -> CsphModel {
        let b = &self.base;
        CsphModel::new(
            b.alpha().clone(),
            b.t().clone(),
            b.u().clone(),
            b.q1() / self.beta,
            b.q2().clone(),
            self.beta,
            1.0,
        )
        .expect("rescaling a valid model keeps it valid")
    }

    /// Rescales time by `a2`: `T/a2`, `U/a2`, `Q1 a1/a2`, `beta = a1/a2`.
    pub fn from_csph(m: &CsphModel) -> Result<Self> {
        let (a1, a2) = (m.a1(), m.a2());
        let base = CsphModel::new(
            m.alpha().clone(),
            m.t() / a2,
            m.u() / a2,
            m.q1() * (a1 / a2),
            m.q2().clone(),
            1.0,
            1.0,
        )?;
        Self::from_base(base, a1 / a2)
    }

    /// Density through the change of variables `z1 → z1 / beta` on the
    /// unit-scale base model.
    pub fn joint_pdf(&self, z1: f64, z2: f64) -> Result<f64> {
        Ok(self.base.joint_pdf(z1 / self.beta, z2)? / self.beta)
    }
}
