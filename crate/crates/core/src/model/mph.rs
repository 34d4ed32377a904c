use super::{ones, CsphModel};
use crate::error::{Error, Result};
use crate::matrix::{self, Matrix, Vector};

/// Bivariate mPH law: draw a common starting state from `pi`, then run two
/// independent chains under `S1` and `S2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MphModel {
    pi: Vector,
    s1: Matrix,
    s2: Matrix,
}

impl MphModel {
    pub fn new(pi: Vector, s1: Matrix, s2: Matrix) -> Result<Self> {
        let p = pi.len();
        for (name, s) in [("S1", &s1), ("S2", &s2)] {
            if s.nrows() != p || s.ncols() != p {
                return Err(Error::Dimension(format!("{name} must be {p}x{p}")));
            }
        }
        // Reuse the CSPH validator through the single-state embedding.
        csph_from_mph_unchecked(&pi, &s1, &s2, 1.0, 1.0, 1.0)?;
        Ok(MphModel { pi, s1, s2 })
    }

    pub fn pi(&self) -> &Vector {
        &self.pi
    }
    pub fn s1(&self) -> &Matrix {
        &self.s1
    }
    pub fn s2(&self) -> &Matrix {
        &self.s2
    }

    pub fn joint_cdf(&self, y1: f64, y2: f64) -> Result<f64> {
        if !(y1 > 0.0 && y2 > 0.0) {
            return Ok(0.0);
        }
        let n = self.pi.len();
        let f1 = ones(n) - matrix::exp_times(&self.s1, y1, &ones(n))?;
        let f2 = ones(n) - matrix::exp_times(&self.s2, y2, &ones(n))?;
        Ok(self.pi.dot(&f1.component_mul(&f2)).clamp(0.0, 1.0))
    }

    pub fn joint_pdf(&self, y1: f64, y2: f64) -> Result<f64> {
        if !(y1 >= 0.0 && y2 >= 0.0) {
            return Ok(0.0);
        }
        let n = self.pi.len();
        let e1 = -(&self.s1 * ones(n));
        let e2 = -(&self.s2 * ones(n));
        let f1 = matrix::exp_times(&self.s1, y1, &e1)?;
        let f2 = matrix::exp_times(&self.s2, y2, &e2)?;
        Ok(self.pi.dot(&f1.component_mul(&f2)).max(0.0))
    }
}

fn csph_from_mph_unchecked(
    pi: &Vector,
    s1: &Matrix,
    s2: &Matrix,
    lambda: f64,
    a1: f64,
    a2: f64,
) -> Result<CsphModel> {
    CsphModel::new(
        Vector::from_element(1, 1.0),
        Matrix::from_element(1, 1, -lambda),
        Matrix::from_row_slice(1, pi.len(), (pi * lambda).as_slice()),
        s1.clone(),
        s2.clone(),
        a1,
        a2,
    )
}

/// Single pre-shock state with exit rate `lambda`, entering the post-shock
/// space according to `pi`. As `lambda → ∞` the shock time vanishes and the
/// law converges to the mPH target.
pub fn csph_from_mph(mph: &MphModel, lambda: f64, a1: f64, a2: f64) -> Result<CsphModel> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    csph_from_mph_unchecked(mph.pi(), mph.s1(), mph.s2(), lambda, a1, a2)
}
