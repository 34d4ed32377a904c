//! Joint quantities of `(X1, X2)`.
//!
//! Densities and distribution functions integrate out the shock time with a
//! single Van Loan block exponential: for `u = min(z1/a1, z2/a2)`,
//! `∫₀ᵘ e^{Tt} P e^{C(u−t)} dt` is read off `exp([[T, P], [0, C]] u)`.

use super::{ones, CsphModel, Margin};
use crate::error::Result;
use crate::matrix::{self, kron_vec, Matrix, Vector};

impl CsphModel {
    /// Density of `(tau, resid1, resid2)`:
    /// `alpha e^{Tt} P ((e^{Q1 y1} q1) ⊗ (e^{Q2 y2} q2))`.
    pub fn trivariate_density(&self, t: f64, y1: f64, y2: f64) -> Result<f64> {
        if !(t >= 0.0 && y1 >= 0.0 && y2 >= 0.0) {
            return Ok(0.0);
        }
        let r1 = matrix::exp_times(self.q1(), y1, self.exit(Margin::First))?;
        let r2 = matrix::exp_times(self.q2(), y2, self.exit(Margin::Second))?;
        let row = self.coupling_matrix().matrix().tr_mul(&self.shock_state(t)?);
        Ok(row.dot(&kron_vec(&r1, &r2)).max(0.0))
    }

    /// Latest shock time compatible with the observation, `min(z1/a1, z2/a2)`.
    pub fn shock_horizon(&self, z1: f64, z2: f64) -> f64 {
        (z1 / self.a1()).min(z2 / self.a2())
    }

    fn scaled_post_generator(&self, first: bool, second: bool) -> Result<Matrix> {
        let p1 = self.post_states();
        let zero = Matrix::zeros(p1, p1);
        let g1 = if first { self.q1() * self.a1() } else { zero.clone() };
        let g2 = if second { self.q2() * self.a2() } else { zero };
        matrix::kron_sum(&g1, &g2)
    }

    /// `alpha · V[T, P, C, u]` as a row vector of length `p1²`.
    fn van_loan_row(&self, c: &Matrix, u: f64) -> Result<Vector> {
        let v = matrix::van_loan_integral(self.t(), self.coupling_matrix().matrix(), c, u)?;
        Ok(v.tr_mul(self.alpha()))
    }

    /// Joint density of `(X1, X2)`; zero outside the positive quadrant.
    pub fn joint_pdf(&self, z1: f64, z2: f64) -> Result<f64> {
        if !(z1 >= 0.0 && z2 >= 0.0) || !z1.is_finite() || !z2.is_finite() {
            return Ok(0.0);
        }
        let u = self.shock_horizon(z1, z2);
        if u == 0.0 {
            return Ok(0.0);
        }
        let c = self.scaled_post_generator(true, true)?;
        let row = self.van_loan_row(&c, u)?;
        let w1 = matrix::exp_times(self.q1(), z1 - self.a1() * u, self.exit(Margin::First))?;
        let w2 = matrix::exp_times(self.q2(), z2 - self.a2() * u, self.exit(Margin::Second))?;
        Ok(row.dot(&kron_vec(&w1, &w2)).max(0.0))
    }

    /// `e^{Q_i r} 1`, with `r = ∞` mapping to the zero vector.
    fn residual_survival_vec(&self, margin: Margin, r: f64) -> Result<Vector> {
        if r == f64::INFINITY {
            return Ok(Vector::zeros(self.post_states()));
        }
        matrix::exp_times(self.q(margin), r, &ones(self.post_states()))
    }

    /// Joint distribution function `P(X1 ≤ z1, X2 ≤ z2)` as the four-term
    /// inclusion-exclusion over residual survival functions. Either argument
    /// may be `+∞`.
    pub fn joint_cdf(&self, z1: f64, z2: f64) -> Result<f64> {
        if !(z1 > 0.0 && z2 > 0.0) {
            return Ok(0.0);
        }
        if z1 == f64::INFINITY && z2 == f64::INFINITY {
            return Ok(1.0);
        }
        if z1 == f64::INFINITY {
            return self.marginal_cdf(Margin::Second, z2);
        }
        if z2 == f64::INFINITY {
            return self.marginal_cdf(Margin::First, z1);
        }
        let u = self.shock_horizon(z1, z2);
        let p1 = self.post_states();
        let s1 = self.residual_survival_vec(Margin::First, z1 - self.a1() * u)?;
        let s2 = self.residual_survival_vec(Margin::Second, z2 - self.a2() * u)?;
        let one = ones(p1);

        let i1 = self
            .van_loan_row(&self.scaled_post_generator(false, false)?, u)?
            .dot(&kron_vec(&one, &one));
        let i2 = self
            .van_loan_row(&self.scaled_post_generator(true, false)?, u)?
            .dot(&kron_vec(&s1, &one));
        let i3 = self
            .van_loan_row(&self.scaled_post_generator(false, true)?, u)?
            .dot(&kron_vec(&one, &s2));
        let i4 = self
            .van_loan_row(&self.scaled_post_generator(true, true)?, u)?
            .dot(&kron_vec(&s1, &s2));
        Ok((i1 - i2 - i3 + i4).clamp(0.0, 1.0))
    }

    /// Joint moment generating function `E[e^{s1 X1 + s2 X2}]`.
    ///
    /// Transforms use the convention `E[e^{sX}] = alpha(−T − sI)⁻¹t`
    /// throughout.
    pub fn joint_mgf(&self, s1: f64, s2: f64) -> Result<f64> {
        let shock = self.shock_transform_row(self.a1() * s1 + self.a2() * s2)?;
        let r1 = self.residual_transform(Margin::First, s1)?;
        let r2 = self.residual_transform(Margin::Second, s2)?;
        Ok(shock.component_mul(&r1).dot(&r2))
    }
}
