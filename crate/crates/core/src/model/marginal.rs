//! Univariate quantities: the marginal laws of `X_i`, the shock time and its
//! entry state, and the post-shock residual lifetimes.

use super::{ones, CsphModel, Margin};
use crate::error::{Error, Result};
use crate::matrix::{self, Matrix, Vector};

impl CsphModel {
    /// Generator of `X_i` as a single absorption time on `E ∪ S`:
    /// `[[T/a_i, U/a_i], [0, Q_i]]`, started from `(alpha, 0)`.
    pub fn marginal_generator(&self, margin: Margin) -> Matrix {
        let (p0, p1) = (self.pre_states(), self.post_states());
        let a = self.scale(margin);
        let mut g = Matrix::zeros(p0 + p1, p0 + p1);
        g.view_mut((0, 0), (p0, p0)).copy_from(&(self.t() / a));
        g.view_mut((0, p0), (p0, p1)).copy_from(&(self.u() / a));
        g.view_mut((p0, p0), (p1, p1)).copy_from(self.q(margin));
        g
    }

    fn marginal_initial(&self) -> Vector {
        let mut v = Vector::zeros(self.pre_states() + self.post_states());
        v.rows_mut(0, self.pre_states()).copy_from(self.alpha());
        v
    }

    /// Row vector `(alpha, 0) e^{G_i x}`.
    fn marginal_state(&self, margin: Margin, x: f64) -> Result<Vector> {
        let g = self.marginal_generator(margin);
        let e = matrix::mat_exp(&(g * x))?;
        Ok(e.tr_mul(&self.marginal_initial()))
    }

    pub fn marginal_pdf(&self, margin: Margin, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Ok(0.0);
        }
        let g = self.marginal_generator(margin);
        let exit = -(&g * ones(g.nrows()));
        Ok(self.marginal_state(margin, x)?.dot(&exit).max(0.0))
    }

    pub fn marginal_cdf(&self, margin: Margin, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Ok(0.0);
        }
        if x == f64::INFINITY {
            return Ok(1.0);
        }
        let surv = self.marginal_state(margin, x)?.sum();
        Ok((1.0 - surv).clamp(0.0, 1.0))
    }

    /// Mean of `X_i`, `(alpha, 0)(−G_i)⁻¹1`.
    pub fn marginal_mean(&self, margin: Margin) -> Result<f64> {
        let g = self.marginal_generator(margin);
        let x = matrix::solve_vec(&(-g), &ones(self.pre_states() + self.post_states()))?;
        Ok(self.marginal_initial().dot(&x))
    }

    /// Defective density of the shock time on the event `{K = k}`:
    /// `alpha e^{T t} u_k`.
    pub fn shock_density_defective(&self, k: usize, t: f64) -> Result<f64> {
        self.check_state(k)?;
        if !(t >= 0.0) {
            return Ok(0.0);
        }
        Ok(self.shock_state(t)?.dot(&self.u().column(k)).max(0.0))
    }

    /// Density of the shock time, `alpha e^{T t} U 1`.
    pub fn shock_density(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Ok(0.0);
        }
        Ok(self
            .shock_state(t)?
            .dot(&(self.u() * ones(self.post_states())))
            .max(0.0))
    }

    /// `P(tau > t) = alpha e^{T t} 1`.
    pub fn shock_survival(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Ok(1.0);
        }
        Ok(self.shock_state(t)?.sum().clamp(0.0, 1.0))
    }

    /// Row vector `alpha e^{T t}`.
    pub(crate) fn shock_state(&self, t: f64) -> Result<Vector> {
        Ok(matrix::mat_exp(&(self.t() * t))?.tr_mul(self.alpha()))
    }

    /// `alpha (−T − sI)⁻¹ U`, i.e. `E[e^{s tau} 1{K = k}]` for every `k`.
    pub(crate) fn shock_transform_row(&self, s: f64) -> Result<Vector> {
        let resolvent = resolvent(self.t(), s, "shock time")?;
        let row = matrix::solve_row(&resolvent, self.alpha())?;
        Ok(self.u().tr_mul(&row))
    }

    /// `E[e^{s tau} 1{K = k}] = alpha (−T − sI)⁻¹ u_k`.
    pub fn shock_mgf_defective(&self, k: usize, s: f64) -> Result<f64> {
        self.check_state(k)?;
        Ok(self.shock_transform_row(s)?[k])
    }

    /// `P(K = k)` for every post-shock state.
    pub fn entry_probabilities(&self) -> Result<Vector> {
        self.shock_transform_row(0.0)
    }

    pub fn residual_pdf(&self, margin: Margin, k: usize, y: f64) -> Result<f64> {
        self.check_state(k)?;
        if !(y >= 0.0) {
            return Ok(0.0);
        }
        let v = matrix::exp_times(self.q(margin), y, self.exit(margin))?;
        Ok(v[k].max(0.0))
    }

    pub fn residual_cdf(&self, margin: Margin, k: usize, y: f64) -> Result<f64> {
        self.check_state(k)?;
        if !(y > 0.0) {
            return Ok(0.0);
        }
        let v = matrix::exp_times(self.q(margin), y, &ones(self.post_states()))?;
        Ok((1.0 - v[k]).clamp(0.0, 1.0))
    }

    /// `E[e^{s resid_i} | K = k] = e_kᵀ(−Q_i − sI)⁻¹q_i`.
    pub fn residual_mgf(&self, margin: Margin, k: usize, s: f64) -> Result<f64> {
        self.check_state(k)?;
        Ok(self.residual_transform(margin, s)?[k])
    }

    /// `(−Q_i − sI)⁻¹ q_i` for all entry states at once.
    pub(crate) fn residual_transform(&self, margin: Margin, s: f64) -> Result<Vector> {
        let label = match margin {
            Margin::First => "residual 1",
            Margin::Second => "residual 2",
        };
        let r = resolvent(self.q(margin), s, label)?;
        matrix::solve_vec(&r, self.exit(margin))
    }

    /// `E[resid_i^n | K = k]` for every `k`: `n! (−Q_i)⁻ⁿ 1`.
    pub fn residual_moments(&self, margin: Margin, n: u32) -> Result<Vector> {
        let neg = -self.q(margin);
        let mut v = ones(self.post_states());
        for j in 1..=n {
            v = matrix::solve_vec(&neg, &v)? * j as f64;
        }
        Ok(v)
    }
}

/// `−M − sI`, rejected when singular or when the transform diverges
/// (`s` at or beyond the decay rate of `M`).
fn resolvent(m: &Matrix, s: f64, what: &str) -> Result<Matrix> {
    if !s.is_finite() {
        return Err(Error::Domain(format!("{what} transform argument {s} is not finite")));
    }
    let n = m.nrows();
    let r = -m - Matrix::identity(n, n) * s;
    if s > 0.0 {
        let abscissa = matrix::spectral_abscissa(m)?;
        if s >= -abscissa {
            return Err(Error::Domain(format!(
                "{what} transform diverges at s = {s} (decay rate {})",
                -abscissa
            )));
        }
    }
    match matrix::solve_vec(&r, &ones(n)) {
        Ok(_) => Ok(r),
        Err(Error::Singular { .. }) => Err(Error::Domain(format!(
            "{what} resolvent is singular at s = {s}"
        ))),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn generator_blocks() {
        let m = fixtures::example_one();
        let g = m.marginal_generator(Margin::First);
        assert_eq!(g.view((0, 0), (3, 3)).into_owned(), m.t() / 2.0);
        assert_eq!(g.view((3, 3), (2, 2)).into_owned(), *m.q1());
        let g2 = m.marginal_generator(Margin::Second);
        assert_eq!(g2.view((0, 0), (3, 3)).into_owned(), *m.t());
        assert_eq!(g2.view((0, 3), (3, 2)).into_owned(), *m.u());
        for r in 3..5 {
            assert!(g2.row(r).sum() <= 0.0);
            assert!((g2.row(r).sum() - m.q2().row(r - 3).sum()).abs() < 1e-15);
        }
    }

    #[test]
    fn marginal_edges() {
        let m = fixtures::example_one();
        assert_eq!(m.marginal_cdf(Margin::First, 0.0).unwrap(), 0.0);
        assert_eq!(m.marginal_cdf(Margin::First, -1.0).unwrap(), 0.0);
        assert_eq!(m.marginal_pdf(Margin::Second, -1.0).unwrap(), 0.0);
        let f = m.marginal_cdf(Margin::First, 28.89).unwrap();
        assert!((f - 0.95).abs() < 1e-3, "{f}");
    }

    #[test]
    fn shock_density_at_zero() {
        let m = fixtures::example_one();
        assert!((m.shock_density_defective(0, 0.0).unwrap() - 0.1).abs() < 1e-15);
        assert!((m.shock_density(0.0).unwrap() - 0.125).abs() < 1e-15);
        assert!(matches!(m.shock_density_defective(2, 0.0), Err(Error::Index(_))));
    }

    #[test]
    fn shock_transform_total_probability() {
        let m = fixtures::example_one();
        let p: f64 = (0..2).map(|k| m.shock_mgf_defective(k, 0.0).unwrap()).sum();
        assert!((p - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scalar_shock_transform() {
        let lambda = 1.7;
        let m = fixtures::scalar(lambda, 1.0, 1.0, 1.0, 1.0);
        for s in [-2.0, -0.3, 0.0, 0.9] {
            let v = m.shock_mgf_defective(0, s).unwrap();
            assert!((v - lambda / (lambda - s)).abs() < 1e-14);
        }
        assert!(matches!(m.shock_mgf_defective(0, lambda), Err(Error::Domain(_))));
        assert!(matches!(m.shock_mgf_defective(0, 3.0), Err(Error::Domain(_))));
    }

    #[test]
    fn residual_basics() {
        let m = fixtures::example_one();
        assert_eq!(m.residual_cdf(Margin::First, 1, 0.0).unwrap(), 0.0);
        assert!((m.residual_mgf(Margin::Second, 0, 0.0).unwrap() - 1.0).abs() < 1e-14);
        // Q1 = [[-3/8, 3/8], [0, -3/8]]: from state 2 the residual is Exp(3/8).
        let mean = m.residual_moments(Margin::First, 1).unwrap();
        assert!((mean[1] - 8.0 / 3.0).abs() < 1e-13);
        assert!((mean[0] - 16.0 / 3.0).abs() < 1e-13);
    }
}
