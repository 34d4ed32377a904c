//! Size-biased, exponentially tilted and tail-restricted joint moments of
//! `(tau, resid1, resid2)` through augmented block generators.
//!
//! The key identity: for the block upper-bidiagonal matrix `M^(N,θ)` with
//! `M − θI` on the diagonal and `I` on the superdiagonal, the top-right
//! block of `e^{M^(N,θ) x}` is `e^{(M−θI)x} x^N / N!`. Integrating over a
//! tail `x > y` then only costs one exponential and one linear solve.

use crate::error::{Error, Result};
use crate::matrix::{self, kron_vec, Matrix, Vector};
use crate::model::{CsphModel, Margin};

/// Powers, tilts and lower thresholds for the three latent components, in
/// the order `(tau, resid1, resid2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MasterQuery {
    pub n: [u32; 3],
    pub theta: [f64; 3],
    pub y: [f64; 3],
}

impl MasterQuery {
    pub fn new(n: [u32; 3], theta: [f64; 3], y: [f64; 3]) -> Self {
        MasterQuery { n, theta, y }
    }

    /// Plain mixed moment `E[tau^n0 resid1^n1 resid2^n2]`.
    pub fn moment(n: [u32; 3]) -> Self {
        MasterQuery::new(n, [0.0; 3], [0.0; 3])
    }

    /// Same powers and tilts, restricted to `tau > a`.
    pub fn shock_tail(n: [u32; 3], theta: [f64; 3], a: f64) -> Self {
        MasterQuery::new(n, theta, [a, 0.0, 0.0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedGenerator {
    base: Matrix,
    order: usize,
    theta: f64,
    assembled: Matrix,
}

impl AugmentedGenerator {
    pub fn base(&self) -> &Matrix {
        &self.base
    }
    /// Number of superdiagonal identity blocks (`N`).
    pub fn order(&self) -> usize {
        self.order
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn matrix(&self) -> &Matrix {
        &self.assembled
    }
    pub fn block_size(&self) -> usize {
        self.base.nrows()
    }
}

/// Assembles the `(N+1)p`-square block upper-bidiagonal generator.
pub fn augment_generator(m: &Matrix, order: usize, theta: f64) -> AugmentedGenerator {
    let p = m.nrows();
    let shifted = m - Matrix::identity(p, p) * theta;
    let mut a = Matrix::zeros((order + 1) * p, (order + 1) * p);
    for b in 0..=order {
        a.view_mut((b * p, b * p), (p, p)).copy_from(&shifted);
        if b < order {
            a.view_mut((b * p, (b + 1) * p), (p, p))
                .copy_from(&Matrix::identity(p, p));
        }
    }
    AugmentedGenerator {
        base: m.clone(),
        order,
        theta,
        assembled: a,
    }
}

/// `(alpha, 0, …, 0)`.
pub fn augment_initial(alpha: &Vector, order: usize) -> Vector {
    let mut v = Vector::zeros((order + 1) * alpha.len());
    v.rows_mut(0, alpha.len()).copy_from(alpha);
    v
}

/// `(0, …, 0, q)ᵀ`.
pub fn augment_exit(q: &Vector, order: usize) -> Vector {
    let p = q.len();
    let mut v = Vector::zeros((order + 1) * p);
    v.rows_mut(order * p, p).copy_from(q);
    v
}

/// `(N+1)p × p` selector with the identity in the last block.
pub fn selector_down(order: usize, p: usize) -> Matrix {
    let mut s = Matrix::zeros((order + 1) * p, p);
    s.view_mut((order * p, 0), (p, p))
        .copy_from(&Matrix::identity(p, p));
    s
}

/// `p × (N+1)p` selector with the identity in the first block.
pub fn selector_left(order: usize, p: usize) -> Matrix {
    let mut s = Matrix::zeros(p, (order + 1) * p);
    s.view_mut((0, 0), (p, p)).copy_from(&Matrix::identity(p, p));
    s
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

const COMPONENTS: [&str; 3] = ["shock time", "residual 1", "residual 2"];

/// Row factor `alpha^(N) e^{T^(N,θ) x} I↓ P`, length `p1²`.
pub fn shock_factor(m: &CsphModel, n: u32, theta: f64, x: f64) -> Result<Vector> {
    let aug = augment_generator(m.t(), n as usize, theta);
    let p0 = m.pre_states();
    let e = matrix::mat_exp(&(aug.matrix() * x))?;
    let row = e.tr_mul(&augment_initial(m.alpha(), n as usize));
    let last = row.rows(n as usize * p0, p0).into_owned();
    Ok(m.coupling_matrix().matrix().tr_mul(&last))
}

/// Column factor `I← e^{Q_i^(N,θ) x} q_i^(N)`, length `p1`.
pub fn residual_factor(m: &CsphModel, margin: Margin, n: u32, theta: f64, x: f64) -> Result<Vector> {
    let aug = augment_generator(m.q(margin), n as usize, theta);
    let p1 = m.post_states();
    let e = matrix::mat_exp(&(aug.matrix() * x))?;
    let col = e * augment_exit(m.exit(margin), n as usize);
    Ok(col.rows(0, p1).into_owned())
}

/// Unnormalised size-biased Esscher density of `(tau, resid1, resid2)` at
/// `x`: `x0^n0 x1^n1 x2^n2 e^{−θ·x} g(x)` in augmented-matrix form.
pub fn sb_esscher_numerator(m: &CsphModel, n: [u32; 3], theta: [f64; 3], x: [f64; 3]) -> Result<f64> {
    if x.iter().any(|v| !(*v >= 0.0)) {
        return Ok(0.0);
    }
    let scale = factorial(n[0]) * factorial(n[1]) * factorial(n[2]);
    let row = shock_factor(m, n[0], theta[0], x[0])?;
    let r1 = residual_factor(m, Margin::First, n[1], theta[1], x[1])?;
    let r2 = residual_factor(m, Margin::Second, n[2], theta[2], x[2])?;
    Ok(scale * row.dot(&kron_vec(&r1, &r2)))
}

/// `−M^(N,θ)` checked for invertibility and for a convergent tail integral.
fn negated_checked(aug: &AugmentedGenerator, component: usize) -> Result<Matrix> {
    if aug.theta() < 0.0 {
        let decay = -matrix::spectral_abscissa(aug.base())?;
        if aug.theta() <= -decay {
            return Err(Error::Domain(format!(
                "{} integral diverges for theta = {} (decay rate {decay})",
                COMPONENTS[component],
                aug.theta()
            )));
        }
    }
    Ok(-aug.matrix())
}

fn singular_to_domain(component: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Singular { .. } => Error::Domain(format!(
            "augmented generator for the {} is singular",
            COMPONENTS[component]
        )),
        other => other,
    }
}

/// `E[(tau^n0 e^{−θ0 tau})(resid1^n1 e^{−θ1 resid1})(resid2^n2 e^{−θ2 resid2})
/// 1{tau > y0, resid1 > y1, resid2 > y2}]`.
pub fn master_moment(m: &CsphModel, q: &MasterQuery) -> Result<f64> {
    if q.y.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("thresholds must be finite and nonnegative, got {:?}", q.y)));
    }
    let scale = factorial(q.n[0]) * factorial(q.n[1]) * factorial(q.n[2]);

    let n0 = q.n[0] as usize;
    let aug = augment_generator(m.t(), n0, q.theta[0]);
    let neg = negated_checked(&aug, 0)?;
    let start = augment_initial(m.alpha(), n0);
    let row = if q.y[0] > 0.0 {
        matrix::mat_exp(&(aug.matrix() * q.y[0]))?.tr_mul(&start)
    } else {
        start
    };
    let row = matrix::solve_row(&neg, &row).map_err(singular_to_domain(0))?;
    let p0 = m.pre_states();
    let shock = m
        .coupling_matrix()
        .matrix()
        .tr_mul(&row.rows(n0 * p0, p0).into_owned());

    let mut residuals = Vec::with_capacity(2);
    for (idx, margin) in Margin::BOTH.into_iter().enumerate() {
        let order = q.n[idx + 1] as usize;
        let aug = augment_generator(m.q(margin), order, q.theta[idx + 1]);
        let neg = negated_checked(&aug, idx + 1)?;
        let col = matrix::solve_vec(&neg, &augment_exit(m.exit(margin), order))
            .map_err(singular_to_domain(idx + 1))?;
        let y = q.y[idx + 1];
        let col = if y > 0.0 {
            matrix::mat_exp(&(aug.matrix() * y))? * col
        } else {
            col
        };
        residuals.push(col.rows(0, m.post_states()).into_owned());
    }
    let value = scale * shock.dot(&kron_vec(&residuals[0], &residuals[1]));
    if !value.is_finite() {
        return Err(Error::Numeric("master moment is not finite".into()));
    }
    Ok(value)
}

/// Normalised size-biased Esscher density of `(tau, resid1, resid2)`.
pub fn sb_esscher_density(m: &CsphModel, n: [u32; 3], theta: [f64; 3], x: [f64; 3]) -> Result<f64> {
    let denom = master_moment(m, &MasterQuery::new(n, theta, [0.0; 3]))?;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::Domain(format!("normalising constant {denom} is not positive")));
    }
    Ok(sb_esscher_numerator(m, n, theta, x)? / denom)
}
