//! The common-shock phase-type parameter set and its closed-form
//! distributional quantities.
//!
//! A [`CsphModel`] describes two Markov jump processes that share a path on
//! the pre-shock states `E` (generator `T`, started from `alpha`) until the
//! common exit time `tau`. At that time both enter the same post-shock state
//! `K` (rates `U`) and then evolve independently under `Q1` and `Q2` until
//! absorption. With `resid_i` the time margin `i` spends after the shock,
//! the observed losses are `X_i = a_i * tau + resid_i`.
//!
//! State indices are zero-based throughout the API.

mod file;
mod joint;
mod kernel;
mod marginal;
mod mph;

pub use file::ModelFile;
pub use kernel::{DensityKernel, KernelWorkspace};
pub use mph::{csph_from_mph, MphModel};

use crate::error::{Error, Result, Violation};
use crate::matrix::{self, Matrix, Vector};

/// Absolute tolerance on `sum(alpha) == 1`.
pub const PROB_SUM_TOL: f64 = 1e-12;
/// Tolerance on the conservation rows `T·1 + U·1 = 0`, relative to the row's scale.
pub const CONSERVATION_TOL: f64 = 1e-10;

/// Which of the two observed components a marginal quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Margin {
    First,
    Second,
}

impl Margin {
    pub const BOTH: [Margin; 2] = [Margin::First, Margin::Second];

    /// Parses the one-based component number used on the command line.
    pub fn from_number(i: usize) -> Result<Self> {
        match i {
            1 => Ok(Margin::First),
            2 => Ok(Margin::Second),
            _ => Err(Error::Index(format!("margin must be 1 or 2, got {i}"))),
        }
    }

    pub fn number(self) -> usize {
        match self {
            Margin::First => 1,
            Margin::Second => 2,
        }
    }
}

/// Validated bivariate common-shock phase-type model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CsphModel {
    alpha: Vector,
    t: Matrix,
    u: Matrix,
    q1: Matrix,
    q2: Matrix,
    a1: f64,
    a2: f64,
    exit1: Vector,
    exit2: Vector,
    coupling: CouplingMatrix,
}

/// The `p0 × p1²` matrix `P = Σ_k u_k (e_kᵀ ⊗ e_kᵀ)` that routes the shock's
/// exit rate into the diagonal of the product post-shock space.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix(Matrix);

impl CouplingMatrix {
    pub fn from_exit_rates(u: &Matrix) -> Self {
        let p1 = u.ncols();
        let mut p = Matrix::zeros(u.nrows(), p1 * p1);
        for k in 0..p1 {
            p.set_column(k * p1 + k, &u.column(k));
        }
        CouplingMatrix(p)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

impl CsphModel {
    /// Builds and validates a model. All invariant violations are collected
    /// and reported together.
    pub fn new(
        alpha: Vector,
        t: Matrix,
        u: Matrix,
        q1: Matrix,
        q2: Matrix,
        a1: f64,
        a2: f64,
    ) -> Result<Self> {
        let exit1 = -(&q1 * Vector::from_element(q1.ncols(), 1.0));
        let exit2 = -(&q2 * Vector::from_element(q2.ncols(), 1.0));
        let coupling = CouplingMatrix::from_exit_rates(&u);
        let model = CsphModel {
            alpha,
            t,
            u,
            q1,
            q2,
            a1,
            a2,
            exit1,
            exit2,
            coupling,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks every structural invariant and returns all violations found.
    pub fn validate(&self) -> Result<()> {
        let p0 = self.alpha.len();
        let p1 = self.u.ncols();
        let shape = |name: &str, m: &Matrix, r: usize, c: usize| -> Result<()> {
            if m.nrows() != r || m.ncols() != c {
                return Err(Error::Dimension(format!(
                    "{name} must be {r}x{c}, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            Ok(())
        };
        if p0 == 0 || p1 == 0 {
            return Err(Error::Dimension("state spaces must be non-empty".into()));
        }
        shape("T", &self.t, p0, p0)?;
        shape("U", &self.u, p0, p1)?;
        shape("Q1", &self.q1, p1, p1)?;
        shape("Q2", &self.q2, p1, p1)?;

        let mut bad = Vec::new();
        check_probability("alpha", &self.alpha, &mut bad);
        check_subintensity("T", &self.t, &mut bad);
        for ((r, c), &v) in indexed(&self.u) {
            if !v.is_finite() || v < 0.0 {
                bad.push(Violation {
                    parameter: "U",
                    index: Some((r, c)),
                    value: v,
                    rule: "exit rates must be finite and nonnegative",
                });
            }
        }
        for r in 0..p0 {
            let row_sum: f64 = self.t.row(r).sum() + self.u.row(r).sum();
            let scale: f64 = self.t.row(r).abs().sum() + self.u.row(r).abs().sum();
            if !(row_sum.abs() <= CONSERVATION_TOL * scale.max(1.0)) {
                bad.push(Violation {
                    parameter: "T·1+U·1",
                    index: Some((r, 0)),
                    value: row_sum,
                    rule: "pre-shock rows must conserve mass (row sum of [T U] is zero)",
                });
            }
        }
        for (name, q) in [("Q1", &self.q1), ("Q2", &self.q2)] {
            check_subintensity(name, q, &mut bad);
            for r in 0..p1 {
                let s = q.row(r).sum();
                if s > CONSERVATION_TOL * q.row(r).abs().sum().max(1.0) {
                    bad.push(Violation {
                        parameter: name,
                        index: Some((r, 0)),
                        value: s,
                        rule: "row sums must be nonpositive",
                    });
                }
            }
        }
        for (name, a) in [("a1", self.a1), ("a2", self.a2)] {
            if !(a > 0.0) || !a.is_finite() {
                bad.push(Violation {
                    parameter: name,
                    index: None,
                    value: a,
                    rule: "scaling factor must be positive and finite",
                });
            }
        }
        if bad.is_empty() {
            for (name, q) in [("Q1", &self.q1), ("Q2", &self.q2)] {
                if let Err(Error::Singular { pivot, column, .. }) =
                    matrix::solve_vec(&(-q), &Vector::from_element(p1, 1.0))
                {
                    bad.push(Violation {
                        parameter: name,
                        index: Some((column, column)),
                        value: pivot,
                        rule: "-Q must be nonsingular (every post-shock state transient)",
                    });
                }
            }
            if let Err(Error::Singular { pivot, column, .. }) =
                matrix::solve_vec(&(-&self.t), &Vector::from_element(p0, 1.0))
            {
                bad.push(Violation {
                    parameter: "T",
                    index: Some((column, column)),
                    value: pivot,
                    rule: "-T must be nonsingular (the shock must eventually occur)",
                });
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(bad))
        }
    }

    pub fn alpha(&self) -> &Vector {
        &self.alpha
    }
    pub fn t(&self) -> &Matrix {
        &self.t
    }
    pub fn u(&self) -> &Matrix {
        &self.u
    }
    pub fn q(&self, margin: Margin) -> &Matrix {
        match margin {
            Margin::First => &self.q1,
            Margin::Second => &self.q2,
        }
    }
    pub fn q1(&self) -> &Matrix {
        &self.q1
    }
    pub fn q2(&self) -> &Matrix {
        &self.q2
    }
    /// Exit-rate vector `−Q_i·1` of the post-shock generator.
    pub fn exit(&self, margin: Margin) -> &Vector {
        match margin {
            Margin::First => &self.exit1,
            Margin::Second => &self.exit2,
        }
    }
    pub fn scale(&self, margin: Margin) -> f64 {
        match margin {
            Margin::First => self.a1,
            Margin::Second => self.a2,
        }
    }
    pub fn a1(&self) -> f64 {
        self.a1
    }
    pub fn a2(&self) -> f64 {
        self.a2
    }
    /// Number of pre-shock states.
    pub fn pre_states(&self) -> usize {
        self.alpha.len()
    }
    /// Number of post-shock states.
    pub fn post_states(&self) -> usize {
        self.u.ncols()
    }
    pub fn coupling_matrix(&self) -> &CouplingMatrix {
        &self.coupling
    }
    /// `U e_k`, the exit-rate column into post-shock state `k`.
    pub fn exit_column(&self, k: usize) -> Result<Vector> {
        self.check_state(k)?;
        Ok(self.u.column(k).into_owned())
    }

    pub(crate) fn check_state(&self, k: usize) -> Result<()> {
        if k >= self.post_states() {
            return Err(Error::Index(format!(
                "post-shock state {k} out of range (model has {})",
                self.post_states()
            )));
        }
        Ok(())
    }
}

fn indexed(m: &Matrix) -> impl Iterator<Item = ((usize, usize), &f64)> {
    let rows = m.nrows();
    m.iter().enumerate().map(move |(i, v)| ((i % rows, i / rows), v))
}

fn check_probability(name: &'static str, v: &Vector, bad: &mut Vec<Violation>) {
    for (i, &x) in v.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            bad.push(Violation {
                parameter: name,
                index: Some((0, i)),
                value: x,
                rule: "probabilities must be finite and nonnegative",
            });
        }
    }
    let s = v.sum();
    if !((s - 1.0).abs() <= PROB_SUM_TOL) {
        bad.push(Violation {
            parameter: name,
            index: None,
            value: s,
            rule: "probability vector must sum to one",
        });
    }
}

fn check_subintensity(name: &'static str, m: &Matrix, bad: &mut Vec<Violation>) {
    for ((r, c), &v) in indexed(m) {
        let ok = v.is_finite() && if r == c { v <= 0.0 } else { v >= 0.0 };
        if !ok {
            bad.push(Violation {
                parameter: name,
                index: Some((r, c)),
                value: v,
                rule: if r == c {
                    "diagonal entries must be nonpositive"
                } else {
                    "off-diagonal entries must be nonnegative"
                },
            });
        }
    }
}

pub(crate) fn ones(n: usize) -> Vector {
    Vector::from_element(n, 1.0)
}
