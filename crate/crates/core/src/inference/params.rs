use super::{AlphaMode, ModelStructure, ReducedModel};
use crate::error::{Error, Result};
use crate::matrix::{Matrix, Vector};

/// Rates below this are clamped before taking logs, so structural zeros map
/// to a large negative (but finite) free parameter.
pub const MIN_RATE: f64 = 1e-14;

/// Flat free-parameter vector for a [`ModelStructure`].
///
/// Layout: log off-diagonal `T` (row-major, diagonal skipped), log `U`,
/// log off-diagonal `Q1`, log exit rates of `Q1`, the same two blocks for
/// `Q2`, `log beta`, then `p0 − 1` logits for `alpha` when it is estimated
/// (the first logit is pinned at zero). Diagonals are implied by the row
/// sums, so every vector maps to a valid model.
#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedParams {
    structure: ModelStructure,
    values: Vec<f64>,
}

fn offdiag_count(p: usize) -> usize {
    p * (p - 1)
}

impl UnconstrainedParams {
    pub fn dimension(s: &ModelStructure) -> usize {
        let alpha = match s.alpha_mode {
            AlphaMode::FixedFirst => 0,
            AlphaMode::Estimated => s.p0 - 1,
        };
        offdiag_count(s.p0) + s.p0 * s.p1 + 2 * (offdiag_count(s.p1) + s.p1) + 1 + alpha
    }

    pub fn new(structure: ModelStructure, values: Vec<f64>) -> Result<Self> {
        let dim = Self::dimension(&structure);
        if values.len() != dim {
            return Err(Error::Dimension(format!(
                "parameter vector has {} entries, structure needs {dim}",
                values.len()
            )));
        }
        Ok(UnconstrainedParams { structure, values })
    }

    pub fn zeros(structure: ModelStructure) -> Self {
        let n = Self::dimension(&structure);
        UnconstrainedParams {
            structure,
            values: vec![0.0; n],
        }
    }

    pub fn structure(&self) -> &ModelStructure {
        &self.structure
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn to_model(&self) -> Result<ReducedModel> {
        let ModelStructure { p0, p1, alpha_mode } = self.structure;
        let mut it = self.values.iter().map(|v| v.exp());
        let mut next = || it.next().expect("length checked at construction");

        let mut t = Matrix::zeros(p0, p0);
        for i in 0..p0 {
            for j in (0..p0).filter(|&j| j != i) {
                t[(i, j)] = next();
            }
        }
        let mut u = Matrix::zeros(p0, p1);
        for i in 0..p0 {
            for k in 0..p1 {
                u[(i, k)] = next();
            }
        }
        for i in 0..p0 {
            t[(i, i)] = -(t.row(i).sum() + u.row(i).sum());
        }
        let post = |next: &mut dyn FnMut() -> f64| {
            let mut q = Matrix::zeros(p1, p1);
            for i in 0..p1 {
                for j in (0..p1).filter(|&j| j != i) {
                    q[(i, j)] = next();
                }
            }
            for i in 0..p1 {
                let exit = next();
                q[(i, i)] = -(q.row(i).sum() + exit);
            }
            q
        };
        let q1 = post(&mut next);
        let q2 = post(&mut next);
        let beta = next();
        let alpha = match alpha_mode {
            AlphaMode::FixedFirst => {
                let mut a = Vector::zeros(p0);
                a[0] = 1.0;
                a
            }
            AlphaMode::Estimated => {
                let logits: Vec<f64> = std::iter::once(0.0)
                    .chain(self.values[self.values.len() + 1 - p0..].iter().copied())
                    .collect();
                let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
                let s: f64 = w.iter().sum();
                Vector::from_iterator(p0, w.iter().map(|x| x / s))
            }
        };
        ReducedModel::new(alpha, t, u, q1, q2, beta)
    }

    pub fn from_model(structure: ModelStructure, m: &ReducedModel) -> Result<Self> {
        let b = m.base();
        let ModelStructure { p0, p1, alpha_mode } = structure;
        if b.pre_states() != p0 || b.post_states() != p1 {
            return Err(Error::Dimension(format!(
                "model has ({}, {}) states, structure expects ({p0}, {p1})",
                b.pre_states(),
                b.post_states()
            )));
        }
        let lg = |x: f64| x.max(MIN_RATE).ln();
        let mut v = Vec::with_capacity(Self::dimension(&structure));
        for i in 0..p0 {
            for j in (0..p0).filter(|&j| j != i) {
                v.push(lg(b.t()[(i, j)]));
            }
        }
        v.extend(b.u().transpose().iter().map(|&x| lg(x)));
        for (q, exit) in [(b.q1(), b.exit(crate::Margin::First)), (b.q2(), b.exit(crate::Margin::Second))] {
            for i in 0..p1 {
                for j in (0..p1).filter(|&j| j != i) {
                    v.push(lg(q[(i, j)]));
                }
            }
            v.extend(exit.iter().map(|&x| lg(x)));
        }
        v.push(m.beta().ln());
        match alpha_mode {
            AlphaMode::FixedFirst => {
                let a = b.alpha();
                if (a[0] - 1.0).abs() > 1e-12 {
                    return Err(Error::Domain(format!(
                        "alpha is fixed at the first state but the model has alpha[0] = {}",
                        a[0]
                    )));
                }
            }
            AlphaMode::Estimated => {
                let a = b.alpha();
                let first = lg(a[0]);
                v.extend(a.iter().skip(1).map(|&x| lg(x) - first));
            }
        }
        Self::new(structure, v)
    }
}
