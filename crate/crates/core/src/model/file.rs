use serde::{Deserialize, Serialize};

use super::CsphModel;
use crate::error::{Error, Result};
use crate::inference::ReducedModel;
use crate::matrix::{Matrix, Vector};

/// On-disk model description.
///
/// Either `a1`/`a2` (general form) or `beta` (first-margin-scaled form) is
/// present. Matrices are arrays of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub alpha: Vec<f64>,
    #[serde(rename = "T")]
    pub t: Vec<Vec<f64>>,
    #[serde(rename = "U")]
    pub u: Vec<Vec<f64>>,
    #[serde(rename = "Q1")]
    pub q1: Vec<Vec<f64>>,
    #[serde(rename = "Q2")]
    pub q2: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

pub(crate) fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<Matrix> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Dimension(format!("{name} has no rows")));
    }
    let m = rows[0].len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(Error::Dimension(format!(
            "{name} row {i} has {} entries, expected {m}",
            r.len()
        )));
    }
    Ok(Matrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub(crate) fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ModelFile {
    pub fn is_reduced(&self) -> bool {
        self.beta.is_some()
    }

    /// Parses the general form. A file in the reduced form is expanded to
    /// its equivalent general model (`a1 = beta`, `a2 = 1`, `Q1 / beta`).
    pub fn to_model(&self) -> Result<CsphModel> {
        if self.is_reduced() {
            return Ok(self.to_reduced()?.to_csph());
        }
        let (a1, a2) = match (self.a1, self.a2) {
            (Some(a1), Some(a2)) => (a1, a2),
            _ => {
                return Err(Error::Dimension(
                    "model file needs both a1 and a2, or beta".into(),
                ))
            }
        };
        CsphModel::new(
            Vector::from_vec(self.alpha.clone()),
            matrix_from_rows("T", &self.t)?,
            matrix_from_rows("U", &self.u)?,
            matrix_from_rows("Q1", &self.q1)?,
            matrix_from_rows("Q2", &self.q2)?,
            a1,
            a2,
        )
    }

    pub fn to_reduced(&self) -> Result<ReducedModel> {
        let beta = self
            .beta
            .ok_or_else(|| Error::Dimension("model file has no beta".into()))?;
        if self.a1.is_some() || self.a2.is_some() {
            return Err(Error::Dimension(
                "model file must not mix beta with a1/a2".into(),
            ));
        }
        ReducedModel::new(
            Vector::from_vec(self.alpha.clone()),
            matrix_from_rows("T", &self.t)?,
            matrix_from_rows("U", &self.u)?,
            matrix_from_rows("Q1", &self.q1)?,
            matrix_from_rows("Q2", &self.q2)?,
            beta,
        )
    }

    pub fn from_model(m: &CsphModel) -> Self {
        ModelFile {
            alpha: m.alpha().iter().copied().collect(),
            t: rows_of(m.t()),
            u: rows_of(m.u()),
            q1: rows_of(m.q1()),
            q2: rows_of(m.q2()),
            a1: Some(m.a1()),
            a2: Some(m.a2()),
            beta: None,
        }
    }

    pub fn from_reduced(r: &ReducedModel) -> Self {
        let base = r.base();
        ModelFile {
            alpha: base.alpha().iter().copied().collect(),
            t: rows_of(base.t()),
            u: rows_of(base.u()),
            q1: rows_of(base.q1()),
            q2: rows_of(base.q2()),
            a1: None,
            a2: None,
            beta: Some(r.beta()),
        }
    }
}
