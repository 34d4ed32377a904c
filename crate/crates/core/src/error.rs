use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular matrix: pivot {pivot:e} in column {column} is below the threshold {threshold:e}")]
    Singular {
        column: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("invalid model: {}", display_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("fit failed: {0}")]
    Fit(String),
}

/// A single broken structural constraint, located by parameter name and
/// entry index.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub parameter: &'static str,
    pub index: Option<(usize, usize)>,
    pub value: f64,
    pub rule: &'static str,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some((r, c)) => write!(f, "{}[{},{}] = {:e}: {}", self.parameter, r, c, self.value, self.rule),
            None => write!(f, "{} = {:e}: {}", self.parameter, self.value, self.rule),
        }
    }
}

fn display_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}
