//! Reference models used throughout the documentation and test suites.

use crate::matrix::{Matrix, Vector};
use crate::model::{CsphModel, MphModel};

/// Three pre-shock and two post-shock states, `a = (2, 1)`.
pub fn example_one() -> CsphModel {
    CsphModel::new(
        Vector::from_vec(vec![1.0, 0.0, 0.0]),
        Matrix::from_row_slice(
            3,
            3,
            &[-0.5, 0.25, 0.125, 0.125, -0.625, 0.25, 0.125, 0.125, -0.75],
        ),
        Matrix::from_row_slice(3, 2, &[0.1, 0.025, 0.125, 0.125, 0.125, 0.375]),
        Matrix::from_row_slice(2, 2, &[-0.375, 0.375, 0.0, -0.375]),
        Matrix::from_row_slice(2, 2, &[-0.5, 0.25, 0.25, -0.5]),
        2.0,
        1.0,
    )
    .expect("reference model is valid")
}

/// One state on each side: `tau ~ Exp(lambda)`, `resid_i ~ Exp(mu_i)`.
pub fn scalar(lambda: f64, mu1: f64, mu2: f64, a1: f64, a2: f64) -> CsphModel {
    CsphModel::new(
        Vector::from_element(1, 1.0),
        Matrix::from_element(1, 1, -lambda),
        Matrix::from_element(1, 1, lambda),
        Matrix::from_element(1, 1, -mu1),
        Matrix::from_element(1, 1, -mu2),
        a1,
        a2,
    )
    .expect("scalar model is valid")
}

/// Two-state mPH law with opposite-leaning components, used to exercise the
/// limiting construction.
pub fn mph_target() -> MphModel {
    MphModel::new(
        Vector::from_vec(vec![0.4, 0.6]),
        Matrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -0.25]),
        Matrix::from_row_slice(2, 2, &[-0.3, 0.1, 0.2, -2.0]),
    )
    .expect("reference mPH model is valid")
}
