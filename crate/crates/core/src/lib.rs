//! Bivariate common-shock phase-type (CSPH) distributions.
//!
//! Two losses share a Markov path until a common shock, then run
//! independently: `X_i = a_i * tau + resid_i`. This crate evaluates the
//! joint law exactly with matrix-analytic formulas, computes tilted and
//! tail-restricted moments through augmented generators, derives risk and
//! dependence measures from them, simulates the construction exactly and
//! fits models by maximum likelihood.
//!
//! ```
//! use csph::{fixtures, model::Margin, risk};
//!
//! let m = fixtures::example_one();
//! let moments = risk::moment_set(&m).unwrap();
//! assert!((moments.e_x1 - 12.87).abs() < 0.01);
//! assert!(m.joint_cdf(10.0, 8.0).unwrap() < m.marginal_cdf(Margin::First, 10.0).unwrap());
//! ```

pub mod data;
pub mod dependence;
pub mod error;
pub mod fixtures;
pub mod inference;
pub mod master;
pub mod matrix;
pub mod model;
pub mod risk;
pub mod simulation;

pub use data::BivariateDataset;
pub use error::{Error, Result};
pub use master::MasterQuery;
pub use model::{CsphModel, Margin, ModelFile, MphModel};
