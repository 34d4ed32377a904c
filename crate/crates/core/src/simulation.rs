//! Exact path simulation of the common-shock construction.
//!
//! Paths are generated with the embedded jump chain: exponential holding
//! times at the row's total rate, then a categorical jump among the
//! off-diagonal rates and the exit rates. Each record draws from its own
//! ChaCha8 stream (`seed`, stream = record index), so datasets are
//! reproducible and independent of how generation is parallelised.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::data::BivariateDataset;
use crate::error::{Error, Result};
use crate::matrix::{Matrix, Vector};
use crate::model::{CsphModel, Margin};

/// Name of the generator behind every stream.
pub const RNG_ALGORITHM: &str = "ChaCha8";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRecord {
    pub x1: f64,
    pub x2: f64,
    pub tau12: f64,
    /// Zero-based post-shock entry state.
    pub k: usize,
    pub resid1: f64,
    pub resid2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: u64,
    pub algorithm: &'static str,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState {
            seed,
            algorithm: RNG_ALGORITHM,
        }
    }

    /// Independent stream for record `index`.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

fn pick<R: Rng + ?Sized>(weights: impl Iterator<Item = f64>, total: f64, rng: &mut R) -> Option<usize> {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            acc += w;
            last = Some(i);
            if target < acc {
                return Some(i);
            }
        }
    }
    // Rounding can leave `target` marginally above the accumulated sum.
    last
}

/// Runs a chain with transient generator `gen` and exit-rate matrix `exits`
/// (one column per destination outside the transient block) from `start`,
/// returning the absorption time and the exit column taken.
pub fn sample_absorption<R: Rng + ?Sized>(
    gen: &Matrix,
    exits: &Matrix,
    start: usize,
    rng: &mut R,
) -> Result<(f64, usize)> {
    let p = gen.nrows();
    let mut state = start;
    let mut time = 0.0;
    loop {
        let row_rates = (0..p).filter(|&j| j != state).map(|j| gen[(state, j)]).sum::<f64>();
        let exit_rates = exits.row(state).sum();
        let total = row_rates + exit_rates;
        if !(total > 0.0) {
            return Err(Error::Invalid(vec![crate::error::Violation {
                parameter: "generator",
                index: Some((state, state)),
                value: total,
                rule: "state has no outgoing rate (absorbing inside the transient block)",
            }]));
        }
        let hold: f64 = Exp1.sample(rng);
        time += hold / total;
        let within = (0..p).map(|j| if j == state { 0.0 } else { gen[(state, j)] });
        let all = within.chain((0..exits.ncols()).map(|c| exits[(state, c)]));
        let choice = pick(all, total, rng).expect("positive total rate");
        if choice < p {
            state = choice;
        } else {
            return Ok((time, choice - p));
        }
    }
}

fn sample_initial<R: Rng + ?Sized>(alpha: &Vector, rng: &mut R) -> usize {
    pick(alpha.iter().copied(), alpha.sum(), rng).expect("probability vector has mass")
}

/// Time to leave `E` and the post-shock state entered, starting from `init`.
pub fn sample_ctmc_exit<R: Rng + ?Sized>(
    t: &Matrix,
    u: &Matrix,
    init: &Vector,
    rng: &mut R,
) -> Result<(f64, usize)> {
    let start = sample_initial(init, rng);
    sample_absorption(t, u, start, rng)
}

fn residual<R: Rng + ?Sized>(m: &CsphModel, margin: Margin, k: usize, rng: &mut R) -> Result<f64> {
    let q = m.q(margin);
    let exits = Matrix::from_column_slice(q.nrows(), 1, m.exit(margin).as_slice());
    Ok(sample_absorption(q, &exits, k, rng)?.0)
}

/// One draw of `(tau, K, resid1, resid2)` and the resulting `(X1, X2)`.
pub fn sample_csph<R: Rng + ?Sized>(m: &CsphModel, rng: &mut R) -> Result<SampleRecord> {
    let (tau12, k) = sample_ctmc_exit(m.t(), m.u(), m.alpha(), rng)?;
    let resid1 = residual(m, Margin::First, k, rng)?;
    let resid2 = residual(m, Margin::Second, k, rng)?;
    Ok(SampleRecord {
        x1: m.a1() * tau12 + resid1,
        x2: m.a2() * tau12 + resid2,
        tau12,
        k,
        resid1,
        resid2,
    })
}

/// `n` independent records; record `i` uses stream `i` of `seed`.
pub fn sample_records(m: &CsphModel, n: usize, seed: u64) -> Result<Vec<SampleRecord>> {
    let state = RngState::new(seed);
    (0..n as u64)
        .into_par_iter()
        .map(|i| sample_csph(m, &mut state.stream(i)))
        .collect()
}

/// Observed pairs only, see [`sample_records`].
pub fn sample_dataset(m: &CsphModel, n: usize, seed: u64) -> Result<BivariateDataset> {
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    let records = sample_records(m, n, seed)?;
    BivariateDataset::new(records.iter().map(|r| [r.x1, r.x2]).collect())
}
