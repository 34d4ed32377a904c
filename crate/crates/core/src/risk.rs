//! Risk measures built from master moments and the marginal laws.
//!
//! Every quantity conditioned on the shock time uses the event
//! `{tau > a}`; its expectations are master moments with threshold
//! `y = (a, 0, 0)`, divided by `P(tau > a)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::master::{master_moment, MasterQuery};
use crate::matrix;
use crate::model::{CsphModel, Margin};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub e_x1: f64,
    pub e_x2: f64,
    pub e_x1_sq: f64,
    pub e_x2_sq: f64,
    pub e_x1x2: f64,
    pub e_tau: f64,
}

impl MomentSet {
    pub fn var1(&self) -> f64 {
        self.e_x1_sq - self.e_x1 * self.e_x1
    }
    pub fn var2(&self) -> f64 {
        self.e_x2_sq - self.e_x2 * self.e_x2
    }
    pub fn cov(&self) -> f64 {
        self.e_x1x2 - self.e_x1 * self.e_x2
    }
    pub fn mean(&self, margin: Margin) -> f64 {
        match margin {
            Margin::First => self.e_x1,
            Margin::Second => self.e_x2,
        }
    }
}

/// `E[tau^n0 resid1^n1 resid2^n2 ; tau > a]`.
fn tail(m: &CsphModel, n: [u32; 3], a: f64) -> Result<f64> {
    master_moment(m, &MasterQuery::shock_tail(n, [0.0; 3], a))
}

/// Unnormalised first and cross moments of `(X1, X2)` on `{tau > a}`.
struct TailMoments {
    mass: f64,
    x1: f64,
    x2: f64,
    x1x2: f64,
}

fn tail_moments(m: &CsphModel, a: f64, cross: bool) -> Result<TailMoments> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("shock threshold must be finite and nonnegative, got {a}")));
    }
    let (a1, a2) = (m.a1(), m.a2());
    let shock = tail(m, [1, 0, 0], a)?;
    let x1x2 = if cross {
        a1 * a2 * tail(m, [2, 0, 0], a)?
            + a1 * tail(m, [1, 0, 1], a)?
            + a2 * tail(m, [1, 1, 0], a)?
            + tail(m, [0, 1, 1], a)?
    } else {
        f64::NAN
    };
    Ok(TailMoments {
        mass: tail(m, [0, 0, 0], a)?,
        x1: a1 * shock + tail(m, [0, 1, 0], a)?,
        x2: a2 * shock + tail(m, [0, 0, 1], a)?,
        x1x2,
    })
}

fn check_mass(mass: f64, a: f64) -> Result<f64> {
    if !(mass > f64::MIN_POSITIVE) || !mass.is_finite() {
        return Err(Error::Domain(format!("P(tau > {a}) = {mass} underflows")));
    }
    Ok(mass)
}

/// Means, second moments and the cross moment of `(X1, X2)`, plus `E[tau]`.
pub fn moment_set(m: &CsphModel) -> Result<MomentSet> {
    let mm = |n| master_moment(m, &MasterQuery::moment(n));
    let (a1, a2) = (m.a1(), m.a2());
    let t1 = mm([1, 0, 0])?;
    let t2 = mm([2, 0, 0])?;
    let t1r1 = mm([1, 1, 0])?;
    let t1r2 = mm([1, 0, 1])?;
    let r1 = mm([0, 1, 0])?;
    let r2 = mm([0, 0, 1])?;
    Ok(MomentSet {
        e_x1: a1 * t1 + r1,
        e_x2: a2 * t1 + r2,
        e_x1_sq: a1 * a1 * t2 + 2.0 * a1 * t1r1 + mm([0, 2, 0])?,
        e_x2_sq: a2 * a2 * t2 + 2.0 * a2 * t1r2 + mm([0, 0, 2])?,
        e_x1x2: a1 * a2 * t2 + a1 * t1r2 + a2 * t1r1 + mm([0, 1, 1])?,
        e_tau: t1,
    })
}

/// Pearson correlation of `(X1, X2)`.
pub fn pearson(m: &CsphModel) -> Result<f64> {
    let s = moment_set(m)?;
    let (v1, v2) = (s.var1(), s.var2());
    if !(v1 > 0.0 && v2 > 0.0) {
        return Err(Error::Domain(format!("variances ({v1}, {v2}) must be positive")));
    }
    Ok((s.cov() / (v1 * v2).sqrt()).clamp(-1.0, 1.0))
}

/// `(1/ϑ) log E[e^{−ϑ X_i} | tau > a]`; `a = 0` is the unconditional
/// entropic risk. Losses are positive and enter with a negative exponent.
pub fn entropic_risk(m: &CsphModel, margin: Margin, vartheta: f64, a: f64) -> Result<f64> {
    if !(vartheta > 0.0) || !vartheta.is_finite() {
        return Err(Error::Domain(format!("risk aversion must be positive, got {vartheta}")));
    }
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("shock threshold must be finite and nonnegative, got {a}")));
    }
    let theta = match margin {
        Margin::First => [m.a1() * vartheta, vartheta, 0.0],
        Margin::Second => [m.a2() * vartheta, 0.0, vartheta],
    };
    let num = master_moment(m, &MasterQuery::shock_tail([0; 3], theta, a))?;
    let den = check_mass(tail(m, [0, 0, 0], a)?, a)?;
    if !(num > 0.0) {
        return Err(Error::Domain(format!("tilted tail expectation {num} underflows")));
    }
    Ok((num / den).ln() / vartheta)
}

/// Smallest `x` with `cdf(x) ≥ level`: doubling bracket from `start`, then
/// bisection to absolute width `1e-8`.
pub(crate) fn quantile(cdf: impl Fn(f64) -> Result<f64>, level: f64, start: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must lie in (0, 1), got {level}")));
    }
    let start = if start > 0.0 && start.is_finite() { start } else { 1.0 };
    let limit = 1e6 * start;
    let mut hi = start;
    while cdf(hi)? < level {
        hi *= 2.0;
        if hi > limit {
            return Err(Error::Numeric(format!(
                "quantile bracket exceeded {limit} without reaching level {level}"
            )));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-8 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid)? >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Value-at-risk of margin `i` at `level`.
pub fn value_at_risk(m: &CsphModel, margin: Margin, level: f64) -> Result<f64> {
    quantile(|x| m.marginal_cdf(margin, x), level, m.marginal_mean(margin)?)
}

/// Quantile of the shock time.
pub fn shock_quantile(m: &CsphModel, level: f64) -> Result<f64> {
    let mean = master_moment(m, &MasterQuery::moment([1, 0, 0]))?;
    quantile(|t| Ok(1.0 - m.shock_survival(t)?), level, mean)
}

/// `E[X_i | tau > a]`.
pub fn cvar_cs(m: &CsphModel, margin: Margin, a: f64) -> Result<f64> {
    let t = tail_moments(m, a, false)?;
    let mass = check_mass(t.mass, a)?;
    Ok(match margin {
        Margin::First => t.x1,
        Margin::Second => t.x2,
    } / mass)
}

/// `E[X1 X2 | tau > a]`.
pub fn mtce_cs(m: &CsphModel, a: f64) -> Result<f64> {
    let t = tail_moments(m, a, true)?;
    Ok(t.x1x2 / check_mass(t.mass, a)?)
}

/// `Cov(X1, X2 | tau > a)`.
pub fn mtcov_cs(m: &CsphModel, a: f64) -> Result<f64> {
    let t = tail_moments(m, a, true)?;
    let mass = check_mass(t.mass, a)?;
    Ok(t.x1x2 / mass - (t.x1 / mass) * (t.x2 / mass))
}

/// Tail index of the matrix-Pareto law obtained by exponentiating margin
/// `i`: minus the spectral abscissa of its generator.
pub fn regular_variation_index(m: &CsphModel, margin: Margin) -> Result<f64> {
    Ok(-matrix::spectral_abscissa(&m.marginal_generator(margin))?)
}

/// `points` equally spaced thresholds over `[0, shock quantile 0.99]`.
pub fn default_threshold_grid(m: &CsphModel, points: usize) -> Result<Vec<f64>> {
    let top = shock_quantile(m, 0.99)?;
    Ok(match points {
        0 => vec![],
        1 => vec![0.0],
        n => (0..n).map(|i| top * i as f64 / (n - 1) as f64).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelPair {
    pub level: f64,
    pub x1: f64,
    pub x2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPair {
    pub a: f64,
    pub x1: f64,
    pub x2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErmPoint {
    pub vartheta: f64,
    pub a: f64,
    pub x1: f64,
    pub x2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdValue {
    pub a: f64,
    pub value: f64,
}

/// Grids a [`RiskReport`] is evaluated on.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RiskGrid {
    pub levels: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub varthetas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub mean1: f64,
    pub mean2: f64,
    pub var1: f64,
    pub var2: f64,
    pub pearson: f64,
    pub var_at_risk: Vec<LevelPair>,
    pub cvar_cs: Vec<ThresholdPair>,
    pub erm: Vec<ErmPoint>,
    pub mtce_cs: Vec<ThresholdValue>,
    pub mtcov_cs: Vec<ThresholdValue>,
    pub tail_index: [f64; 2],
}

/// Attaches the measure name to an error from a curve evaluation.
fn named(what: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Domain(s) => Error::Domain(format!("{what}: {s}")),
        Error::Numeric(s) => Error::Numeric(format!("{what}: {s}")),
        other => other,
    }
}

impl RiskReport {
    pub fn compute(m: &CsphModel, grid: &RiskGrid) -> Result<Self> {
        let s = moment_set(m).map_err(named("moments"))?;
        let pearson = pearson(m).map_err(named("pearson"))?;
        let mut levels = grid.levels.clone();
        levels.sort_by(f64::total_cmp);
        let var_at_risk = levels
            .par_iter()
            .map(|&level| {
                Ok(LevelPair {
                    level,
                    x1: value_at_risk(m, Margin::First, level)?,
                    x2: value_at_risk(m, Margin::Second, level)?,
                })
            })
            .collect::<Result<_>>()
            .map_err(named("value-at-risk"))?;
        let cvar_cs = grid
            .thresholds
            .par_iter()
            .map(|&a| {
                Ok(ThresholdPair {
                    a,
                    x1: cvar_cs(m, Margin::First, a)?,
                    x2: cvar_cs(m, Margin::Second, a)?,
                })
            })
            .collect::<Result<_>>()
            .map_err(named("CV@R"))?;
        let pairs: Vec<(f64, f64)> = grid
            .varthetas
            .iter()
            .flat_map(|&v| grid.thresholds.iter().map(move |&a| (v, a)))
            .collect();
        let erm = pairs
            .par_iter()
            .map(|&(vartheta, a)| {
                Ok(ErmPoint {
                    vartheta,
                    a,
                    x1: entropic_risk(m, Margin::First, vartheta, a)?,
                    x2: entropic_risk(m, Margin::Second, vartheta, a)?,
                })
            })
            .collect::<Result<_>>()
            .map_err(named("entropic risk"))?;
        let curve = |f: fn(&CsphModel, f64) -> Result<f64>, what: &'static str| {
            grid.thresholds
                .par_iter()
                .map(|&a| Ok(ThresholdValue { a, value: f(m, a)? }))
                .collect::<Result<Vec<_>>>()
                .map_err(named(what))
        };
        Ok(RiskReport {
            mean1: s.e_x1,
            mean2: s.e_x2,
            var1: s.var1(),
            var2: s.var2(),
            pearson,
            var_at_risk,
            cvar_cs,
            erm,
            mtce_cs: curve(mtce_cs, "MTCE")?,
            mtcov_cs: curve(mtcov_cs, "MTCov")?,
            tail_index: [
                regular_variation_index(m, Margin::First)?,
                regular_variation_index(m, Margin::Second)?,
            ],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn unit() -> CsphModel {
        fixtures::scalar(1.0, 1.0, 1.0, 1.0, 1.0)
    }

    #[test]
    fn scalar_moments() {
        let s = moment_set(&unit()).unwrap();
        assert!((s.e_x1 - 2.0).abs() < 1e-12);
        assert!((s.var2() - 2.0).abs() < 1e-12);
        assert!((s.e_x1x2 - 5.0).abs() < 1e-12);
        assert!((pearson(&unit()).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn scalar_conditional_measures() {
        let m = unit();
        for a in [0.0, 0.5, 3.0] {
            assert!((cvar_cs(&m, Margin::First, a).unwrap() - (a + 2.0)).abs() < 1e-10);
            // Given tau > a: tau = a + Exp(1), so Cov = Var(tau) = 1.
            assert!((mtcov_cs(&m, a).unwrap() - 1.0).abs() < 1e-10);
        }
        assert!((mtce_cs(&m, 0.0).unwrap() - 5.0).abs() < 1e-12);
        assert!((entropic_risk(&m, Margin::First, 1.0, 0.0).unwrap() - 0.25f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropic_risk_matches_mgf_identity() {
        let m = fixtures::example_one();
        for v in [0.1, 0.5, 2.0] {
            let direct = m.joint_mgf(-v, 0.0).unwrap().ln() / v;
            assert!((entropic_risk(&m, Margin::First, v, 0.0).unwrap() - direct).abs() < 1e-12);
        }
        assert!(entropic_risk(&m, Margin::First, 0.0, 0.0).is_err());
        assert!(entropic_risk(&m, Margin::First, 1.0, -1.0).is_err());
    }

    #[test]
    fn quantile_contract() {
        let m = fixtures::example_one();
        let mut last = 0.0;
        for level in [0.5, 0.9, 0.95, 0.975, 0.99] {
            let v = value_at_risk(&m, Margin::Second, level).unwrap();
            let c = m.marginal_cdf(Margin::Second, v).unwrap();
            assert!(c >= level && c <= level + 1e-8, "{level}: {c}");
            assert!(v >= last);
            last = v;
        }
        assert!(value_at_risk(&m, Margin::First, 1.0).is_err());
        assert!(value_at_risk(&m, Margin::First, 0.0).is_err());
    }

    #[test]
    fn exponential_quantile() {
        let m = unit();
        // tau ~ Exp(1): quantile −ln(1 − p).
        let q = shock_quantile(&m, 0.9).unwrap();
        assert!((q - 10f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn tail_underflow_is_reported() {
        let m = fixtures::scalar(50.0, 1.0, 1.0, 1.0, 1.0);
        assert!(matches!(cvar_cs(&m, Margin::First, 100.0), Err(Error::Domain(_))));
    }

    #[test]
    fn single_phase_tail_index() {
        let m = fixtures::scalar(3.0, 0.7, 1.4, 1.0, 2.0);
        assert!((regular_variation_index(&m, Margin::First).unwrap() - 0.7).abs() < 1e-12);
        // T/a2 = −1.5 dominates Q2 = −1.4 here: the slower one wins.
        assert!((regular_variation_index(&m, Margin::Second).unwrap() - 1.4).abs() < 1e-12);
    }

    #[test]
    fn report_on_empty_grids() {
        let r = RiskReport::compute(&unit(), &RiskGrid::default()).unwrap();
        assert!(r.cvar_cs.is_empty() && r.erm.is_empty() && r.var_at_risk.is_empty());
        assert!((r.pearson - 0.5).abs() < 1e-12);
        let g = default_threshold_grid(&unit(), 50).unwrap();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.0);
        assert!((g[49] - 100f64.ln()).abs() < 1e-7);
    }
}
