use super::{ReducedModel, UnconstrainedParams};
use crate::data::BivariateDataset;
use crate::error::{Error, Result};
use crate::model::DensityKernel;

/// Per-observation floor for `log f`, applied instead of `−∞` when the
/// density vanishes so that a line search can back off.
pub const LOG_DENSITY_FLOOR: f64 = -1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    /// Number of observations whose log density hit the floor.
    pub floored: usize,
}

/// Sum after sorting, with compensation. Sorting makes the result
/// independent of both the row order of the data and the thread count.
fn ordered_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in terms {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + comp
}

pub fn log_likelihood_detail(model: &ReducedModel, data: &BivariateDataset) -> Result<LogLikelihood> {
    let densities = DensityKernel::new(&model.to_csph()).pdf_batch(data.points())?;
    let terms: Vec<f64> = densities
        .into_iter()
        .map(|f| if f > 0.0 { f.ln() } else { f64::NEG_INFINITY })
        .collect();
    let floored = terms.iter().filter(|v| !(**v > LOG_DENSITY_FLOOR)).count();
    let value = ordered_sum(terms.into_iter().map(|v| v.max(LOG_DENSITY_FLOOR)).collect());
    Ok(LogLikelihood { value, floored })
}

/// `Σ log f(x1, x2)` over the dataset, with zero densities floored at
/// [`LOG_DENSITY_FLOOR`].
pub fn log_likelihood(model: &ReducedModel, data: &BivariateDataset) -> Result<f64> {
    Ok(log_likelihood_detail(model, data)?.value)
}

/// Central-difference gradient of the log-likelihood with respect to the
/// free parameters, step `1e-6 (1 + |theta_j|)`.
pub fn gradient(params: &UnconstrainedParams, data: &BivariateDataset) -> Result<Vec<f64>> {
    let theta = params.values();
    let probe = |j: usize, x: f64| -> Result<f64> {
        let mut v = theta.to_vec();
        v[j] = x;
        let p = UnconstrainedParams::new(*params.structure(), v)?;
        let ll = log_likelihood(&p.to_model()?, data)
            .map_err(|e| Error::Numeric(format!("log-likelihood failed at coordinate {j}: {e}")))?;
        if !ll.is_finite() {
            return Err(Error::Numeric(format!(
                "log-likelihood is not finite when probing coordinate {j}"
            )));
        }
        Ok(ll)
    };
    (0..theta.len())
        .map(|j| {
            let h = 1e-6 * (1.0 + theta[j].abs());
            let (up, down) = (theta[j] + h, theta[j] - h);
            Ok((probe(j, up)? - probe(j, down)?) / (up - down))
        })
        .collect()
}
