use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::lbfgs::{maximize, LbfgsOptions};
use super::{gradient, log_likelihood, AlphaMode, ModelStructure, ReducedModel, UnconstrainedParams};
use crate::data::BivariateDataset;
use crate::error::{Error, Result};
use crate::model::Margin;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    pub memory: usize,
    pub grad_tol: f64,
    pub rel_tol: f64,
    pub n_starts: usize,
    pub seed: u64,
    /// Worker threads for likelihood evaluation; `None` uses the global pool.
    /// Results do not depend on this.
    pub threads: Option<usize>,
    /// Standard deviation of the random perturbation of each start.
    pub init_spread: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 2000,
            memory: 10,
            grad_tol: 1e-5,
            rel_tol: 1e-9,
            n_starts: 5,
            seed: 1,
            threads: None,
            init_spread: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartSummary {
    pub index: usize,
    pub loglik: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: ReducedModel,
    pub params: UnconstrainedParams,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub trace: Vec<(usize, f64)>,
    pub best_start: usize,
    pub starts: Vec<StartSummary>,
}

/// Centre of the random starts: every rate equal, scaled so that the mean
/// of the second margin matches the data, and `beta` set to the ratio of
/// the sample means.
fn start_centre(structure: ModelStructure, data: &BivariateDataset) -> Result<Vec<f64>> {
    let unit = UnconstrainedParams::zeros(structure).to_model()?.to_csph();
    let reference = unit.marginal_mean(Margin::Second)?;
    let (m1, m2) = (data.mean(0), data.mean(1));
    let shift = if m2 > 0.0 { (reference / m2).ln() } else { 0.0 };
    let log_beta = if m1 > 0.0 && m2 > 0.0 { (m1 / m2).ln() } else { 0.0 };
    let dim = UnconstrainedParams::dimension(&structure);
    let alpha = match structure.alpha_mode {
        AlphaMode::FixedFirst => 0,
        AlphaMode::Estimated => structure.p0 - 1,
    };
    let rates = dim - 1 - alpha;
    let mut v = vec![shift; rates];
    v.push(log_beta);
    v.extend(std::iter::repeat_n(0.0, alpha));
    Ok(v)
}

fn objective(structure: ModelStructure, data: &BivariateDataset) -> impl Fn(&[f64]) -> Option<(f64, Vec<f64>)> + '_ {
    move |x: &[f64]| {
        let p = UnconstrainedParams::new(structure, x.to_vec()).ok()?;
        let ll = log_likelihood(&p.to_model().ok()?, data).ok()?;
        let g = gradient(&p, data).ok()?;
        Some((ll, g))
    }
}

fn run(data: &BivariateDataset, structure: ModelStructure, init: Option<&UnconstrainedParams>, opts: &FitOptions) -> Result<FitResult> {
    if data.is_empty() {
        return Err(Error::Fit("dataset is empty".into()));
    }
    if opts.n_starts == 0 && init.is_none() {
        return Err(Error::Fit("at least one start is required".into()));
    }
    if let Some(p) = init {
        if p.structure() != &structure {
            return Err(Error::Dimension("initial parameters have a different structure".into()));
        }
    }
    let centre = start_centre(structure, data)?;
    let noise = Normal::new(0.0, opts.init_spread)
        .map_err(|e| Error::Domain(format!("invalid start spread: {e}")))?;
    let lbfgs = LbfgsOptions {
        max_iter: opts.max_iter,
        memory: opts.memory,
        grad_tol: opts.grad_tol,
        rel_tol: opts.rel_tol,
        ..Default::default()
    };
    let f = objective(structure, data);

    let n = opts.n_starts.max(1);
    let mut starts = Vec::with_capacity(n);
    let mut best: Option<(usize, super::lbfgs::LbfgsOutcome)> = None;
    for index in 0..n {
        let x0: Vec<f64> = match (index, init) {
            (0, Some(p)) => p.values().to_vec(),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(index as u64);
                centre.iter().map(|c| c + noise.sample(&mut rng)).collect()
            }
        };
        match maximize(&f, &x0, &lbfgs) {
            None => starts.push(StartSummary {
                index,
                loglik: None,
                iterations: 0,
                converged: false,
                message: "log-likelihood undefined at the starting point".into(),
            }),
            Some(out) => {
                starts.push(StartSummary {
                    index,
                    loglik: Some(out.value),
                    iterations: out.iterations,
                    converged: out.converged,
                    message: out.reason.into(),
                });
                if best.as_ref().is_none_or(|(_, b)| out.value > b.value) {
                    best = Some((index, out));
                }
            }
        }
    }
    let Some((best_start, out)) = best else {
        let detail: Vec<String> = starts.iter().map(|s| format!("start {}: {}", s.index, s.message)).collect();
        return Err(Error::Fit(format!("all starts failed ({})", detail.join("; "))));
    };
    let params = UnconstrainedParams::new(structure, out.x)?;
    Ok(FitResult {
        model: params.to_model()?,
        params,
        loglik: out.value,
        iterations: out.iterations,
        converged: out.converged,
        gradient_norm: out.gradient_norm,
        trace: out.trace,
        best_start,
        starts,
    })
}

/// Multi-start L-BFGS maximum likelihood. When `init` is given it replaces
/// the first random start.
pub fn fit(
    data: &BivariateDataset,
    structure: ModelStructure,
    init: Option<&UnconstrainedParams>,
    options: &FitOptions,
) -> Result<FitResult> {
    match options.threads {
        None => run(data, structure, init, options),
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Fit(format!("cannot build thread pool: {e}")))?
            .install(|| run(data, structure, init, options)),
    }
}
