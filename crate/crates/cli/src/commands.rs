use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context};
use serde::Serialize;

use csph::inference::{self, AlphaMode, FitOptions, ModelStructure, ReducedModel, UnconstrainedParams};
use csph::risk::{self, RiskGrid, RiskReport};
use csph::{dependence, simulation, CsphModel, Margin, ModelFile};

use crate::io::{fmt17, load_model, open_output, parse_grid, read_dataset, read_model_file, read_pairs};
use crate::{DependenceArgs, EvalArgs, Failure, FitArgs, RiskArgs, SimulateArgs, ValidateArgs};

type Outcome = Result<(), Failure>;

fn input(e: anyhow::Error) -> Failure {
    Failure::Input(e)
}

pub fn simulate(a: SimulateArgs) -> Outcome {
    let m = load_model(&a.model).map_err(input)?;
    let records = simulation::sample_records(&m, a.n as usize, a.seed)?;
    let mut w = open_output(a.out.as_deref()).map_err(input)?;
    if a.latent {
        writeln!(w, "x1,x2,tau12,k,resid1,resid2")?;
    } else {
        writeln!(w, "x1,x2")?;
    }
    for r in &records {
        if a.latent {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt17(r.x1),
                fmt17(r.x2),
                fmt17(r.tau12),
                r.k,
                fmt17(r.resid1),
                fmt17(r.resid2)
            )?;
        } else {
            writeln!(w, "{},{}", fmt17(r.x1), fmt17(r.x2))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Transform {
    None,
    Log { lower: Option<f64> },
}

#[derive(Serialize)]
struct Summary {
    mean1: f64,
    mean2: f64,
    pearson: f64,
}

#[derive(Serialize)]
struct TailIndex {
    x1: f64,
    x2: f64,
}

#[derive(Serialize)]
struct StartReport {
    index: usize,
    loglik: Option<f64>,
    iterations: usize,
    converged: bool,
    message: String,
}

#[derive(Serialize)]
struct TracePoint {
    iteration: usize,
    loglik: f64,
}

#[derive(Serialize)]
struct FitReport {
    model: ModelFile,
    loglik: f64,
    iterations: usize,
    converged: bool,
    gradient_norm: f64,
    best_start: usize,
    starts: Vec<StartReport>,
    trace: Vec<TracePoint>,
    observations: usize,
    transform: Transform,
    empirical: Summary,
    fitted: Summary,
    tail_index: TailIndex,
    warnings: Vec<String>,
}

pub fn fit(a: FitArgs) -> Outcome {
    let raw = read_dataset(&a.data).map_err(input)?;
    let (data, transform) = if a.log_transform {
        let lower = a.lower.unwrap_or(f64::NEG_INFINITY);
        let d = raw
            .log_transformed(lower)
            .map_err(|e| anyhow!("{}: {e}", a.data.display()))?;
        (d, Transform::Log { lower: a.lower })
    } else {
        (raw, Transform::None)
    };
    if data.is_empty() {
        return Err(input(anyhow!("no observations left after the log transform and domain filter")));
    }
    let mode = if a.estimate_alpha {
        AlphaMode::Estimated
    } else {
        AlphaMode::FixedFirst
    };
    let structure = ModelStructure::new(a.p0, a.p1, mode)?;
    let init = match &a.init {
        None => None,
        Some(path) => {
            let m = load_model(path).map_err(input)?;
            let r = ReducedModel::from_csph(&m).map_err(|e| anyhow!("{}: {e}", path.display()))?;
            Some(UnconstrainedParams::from_model(structure, &r).map_err(|e| anyhow!("{}: {e}", path.display()))?)
        }
    };

    let mut warnings = Vec::new();
    let dim = UnconstrainedParams::dimension(&structure);
    if data.len() < 2 || data.len() < dim {
        warnings.push(format!(
            "only {} observations for {dim} free parameters: the fit is degenerate and the estimates are not meaningful",
            data.len()
        ));
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let options = FitOptions {
        max_iter: a.max_iter,
        n_starts: a.starts,
        seed: a.seed,
        ..Default::default()
    };
    let res = inference::fit(&data, structure, init.as_ref(), &options)?;
    if !res.converged {
        eprintln!("warning: best start stopped without meeting the convergence tolerances");
    }
    let m = res.model.to_csph();
    let moments = risk::moment_set(&m)?;
    let report = FitReport {
        model: ModelFile::from_reduced(&res.model),
        loglik: res.loglik,
        iterations: res.iterations,
        converged: res.converged,
        gradient_norm: res.gradient_norm,
        best_start: res.best_start,
        starts: res
            .starts
            .into_iter()
            .map(|s| StartReport {
                index: s.index,
                loglik: s.loglik,
                iterations: s.iterations,
                converged: s.converged,
                message: s.message,
            })
            .collect(),
        trace: res
            .trace
            .iter()
            .map(|&(iteration, loglik)| TracePoint { iteration, loglik })
            .collect(),
        observations: data.len(),
        transform,
        empirical: Summary {
            mean1: data.mean(0),
            mean2: data.mean(1),
            pearson: data.pearson(),
        },
        fitted: Summary {
            mean1: moments.e_x1,
            mean2: moments.e_x2,
            pearson: risk::pearson(&m)?,
        },
        tail_index: TailIndex {
            x1: risk::regular_variation_index(&m, Margin::First)?,
            x2: risk::regular_variation_index(&m, Margin::Second)?,
        },
        warnings,
    };
    if let Some(path) = &a.model_out {
        write_json(path, &report.model)?;
    }
    let mut w = open_output(a.out.as_deref()).map_err(input)?;
    serde_json::to_writer_pretty(&mut w, &report).context("cannot write fit report")?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).context("cannot serialise")?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn threshold_grid(m: &CsphModel, spec: Option<&str>, points: usize) -> Result<Vec<f64>, Failure> {
    match spec {
        Some(s) => parse_grid(s).map_err(input),
        None => Ok(risk::default_threshold_grid(m, points)?),
    }
}

fn write_curve(path: &Path, header: &str, rows: impl Iterator<Item = (f64, f64)>) -> Outcome {
    let mut w = open_output(Some(path)).map_err(input)?;
    writeln!(w, "{header}")?;
    for (x, y) in rows {
        writeln!(w, "{},{}", fmt17(x), fmt17(y))?;
    }
    w.flush()?;
    Ok(())
}

pub fn risk(a: RiskArgs) -> Outcome {
    let m = load_model(&a.model).map_err(input)?;
    let levels = parse_grid(&a.levels).map_err(input)?;
    if let Some(l) = levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(input(anyhow!("level {l} is outside (0, 1)")));
    }
    let varthetas = parse_grid(&a.vartheta).map_err(input)?;
    if let Some(v) = varthetas.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(input(anyhow!("vartheta {v} must be positive")));
    }
    let thresholds = threshold_grid(&m, a.a_grid.as_deref(), a.a_points)?;
    if let Some(t) = thresholds.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(input(anyhow!("threshold {t} must be finite and nonnegative")));
    }
    let grid = RiskGrid {
        levels,
        thresholds,
        varthetas,
    };
    let report = RiskReport::compute(&m, &grid)?;

    if let Some(dir) = &a.curves {
        if !report.cvar_cs.is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            write_curve(&dir.join("cvar_cs_x1.csv"), "a,cvar_cs_x1", report.cvar_cs.iter().map(|p| (p.a, p.x1)))?;
            write_curve(&dir.join("cvar_cs_x2.csv"), "a,cvar_cs_x2", report.cvar_cs.iter().map(|p| (p.a, p.x2)))?;
            write_curve(&dir.join("mtce_cs.csv"), "a,mtce_cs", report.mtce_cs.iter().map(|p| (p.a, p.value)))?;
            write_curve(&dir.join("mtcov_cs.csv"), "a,mtcov_cs", report.mtcov_cs.iter().map(|p| (p.a, p.value)))?;
            for &v in &grid.varthetas {
                let pts = || report.erm.iter().filter(move |p| p.vartheta == v);
                write_curve(&dir.join(format!("erm_x1_vartheta_{v}.csv")), "a,erm_x1", pts().map(|p| (p.a, p.x1)))?;
                write_curve(&dir.join(format!("erm_x2_vartheta_{v}.csv")), "a,erm_x2", pts().map(|p| (p.a, p.x2)))?;
            }
        }
    }
    let mut w = open_output(a.out.as_deref()).map_err(input)?;
    serde_json::to_writer_pretty(&mut w, &report).context("cannot write risk report")?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn dependence(a: DependenceArgs) -> Outcome {
    let m = load_model(&a.model).map_err(input)?;
    let grid = threshold_grid(&m, a.t_grid.as_deref(), a.t_points)?;
    if let Some(t) = grid.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(input(anyhow!("shock time {t} must be finite and nonnegative")));
    }
    let rows = dependence::dependence_curve(&m, &grid)?;
    let mut w = open_output(a.out.as_deref()).map_err(input)?;
    writeln!(w, "t,mean1,mean2,var1,var2,cross_moment,pearson,kendall,spearman")?;
    for r in rows {
        let cols = [r.t, r.mean1, r.mean2, r.var1, r.var2, r.cross_moment, r.pearson, r.kendall, r.spearman];
        writeln!(w, "{}", cols.map(fmt17).join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn eval(a: EvalArgs) -> Outcome {
    let m = load_model(&a.model).map_err(input)?;
    let points = read_pairs(&a.points).map_err(input)?;
    let mut w = open_output(a.out.as_deref()).map_err(input)?;
    writeln!(w, "z1,z2,pdf,cdf")?;
    for [z1, z2] in points {
        let pdf = m.joint_pdf(z1, z2)?;
        let cdf = m.joint_cdf(z1, z2)?;
        writeln!(w, "{}", [z1, z2, pdf, cdf].map(fmt17).join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn validate(a: ValidateArgs) -> Outcome {
    let file = read_model_file(&a.model).map_err(input)?;
    match file.to_model() {
        Ok(m) => {
            let form = if file.is_reduced() { "reduced (beta)" } else { "general (a1, a2)" };
            println!(
                "{}: valid, {form} form, {} pre-shock and {} post-shock states",
                a.model.display(),
                m.pre_states(),
                m.post_states()
            );
            Ok(())
        }
        Err(csph::Error::Invalid(violations)) => {
            eprintln!("{}: {} violation(s)", a.model.display(), violations.len());
            for v in &violations {
                eprintln!("  {v}");
            }
            Err(input(anyhow!("invalid model")))
        }
        Err(e) => Err(input(anyhow!("{}: {e}", a.model.display()))),
    }
}
