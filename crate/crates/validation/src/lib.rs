//! The ten acceptance criteria, each a function that reports pass/fail with
//! the numbers behind the verdict. Runtime limits are checked by the runner.

use std::fmt::Write as _;
use std::fs;
use std::process::ExitCode;
use std::time::Duration;

use csph::dependence::{cond_mean, kendall_matrix};
use csph::inference::{self, log_likelihood, AlphaMode, FitOptions, ModelStructure, ReducedModel};
use csph::master::{master_moment, MasterQuery};
use csph::matrix::Vector;
use csph::model::csph_from_mph;
use csph::simulation::{sample_dataset, sample_records};
use csph::{fixtures, risk, CsphModel, Margin, MphModel};
use csph_oracles::construction::Construction;
use csph_oracles::{expm_series, ks_p_value, ks_statistic, mean_se, pearson};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    fn new() -> Self {
        Verdict { pass: true, detail: String::new() }
    }

    /// Records one check; the first few failures are spelled out.
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            if self.pass || self.detail.matches(';').count() < 4 {
                let _ = write!(self.detail, "{}; ", what());
            }
            self.pass = false;
        }
    }

    fn note(mut self, s: impl AsRef<str>) -> Self {
        self.detail.push_str(s.as_ref());
        self
    }
}

pub struct Criterion {
    pub number: usize,
    pub name: &'static str,
    pub limit: Option<Duration>,
    pub run: fn() -> Verdict,
}

pub const CRITERIA: [Criterion; 10] = [
    Criterion { number: 1, name: "Example 1 moments", limit: Some(Duration::from_secs(1)), run: moments },
    Criterion { number: 2, name: "V@R table", limit: Some(Duration::from_secs(5)), run: value_at_risk },
    Criterion { number: 3, name: "master formula vs quadrature", limit: Some(Duration::from_secs(120)), run: master_vs_quadrature },
    Criterion { number: 4, name: "joint density and cdf oracles", limit: Some(Duration::from_secs(30)), run: joint_law },
    Criterion { number: 5, name: "simulation consistency", limit: Some(Duration::from_secs(60)), run: simulation },
    Criterion { number: 6, name: "fit recovery", limit: Some(Duration::from_secs(600)), run: fit_recovery },
    Criterion { number: 7, name: "conditional-dependence structure", limit: None, run: dependence_structure },
    Criterion { number: 8, name: "denseness", limit: None, run: denseness },
    Criterion { number: 9, name: "scalar closed forms", limit: None, run: scalar_closed_forms },
    Criterion { number: 10, name: "log-transform fit pipeline", limit: None, run: claims_pipeline },
];

fn construction(m: &CsphModel) -> Construction {
    Construction::new(m.alpha().clone(), m.t().clone(), m.u().clone(), m.q1().clone(), m.q2().clone(), m.a1(), m.a2())
}

pub fn moments() -> Verdict {
    let m = fixtures::example_one();
    let mut v = Verdict::new();
    let s = match risk::moment_set(&m) {
        Ok(s) => s,
        Err(e) => return Verdict { pass: false, detail: e.to_string() },
    };
    let rho = risk::pearson(&m).unwrap_or(f64::NAN);
    let got = [s.e_x1, s.e_x2, s.var1(), s.var2(), s.e_tau, rho];
    let want = [12.87, 8.44, 69.51, 30.85, 4.44, 0.6291];
    let tol = [0.01, 0.01, 0.01, 0.01, 0.01, 0.0005];
    let names = ["E[X1]", "E[X2]", "Var(X1)", "Var(X2)", "E[tau]", "rho"];
    for i in 0..6 {
        v.check((got[i] - want[i]).abs() <= tol[i], || format!("{} = {:.5} vs {}", names[i], got[i], want[i]));
    }
    let summary = format!("E[X]=({:.4}, {:.4}) Var=({:.4}, {:.4}) E[tau]={:.4} rho={:.5}", got[0], got[1], got[2], got[3], got[4], got[5]);
    v.note(summary)
}

pub fn value_at_risk() -> Verdict {
    let m = fixtures::example_one();
    let mut v = Verdict::new();
    let want = [(0.95, 28.89, 19.14), (0.975, 33.94, 22.31), (0.99, 40.64, 26.40)];
    let mut table = String::new();
    for (level, w1, w2) in want {
        let x1 = risk::value_at_risk(&m, Margin::First, level).unwrap_or(f64::NAN);
        let x2 = risk::value_at_risk(&m, Margin::Second, level).unwrap_or(f64::NAN);
        v.check((x1 - w1).abs() <= 0.01, || format!("X1 at {level}: {x1:.4} vs {w1}"));
        v.check((x2 - w2).abs() <= 0.01, || format!("X2 at {level}: {x2:.4} vs {w2}"));
        let _ = write!(table, "{level}: ({x1:.4}, {x2:.4}) ");
    }
    v.note(table.trim_end())
}

/// Example 1's mixed moment plus ten random queries with powers up to (2, 1, 1).
pub fn master_queries() -> Vec<MasterQuery> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut qs = vec![MasterQuery::moment([1, 1, 1])];
    for _ in 0..10 {
        let n = [rng.random_range(0..=2), rng.random_range(0..=1), rng.random_range(0..=1)];
        let theta = [rng.random_range(-0.1..0.5), rng.random_range(-0.1..0.5), rng.random_range(-0.1..0.5)];
        let y = [rng.random_range(0.0..3.0), rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)];
        qs.push(MasterQuery::new(n, theta, y));
    }
    qs
}

pub fn master_vs_quadrature() -> Verdict {
    let m = fixtures::example_one();
    let raw = construction(&m);
    let mut v = Verdict::new();
    let mut worst: f64 = 0.0;
    for q in master_queries() {
        let got = master_moment(&m, &q).unwrap_or(f64::NAN);
        let want = raw.master_by_quadrature(q.n, q.theta, q.y, 1e-9);
        let rel = (got - want).abs() / want.abs();
        worst = worst.max(rel);
        v.check(rel < 1e-5, || format!("{q:?}: {got} vs {want}"));
    }
    v.note(format!("11 queries, worst relative error {worst:.2e}"))
}

pub fn joint_law() -> Verdict {
    let m = fixtures::example_one();
    let raw = construction(&m);
    let mut v = Verdict::new();
    let (mut pdf_err, mut cdf_err): (f64, f64) = (0.0, 0.0);
    for z1 in [0.5, 4.0, 12.0, 30.0] {
        for z2 in [0.5, 3.0, 9.0, 20.0] {
            let (got, want) = (m.joint_pdf(z1, z2).unwrap_or(f64::NAN), raw.joint_pdf(z1, z2));
            pdf_err = pdf_err.max((got - want).abs());
            v.check((got - want).abs() <= 1e-8, || format!("pdf({z1},{z2}): {got} vs {want}"));
        }
    }
    for (z1, z2) in [(1.0, 1.0), (5.0, 12.0), (12.87, 8.44), (30.0, 4.0), (60.0, 45.0)] {
        let (got, want) = (m.joint_cdf(z1, z2).unwrap_or(f64::NAN), raw.joint_cdf(z1, z2));
        cdf_err = cdf_err.max((got - want).abs());
        v.check((got - want).abs() <= 1e-7, || format!("cdf({z1},{z2}): {got} vs {want}"));
    }
    v.note(format!("max |pdf error| {pdf_err:.1e} on 4x4 grid, max |cdf error| {cdf_err:.1e} at 5 points"))
}

/// Batch means of a statistic over 100 equal batches.
fn batched(xs: &[f64], ys: &[f64], stat: impl Fn(&[f64], &[f64]) -> f64) -> (f64, f64) {
    let b = xs.len() / 100;
    let per: Vec<f64> = (0..100).map(|i| stat(&xs[i * b..(i + 1) * b], &ys[i * b..(i + 1) * b])).collect();
    mean_se(&per)
}

fn variance(xs: &[f64], _: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn simulation() -> Verdict {
    let m = fixtures::example_one();
    let mut v = Verdict::new();
    let (s, rho) = match (risk::moment_set(&m), risk::pearson(&m)) {
        (Ok(s), Ok(r)) => (s, r),
        _ => return Verdict { pass: false, detail: "moments failed".into() },
    };
    let rs = match sample_records(&m, 1_000_000, 1_000_003) {
        Ok(r) => r,
        Err(e) => return Verdict { pass: false, detail: e.to_string() },
    };
    let x1: Vec<f64> = rs.iter().map(|r| r.x1).collect();
    let x2: Vec<f64> = rs.iter().map(|r| r.x2).collect();
    let tau: Vec<f64> = rs.iter().map(|r| r.tau12).collect();
    let checks = [
        ("E[X1]", mean_se(&x1), s.e_x1),
        ("E[X2]", mean_se(&x2), s.e_x2),
        ("Var(X1)", batched(&x1, &x1, variance), s.var1()),
        ("Var(X2)", batched(&x2, &x2, variance), s.var2()),
        ("E[tau]", mean_se(&tau), s.e_tau),
        ("rho", batched(&x1, &x2, pearson), rho),
    ];
    let mut zs = String::new();
    for (name, (est, se), exact) in checks {
        v.check((est - exact).abs() <= 3.0 * se, || format!("{name}: {est} ± {se} vs {exact}"));
        let _ = write!(zs, "{name} z={:+.2} ", (est - exact) / se);
    }
    let d = ks_statistic(&x1, |x| m.marginal_cdf(Margin::First, x).unwrap_or(f64::NAN));
    let p = ks_p_value(d, x1.len());
    v.check(p > 1e-3, || format!("KS X1: D = {d}, p = {p}"));
    v.note(format!("{zs}KS X1 p={p:.3}"))
}

pub fn fit_recovery() -> Verdict {
    let m = fixtures::example_one();
    let data = match sample_dataset(&m, 2000, 20_260_611) {
        Ok(d) => d,
        Err(e) => return Verdict { pass: false, detail: e.to_string() },
    };
    let truth = ReducedModel::from_csph(&m).and_then(|r| log_likelihood(&r, &data)).unwrap_or(f64::NAN);
    let structure = ModelStructure::new(3, 2, AlphaMode::FixedFirst).unwrap();
    let res = match inference::fit(&data, structure, None, &FitOptions::default()) {
        Ok(r) => r,
        Err(e) => return Verdict { pass: false, detail: e.to_string() },
    };
    let fitted = res.model.to_csph();
    let (e1, e2) = (fitted.marginal_mean(Margin::First).unwrap_or(f64::NAN), fitted.marginal_mean(Margin::Second).unwrap_or(f64::NAN));
    let rho = risk::pearson(&fitted).unwrap_or(f64::NAN);
    let (d1, d2, dr) = (data.mean(0), data.mean(1), data.pearson());
    let mut v = Verdict::new();
    v.check(res.loglik >= truth - 5.0, || format!("loglik {} < true {} - 5", res.loglik, truth));
    v.check((e1 - d1).abs() <= 0.1, || format!("E[X1] {e1} vs empirical {d1}"));
    v.check((e2 - d2).abs() <= 0.1, || format!("E[X2] {e2} vs empirical {d2}"));
    v.check((rho - dr).abs() <= 0.02, || format!("rho {rho} vs empirical {dr}"));
    v.note(format!(
        "loglik {:.2} vs true {:.2}; means ({e1:.3}, {e2:.3}) vs ({d1:.3}, {d2:.3}); rho {rho:.4} vs {dr:.4}",
        res.loglik, truth
    ))
}

pub fn dependence_structure() -> Verdict {
    let m = fixtures::example_one();
    let mut v = Verdict::new();
    let grid: Vec<f64> = (0..20).map(|i| i as f64 * 0.75).collect();
    let m2: Vec<f64> = grid.iter().map(|&t| cond_mean(&m, Margin::Second, t).unwrap_or(f64::NAN)).collect();
    let m1: Vec<f64> = grid.iter().map(|&t| cond_mean(&m, Margin::First, t).unwrap_or(f64::NAN)).collect();
    let dev = m2.iter().map(|x| (x - m2[0]).abs()).fold(0.0, f64::max);
    v.check(dev <= 1e-10, || format!("cond_mean margin 2 varies by {dev}"));
    v.check(m1.windows(2).all(|w| w[1] < w[0]), || format!("cond_mean margin 1 not decreasing: {m1:?}"));
    let mut worst: f64 = 0.0;
    for margin in Margin::BOTH {
        match kendall_matrix(&m, margin) {
            Ok(c) => (0..c.nrows()).for_each(|k| worst = worst.max((c[(k, k)] - 0.5).abs())),
            Err(e) => v.check(false, || e.to_string()),
        }
    }
    v.check(worst <= 1e-12, || format!("c_kk off 1/2 by {worst}"));
    v.note(format!("margin-2 spread {dev:.1e}, margin-1 from {:.4} to {:.4}, max |c_kk - 1/2| {worst:.1e}", m1[0], m1[19]))
}

/// `Σ_k pi_k (1 − e_k e^{S1 y1} 1)(1 − e_k e^{S2 y2} 1)` by series exponentials.
fn mph_cdf(mph: &MphModel, y1: f64, y2: f64) -> f64 {
    let ones = Vector::from_element(mph.pi().len(), 1.0);
    let s1 = expm_series(&(mph.s1() * y1)) * &ones;
    let s2 = expm_series(&(mph.s2() * y2)) * &ones;
    (0..ones.len()).map(|k| mph.pi()[k] * (1.0 - s1[k]) * (1.0 - s2[k])).sum()
}

pub fn denseness() -> Verdict {
    let mph = fixtures::mph_target();
    let grid = [0.5, 1.0, 2.0, 4.0, 8.0];
    let mut devs = vec![];
    for lambda in [1e1, 1e2, 1e3, 1e4] {
        let m = match csph_from_mph(&mph, lambda, 1.0, 1.0) {
            Ok(m) => m,
            Err(e) => return Verdict { pass: false, detail: e.to_string() },
        };
        let mut worst: f64 = 0.0;
        for &y1 in &grid {
            for &y2 in &grid {
                worst = worst.max((m.joint_cdf(y1, y2).unwrap_or(f64::NAN) - mph_cdf(&mph, y1, y2)).abs());
            }
        }
        devs.push(worst);
    }
    let mut v = Verdict::new();
    v.check(devs.windows(2).all(|w| w[1] < w[0]), || "deviation not decreasing".into());
    v.check(devs[3] <= 0.01, || format!("sup deviation {} at lambda 1e4", devs[3]));
    v.note(format!("sup deviations {:.2e} {:.2e} {:.2e} {:.2e}", devs[0], devs[1], devs[2], devs[3]))
}

pub fn scalar_closed_forms() -> Verdict {
    let m = fixtures::scalar(1.0, 1.0, 1.0, 1.0, 1.0);
    let mut v = Verdict::new();
    let rho = risk::pearson(&m).unwrap_or(f64::NAN);
    let cross = risk::moment_set(&m).map(|s| s.e_x1x2).unwrap_or(f64::NAN);
    let erm = risk::entropic_risk(&m, Margin::First, 1.0, 0.0).unwrap_or(f64::NAN);
    v.check((rho - 0.5).abs() <= 1e-8, || format!("rho {rho}"));
    v.check((cross - 5.0).abs() <= 1e-8, || format!("E[X1 X2] {cross}"));
    v.check((erm - 0.25f64.ln()).abs() <= 1e-8, || format!("ERM {erm}"));
    let mut worst: f64 = 0.0;
    for a in [0.0, 0.5, 1.0, 2.5, 5.0, 10.0] {
        let c = risk::cvar_cs(&m, Margin::First, a).unwrap_or(f64::NAN);
        worst = worst.max((c - (a + 2.0)).abs());
        v.check((c - (a + 2.0)).abs() <= 1e-8, || format!("CV@R at {a}: {c}"));
    }
    v.note(format!("rho {rho:.12}, E[X1X2] {cross:.12}, ERM {erm:.12}, max CV@R error {worst:.1e}"))
}

/// Heavy-tailed pairs: the exponential of a common-shock sum of exponentials.
pub fn synthetic_claims(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("x1,x2\n");
    for _ in 0..n {
        let e: [f64; 3] = std::array::from_fn(|_| Exp1.sample(&mut rng));
        let (l1, l2) = (0.5 + 0.8 * e[0] + e[1], 0.5 + 0.5 * e[0] + 0.7 * e[2]);
        let _ = writeln!(out, "{},{}", l1.exp(), l2.exp());
    }
    out
}

pub fn claims_pipeline() -> Verdict {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return Verdict { pass: false, detail: e.to_string() },
    };
    let (data, report) = (dir.path().join("claims.csv"), dir.path().join("fit.json"));
    if let Err(e) = fs::write(&data, synthetic_claims(400, 2718)) {
        return Verdict { pass: false, detail: e.to_string() };
    }
    let args = ["csph", "fit", "--data", data.to_str().unwrap(), "--log-transform", "--lower", "1", "--p0", "3", "--p1", "2", "-o", report.to_str().unwrap()];
    let code = csph_cli::run(args);
    let mut v = Verdict::new();
    v.check(code == ExitCode::SUCCESS, || format!("fit exited with {code:?}"));
    let json: serde_json::Value = match fs::read_to_string(&report).ok().and_then(|t| serde_json::from_str(&t).ok()) {
        Some(j) => j,
        None => return Verdict { pass: false, detail: "no readable fit report".into() },
    };
    let idx = [&json["tail_index"]["x1"], &json["tail_index"]["x2"]].map(|x| x.as_f64().unwrap_or(f64::NAN));
    v.check(idx.iter().all(|x| x.is_finite() && *x > 0.0), || format!("tail indices {idx:?}"));
    v.check(json["transform"]["kind"] == "log", || "transform not recorded".into());
    let kept = json["observations"].as_u64().unwrap_or(0);
    v.check(kept > 0 && kept < 400, || format!("{kept} of 400 rows kept by the domain filter"));
    v.note(format!("{kept} of 400 rows kept, loglik {:.2}, tail indices ({:.4}, {:.4})", json["loglik"].as_f64().unwrap_or(f64::NAN), idx[0], idx[1]))
}
