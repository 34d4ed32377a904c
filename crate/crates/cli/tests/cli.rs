use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use csph::risk::RiskReport;
use csph::ModelFile;
use serde_json::Value;
use tempfile::TempDir;

fn example() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models/example1.json")
}

fn csph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csph")).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn simulate_is_reproducible() {
    let m = example();
    let m = m.to_str().unwrap();
    let a = ok(&csph(&["simulate", "--model", m, "-n", "200", "--seed", "5"]));
    let b = ok(&csph(&["--threads", "1", "simulate", "--model", m, "-n", "200", "--seed", "5"]));
    assert_eq!(a, b);
    assert_eq!(a.lines().next(), Some("x1,x2"));
    assert_eq!(rows(&a).len(), 200);
    let c = ok(&csph(&["simulate", "--model", m, "-n", "200", "--seed", "6"]));
    assert_ne!(a, c);
}

#[test]
fn simulate_latent_columns_are_consistent() {
    let m = example();
    let text = ok(&csph(&["simulate", "--model", m.to_str().unwrap(), "-n", "50", "--latent"]));
    assert_eq!(text.lines().next(), Some("x1,x2,tau12,k,resid1,resid2"));
    for r in rows(&text) {
        assert!(r[3] == 0.0 || r[3] == 1.0);
        assert!((r[0] - (2.0 * r[2] + r[4])).abs() <= 1e-12 * r[0]);
        assert!((r[1] - (r[2] + r[5])).abs() <= 1e-12 * r[1]);
    }
}

#[test]
fn zero_sample_size_is_an_input_error() {
    let out = csph(&["simulate", "--model", example().to_str().unwrap(), "-n", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_model_lists_violations() {
    let dir = TempDir::new().unwrap();
    let mut file: ModelFile = serde_json::from_str(&fs::read_to_string(example()).unwrap()).unwrap();
    file.alpha = vec![0.5, 0.0, 0.0];
    file.q1[0][1] = -1.0;
    let path = dir.path().join("bad.json");
    fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
    let out = csph(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("2 violation"), "{err}");

    let out = csph(&["validate", example().to_str().unwrap()]);
    assert!(ok(&out).contains("valid"));

    let out = csph(&["risk", "--model", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_csv_reports_the_line() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("pts.csv");
    fs::write(&path, "z1,z2\n1,2\n3,abc\n").unwrap();
    let out = csph(&["eval", "--model", example().to_str().unwrap(), "--points", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn eval_handles_the_boundary() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("pts.csv");
    fs::write(&path, "0,0\n-1,3\n5,4\n").unwrap();
    let text = ok(&csph(&["eval", "--model", example().to_str().unwrap(), "--points", path.to_str().unwrap()]));
    // Header-less input keeps its first row.
    let r = rows(&text);
    assert_eq!(r.len(), 3, "{text}");
    assert_eq!((r[0][2], r[0][3]), (0.0, 0.0));
    assert_eq!((r[1][2], r[1][3]), (0.0, 0.0));
    let m = csph::fixtures::example_one();
    assert_eq!(r[2][2], m.joint_pdf(5.0, 4.0).unwrap());
    assert_eq!(r[2][3], m.joint_cdf(5.0, 4.0).unwrap());
}

#[test]
fn risk_report_matches_the_library() {
    let dir = TempDir::new().unwrap();
    let curves = dir.path().join("curves");
    let text = ok(&csph(&[
        "risk",
        "--model",
        example().to_str().unwrap(),
        "--a-grid",
        "0:6:4",
        "--vartheta",
        "0.5,1",
        "--curves",
        curves.to_str().unwrap(),
    ]));
    let report: RiskReport = serde_json::from_str(&text).unwrap();
    let want = [(28.89, 19.14), (33.94, 22.31)];
    for (got, (x1, x2)) in report.var_at_risk.iter().zip(want) {
        assert!((got.x1 - x1).abs() <= 0.01 && (got.x2 - x2).abs() <= 0.01, "{got:?}");
    }
    assert_eq!(report.cvar_cs.len(), 4);
    assert_eq!(report.erm.len(), 8);
    let curve = fs::read_to_string(curves.join("erm_x1_vartheta_1.csv")).unwrap();
    assert_eq!(rows(&curve).len(), 4);
    assert_eq!(rows(&fs::read_to_string(curves.join("mtcov_cs.csv")).unwrap())[0][0], 0.0);
}

#[test]
fn risk_with_empty_grid() {
    let dir = TempDir::new().unwrap();
    let curves = dir.path().join("curves");
    let text = ok(&csph(&[
        "risk",
        "--model",
        example().to_str().unwrap(),
        "--a-grid",
        "",
        "--curves",
        curves.to_str().unwrap(),
    ]));
    let report: RiskReport = serde_json::from_str(&text).unwrap();
    assert!(report.cvar_cs.is_empty() && report.erm.is_empty());
    assert_eq!(report.var_at_risk.len(), 3);
    assert!(!curves.exists());
    let out = csph(&["risk", "--model", example().to_str().unwrap(), "--levels", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dependence_curve() {
    let m = example();
    let text = ok(&csph(&["dependence", "--model", m.to_str().unwrap(), "--t-points", "12"]));
    let r = rows(&text);
    assert_eq!(r.len(), 12);
    for row in &r {
        assert!((row[2] - r[0][2]).abs() <= 1e-10);
        assert!((-1.0..=1.0).contains(&row[7]) && (-1.0..=1.0).contains(&row[8]));
    }
    let one = rows(&ok(&csph(&["dependence", "--model", m.to_str().unwrap(), "--t-grid", "2.5"])));
    assert_eq!(one.len(), 1);
    assert_eq!(one[0][0], 2.5);
}

#[test]
fn simulate_fit_risk_pipeline() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data.csv");
    let report = dir.path().join("fit.json");
    let model = dir.path().join("model.json");
    let m = example();
    ok(&csph(&["simulate", "--model", m.to_str().unwrap(), "-n", "300", "--seed", "3", "-o", data.to_str().unwrap()]));
    ok(&csph(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--starts",
        "1",
        "--max-iter",
        "25",
        "-o",
        report.to_str().unwrap(),
        "--model-out",
        model.to_str().unwrap(),
    ]));
    let fit: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(fit["observations"], 300);
    assert_eq!(fit["transform"]["kind"], "none");
    assert!(fit["loglik"].as_f64().unwrap().is_finite());
    assert!(fit["tail_index"]["x1"].as_f64().unwrap() > 0.0);
    let trace = fit["trace"].as_array().unwrap();
    for w in trace.windows(2) {
        assert!(w[1]["loglik"].as_f64().unwrap() >= w[0]["loglik"].as_f64().unwrap() - 1e-9);
    }
    let saved: ModelFile = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert!(saved.beta.is_some());
    assert_eq!(serde_json::to_value(&saved).unwrap(), fit["model"]);
    ok(&csph(&["validate", model.to_str().unwrap()]));
    let risk: RiskReport = serde_json::from_str(&ok(&csph(&["risk", "--model", model.to_str().unwrap(), "--a-points", "5"]))).unwrap();
    assert_eq!(risk.cvar_cs.len(), 5);
}

#[test]
fn tiny_dataset_warns() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("one.csv");
    fs::write(&data, "x1,x2\n3.0,2.0\n").unwrap();
    let out = csph(&["fit", "--data", data.to_str().unwrap(), "--starts", "1", "--max-iter", "5"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("degenerate"), "{err}");
    if out.status.success() {
        let fit: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!(!fit["warnings"].as_array().unwrap().is_empty());
    }
}

#[test]
fn log_transform_filters_the_domain() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("claims.csv");
    fs::write(&data, "x1,x2\n0.5,3\n2,2\n").unwrap();
    let out = csph(&["fit", "--data", data.to_str().unwrap(), "--log-transform", "--lower", "1"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let out = csph(&["fit", "--data", data.to_str().unwrap(), "--lower", "1"]);
    assert_eq!(out.status.code(), Some(2));
}
