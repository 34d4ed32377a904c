use csph::simulation::{sample_records, SampleRecord};
use csph::{fixtures, risk, Margin};
use csph_oracles::{ks_p_value, ks_statistic, mean_se, pearson};

const N: usize = 200_000;

fn draws() -> Vec<SampleRecord> {
    sample_records(&fixtures::example_one(), N, 20_240_601).unwrap()
}

fn col(rs: &[SampleRecord], f: impl Fn(&SampleRecord) -> f64) -> Vec<f64> {
    rs.iter().map(f).collect()
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

#[test]
fn sample_moments_match_exact_moments() {
    let m = fixtures::example_one();
    let s = risk::moment_set(&m).unwrap();
    let rs = draws();
    let (x1, x2, tau) = (col(&rs, |r| r.x1), col(&rs, |r| r.x2), col(&rs, |r| r.tau12));
    let within = |name: &str, (est, se): (f64, f64), exact: f64| {
        assert!((est - exact).abs() <= 3.0 * se, "{name}: {est} ± {se} vs {exact}");
    };
    within("E[X1]", mean_se(&x1), s.e_x1);
    within("E[X2]", mean_se(&x2), s.e_x2);
    within("E[tau]", mean_se(&tau), s.e_tau);
    within("E[X1 X2]", mean_se(&col(&rs, |r| r.x1 * r.x2)), s.e_x1x2);
    within("Var(X1)", batched(&x1, &x1, variance), s.var1());
    within("Var(X2)", batched(&x2, &x2, variance), s.var2());
    within("rho", batched(&x1, &x2, pearson), risk::pearson(&m).unwrap());
}

#[test]
fn marginals_pass_kolmogorov_smirnov() {
    let m = fixtures::example_one();
    let rs = draws();
    for (margin, xs) in [(Margin::First, col(&rs, |r| r.x1)), (Margin::Second, col(&rs, |r| r.x2))] {
        let d = ks_statistic(&xs, |x| m.marginal_cdf(margin, x).unwrap());
        let p = ks_p_value(d, xs.len());
        assert!(p > 1e-3, "{margin:?}: D = {d}, p = {p}");
    }
    let tau = col(&rs, |r| r.tau12);
    let d = ks_statistic(&tau, |t| 1.0 - m.shock_survival(t).unwrap());
    assert!(ks_p_value(d, N) > 1e-3);
}

#[test]
fn entry_state_frequencies() {
    let m = fixtures::example_one();
    let p = m.entry_probabilities().unwrap();
    let rs = draws();
    for k in 0..2 {
        let (f, se) = mean_se(&col(&rs, |r| (r.k == k) as u8 as f64));
        assert!((f - p[k]).abs() <= 3.0 * se, "P(K={k}): {f} vs {}", p[k]);
    }
}

#[test]
fn empirical_joint_cdf_on_a_grid() {
    let m = fixtures::example_one();
    let rs = draws();
    for z1 in [5.0, 12.0, 25.0] {
        for z2 in [4.0, 8.0, 16.0] {
            let hits = col(&rs, |r| (r.x1 <= z1 && r.x2 <= z2) as u8 as f64);
            let (f, se) = mean_se(&hits);
            let exact = m.joint_cdf(z1, z2).unwrap();
            assert!((f - exact).abs() <= 3.0 * se.max(1e-4), "({z1},{z2}): {f} vs {exact}");
        }
    }
}

#[test]
fn records_assemble_the_construction() {
    let rs = sample_records(&fixtures::example_one(), 1000, 5).unwrap();
    for r in &rs {
        assert!(r.tau12 > 0.0 && r.resid1 > 0.0 && r.resid2 > 0.0 && r.k < 2);
        assert!((r.x1 - (2.0 * r.tau12 + r.resid1)).abs() <= 1e-12 * r.x1);
        assert!((r.x2 - (r.tau12 + r.resid2)).abs() <= 1e-12 * r.x2);
    }
}

#[test]
fn deterministic_per_seed_and_thread_count() {
    let m = fixtures::example_one();
    let a = sample_records(&m, 5000, 77).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| sample_records(&m, 5000, 77).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, sample_records(&m, 5000, 78).unwrap());
    // A prefix of a longer run is the shorter run.
    assert_eq!(&sample_records(&m, 6000, 77).unwrap()[..5000], &a[..]);
}
