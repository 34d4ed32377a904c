use csph::inference::{log_likelihood, log_likelihood_detail, ReducedModel};
use csph::simulation::sample_dataset;
use csph::fixtures;
use csph_oracles::mean_se;

/// Example 1 at its own parameters on the seed-7, 2000-sample dataset,
/// computed once and frozen.
const FROZEN: f64 = -12062.330491265337;

#[test]
fn frozen_value_on_the_reference_dataset() {
    let m = fixtures::example_one();
    let data = sample_dataset(&m, 2000, 7).unwrap();
    let ll = log_likelihood(&ReducedModel::from_csph(&m).unwrap(), &data).unwrap();
    assert!((ll - FROZEN).abs() < 1e-9 * FROZEN.abs(), "{ll}");
}

#[test]
fn frozen_value_is_typical_for_the_sample_size() {
    // n E[log f] and its spread, from an independent large sample.
    let m = fixtures::example_one();
    let big = sample_dataset(&m, 20_000, 8).unwrap();
    let logs: Vec<f64> = big.points().iter().map(|p| m.joint_pdf(p[0], p[1]).unwrap().ln()).collect();
    let (mean, se) = mean_se(&logs);
    let sd = se * (logs.len() as f64).sqrt();
    let n: f64 = 2000.0;
    let spread = 4.0 * sd * n.sqrt() + 4.0 * se * n;
    assert!((FROZEN - n * mean).abs() < spread, "{FROZEN} vs {} ± {spread}", n * mean);
}

#[test]
fn thread_count_does_not_change_the_value() {
    let m = fixtures::example_one();
    let data = sample_dataset(&m, 500, 12).unwrap();
    let r = ReducedModel::from_csph(&m).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| log_likelihood_detail(&r, &data).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a.floored, 0);
}
