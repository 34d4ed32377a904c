use csph::inference::{log_likelihood, AlphaMode, ModelStructure, ReducedModel, UnconstrainedParams};
use csph::matrix::{Matrix, Vector};
use csph::simulation::sample_dataset;
use csph::{fixtures, CsphModel};

fn general_model() -> CsphModel {
    // a2 != 1 so that the reduction has to rescale time.
    let e = fixtures::example_one();
    CsphModel::new(
        Vector::from_vec(vec![0.6, 0.3, 0.1]),
        e.t().clone(),
        e.u().clone(),
        e.q1().clone(),
        Matrix::from_row_slice(2, 2, &[-2.0, 1.0, 0.0, -0.25]),
        1.3,
        1.7,
    )
    .unwrap()
}

/// Σ log f over the data with the general model's own joint density.
fn direct(m: &CsphModel, data: &csph::BivariateDataset) -> f64 {
    data.points().iter().map(|p| m.joint_pdf(p[0], p[1]).unwrap().ln()).sum()
}

#[test]
fn reduced_and_expanded_likelihoods_agree() {
    for m in [fixtures::example_one(), general_model()] {
        let data = sample_dataset(&m, 400, 31).unwrap();
        let reduced = ReducedModel::from_csph(&m).unwrap();
        let via_reduced = log_likelihood(&reduced, &data).unwrap();
        let via_general = direct(&m, &data);
        let via_expanded = direct(&reduced.to_csph(), &data);
        assert!((via_reduced - via_general).abs() < 1e-10 * via_general.abs(), "{via_reduced} vs {via_general}");
        assert!((via_expanded - via_general).abs() < 1e-10 * via_general.abs());
    }
}

#[test]
fn parameter_round_trip_preserves_likelihood() {
    let m = general_model();
    let data = sample_dataset(&m, 300, 4).unwrap();
    let reduced = ReducedModel::from_csph(&m).unwrap();
    let s = ModelStructure::new(3, 2, AlphaMode::Estimated).unwrap();
    let p = UnconstrainedParams::from_model(s, &reduced).unwrap();
    let back = p.to_model().unwrap();
    let (a, b) = (log_likelihood(&reduced, &data).unwrap(), log_likelihood(&back, &data).unwrap());
    // The structural zero of Q2 comes back as a rate of 1e-14.
    assert!((a - b).abs() < 1e-9 * a.abs(), "{a} vs {b}");
}
