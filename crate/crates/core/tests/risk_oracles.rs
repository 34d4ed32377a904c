mod common;

use common::construction;
use csph::matrix::{Matrix, Vector};
use csph::risk::{self, RiskGrid, RiskReport};
use csph::{fixtures, CsphModel, Margin};
use csph_oracles::{expm_series, integrate_to_infinity, power_iteration};

/// `[[T/a_i, U/a_i], [0, Q_i]]` built by hand.
fn marginal_generator(m: &CsphModel, margin: Margin) -> Matrix {
    let (p0, p1) = (m.pre_states(), m.post_states());
    let a = m.scale(margin);
    let mut g = Matrix::zeros(p0 + p1, p0 + p1);
    g.view_mut((0, 0), (p0, p0)).copy_from(&(m.t() / a));
    g.view_mut((0, p0), (p0, p1)).copy_from(&(m.u() / a));
    g.view_mut((p0, p0), (p1, p1)).copy_from(m.q(margin));
    g
}

fn marginal_cdf_oracle(m: &CsphModel, margin: Margin, x: f64) -> f64 {
    let g = marginal_generator(m, margin);
    let mut start = Vector::zeros(g.nrows());
    start.rows_mut(0, m.pre_states()).copy_from(m.alpha());
    1.0 - (expm_series(&(g * x)).tr_mul(&start)).sum()
}

#[test]
fn value_at_risk_inverts_the_marginal_cdf() {
    let m = fixtures::example_one();
    for margin in Margin::BOTH {
        for level in [0.5, 0.95, 0.975, 0.99, 0.999] {
            let v = risk::value_at_risk(&m, margin, level).unwrap();
            let f = marginal_cdf_oracle(&m, margin, v);
            assert!((f - level).abs() < 1e-9, "{margin:?} {level}: F({v}) = {f}");
        }
    }
}

#[test]
fn shock_conditional_measures_match_quadrature() {
    let m = fixtures::example_one();
    let c = construction(&m);
    let resid_mean = |i: usize| -> Vec<f64> {
        (0..2)
            .map(|k| integrate_to_infinity(|y| y * c.residual_pdf(i, y)[k], 0.0, 1e-15, 1e-12))
            .collect()
    };
    let (r1, r2) = (resid_mean(0), resid_mean(1));
    for a in [0.0, 1.5, 4.5, 7.5] {
        let mass = integrate_to_infinity(|t| c.shock_defective(t).sum(), a, 1e-15, 1e-12);
        // E[X1 1{tau>a}] = ∫ Σ_k g_k(t) (a1 t + E[Y1 | k]) dt, and so on.
        let e = |f: &dyn Fn(f64, usize) -> f64| {
            integrate_to_infinity(|t| { let g = c.shock_defective(t); (0..2).map(|k| g[k] * f(t, k)).sum() }, a, 1e-15, 1e-12)
        };
        let x1 = e(&|t, k| 2.0 * t + r1[k]) / mass;
        let x2 = e(&|t, k| t + r2[k]) / mass;
        let x1x2 = e(&|t, k| (2.0 * t + r1[k]) * (t + r2[k])) / mass;
        let close = |got: f64, want: f64, what: &str| assert!((got - want).abs() < 1e-8 * want.abs(), "a={a} {what}: {got} vs {want}");
        close(risk::cvar_cs(&m, Margin::First, a).unwrap(), x1, "CV@R X1");
        close(risk::cvar_cs(&m, Margin::Second, a).unwrap(), x2, "CV@R X2");
        close(risk::mtce_cs(&m, a).unwrap(), x1x2, "MTCE");
        close(risk::mtcov_cs(&m, a).unwrap(), x1x2 - x1 * x2, "MTCov");
    }
}

#[test]
fn entropic_risk_matches_quadrature() {
    let m = fixtures::example_one();
    let c = construction(&m);
    let v = 0.5;
    let tilted = |i: usize| -> Vec<f64> {
        (0..2)
            .map(|k| integrate_to_infinity(|y| (-v * y).exp() * c.residual_pdf(i, y)[k], 0.0, 1e-15, 1e-12))
            .collect()
    };
    let (r1, r2) = (tilted(0), tilted(1));
    for a in [0.0, 1.5, 3.0, 4.5, 6.0, 7.5] {
        let mass = integrate_to_infinity(|t| c.shock_defective(t).sum(), a, 1e-15, 1e-12);
        let e = |scale: f64, r: &[f64]| {
            integrate_to_infinity(
                |t| { let g = c.shock_defective(t); (0..2).map(|k| g[k] * (-v * scale * t).exp() * r[k]).sum() },
                a,
                1e-15,
                1e-12,
            )
        };
        let want1 = (e(2.0, &r1) / mass).ln() / v;
        let want2 = (e(1.0, &r2) / mass).ln() / v;
        let got1 = risk::entropic_risk(&m, Margin::First, v, a).unwrap();
        let got2 = risk::entropic_risk(&m, Margin::Second, v, a).unwrap();
        assert!((got1 - want1).abs() < 1e-8, "a={a}: {got1} vs {want1}");
        assert!((got2 - want2).abs() < 1e-8, "a={a}: {got2} vs {want2}");
    }
}

#[test]
fn entropic_risk_direction_on_example_one() {
    // With the e^{-ϑX} convention, larger losses make the measure more
    // negative, so it falls as the threshold rises. In ϑ it rises from
    // -E[X] towards zero.
    let m = fixtures::example_one();
    let grid = [0.0, 1.5, 3.0, 4.5, 6.0, 7.5];
    for margin in Margin::BOTH {
        let e: Vec<f64> = grid.iter().map(|&a| risk::entropic_risk(&m, margin, 0.5, a).unwrap()).collect();
        for w in e.windows(2) {
            assert!(w[1] < w[0], "{margin:?}: {e:?}");
        }
        let lo = risk::entropic_risk(&m, margin, 0.25, 0.0).unwrap();
        let hi = risk::entropic_risk(&m, margin, 1.0, 0.0).unwrap();
        assert!(hi > lo);
    }
}

#[test]
fn conditional_tail_expectation_rises_with_the_threshold() {
    let m = fixtures::example_one();
    let grid: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
    for margin in Margin::BOTH {
        let c: Vec<f64> = grid.iter().map(|&a| risk::cvar_cs(&m, margin, a).unwrap()).collect();
        assert!((c[0] - m.marginal_mean(margin).unwrap()).abs() < 1e-9 * c[0]);
        for w in c.windows(2) {
            assert!(w[1] >= w[0], "{margin:?}: {c:?}");
        }
    }
}

#[test]
fn tail_index_is_the_perron_root() {
    for m in [fixtures::example_one(), fixtures::scalar(0.7, 2.0, 0.4, 1.5, 3.0)] {
        for margin in Margin::BOTH {
            let g = marginal_generator(&m, margin);
            let shift = g.diagonal().iter().fold(0.0f64, |s, d| s.max(-d));
            let b = &g + Matrix::identity(g.nrows(), g.nrows()) * shift;
            let want = shift - power_iteration(&b, 200_000);
            let got = risk::regular_variation_index(&m, margin).unwrap();
            assert!((got - want).abs() < 1e-8, "{margin:?}: {got} vs {want}");
        }
    }
}

#[test]
fn report_agrees_with_the_individual_measures() {
    let m = fixtures::example_one();
    let grid = RiskGrid {
        levels: vec![0.99, 0.95],
        thresholds: vec![0.0, 3.0],
        varthetas: vec![0.5, 1.0],
    };
    let r = RiskReport::compute(&m, &grid).unwrap();
    assert_eq!(r.var_at_risk.len(), 2);
    assert_eq!(r.var_at_risk[0].level, 0.95);
    assert_eq!(r.erm.len(), 4);
    assert_eq!(r.cvar_cs[1].x1, risk::cvar_cs(&m, Margin::First, 3.0).unwrap());
    assert_eq!(r.tail_index[0], risk::regular_variation_index(&m, Margin::First).unwrap());
    let empty = RiskReport::compute(&m, &RiskGrid::default()).unwrap();
    assert!(empty.cvar_cs.is_empty() && empty.erm.is_empty() && empty.var_at_risk.is_empty());
    assert_eq!(empty.mean1, r.mean1);
}
