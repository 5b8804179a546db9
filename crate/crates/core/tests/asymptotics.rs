//! Rates at which the wealth asymptotes and the large risk aversion limit are
//! approached. Near zero wealth the relative gap in `c*/x` decays only like
//! `c^(-e2)` with `e2 = 1 + gamma (m2 - 1)`, which is a small power at the
//! baseline, so the limit is visible only many decades below `x_gloom`.

use peakvalley::dual::Prefactors;
use peakvalley::model::{Model, ModelParams};
use peakvalley::primal::PrimalSolution;

fn baseline() -> PrimalSolution {
    PrimalSolution::new(Model::new(ModelParams::BASELINE).unwrap())
}

#[test]
fn low_wealth_ratio_gap_decays_at_the_predicted_power() {
    let primal = baseline();
    let a = primal.asymptotic_ratios();
    let (h1, h2) = (1.0, 0.2);
    let b = primal.boundaries(h1, h2).unwrap();
    let gap = |k: i32| {
        let x = b.x_gloom * 10f64.powi(-k);
        let pol = primal.policy(x, h1, h2).unwrap();
        ((pol.consumption / x - a.c_low) / a.c_low).abs()
    };
    let gaps: Vec<f64> = (1..=7).map(|j| gap(10 * j)).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    let e2 = Prefactors::new(primal.model()).e2;
    let observed = (gaps[1] / gaps[6]).log10() / 50.0;
    assert!((observed / -e2 - 1.0).abs() < 0.1, "observed decay {observed} per decade, predicted {}", -e2);
    assert!(gaps[6] < 1e-4, "gap at 1e-70 x_gloom is {}", gaps[6]);
}

#[test]
fn high_wealth_ratios_converge_quickly() {
    let primal = baseline();
    let a = primal.asymptotic_ratios();
    let b = primal.boundaries(1.0, 0.2).unwrap();
    for k in [4, 8] {
        let x = b.x_lavs * 10f64.powi(k);
        let pol = primal.policy(x, 1.0, 0.2).unwrap();
        assert!(((pol.consumption / x) / a.c_high - 1.0).abs() < 1e-6);
        assert!(((pol.portfolio / x) / a.pi - 1.0).abs() < 1e-6);
    }
}

#[test]
fn boundaries_approach_perpetuity_value_as_risk_aversion_grows() {
    let mut last = f64::INFINITY;
    for gamma in [50.0, 200.0, 1000.0, 10_000.0] {
        let p = ModelParams { gamma, ..ModelParams::BASELINE };
        let primal = PrimalSolution::new(Model::new(p).unwrap());
        let b = primal.boundaries(1.0, 0.2).unwrap();
        let gap = (1.0 - p.r * b.x_lavs).abs().max((1.0 - p.r * b.x_gloom / 0.2).abs());
        assert!(gap < last, "gap {gap} at gamma {gamma}");
        last = gap;
    }
    assert!(last < 0.01);
}
