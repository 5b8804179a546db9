//! Invariant suites that check a solved model against the properties its
//! closed form must satisfy. Every check records the measured quantity and
//! the tolerance it was held to.

use serde::{Deserialize, Serialize};

use crate::dual::{DualRegionTag, DualSolution};
use crate::model::{phi_alpha_terms, phi_beta_terms, quadratic_residual, scaled_residual, Model};
use crate::primal::PrimalSolution;
use crate::stats::halton;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Suite {
    pub name: &'static str,
    pub checks: Vec<Check>,
}

impl Suite {
    fn new(name: &'static str) -> Self {
        Suite { name, checks: Vec::new() }
    }

    /// Record `value <= tolerance`; NaN fails.
    fn at_most(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        self.checks.push(Check { name: name.into(), value, tolerance, passed: value <= tolerance });
    }

    /// Record a boolean property, reporting the number of violations.
    fn holds(&mut self, name: impl Into<String>, violations: usize) {
        self.at_most(name, violations as f64, 0.0);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suites: Vec<Suite>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(Suite::passed)
    }

    /// `(suite, check)` of the first failure.
    pub fn first_failure(&self) -> Option<(&'static str, &Check)> {
        self.suites
            .iter()
            .flat_map(|s| s.checks.iter().map(move |c| (s.name, c)))
            .find(|(_, c)| !c.passed)
    }
}

/// Central difference of `f` at `h` with relative step `1e-6`.
fn dh(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let e = 1e-6 * h;
    (f(h + e) - f(h - e)) / (2.0 * e)
}

/// A wealth level well inside the lavish region, or inside the peak region
/// when the peak is never raised and wealth beyond `x_lavs` is unattainable.
fn rich(primal: &PrimalSolution, b: &crate::primal::Boundaries, factor: f64) -> f64 {
    if primal.model().constants().z_alpha > 0.0 {
        factor * b.x_lavs
    } else {
        0.5 * (b.x_peak + b.x_lavs)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Samples `n` log-spaced points strictly inside `(lo, hi)` of `ln y`.
fn ln_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64)
}

pub fn roots_suite(model: &Model) -> Suite {
    let p = model.params();
    let c = model.constants();
    let k2 = c.kappa * c.kappa;
    let mut s = Suite::new("roots");
    let quad = quadratic_residual(p, c.m1).abs().max(quadratic_residual(p, c.m2).abs());
    s.at_most("quadratic residual of m1, m2", quad, 1e-12);
    let sum = (c.m1 + c.m2 - (1.0 + 2.0 * (p.r - p.delta) / k2)).abs();
    let prod = (c.m1 * c.m2 + 2.0 * p.delta / k2).abs();
    s.at_most("root sum and product identities", sum.max(prod), 1e-12);
    s.holds("m1 > 1 and m2 < min(gamma*, 0)", !(c.m1 > 1.0 && c.m2 < c.gamma_star.min(0.0)) as usize);
    s.at_most("scaled phi_alpha(z_alpha)", scaled_residual(phi_alpha_terms(p, c.m1, c.m2, c.z_alpha)), 1e-10);
    s.at_most("scaled phi_beta(z_beta)", scaled_residual(phi_beta_terms(p, c.m1, c.m2, c.z_beta)), 1e-10);
    let za_ok = c.z_alpha <= 1.0 - p.alpha * p.delta && (c.z_alpha > 0.0 || p.alpha * p.delta >= 1.0);
    s.holds("z_alpha in (0, 1 - alpha delta]", !za_ok as usize);
    s.holds("z_beta in [1 + beta delta, inf)", !(c.z_beta >= 1.0 + p.beta * p.delta) as usize);
    s
}

pub fn coefficients_suite(dual: &DualSolution, h1: f64, h2: f64) -> Result<Suite> {
    let mut s = Suite::new("coefficients");
    let pre = dual.prefactors();
    let cs = dual.coefficients(h1, h2)?;
    // Differences against the explicit two-term expressions in plain arithmetic.
    let diffs = [
        rel(cs.c1() - cs.c3(), pre.a13 * h1.powf(pre.e1)),
        rel(cs.c2() - cs.c4(), pre.a24 * h1.powf(pre.e2)),
        rel(cs.c3() - cs.c5(), -pre.a13 * h2.powf(pre.e1)),
        rel(cs.c4() - cs.c6(), -pre.a24 * h2.powf(pre.e2)),
    ];
    s.at_most("pairwise coefficient differences", diffs.iter().cloned().fold(0.0, f64::max), 1e-10);
    // Both vanish up to rounding when there are no adjustment costs.
    let slack3 = 1e-10 * (pre.a13 * h2.powf(pre.e1)).abs();
    let slack4 = 1e-10 * (pre.a24 * h1.powf(pre.e2)).abs();
    s.holds("C3 <= 0 and C4 <= 0", (cs.c3() > slack3) as usize + (cs.c4() > slack4) as usize);
    let scaled = dual.coefficients(2.0 * h1, 2.0 * h2)?;
    let homog = [
        rel(scaled.c5(), cs.c5() * 2f64.powf(pre.e1)),
        rel(scaled.c2(), cs.c2() * 2f64.powf(pre.e2)),
    ];
    s.at_most("single-reference homogeneity of C2, C5", homog[0].max(homog[1]), 1e-12);
    Ok(s)
}

/// The dual ODE in the three middle regions together with the conditions on
/// the reference derivatives that complete the variational inequality.
pub fn hjb_suite(dual: &DualSolution, h1: f64, h2: f64) -> Result<Suite> {
    let mut s = Suite::new("hjb");
    let p = dual.model().params();
    let th = dual.thresholds(h1, h2);
    let lo = if th.ln_raise.is_finite() { th.ln_raise } else { th.ln_peak - 10.0 };
    let mut worst: f64 = 0.0;
    for ln_y in ln_grid(lo, th.ln_lower, 1000) {
        worst = worst.max(dual.hjb_residual(ln_y.exp(), h1, h2)?.relative());
    }
    s.at_most("max scaled ODE residual over the middle regions", worst, 1e-8);

    let scale = |tag, ln_y: f64| {
        let y = ln_y.exp();
        (dual.piece_ln(tag, ln_y, h1, h2, 0).abs() + (y * dual.piece_ln(tag, ln_y, h1, h2, 1)).abs()) / h1
    };
    let v_h1 = |tag, ln_y| dh(|a| dual.piece_ln(tag, ln_y, a, h2, 0), h1);
    let v_h2 = |tag, ln_y| dh(|b| dual.piece_ln(tag, ln_y, h1, b, 0), h2);
    let cost1 = p.alpha * h1.powf(-p.gamma);
    let cost2 = p.beta * h2.powf(-p.gamma);

    if th.ln_raise.is_finite() {
        let t = th.ln_raise;
        let gap = (v_h1(DualRegionTag::PeakFlat, t) - cost1).abs() / scale(DualRegionTag::PeakFlat, t);
        s.at_most("v_h1 = alpha h1^-gamma where the peak is raised", gap, 1e-6);
    }
    let t = th.ln_lower;
    let gap = (v_h2(DualRegionTag::ValleyFlat, t) + cost2).abs() / scale(DualRegionTag::ValleyFlat, t);
    s.at_most("v_h2 = -beta h2^-gamma where the valley is lowered", gap, 1e-6);

    let mut slack = 0usize;
    for ln_y in ln_grid(lo, th.ln_lower, 200) {
        let tag = th.classify_ln(ln_y);
        let sc = 1e-6 * scale(tag, ln_y);
        slack += (v_h1(tag, ln_y) > cost1 + sc) as usize;
        slack += (v_h2(tag, ln_y) < -cost2 - sc) as usize;
    }
    s.holds("no gain from adjusting inside the middle regions", slack);
    Ok(s)
}

pub fn smooth_pasting_suite(dual: &DualSolution, h1: f64, h2: f64) -> Result<Suite> {
    use DualRegionTag::*;
    let mut s = Suite::new("smooth-pasting");
    let th = dual.thresholds(h1, h2);
    let mut worst_v: f64 = 0.0;
    let mut worst_vy: f64 = 0.0;
    for (t, a, b) in [(th.ln_peak, PeakFlat, Interior), (th.ln_valley, Interior, ValleyFlat)] {
        worst_v = worst_v.max(rel(dual.piece_ln(a, t, h1, h2, 0), dual.piece_ln(b, t, h1, h2, 0)));
        worst_vy = worst_vy.max(rel(dual.piece_ln(a, t, h1, h2, 1), dual.piece_ln(b, t, h1, h2, 1)));
    }
    // Outer thresholds: the adjusted piece just beyond against the flat piece.
    for t in [th.ln_raise, th.ln_lower] {
        if !t.is_finite() {
            continue;
        }
        let (out, inside) = (dual.eval_ln(t + if t == th.ln_raise { -1e-12 } else { 1e-12 }, h1, h2).1, {
            let tag = if t == th.ln_raise { PeakFlat } else { ValleyFlat };
            (dual.piece_ln(tag, t, h1, h2, 0), dual.piece_ln(tag, t, h1, h2, 1))
        });
        worst_v = worst_v.max(rel(out.v, inside.0));
        worst_vy = worst_vy.max(rel(out.vy, inside.1));
    }
    s.at_most("relative jump of v across thresholds", worst_v, 1e-9);
    s.at_most("relative jump of v_y across thresholds", worst_vy, 1e-9);

    // Super-contact: h-derivative of v_y vanishes where the reference moves,
    // measured against |v_y| / h.
    if th.ln_raise.is_finite() {
        let t = th.ln_raise;
        let vy = dual.piece_ln(PeakFlat, t, h1, h2, 1);
        let d = dh(|a| dual.piece_ln(PeakFlat, t, a, h2, 1), h1) * h1 / vy.abs();
        s.at_most("v_yh1 at the raise boundary", d.abs(), 1e-6);
    }
    let t = th.ln_lower;
    let vy = dual.piece_ln(ValleyFlat, t, h1, h2, 1);
    let d = dh(|b| dual.piece_ln(ValleyFlat, t, h1, b, 1), h2) * h2 / vy.abs();
    s.at_most("v_yh2 at the lowering boundary", d.abs(), 1e-6);
    Ok(s)
}

/// `v_yy > 0` and `0 < pi/x <= (mu - r)/(sigma^2 gamma)` on quasi-random
/// states spanning all five regions and a range of reference ratios.
pub fn convexity_suite(dual: &DualSolution, n: usize) -> Result<Suite> {
    let mut s = Suite::new("convexity");
    let p = dual.model().params();
    let bound = dual.model().constants().merton_pi_ratio;
    let (mut nonconvex, mut out_of_bounds) = (0usize, 0usize);
    let mut worst: f64 = 0.0;
    for [u, w] in halton::<2>(n) {
        let h1 = 1.0;
        let h2 = 0.05 + 0.95 * w;
        let th = dual.thresholds(h1, h2);
        let lo = if th.ln_raise.is_finite() { th.ln_raise } else { th.ln_peak - 5.0 };
        let ln_y = lo - 3.0 + (th.ln_lower - lo + 6.0) * u;
        let (_, e) = dual.eval_ln(ln_y, h1, h2);
        nonconvex += !(e.vyy > 0.0) as usize;
        let ratio = (p.mu - p.r) / (p.sigma * p.sigma) * ln_y.exp() * e.vyy / -e.vy;
        out_of_bounds += !(ratio > 0.0 && ratio <= bound * (1.0 + 1e-12)) as usize;
        worst = worst.max(ratio / bound);
    }
    s.holds("v_yy > 0", nonconvex);
    s.holds("0 < pi/x <= Merton ratio", out_of_bounds);
    s.at_most("max (pi/x) / Merton ratio", worst, 1.0 + 1e-12);
    Ok(s)
}

pub fn inversion_suite(primal: &PrimalSolution, h1: f64, h2: f64, n: usize) -> Result<Suite> {
    let mut s = Suite::new("inversion");
    let dual = primal.dual();
    let th = dual.thresholds(h1, h2);
    let lo = if th.ln_raise.is_finite() { th.ln_raise - 4.0 } else { th.ln_peak - 6.0 };
    let hi = th.ln_lower + 4.0;
    let mut worst: f64 = 0.0;
    let mut found = [false; 5];
    for ln_y in ln_grid(lo, hi, n) {
        let (region, e) = dual.eval_ln(ln_y, h1, h2);
        found[DualRegionTag::ALL.iter().position(|t| *t == region.tag).unwrap()] = true;
        let back = primal.invert_ln(-e.vy, h1, h2)?.0;
        worst = worst.max(((back - ln_y).exp() - 1.0).abs());
    }
    s.at_most("round trip f(-v_y(y)) / y - 1", worst, 1e-8);
    // The flat regions are empty without adjustment costs.
    let flat_empty = primal.model().is_merton();
    let missing = found
        .iter()
        .enumerate()
        .filter(|(i, f)| !**f && (*i != 0 || th.ln_raise.is_finite()) && !(flat_empty && matches!(DualRegionTag::ALL[*i], DualRegionTag::PeakFlat | DualRegionTag::ValleyFlat)))
        .count();
    s.holds("all regions sampled", missing);

    // f_x = 1/g_y with g = -v_y, checked by finite differences in x.
    let b = primal.boundaries(h1, h2)?;
    let mut worst_fx: f64 = 0.0;
    for x in [0.5 * b.x_gloom, 0.5 * (b.x_gloom + b.x_valy), 0.5 * (b.x_valy + b.x_peak), rich(primal, &b, 2.0)] {
        let e = 1e-5 * x;
        let fd = (primal.invert(x + e, h1, h2)? - primal.invert(x - e, h1, h2)?) / (2.0 * e);
        let y = primal.invert(x, h1, h2)?;
        let (_, vyy) = dual.dual_value_derivatives(y, h1, h2)?;
        worst_fx = worst_fx.max(rel(fd, -1.0 / vyy));
    }
    s.at_most("f_x against -1/v_yy", worst_fx, 1e-5);
    Ok(s)
}

pub fn duality_suite(primal: &PrimalSolution, h1: f64, h2: f64) -> Result<Suite> {
    let mut s = Suite::new("duality");
    let dual = primal.dual();
    let b = primal.boundaries(h1, h2)?;
    let mut worst: f64 = 0.0;
    let mut not_min = 0usize;
    for k in 0..60 {
        let x = 0.1 * b.x_gloom * (rich(primal, &b, 100.0) / (0.1 * b.x_gloom)).powf(k as f64 / 59.0);
        let y = primal.invert(x, h1, h2)?;
        let u = primal.value(x, h1, h2)?;
        worst = worst.max(rel(u, dual.dual_value(y, h1, h2)? + x * y));
        for f in [0.99, 1.01] {
            let alt = dual.dual_value(f * y, h1, h2)? + x * f * y;
            not_min += (alt < u - 1e-12 * u.abs()) as usize;
        }
    }
    s.at_most("u = v(f) + x f", worst, 1e-9);
    s.holds("f minimises v(y) + x y", not_min);
    Ok(s)
}

pub fn homogeneity_suite(primal: &PrimalSolution, h1: f64, h2: f64) -> Result<Suite> {
    let mut s = Suite::new("homogeneity");
    let dual = primal.dual();
    let g = primal.model().params().gamma;
    let th = dual.thresholds(h1, h2);
    let lo = if th.ln_raise.is_finite() { th.ln_raise - 2.0 } else { th.ln_peak - 4.0 };
    let mut worst: f64 = 0.0;
    for ln_y in ln_grid(lo, th.ln_lower + 2.0, 100) {
        let y = ln_y.exp();
        let v = dual.dual_value(y, h1, h2)?;
        let w = h1.powf(1.0 - g) * dual.dual_value(y * h1.powf(g), 1.0, h2 / h1)?;
        worst = worst.max(rel(v, w));
    }
    s.at_most("v(y, h1, h2) = h1^(1-gamma) v(y h1^gamma, 1, h2/h1)", worst, 1e-9);
    let b = primal.boundaries(h1, h2)?;
    let mut worst_u: f64 = 0.0;
    for x in [0.5 * b.x_gloom, b.x_valy, 0.5 * (b.x_peak + b.x_lavs), rich(primal, &b, 3.0)] {
        let u = primal.value(x, h1, h2)?;
        let w = h1.powf(1.0 - g) * primal.value(x / h1, 1.0, h2 / h1)?;
        worst_u = worst_u.max(rel(u, w));
    }
    s.at_most("u(x, h1, h2) = h1^(1-gamma) u(x/h1, 1, h2/h1)", worst_u, 1e-9);
    Ok(s)
}

pub fn ordering_suite(primal: &PrimalSolution, h1: f64) -> Result<Suite> {
    let mut s = Suite::new("ordering");
    let c = primal.model().constants();
    let strict = c.z_alpha < 1.0 && c.z_beta > 1.0;
    let mut bad = 0usize;
    for k in 0..50 {
        let h2 = h1 * (0.01 + 0.99 * k as f64 / 49.0);
        let b = primal.boundaries(h1, h2)?.as_array();
        bad += b.windows(2).filter(|w| if strict { w[0] >= w[1] && h2 < h1 } else { w[0] > w[1] }).count();
        bad += b.windows(2).filter(|w| w[0] > w[1]).count();
    }
    s.holds("x_gloom <= x_valy <= x_peak <= x_lavs", bad);
    Ok(s)
}

/// Every suite at the reference pair `(h1, h2)`.
pub fn run_all(model: Model, h1: f64, h2: f64) -> Result<VerifyReport> {
    let primal = PrimalSolution::new(model);
    let dual = primal.dual();
    Ok(VerifyReport {
        suites: vec![
            roots_suite(&model),
            coefficients_suite(dual, h1, h2)?,
            hjb_suite(dual, h1, h2)?,
            smooth_pasting_suite(dual, h1, h2)?,
            convexity_suite(dual, 10_000)?,
            inversion_suite(&primal, h1, h2, 1000)?,
            duality_suite(&primal, h1, h2)?,
            homogeneity_suite(&primal, h1, h2)?,
            ordering_suite(&primal, h1)?,
        ],
    })
}
