//! Streaming Monte Carlo estimators. Paths are generated, reduced to a few
//! per-path numbers and dropped, so memory does not grow with the horizon.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PathNoise, References, SimConfig};
use crate::error::{Error, Result};
use crate::primal::PrimalSolution;
use crate::stats::{richardson_sqrt, Estimate};

/// A Monte Carlo estimate next to its closed-form target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Extrapolated estimate across paths.
    pub estimate: Estimate,
    pub closed_form: f64,
    /// Plain means on the `dt`, `4 dt`, `16 dt` grids, finest first.
    pub level_means: Vec<f64>,
}

impl Comparison {
    pub fn within(&self, k: f64) -> bool {
        self.estimate.within(self.closed_form, k)
    }
}

/// Why a closed form was not compared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RegimeNote {
    /// `delta - r - kappa^2/2 <= 0`: the gloom time has no finite mean formula.
    GloomTimeNotApplicable { drift: f64 },
    /// `delta - r - kappa^2/2 >= 0`: the lavish time has no finite mean formula.
    LavishTimeNotApplicable { drift: f64 },
}

impl fmt::Display for RegimeNote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegimeNote::GloomTimeNotApplicable { drift } => write!(
                f,
                "RegimeNote: drift of ln Y is {drift} <= 0, so E[tau_gloom] is not compared"
            ),
            RegimeNote::LavishTimeNotApplicable { drift } => write!(
                f,
                "RegimeNote: drift of ln Y is {drift} >= 0, so E[tau_lavs] is not compared"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingReport {
    /// Probability of reaching the boundary, measured by the horizon.
    pub probability: Comparison,
    pub expected_time: Option<Comparison>,
    /// Paths that had not hit on every grid by the horizon.
    pub censored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRunReport {
    /// Drift of `ln Y`.
    pub drift: f64,
    /// `1 + 2(r - delta)/kappa^2`.
    pub exponent: f64,
    pub peak_fraction: Comparison,
    pub valley_fraction: Comparison,
    pub gloom: HittingReport,
    pub lavish: HittingReport,
    pub notes: Vec<RegimeNote>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub x: f64,
    pub y_star: f64,
    /// Extrapolated `E[int_0^T c xi ds]`.
    pub estimate: Estimate,
    pub level_means: Vec<f64>,
    /// `E[H1_T] e^(-rT) / r`, the reported bound on the truncated tail.
    pub tail_bound: f64,
    /// `E[xi_T X_T]`, the tail's actual expectation by the budget identity.
    pub tail_estimate: Estimate,
}

impl BudgetReport {
    /// `x` lies in `[estimate - k SE, estimate + tail_bound + k SE]`.
    pub fn brackets(&self, k: f64) -> bool {
        let (m, se) = (self.estimate.mean, self.estimate.std_error);
        self.x >= m - k * se && self.x <= m + self.tail_bound + k * se
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPoint {
    pub time: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityMoments {
    pub ours: Vec<MomentPoint>,
    pub merton: Vec<MomentPoint>,
    /// Ours minus Merton with a paired standard error.
    pub mean_diff: Vec<Estimate>,
    /// Variance of ours minus variance of Merton with a paired standard error.
    pub var_diff: Vec<Estimate>,
}

/// Reduce per-path samples, averaging antithetic pairs first.
fn reduce(samples: Vec<f64>, antithetic: bool) -> Estimate {
    if antithetic {
        let pairs: Vec<f64> = samples.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        Estimate::from_samples(&pairs)
    } else {
        Estimate::from_samples(&samples)
    }
}

fn compare(per_path: &[Vec<f64>], closed_form: f64, antithetic: bool) -> Comparison {
    let levels = per_path.first().map_or(0, Vec::len);
    let level_means = (0..levels)
        .map(|j| {
            let col: Vec<f64> = per_path.iter().map(|v| v[j]).collect();
            reduce(col, antithetic).mean
        })
        .collect();
    let extrapolated = per_path.iter().map(|v| richardson_sqrt(v)).collect();
    Comparison { estimate: reduce(extrapolated, antithetic), closed_form, level_means }
}

struct LongRunPath {
    peak: Vec<f64>,
    valley: Vec<f64>,
    tau_gloom: Vec<Option<f64>>,
    tau_lavs: Vec<Option<f64>>,
}

/// Long-run occupation fractions and boundary hitting statistics from wealth `x`.
///
/// Dual-side statistics are computed on monitoring grids `dt`, `4 dt` and
/// `16 dt` of the same path and extrapolated per path.
pub fn long_run_stats(
    solution: &PrimalSolution,
    x: f64,
    h1: f64,
    h2: f64,
    config: &SimConfig,
) -> Result<LongRunReport> {
    config.validate()?;
    let model = *solution.model();
    let (ln_y0, _) = solution.invert_ln(x, h1, h2)?;
    let th = solution.dual().thresholds(h1, h2);
    if !(ln_y0 >= th.ln_raise && ln_y0 <= th.ln_lower) {
        return Err(Error::Domain(format!(
            "long-run statistics need x in [x_gloom, x_lavs] so that no reference jumps at t = 0, got x = {x}"
        )));
    }
    let p = *model.params();
    let c = *model.constants();
    let drift = c.log_dual_drift(&p);
    let lambda = c.drift_exponent(&p);
    let n = config.steps();
    let dt = config.effective_dt();
    let sqrt_dt = dt.sqrt();
    let step_drift = drift * dt;
    let burn = (config.burn_in * n as f64).ceil() as usize;
    let strides: Vec<usize> = (0..=config.refinements).map(|j| 4usize.pow(j as u32)).collect();
    let levels = strides.len();

    let run = |path: usize| -> LongRunPath {
        let mut noise = PathNoise::new(config.seed, path, config.antithetic);
        let mut refs: Vec<References> = vec![References::new(&model, ln_y0, h1, h2); levels];
        let mut counts = vec![0usize; levels];
        let mut peak = vec![0usize; levels];
        let mut valley = vec![0usize; levels];
        let mut tg = vec![None; levels];
        let mut tl = vec![None; levels];
        let mut ln_y = ln_y0;
        for k in 0..=n {
            for j in 0..levels {
                if k % strides[j] != 0 {
                    continue;
                }
                let r = &mut refs[j];
                r.observe(ln_y);
                let t = k as f64 * dt;
                if tg[j].is_none() && ln_y >= th.ln_lower {
                    tg[j] = Some(t);
                }
                if tl[j].is_none() && ln_y <= th.ln_raise {
                    tl[j] = Some(t);
                }
                if k >= burn && k < n {
                    counts[j] += 1;
                    peak[j] += r.in_peak(ln_y) as usize;
                    valley[j] += r.in_valley(ln_y) as usize;
                }
            }
            if k < n {
                ln_y += step_drift - c.kappa * sqrt_dt * noise.normal();
            }
        }
        let frac = |hits: &[usize]| -> Vec<f64> {
            hits.iter().zip(&counts).map(|(h, c)| *h as f64 / (*c).max(1) as f64).collect()
        };
        LongRunPath { peak: frac(&peak), valley: frac(&valley), tau_gloom: tg, tau_lavs: tl }
    };
    let paths: Vec<LongRunPath> = (0..config.n_paths).into_par_iter().map(run).collect();

    let column = |f: &dyn Fn(&LongRunPath) -> Vec<f64>| -> Vec<Vec<f64>> { paths.iter().map(f).collect() };
    let peak_cf = (1.0 - c.z_alpha.powf(lambda)).max(0.0);
    let valley_cf = (1.0 - c.z_beta.powf(lambda)).max(0.0);
    let anti = config.antithetic;
    let peak_fraction = compare(&column(&|q| q.peak.clone()), peak_cf, anti);
    let valley_fraction = compare(&column(&|q| q.valley.clone()), valley_cf, anti);

    let indicator = |v: &[Option<f64>]| -> Vec<f64> { v.iter().map(|t| t.is_some() as u8 as f64).collect() };
    let times = |v: &[Option<f64>]| -> Vec<f64> { v.iter().map(|t| t.unwrap_or(config.horizon)).collect() };
    let censored = |f: &dyn Fn(&LongRunPath) -> &Vec<Option<f64>>| {
        paths.iter().filter(|q| f(q).iter().any(Option::is_none)).count()
    };

    // Distances from the start to the two adjustment levels in ln Y.
    let up = th.ln_lower - ln_y0;
    let down = ln_y0 - th.ln_raise;
    let mut notes = Vec::new();

    let gloom_p = if drift >= 0.0 { 1.0 } else { (-lambda * up).exp() };
    let gloom_time = if drift > 0.0 {
        Some(compare(&column(&|q| times(&q.tau_gloom)), up / drift, anti))
    } else {
        notes.push(RegimeNote::GloomTimeNotApplicable { drift });
        None
    };
    let gloom = HittingReport {
        probability: compare(&column(&|q| indicator(&q.tau_gloom)), gloom_p, anti),
        expected_time: gloom_time,
        censored: censored(&|q| &q.tau_gloom),
    };

    let lavish_p = if drift <= 0.0 { 1.0 } else { (lambda * down).exp() };
    let lavish_time = if drift < 0.0 {
        Some(compare(&column(&|q| times(&q.tau_lavs)), down / -drift, anti))
    } else {
        notes.push(RegimeNote::LavishTimeNotApplicable { drift });
        None
    };
    let lavish = HittingReport {
        probability: compare(&column(&|q| indicator(&q.tau_lavs)), lavish_p, anti),
        expected_time: lavish_time,
        censored: censored(&|q| &q.tau_lavs),
    };

    Ok(LongRunReport { drift, exponent: lambda, peak_fraction, valley_fraction, gloom, lavish, notes })
}

/// Monte Carlo estimate of `E[int_0^T c_s xi_s ds]` at `y* = f(x, h1, h2)`.
///
/// Fails with a config error when the reported tail bound is not below
/// `0.1%` of `x`, i.e. when the horizon is too short.
pub fn budget_check(
    solution: &PrimalSolution,
    x: f64,
    h1: f64,
    h2: f64,
    config: &SimConfig,
) -> Result<BudgetReport> {
    config.validate()?;
    if !(x > 0.0) {
        return Err(Error::Domain(format!("budget check needs positive wealth, got {x}")));
    }
    let model = *solution.model();
    let dual = solution.dual();
    let p = *model.params();
    let kappa = model.constants().kappa;
    let (ln_y0, _) = solution.invert_ln(x, h1, h2)?;
    let n = config.steps();
    let dt = config.effective_dt();
    let sqrt_dt = dt.sqrt();
    let step_drift = model.constants().log_dual_drift(&p) * dt;
    let strides: Vec<usize> = (0..=config.refinements).map(|j| 4usize.pow(j as u32)).collect();
    let levels = strides.len();

    let run = |path: usize| -> (Vec<f64>, f64, f64) {
        let mut noise = PathNoise::new(config.seed, path, config.antithetic);
        let mut refs = vec![References::new(&model, ln_y0, h1, h2); levels];
        let mut integral = vec![0.0; levels];
        let mut ln_y = ln_y0;
        for k in 0..=n {
            let t = k as f64 * dt;
            let xi = (ln_y - ln_y0 - p.delta * t).exp();
            for j in 0..levels {
                if k % strides[j] != 0 {
                    continue;
                }
                refs[j].observe(ln_y);
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                integral[j] += w * strides[j] as f64 * dt * refs[j].consumption(ln_y) * xi;
            }
            if k < n {
                ln_y += step_drift - kappa * sqrt_dt * noise.normal();
            }
        }
        let fine = &refs[0];
        let xi_t = (ln_y - ln_y0 - p.delta * config.horizon).exp();
        let x_t = -dual.eval_ln(ln_y, fine.h1(), fine.h2()).1.vy;
        (integral, fine.h1(), xi_t * x_t)
    };
    let out: Vec<(Vec<f64>, f64, f64)> = (0..config.n_paths).into_par_iter().map(run).collect();
    let anti = config.antithetic;
    let ints: Vec<Vec<f64>> = out.iter().map(|o| o.0.clone()).collect();
    let cmp = compare(&ints, x, anti);
    let mean_h1 = reduce(out.iter().map(|o| o.1).collect(), anti).mean;
    let tail_bound = mean_h1 * (-p.r * config.horizon).exp() / p.r;
    let tail_estimate = reduce(out.iter().map(|o| o.2).collect(), anti);
    if !(tail_bound < 1e-3 * x) {
        return Err(Error::Config(format!(
            "horizon {} leaves a tail bound of {tail_bound:.3e}, not below 0.1% of x = {x}",
            config.horizon
        )));
    }
    Ok(BudgetReport {
        x,
        y_star: ln_y0.exp(),
        estimate: cmp.estimate,
        level_means: cmp.level_means,
        tail_bound,
        tail_estimate,
    })
}

/// Mean and variance of `int_0^t e^(-delta s) U(c_s) ds` at `n_report` evenly
/// spaced times, for the adjusted model and for Merton's policy driven by the
/// same Brownian path.
pub fn utility_moments(
    solution: &PrimalSolution,
    x: f64,
    h1: f64,
    h2: f64,
    config: &SimConfig,
    n_report: usize,
) -> Result<UtilityMoments> {
    config.validate()?;
    if config.antithetic {
        return Err(Error::Config("utility moments need independent paths; disable antithetic sampling".into()));
    }
    if config.n_paths < 2 {
        return Err(Error::Config("utility moments need at least two paths".into()));
    }
    let n = config.steps();
    if n_report == 0 || n_report > n {
        return Err(Error::Config(format!("report count must lie in [1, {n}], got {n_report}")));
    }
    if !(x > 0.0) {
        return Err(Error::Domain(format!("utility moments need positive wealth, got {x}")));
    }
    let model = *solution.model();
    let p = *model.params();
    let c = *model.constants();
    let (ln_y0, _) = solution.invert_ln(x, h1, h2)?;
    let dt = config.effective_dt();
    let sqrt_dt = dt.sqrt();
    let step_drift = c.log_dual_drift(&p) * dt;
    let (cm, pm) = (c.merton_c_ratio, c.merton_pi_ratio);
    let merton_step = (p.r + pm * (p.mu - p.r) - cm - 0.5 * pm * pm * p.sigma * p.sigma) * dt;
    let report: Vec<usize> = (1..=n_report).map(|i| (i * n) / n_report).collect();
    let times: Vec<f64> = report.iter().map(|k| *k as f64 * dt).collect();

    let run = |path: usize| -> (Vec<f64>, Vec<f64>) {
        let mut noise = PathNoise::new(config.seed, path, false);
        let mut refs = References::new(&model, ln_y0, h1, h2);
        let mut ln_y = ln_y0;
        let mut ln_xm = x.ln();
        let felicity = |t: f64, c: f64| (-p.delta * t).exp() * p.utility(c);
        let mut prev_a = felicity(0.0, refs.consumption(ln_y));
        let mut prev_b = felicity(0.0, cm * x);
        let (mut ua, mut ub) = (0.0, 0.0);
        let mut out_a = Vec::with_capacity(report.len());
        let mut out_b = Vec::with_capacity(report.len());
        let mut next = 0;
        for k in 1..=n {
            let dw = sqrt_dt * noise.normal();
            ln_y += step_drift - c.kappa * dw;
            ln_xm += merton_step + pm * p.sigma * dw;
            refs.observe(ln_y);
            let t = k as f64 * dt;
            let fa = felicity(t, refs.consumption(ln_y));
            let fb = felicity(t, cm * ln_xm.exp());
            ua += 0.5 * dt * (prev_a + fa);
            ub += 0.5 * dt * (prev_b + fb);
            prev_a = fa;
            prev_b = fb;
            if next < report.len() && report[next] == k {
                out_a.push(ua);
                out_b.push(ub);
                next += 1;
            }
        }
        (out_a, out_b)
    };
    let out: Vec<(Vec<f64>, Vec<f64>)> = (0..config.n_paths).into_par_iter().map(run).collect();

    let mut ours = Vec::with_capacity(n_report);
    let mut merton = Vec::with_capacity(n_report);
    let mut mean_diff = Vec::with_capacity(n_report);
    let mut var_diff = Vec::with_capacity(n_report);
    for (i, t) in times.iter().enumerate() {
        let a: Vec<f64> = out.iter().map(|o| o.0[i]).collect();
        let b: Vec<f64> = out.iter().map(|o| o.1[i]).collect();
        let point = |xs: &[f64]| {
            let e = Estimate::from_samples(xs);
            MomentPoint { time: *t, mean: e.mean, mean_se: e.std_error, variance: Estimate::variance_of(xs) }
        };
        let (pa, pb) = (point(&a), point(&b));
        let d: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u - v).collect();
        mean_diff.push(Estimate::from_samples(&d));
        let sq: Vec<f64> = a
            .iter()
            .zip(&b)
            .map(|(u, v)| (u - pa.mean).powi(2) - (v - pb.mean).powi(2))
            .collect();
        let se = Estimate::from_samples(&sq);
        var_diff.push(Estimate { mean: pa.variance - pb.variance, std_error: se.std_error, n: se.n });
        ours.push(pa);
        merton.push(pb);
    }
    Ok(UtilityMoments { ours, merton, mean_diff, var_diff })
}
