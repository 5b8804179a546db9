//! Monte Carlo on top of the closed-form policy.
//!
//! The dual process `Y` is geometric Brownian motion, so it is sampled exactly
//! on the grid; the references follow from its running extrema and wealth is
//! read off as `-v_y`. Every path draws from its own ChaCha stream keyed by
//! `(seed, path index)`, which keeps results independent of thread count.

mod estimators;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::DualSolution;
use crate::error::{check_references, Error, Result};
use crate::model::Model;
use crate::primal::PrimalSolution;

pub use estimators::{
    budget_check, long_run_stats, utility_moments, BudgetReport, Comparison, HittingReport,
    LongRunReport, MomentPoint, RegimeNote, UtilityMoments,
};

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Pair path `2k + 1` with the negated increments of path `2k`.
    pub antithetic: bool,
    /// Extra monitoring grids at `4 dt` and `16 dt` used to extrapolate away
    /// the discrete-monitoring bias of extremum-driven statistics (0 to 2).
    pub refinements: usize,
    /// Fraction of the horizon discarded before long-run time averages.
    pub burn_in: f64,
    /// Cap on `n_paths * (steps + 1)` for operations that keep whole paths.
    pub max_stored_samples: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon: 50.0,
            dt: 0.01,
            n_paths: 1000,
            seed: 20_240_601,
            antithetic: false,
            refinements: 2,
            burn_in: 0.2,
            max_stored_samples: 50_000_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive and finite, got {}", self.horizon));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon) {
            return bad(format!("dt must lie in (0, horizon], got {}", self.dt));
        }
        if self.n_paths == 0 {
            return bad("n_paths must be at least 1".into());
        }
        if self.antithetic && self.n_paths % 2 != 0 {
            return bad(format!("antithetic sampling needs an even path count, got {}", self.n_paths));
        }
        if self.refinements > 2 {
            return bad(format!("refinements must be 0, 1 or 2, got {}", self.refinements));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return bad(format!("burn_in must lie in [0, 1), got {}", self.burn_in));
        }
        if self.horizon / self.dt > 1e9 {
            return bad(format!("{} steps per path is beyond any sensible budget", self.horizon / self.dt));
        }
        Ok(())
    }

    /// Coarsening factor of the coarsest monitoring grid.
    pub fn coarsest_stride(&self) -> usize {
        4usize.pow(self.refinements as u32)
    }

    /// Number of fine steps, rounded up to a multiple of the coarsest stride.
    pub fn steps(&self) -> usize {
        let m = self.coarsest_stride();
        let raw = (self.horizon / self.dt - 1e-9).ceil().max(1.0) as usize;
        raw.div_ceil(m) * m
    }

    /// Step actually used, `horizon / steps()`.
    pub fn effective_dt(&self) -> f64 {
        self.horizon / self.steps() as f64
    }
}

/// Standard normal draws for one path.
pub(crate) struct PathNoise {
    rng: ChaCha8Rng,
    sign: f64,
}

impl PathNoise {
    pub(crate) fn new(seed: u64, path: usize, antithetic: bool) -> Self {
        let (stream, sign) = if antithetic {
            ((path / 2) as u64, if path % 2 == 1 { -1.0 } else { 1.0 })
        } else {
            (path as u64, 1.0)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        PathNoise { rng, sign }
    }

    #[inline]
    pub(crate) fn normal(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        self.sign * z
    }
}

/// Running extrema of `ln Y` folded into the references.
///
/// `floor = ln(z_alpha H1^-gamma)` and `ceiling = ln(z_beta H2^-gamma)`; the
/// state always satisfies `floor <= ln Y <= ceiling`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct References {
    pub floor: f64,
    pub ceiling: f64,
    ln_za: f64,
    ln_zb: f64,
    gamma: f64,
    h1_fixed: f64,
}

impl References {
    pub(crate) fn new(model: &Model, ln_y0: f64, h1: f64, h2: f64) -> Self {
        let c = model.constants();
        let gamma = model.params().gamma;
        let ln_za = c.z_alpha.ln();
        let ln_zb = c.z_beta.ln();
        let mut r = References {
            floor: ln_za - gamma * h1.ln(),
            ceiling: ln_zb - gamma * h2.ln(),
            ln_za,
            ln_zb,
            gamma,
            h1_fixed: h1,
        };
        r.observe(ln_y0);
        r
    }

    #[inline]
    pub(crate) fn observe(&mut self, ln_y: f64) {
        if ln_y < self.floor {
            self.floor = ln_y;
        }
        if ln_y > self.ceiling {
            self.ceiling = ln_y;
        }
    }

    #[inline]
    pub(crate) fn h1(&self) -> f64 {
        if self.ln_za == f64::NEG_INFINITY {
            return self.h1_fixed;
        }
        (-(self.floor - self.ln_za) / self.gamma).exp()
    }

    #[inline]
    pub(crate) fn h2(&self) -> f64 {
        (-(self.ceiling - self.ln_zb) / self.gamma).exp()
    }

    /// `ln Y < ln H1^-gamma`: consumption pinned at the peak.
    #[inline]
    pub(crate) fn in_peak(&self, ln_y: f64) -> bool {
        ln_y < self.floor - self.ln_za
    }

    /// `ln Y > ln H2^-gamma`: consumption pinned at the valley.
    #[inline]
    pub(crate) fn in_valley(&self, ln_y: f64) -> bool {
        ln_y > self.ceiling - self.ln_zb
    }

    /// Optimal consumption, `y^(-1/gamma)` clamped to `[H2, H1]`.
    #[inline]
    pub(crate) fn consumption(&self, ln_y: f64) -> f64 {
        (-ln_y / self.gamma).exp().clamp(self.h2(), self.h1())
    }
}

/// One simulated path. Dual fields are filled by [`simulate_dual`]; wealth,
/// controls and running utility by [`reconstruct_wealth`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub x: Vec<f64>,
    pub c: Vec<f64>,
    pub pi: Vec<f64>,
    /// Running `int e^(-delta s) U(c_s) ds` (trapezoid rule).
    pub disc_utility: Vec<f64>,
    /// Running `alpha int e^(-delta s) dV(H1_s)`, including a jump at `t = 0`.
    pub adj_cost_up: Vec<f64>,
    /// Running `beta int e^(-delta s) d(-V(H2_s))`, including a jump at `t = 0`.
    pub adj_cost_down: Vec<f64>,
    /// Brownian increments driving the path; `dw.len() + 1 == times.len()`.
    pub dw: Vec<f64>,
    /// References before the possible jump at `t = 0`.
    pub h1_initial: f64,
    pub h2_initial: f64,
}

impl PathRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Dual path driven by the given Brownian increments.
///
/// Useful as a test hook: all-zero increments give the deterministic path
/// `Y_t = y0 exp((delta - r - kappa^2/2) t)`.
pub fn simulate_dual_from_increments(
    model: &Model,
    y0: f64,
    h1: f64,
    h2: f64,
    dt: f64,
    dw: Vec<f64>,
) -> Result<PathRecord> {
    check_references(h1, h2)?;
    if !(y0 > 0.0 && y0.is_finite()) {
        return Err(Error::Domain(format!("initial dual state must be positive and finite, got {y0}")));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let p = model.params();
    let kappa = model.constants().kappa;
    let drift = model.constants().log_dual_drift(p) * dt;
    let n = dw.len();
    let mut rec = PathRecord {
        times: Vec::with_capacity(n + 1),
        y: Vec::with_capacity(n + 1),
        h1: Vec::with_capacity(n + 1),
        h2: Vec::with_capacity(n + 1),
        h1_initial: h1,
        h2_initial: h2,
        ..Default::default()
    };
    let mut ln_y = y0.ln();
    let mut refs = References::new(model, ln_y, h1, h2);
    let push = |k: usize, ln_y: f64, refs: &References, rec: &mut PathRecord| {
        rec.times.push(k as f64 * dt);
        rec.y.push(ln_y.exp());
        rec.h1.push(refs.h1().max(h1));
        rec.h2.push(refs.h2().min(h2));
    };
    push(0, ln_y, &refs, &mut rec);
    for (k, w) in dw.iter().enumerate() {
        ln_y += drift - kappa * w;
        refs.observe(ln_y);
        push(k + 1, ln_y, &refs, &mut rec);
    }
    rec.dw = dw;
    Ok(rec)
}

/// Exact sample of `(Y, H1, H2)` on the grid of `config` for path `path`.
pub fn simulate_dual(
    model: &Model,
    y0: f64,
    h1: f64,
    h2: f64,
    config: &SimConfig,
    path: usize,
) -> Result<PathRecord> {
    config.validate()?;
    let n = config.steps();
    let dt = config.effective_dt();
    let sqrt_dt = dt.sqrt();
    let mut noise = PathNoise::new(config.seed, path, config.antithetic);
    let dw = (0..n).map(|_| sqrt_dt * noise.normal()).collect();
    simulate_dual_from_increments(model, y0, h1, h2, dt, dw)
}

/// Fill wealth, controls and the running utility/cost integrals of a dual path.
pub fn reconstruct_wealth(dual: &DualSolution, path: &mut PathRecord) {
    let model = dual.model();
    let p = model.params();
    let n = path.len();
    path.x.clear();
    path.c.clear();
    path.pi.clear();
    for k in 0..n {
        let ln_y = path.y[k].ln();
        let (h1, h2) = (path.h1[k], path.h2[k]);
        let (_, e) = dual.eval_ln(ln_y, h1, h2);
        path.x.push(-e.vy);
        path.c.push(dual.consumption_ln(ln_y, h1, h2).clamp(h2, h1));
        path.pi.push((p.mu - p.r) / (p.sigma * p.sigma) * path.y[k] * e.vyy);
    }
    let disc = |k: usize| (-p.delta * path.times[k]).exp();
    let big_v = |h: f64| p.utility(h);
    let mut u = 0.0;
    let mut up = p.alpha * (big_v(path.h1[0]) - big_v(path.h1_initial));
    let mut down = p.beta * (big_v(path.h2_initial) - big_v(path.h2[0]));
    path.disc_utility = vec![0.0];
    path.adj_cost_up = vec![up];
    path.adj_cost_down = vec![down];
    for k in 1..n {
        let dt = path.times[k] - path.times[k - 1];
        u += 0.5 * dt * (disc(k - 1) * p.utility(path.c[k - 1]) + disc(k) * p.utility(path.c[k]));
        up += p.alpha * disc(k) * (big_v(path.h1[k]) - big_v(path.h1[k - 1]));
        down += p.beta * disc(k) * (big_v(path.h2[k - 1]) - big_v(path.h2[k]));
        path.disc_utility.push(u);
        path.adj_cost_up.push(up);
        path.adj_cost_down.push(down);
    }
}

/// Wealth integrated by Euler-Maruyama under the primal feedback policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerCheck {
    pub x: Vec<f64>,
    /// `max_k |X_euler - X_dual| / X_dual`.
    pub max_rel_deviation: f64,
    /// Set when the Euler wealth fell below `-1e-9` and was clipped at zero.
    pub clipped: bool,
}

/// Integrate `dX = rX dt + pi (mu - r) dt - c dt + pi sigma dW` with the same
/// increments as `path`, using controls from [`PrimalSolution::policy`] and
/// references updated by the policy's jumps. `path` must be reconstructed.
pub fn euler_cross_check(solution: &PrimalSolution, path: &PathRecord) -> Result<EulerCheck> {
    let p = solution.model().params();
    let mut x = path.x[0];
    let (mut h1, mut h2) = (path.h1[0], path.h2[0]);
    let mut xs = Vec::with_capacity(path.len());
    let mut clipped = false;
    let mut worst: f64 = 0.0;
    xs.push(x);
    for k in 0..path.dw.len() {
        let dt = path.times[k + 1] - path.times[k];
        let pol = solution.policy(x, h1, h2)?;
        h1 = pol.new_h1;
        h2 = pol.new_h2;
        x += (p.r * x + pol.portfolio * (p.mu - p.r) - pol.consumption) * dt
            + pol.portfolio * p.sigma * path.dw[k];
        if x < 0.0 {
            clipped |= x < -1e-9;
            x = 0.0;
        }
        xs.push(x);
        worst = worst.max((x - path.x[k + 1]).abs() / path.x[k + 1]);
    }
    Ok(EulerCheck { x: xs, max_rel_deviation: worst, clipped })
}

/// Whole reconstructed paths from initial wealth `x`, in path order.
pub fn simulate_paths(
    solution: &PrimalSolution,
    x: f64,
    h1: f64,
    h2: f64,
    config: &SimConfig,
) -> Result<Vec<PathRecord>> {
    config.validate()?;
    let samples = config.n_paths.saturating_mul(config.steps() + 1);
    if samples > config.max_stored_samples {
        return Err(Error::Config(format!(
            "{} paths of {} samples exceed the memory budget of {} samples",
            config.n_paths,
            config.steps() + 1,
            config.max_stored_samples
        )));
    }
    let y0 = solution.invert(x, h1, h2)?;
    let dual = solution.dual();
    (0..config.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rec = simulate_dual(dual.model(), y0, h1, h2, config, i)?;
            reconstruct_wealth(dual, &mut rec);
            Ok(rec)
        })
        .collect()
}
