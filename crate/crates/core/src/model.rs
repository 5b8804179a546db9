//! Model primitives, standing assumptions and the scalar constants every
//! other module is built on.

use serde::{Deserialize, Serialize};

use crate::error::{AssumptionViolation, ModelError, SolveError};
use crate::roots::{brent, Tolerance};

/// Market and preference primitives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Riskless rate.
    pub r: f64,
    /// Drift of the risky asset.
    pub mu: f64,
    /// Volatility of the risky asset.
    pub sigma: f64,
    /// Subjective discount rate.
    pub delta: f64,
    /// Relative risk aversion of the power felicity.
    pub gamma: f64,
    /// Weight on utility gained when the consumption peak is raised.
    pub alpha: f64,
    /// Weight on utility lost when the consumption valley is lowered.
    pub beta: f64,
}

impl ModelParams {
    /// The parameter set used throughout the numerical experiments.
    pub const BASELINE: ModelParams = ModelParams {
        r: 0.0063,
        mu: 0.15,
        sigma: 0.2,
        delta: 0.2,
        gamma: 0.6,
        alpha: 1.0,
        beta: 1.0,
    };

    pub fn kappa(&self) -> f64 {
        (self.mu - self.r) / self.sigma
    }

    pub fn gamma_star(&self) -> f64 {
        -(1.0 - self.gamma) / self.gamma
    }

    /// `r + (delta - r)/gamma + (gamma - 1) kappa^2 / (2 gamma^2)`.
    pub fn k0(&self) -> f64 {
        let k = self.kappa();
        self.r + (self.delta - self.r) / self.gamma
            + (self.gamma - 1.0) / (2.0 * self.gamma * self.gamma) * k * k
    }

    /// Power felicity `c^(1-gamma) / (1-gamma)`, shared by consumption and references.
    pub fn utility(&self, c: f64) -> f64 {
        c.powf(1.0 - self.gamma) / (1.0 - self.gamma)
    }

    /// Upper admissible value of `alpha`.
    pub fn alpha_max(&self) -> f64 {
        1.0 / self.delta
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams::BASELINE
    }
}

const GAMMA_ONE_TOL: f64 = 1e-9;

/// Checks every standing assumption and returns the parameters unchanged.
///
/// All violated assumptions are collected, not just the first one.
pub fn validate(params: ModelParams) -> Result<ModelParams, ModelError> {
    let p = params;
    if (p.gamma - 1.0).abs() <= GAMMA_ONE_TOL {
        return Err(ModelError::GammaOne(p.gamma));
    }
    let mut bad = Vec::new();
    let mut check = |ok: bool, name: &'static str, observed: f64, required: &str| {
        if !ok {
            bad.push(AssumptionViolation { name, observed, required: required.to_string() });
        }
    };
    let all_finite = [p.r, p.mu, p.sigma, p.delta, p.gamma, p.alpha, p.beta]
        .iter()
        .all(|v| v.is_finite());
    check(all_finite, "finite parameters", f64::NAN, "all parameters finite");
    check(p.r > 0.0, "r > 0", p.r, "> 0");
    check(p.sigma > 0.0, "sigma > 0", p.sigma, "> 0");
    check(p.delta > 0.0, "delta > 0", p.delta, "> 0");
    check(p.gamma > 0.0, "gamma > 0", p.gamma, "> 0");
    check(p.mu > p.r, "mu > r", p.mu, &format!("> r = {}", p.r));
    check(p.alpha >= 0.0, "alpha >= 0", p.alpha, ">= 0");
    if p.delta > 0.0 {
        let amax = 1.0 / p.delta;
        check(p.alpha <= amax, "alpha <= 1/delta", p.alpha, &format!("<= {amax}"));
    }
    check(p.beta >= 0.0, "beta >= 0", p.beta, ">= 0");
    if p.gamma > 0.0 && p.sigma > 0.0 {
        let k0 = p.k0();
        check(k0 > 0.0, "K0 > 0", k0, "> 0");
    }
    if bad.is_empty() {
        Ok(params)
    } else {
        Err(ModelError::Assumptions(bad))
    }
}

/// Roots `(m1, m2)` of `(kappa^2/2) m^2 + (delta - r - kappa^2/2) m - delta = 0`.
///
/// The larger-magnitude root comes straight from the discriminant and the
/// other from the product `m1 m2 = -2 delta / kappa^2`, so neither suffers
/// from cancellation.
pub fn quadratic_roots(params: &ModelParams) -> (f64, f64) {
    let k = params.kappa();
    let a = 0.5 * k * k;
    let b = params.delta - params.r - 0.5 * k * k;
    let c = -params.delta;
    let disc = (b * b - 4.0 * a * c).sqrt();
    let q = if b >= 0.0 { -0.5 * (b + disc) } else { -0.5 * (b - disc) };
    let (big, small) = (q / a, c / q);
    if big > small {
        (big, small)
    } else {
        (small, big)
    }
}

/// Residual of the quadratic at `m`.
pub fn quadratic_residual(params: &ModelParams, m: f64) -> f64 {
    let k = params.kappa();
    0.5 * k * k * m * m + (params.delta - params.r - 0.5 * k * k) * m - params.delta
}

/// The algebraic equation pinning the peak-raising ratio.
pub fn phi_alpha(params: &ModelParams, m1: f64, m2: f64, z: f64) -> f64 {
    let t = phi_alpha_terms(params, m1, m2, z);
    t[0] + t[1] + t[2]
}

/// The algebraic equation pinning the valley-lowering ratio.
pub fn phi_beta(params: &ModelParams, m1: f64, m2: f64, z: f64) -> f64 {
    let t = phi_beta_terms(params, m1, m2, z);
    t[0] + t[1] + t[2]
}

/// The three terms of [`phi_alpha`], for scale-aware residuals.
pub fn phi_alpha_terms(p: &ModelParams, m1: f64, m2: f64, z: f64) -> [f64; 3] {
    let k2 = p.kappa().powi(2);
    [
        2.0 / (k2 * m1 * (m1 - 1.0)) * z.powf(m1),
        z / p.r * (m2 - 1.0),
        m2 * (p.alpha - 1.0 / p.delta),
    ]
}

/// The three terms of [`phi_beta`], for scale-aware residuals.
pub fn phi_beta_terms(p: &ModelParams, m1: f64, m2: f64, z: f64) -> [f64; 3] {
    let k2 = p.kappa().powi(2);
    [
        2.0 / (k2 * m2 * (m2 - 1.0)) * z.powf(m2),
        z / p.r * (m1 - 1.0),
        -m1 * (p.beta + 1.0 / p.delta),
    ]
}

/// `|phi| / max |term|`, the scale-free residual used by every root check.
pub fn scaled_residual(terms: [f64; 3]) -> f64 {
    let scale = terms.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    let sum: f64 = terms.iter().sum();
    if scale == 0.0 {
        0.0
    } else {
        sum.abs() / scale
    }
}

fn root_tolerance() -> Tolerance {
    Tolerance { x_abs: 1e-14, x_rel: 2.0 * f64::EPSILON, max_iter: 300 }
}

/// Root of `phi_alpha` in `(0, 1 - alpha delta]`.
///
/// `alpha = 0` gives exactly 1 and `alpha = 1/delta` gives exactly 0, the
/// limit in which the peak is never raised.
pub fn solve_z_alpha(params: &ModelParams, m1: f64, m2: f64) -> Result<f64, SolveError> {
    if params.alpha == 0.0 {
        return Ok(1.0);
    }
    let upper = 1.0 - params.alpha * params.delta;
    if upper <= 0.0 {
        return Ok(0.0);
    }
    let f = |z: f64| phi_alpha(params, m1, m2, z);
    // phi_alpha(0+) = m2 (alpha - 1/delta) > 0 and phi_alpha(1 - alpha delta) <= 0.
    let root = brent(f, 0.0, upper, root_tolerance())?;
    Ok(root.x)
}

/// Root of `phi_beta` in `[1 + beta delta, inf)`, bracketed by doubling.
pub fn solve_z_beta(params: &ModelParams, m1: f64, m2: f64) -> Result<f64, SolveError> {
    if params.beta == 0.0 {
        return Ok(1.0);
    }
    let f = |z: f64| phi_beta(params, m1, m2, z);
    let lo = 1.0 + params.beta * params.delta;
    let flo = f(lo);
    if flo > 0.0 {
        return Err(SolveError::Bracket { a: lo, b: lo, fa: flo, fb: flo });
    }
    let mut hi = 2.0 * lo;
    let mut fhi = f(hi);
    let mut doublings = 0;
    while fhi <= 0.0 {
        hi *= 2.0;
        fhi = f(hi);
        doublings += 1;
        if doublings > 1100 || !fhi.is_finite() {
            return Err(SolveError::Bracket { a: lo, b: hi, fa: flo, fb: fhi });
        }
    }
    let root = brent(f, hi / 2.0, hi, root_tolerance())?;
    Ok(root.x)
}

/// Merton consumption-wealth and risky-wealth ratios (the `alpha = beta = 0` policy).
pub fn merton_ratios(params: &ModelParams) -> (f64, f64) {
    let g = params.gamma;
    let k = params.kappa();
    let c_ratio = params.delta / g - (1.0 - g) * (k * k / (2.0 * g * g) + params.r / g);
    let pi_ratio = (params.mu - params.r) / (params.sigma * params.sigma * g);
    (c_ratio, pi_ratio)
}

/// Scalars derived once from validated parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub kappa: f64,
    pub gamma_star: f64,
    pub m1: f64,
    pub m2: f64,
    pub k0: f64,
    pub z_alpha: f64,
    pub z_beta: f64,
    pub merton_c_ratio: f64,
    pub merton_pi_ratio: f64,
}

impl DerivedConstants {
    pub fn compute(params: &ModelParams) -> Result<Self, SolveError> {
        let (m1, m2) = quadratic_roots(params);
        let z_alpha = solve_z_alpha(params, m1, m2)?;
        let z_beta = solve_z_beta(params, m1, m2)?;
        let (merton_c_ratio, merton_pi_ratio) = merton_ratios(params);
        Ok(DerivedConstants {
            kappa: params.kappa(),
            gamma_star: params.gamma_star(),
            m1,
            m2,
            k0: params.k0(),
            z_alpha,
            z_beta,
            merton_c_ratio,
            merton_pi_ratio,
        })
    }

    /// Exponent `1 + 2(r - delta)/kappa^2` governing the long-run statistics;
    /// equals `m1 + m2`.
    pub fn drift_exponent(&self, params: &ModelParams) -> f64 {
        1.0 + 2.0 * (params.r - params.delta) / (self.kappa * self.kappa)
    }

    /// Drift of `ln Y`, `delta - r - kappa^2/2`.
    pub fn log_dual_drift(&self, params: &ModelParams) -> f64 {
        params.delta - params.r - 0.5 * self.kappa * self.kappa
    }
}

/// Validated parameters bundled with their derived constants. Immutable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    params: ModelParams,
    constants: DerivedConstants,
}

impl Model {
    pub fn new(params: ModelParams) -> crate::Result<Self> {
        let params = validate(params)?;
        let constants = DerivedConstants::compute(&params)?;
        Ok(Model { params, constants })
    }

    /// Bundles constants without recomputing them. Intended for perturbation
    /// experiments; nothing downstream re-checks consistency.
    pub fn from_parts(params: ModelParams, constants: DerivedConstants) -> Self {
        Model { params, constants }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn constants(&self) -> &DerivedConstants {
        &self.constants
    }

    /// True when both adjustment costs vanish and the policy is Merton's.
    pub fn is_merton(&self) -> bool {
        self.params.alpha == 0.0 && self.params.beta == 0.0
    }

    /// Copy of the model with one parameter replaced and constants recomputed.
    pub fn with_params(&self, params: ModelParams) -> crate::Result<Self> {
        Model::new(params)
    }
}
