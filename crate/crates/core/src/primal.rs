//! Wealth-space view of the solution: boundary curves, the inverse dual map
//! `f(x, h1, h2)`, feedback controls and the value function.

use serde::{Deserialize, Serialize};

use crate::dual::{DualRegionTag, DualSolution};
use crate::error::{check_references, Error, Result};
use crate::model::Model;
use crate::roots::{brent, Tolerance};

/// Wealth regions, ordered from poorest to richest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrimalRegion {
    Gloom,
    ValleyFlat,
    Interior,
    PeakFlat,
    Lavish,
}

impl PrimalRegion {
    pub fn name(self) -> &'static str {
        match self {
            PrimalRegion::Gloom => "gloom",
            PrimalRegion::ValleyFlat => "valley-flat",
            PrimalRegion::Interior => "interior",
            PrimalRegion::PeakFlat => "peak-flat",
            PrimalRegion::Lavish => "lavish",
        }
    }

    /// The dual region that a wealth region maps onto under `y = f(x)`.
    pub fn dual_tag(self) -> DualRegionTag {
        match self {
            PrimalRegion::Gloom => DualRegionTag::LowerValley,
            PrimalRegion::ValleyFlat => DualRegionTag::ValleyFlat,
            PrimalRegion::Interior => DualRegionTag::Interior,
            PrimalRegion::PeakFlat => DualRegionTag::PeakFlat,
            PrimalRegion::Lavish => DualRegionTag::RaisePeak,
        }
    }
}

/// The four wealth boundaries at one reference pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boundaries {
    pub x_gloom: f64,
    pub x_valy: f64,
    pub x_peak: f64,
    pub x_lavs: f64,
}

impl Boundaries {
    pub fn as_array(&self) -> [f64; 4] {
        [self.x_gloom, self.x_valy, self.x_peak, self.x_lavs]
    }

    /// Region of `x` using `(peak, lavs]` for PeakFlat, `[valy, peak]` for
    /// Interior and `[gloom, valy)` for ValleyFlat.
    pub fn classify(&self, x: f64) -> PrimalRegion {
        if x > self.x_lavs {
            PrimalRegion::Lavish
        } else if x > self.x_peak {
            PrimalRegion::PeakFlat
        } else if x >= self.x_valy {
            PrimalRegion::Interior
        } else if x >= self.x_gloom {
            PrimalRegion::ValleyFlat
        } else {
            PrimalRegion::Gloom
        }
    }
}

/// A wealth/reference state with its region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateTriple {
    pub x: f64,
    pub h1: f64,
    pub h2: f64,
    pub region: PrimalRegion,
}

/// Feedback controls at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub consumption: f64,
    pub portfolio: f64,
    /// `y = f(x, h1, h2)`; infinite at `x = 0`.
    pub dual_state: f64,
    pub new_h1: f64,
    pub new_h2: f64,
    pub region: PrimalRegion,
}

/// Limits of `c*/x` and `pi*/x` as wealth tends to infinity and to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRatios {
    pub c_high: f64,
    pub c_low: f64,
    pub pi: f64,
}

/// First and second central differences of each boundary in `h1` and `h2`.
///
/// Rows follow [`Boundaries::as_array`]; columns are `[d/dh1, d/dh2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySensitivities {
    pub first: [[f64; 2]; 4],
    pub second: [[f64; 2]; 4],
}

impl BoundarySensitivities {
    pub fn increasing(&self) -> bool {
        self.first.iter().flatten().all(|d| *d > 0.0)
    }

    /// Signs of the second differences, `+1`, `-1` or `0`.
    ///
    /// Each boundary is homogeneous of degree one in `(h1, h2)`, so its two
    /// second derivatives always share a sign.
    pub fn curvature_signs(&self) -> [[i8; 2]; 4] {
        self.second.map(|row| row.map(|d| if d > 0.0 { 1 } else if d < 0.0 { -1 } else { 0 }))
    }
}

fn inversion_tolerance() -> Tolerance {
    Tolerance { x_abs: 1e-15, x_rel: 2.0 * f64::EPSILON, max_iter: 400 }
}

/// Primal solution built on a [`DualSolution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimalSolution {
    dual: DualSolution,
}

impl PrimalSolution {
    pub fn new(model: Model) -> Self {
        PrimalSolution { dual: DualSolution::new(model) }
    }

    pub fn dual(&self) -> &DualSolution {
        &self.dual
    }

    pub fn model(&self) -> &Model {
        self.dual.model()
    }

    pub fn boundaries(&self, h1: f64, h2: f64) -> Result<Boundaries> {
        check_references(h1, h2)?;
        let th = self.dual.thresholds(h1, h2);
        let g = |tag, ln_y| -self.dual.piece_ln(tag, ln_y, h1, h2, 1);
        Ok(Boundaries {
            x_gloom: g(DualRegionTag::ValleyFlat, th.ln_lower),
            x_valy: g(DualRegionTag::ValleyFlat, th.ln_valley),
            x_peak: g(DualRegionTag::PeakFlat, th.ln_peak),
            x_lavs: g(DualRegionTag::PeakFlat, th.ln_raise),
        })
    }

    pub fn state(&self, x: f64, h1: f64, h2: f64) -> Result<StateTriple> {
        check_wealth(x)?;
        let region = self.boundaries(h1, h2)?.classify(x);
        Ok(StateTriple { x, h1, h2, region })
    }

    /// `g(ln y) = -v_y`, with the reference being adjusted substituted in the
    /// outer regions.
    fn wealth_of_ln(&self, region: PrimalRegion, ln_y: f64, h1: f64, h2: f64) -> f64 {
        let tag = region.dual_tag();
        let (h1, h2) = match region {
            PrimalRegion::Lavish => (self.dual.raised_peak_ln(ln_y), h2),
            PrimalRegion::Gloom => (h1, self.dual.lowered_valley_ln(ln_y)),
            _ => (h1, h2),
        };
        -self.dual.piece_ln(tag, ln_y, h1, h2, 1)
    }

    /// `ln f(x, h1, h2)` together with the wealth region of `x`.
    ///
    /// Returns `+inf` at `x = 0`.
    pub fn invert_ln(&self, x: f64, h1: f64, h2: f64) -> Result<(f64, PrimalRegion)> {
        check_wealth(x)?;
        let b = self.boundaries(h1, h2)?;
        let region = b.classify(x);
        if x == 0.0 {
            return Ok((f64::INFINITY, region));
        }
        let th = self.dual.thresholds(h1, h2);
        let gamma = self.model().params().gamma;
        // Bracket in ln y; g is strictly decreasing in y.
        let (lo, hi) = match region {
            PrimalRegion::Lavish => {
                if th.ln_raise == f64::NEG_INFINITY {
                    return Err(Error::Domain(format!(
                        "wealth {x} exceeds the satiation level {} reachable when alpha = 1/delta",
                        b.x_lavs
                    )));
                }
                (f64::NEG_INFINITY, th.ln_raise)
            }
            PrimalRegion::PeakFlat => (th.ln_raise, th.ln_peak),
            PrimalRegion::Interior => (th.ln_peak, th.ln_valley),
            PrimalRegion::ValleyFlat => (th.ln_valley, th.ln_lower),
            PrimalRegion::Gloom => (th.ln_lower, f64::INFINITY),
        };
        let resid = |ln_y: f64| self.wealth_of_ln(region, ln_y, h1, h2) - x;
        // Open ends are found by stepping from the asymptotic guess
        // x ~ y^(-1/gamma) measured from the nearest boundary.
        let lo = if lo.is_finite() {
            lo
        } else {
            let anchor = if region == PrimalRegion::Lavish { b.x_lavs } else { b.x_peak };
            let mut step = gamma * (x / anchor).ln().max(1.0) + 1.0;
            let mut lo = hi - step;
            while resid(lo) < 0.0 {
                step *= 2.0;
                lo = hi - step;
                if step > 1e6 {
                    return Err(self.convergence(x, h1, h2, resid(lo)));
                }
            }
            lo
        };
        let hi = if hi.is_finite() {
            hi
        } else {
            let mut step = gamma * (b.x_gloom / x).ln().max(1.0) + 1.0;
            let mut hi = lo + step;
            while resid(hi) > 0.0 {
                step *= 2.0;
                hi = lo + step;
                if step > 1e6 {
                    return Err(self.convergence(x, h1, h2, resid(hi)));
                }
            }
            hi
        };
        // Adjacent pieces agree at a threshold only to rounding, so a target
        // next to a boundary can miss the sign change by a few ulps.
        let root = match brent(resid, lo, hi, inversion_tolerance()) {
            Ok(root) => root.x,
            Err(_) => {
                let (rl, rh) = (resid(lo), resid(hi));
                if rl.abs().min(rh.abs()) <= 1e-10 * x.max(1.0) {
                    if rl.abs() <= rh.abs() { lo } else { hi }
                } else {
                    return Err(self.convergence(x, h1, h2, rl.abs().min(rh.abs())));
                }
            }
        };
        let ln_y = clamp_to_region(region, root, lo, hi);
        let residual = resid(ln_y);
        if !(residual.abs() <= 1e-10 * x.max(1.0)) {
            return Err(self.convergence(x, h1, h2, residual));
        }
        Ok((ln_y, region))
    }

    fn convergence(&self, x: f64, h1: f64, h2: f64, residual: f64) -> Error {
        Error::Convergence { x, h1, h2, residual }
    }

    /// `f(x, h1, h2)`, the inverse of `y -> -v_y(y, h1, h2)`.
    pub fn invert(&self, x: f64, h1: f64, h2: f64) -> Result<f64> {
        Ok(self.invert_ln(x, h1, h2)?.0.exp())
    }

    pub fn policy(&self, x: f64, h1: f64, h2: f64) -> Result<PolicyDecision> {
        let (ln_y, region) = self.invert_ln(x, h1, h2)?;
        if x == 0.0 {
            return Ok(PolicyDecision {
                consumption: 0.0,
                portfolio: 0.0,
                dual_state: f64::INFINITY,
                new_h1: h1,
                new_h2: h2,
                region,
            });
        }
        Ok(self.policy_at(ln_y, region, h1, h2))
    }

    /// Controls at a known dual state and region.
    fn policy_at(&self, ln_y: f64, region: PrimalRegion, h1: f64, h2: f64) -> PolicyDecision {
        let p = self.model().params();
        let (new_h1, new_h2) = match region {
            PrimalRegion::Lavish => (self.dual.raised_peak_ln(ln_y), h2),
            PrimalRegion::Gloom => (h1, self.dual.lowered_valley_ln(ln_y)),
            _ => (h1, h2),
        };
        let consumption = match region {
            PrimalRegion::Lavish | PrimalRegion::PeakFlat => new_h1,
            PrimalRegion::Interior => (-ln_y / p.gamma).exp().clamp(h2, h1),
            PrimalRegion::ValleyFlat | PrimalRegion::Gloom => new_h2,
        };
        let vyy = self.dual.piece_ln(region.dual_tag(), ln_y, new_h1, new_h2, 2);
        let portfolio = (p.mu - p.r) / (p.sigma * p.sigma) * ln_y.exp() * vyy;
        PolicyDecision { consumption, portfolio, dual_state: ln_y.exp(), new_h1, new_h2, region }
    }

    /// Value function `u(x, h1, h2)`.
    ///
    /// At `x = 0` this is the limit `-beta h2^(1-gamma)/(1-gamma)` for
    /// `gamma < 1` and `-inf` otherwise.
    pub fn value(&self, x: f64, h1: f64, h2: f64) -> Result<f64> {
        let (ln_y, region) = self.invert_ln(x, h1, h2)?;
        let p = self.model().params();
        if x == 0.0 {
            return Ok(if p.gamma < 1.0 {
                -p.beta * h2.powf(1.0 - p.gamma) / (1.0 - p.gamma)
            } else {
                f64::NEG_INFINITY
            });
        }
        let (eh1, eh2) = match region {
            PrimalRegion::Lavish => (self.dual.raised_peak_ln(ln_y), h2),
            PrimalRegion::Gloom => (h1, self.dual.lowered_valley_ln(ln_y)),
            _ => (h1, h2),
        };
        let y = ln_y.exp();
        let mut u = self.dual.piece_ln(region.dual_tag(), ln_y, eh1, eh2, 0) + x * y;
        let q = 1.0 - p.gamma;
        match region {
            PrimalRegion::Lavish => u += p.alpha / q * (h1.powf(q) - eh1.powf(q)),
            PrimalRegion::Gloom => u -= p.beta / q * (h2.powf(q) - eh2.powf(q)),
            _ => {}
        }
        Ok(u)
    }

    /// Limits of `c*/x` as `x -> inf` and `x -> 0`, and the common `pi*/x` limit.
    pub fn asymptotic_ratios(&self) -> AsymptoticRatios {
        let c = self.model().constants();
        let (m1, m2, gs) = (c.m1, c.m2, c.gamma_star);
        let k2 = c.kappa * c.kappa;
        let num = |m: f64| k2 * (m - 1.0) * (m1 - gs) * (m2 - gs);
        let den = |m: f64, z: f64| 2.0 * ((1.0 - gs) * z.powf(m - 1.0) - m + gs);
        AsymptoticRatios {
            c_high: num(m1) / den(m1, c.z_alpha),
            c_low: num(m2) / den(m2, c.z_beta),
            pi: c.merton_pi_ratio,
        }
    }

    /// Finite-difference shape of the boundary curves with relative step `1e-4`.
    pub fn boundary_sensitivities(&self, h1: f64, h2: f64) -> Result<BoundarySensitivities> {
        check_references(h1, h2)?;
        let (s1, s2) = (1e-4 * h1, 1e-4 * h2);
        if h1 - s1 <= h2 + s2 {
            return Err(Error::Domain(format!(
                "sensitivities need h1 > h2 with room for the step, got h1 = {h1}, h2 = {h2}"
            )));
        }
        let at = |a: f64, b: f64| self.boundaries(a, b).map(|x| x.as_array());
        let mid = at(h1, h2)?;
        let (p1, m1) = (at(h1 + s1, h2)?, at(h1 - s1, h2)?);
        let (p2, m2) = (at(h1, h2 + s2)?, at(h1, h2 - s2)?);
        let mut first = [[0.0; 2]; 4];
        let mut second = [[0.0; 2]; 4];
        for i in 0..4 {
            first[i] = [(p1[i] - m1[i]) / (2.0 * s1), (p2[i] - m2[i]) / (2.0 * s2)];
            second[i] = [
                (p1[i] - 2.0 * mid[i] + m1[i]) / (s1 * s1),
                (p2[i] - 2.0 * mid[i] + m2[i]) / (s2 * s2),
            ];
        }
        Ok(BoundarySensitivities { first, second })
    }
}

fn check_wealth(x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("wealth must be finite and non-negative, got {x}")));
    }
    Ok(())
}

/// Keep a root that rounded onto an excluded endpoint inside its region.
fn clamp_to_region(region: PrimalRegion, ln_y: f64, lo: f64, hi: f64) -> f64 {
    match region {
        PrimalRegion::PeakFlat if ln_y >= hi => hi.next_down(),
        PrimalRegion::ValleyFlat if ln_y <= lo => lo.next_up(),
        PrimalRegion::Lavish if ln_y >= hi => hi.next_down(),
        PrimalRegion::Gloom if ln_y <= lo => lo.next_up(),
        _ => ln_y,
    }
}
