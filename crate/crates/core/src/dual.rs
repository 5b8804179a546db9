//! Dual value function `v(y, h1, h2)`, its `y`-derivatives, the coefficient
//! functions and the five-way region split of the dual state space.
//!
//! Every power-law term is evaluated as `coef * exp(p ln h + m ln y)` so that
//! extreme reference ratios or risk aversions never overflow an intermediate.

use serde::{Deserialize, Serialize};

use crate::error::{check_references, Error, Result};
use crate::model::Model;

/// Which piece of the dual value function applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DualRegionTag {
    /// `y < z_alpha h1^-gamma`: the peak is raised immediately.
    RaisePeak,
    /// `z_alpha h1^-gamma <= y < h1^-gamma`: consumption sits at the peak.
    PeakFlat,
    /// `h1^-gamma <= y <= h2^-gamma`: unconstrained consumption.
    Interior,
    /// `h2^-gamma < y <= z_beta h2^-gamma`: consumption sits at the valley.
    ValleyFlat,
    /// `y > z_beta h2^-gamma`: the valley is lowered immediately.
    LowerValley,
}

impl DualRegionTag {
    pub const ALL: [DualRegionTag; 5] = [
        DualRegionTag::RaisePeak,
        DualRegionTag::PeakFlat,
        DualRegionTag::Interior,
        DualRegionTag::ValleyFlat,
        DualRegionTag::LowerValley,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DualRegionTag::RaisePeak => "raise-peak",
            DualRegionTag::PeakFlat => "peak-flat",
            DualRegionTag::Interior => "interior",
            DualRegionTag::ValleyFlat => "valley-flat",
            DualRegionTag::LowerValley => "lower-valley",
        }
    }

    fn is_middle(self) -> bool {
        matches!(self, DualRegionTag::PeakFlat | DualRegionTag::Interior | DualRegionTag::ValleyFlat)
    }
}

/// A classified dual state with the post-adjustment references substituted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualRegion {
    pub tag: DualRegionTag,
    pub effective_h1: f64,
    pub effective_h2: f64,
}

/// The four `y`-thresholds separating the regions, stored as logarithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// `ln(z_alpha h1^-gamma)`, `-inf` when `z_alpha = 0`.
    pub ln_raise: f64,
    /// `ln(h1^-gamma)`.
    pub ln_peak: f64,
    /// `ln(h2^-gamma)`.
    pub ln_valley: f64,
    /// `ln(z_beta h2^-gamma)`.
    pub ln_lower: f64,
}

impl Thresholds {
    pub fn as_array(&self) -> [f64; 4] {
        [self.ln_raise.exp(), self.ln_peak.exp(), self.ln_valley.exp(), self.ln_lower.exp()]
    }

    pub fn classify_ln(&self, ln_y: f64) -> DualRegionTag {
        if ln_y < self.ln_raise {
            DualRegionTag::RaisePeak
        } else if ln_y < self.ln_peak {
            DualRegionTag::PeakFlat
        } else if ln_y <= self.ln_valley {
            DualRegionTag::Interior
        } else if ln_y <= self.ln_lower {
            DualRegionTag::ValleyFlat
        } else {
            DualRegionTag::LowerValley
        }
    }
}

/// Values of `C1..C6` at one reference pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub h1: f64,
    pub h2: f64,
    pub c: [f64; 6],
}

impl CoefficientSet {
    pub fn c1(&self) -> f64 {
        self.c[0]
    }
    pub fn c2(&self) -> f64 {
        self.c[1]
    }
    pub fn c3(&self) -> f64 {
        self.c[2]
    }
    pub fn c4(&self) -> f64 {
        self.c[3]
    }
    pub fn c5(&self) -> f64 {
        self.c[4]
    }
    pub fn c6(&self) -> f64 {
        self.c[5]
    }
}

/// `v`, `v_y`, `v_yy` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualEval {
    pub v: f64,
    pub vy: f64,
    pub vyy: f64,
}

/// Residual of the dual ODE and the magnitude it should be compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HjbResidual {
    pub residual: f64,
    /// Largest magnitude among the four terms of the equation.
    pub scale: f64,
}

impl HjbResidual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.residual.abs()
        } else {
            self.residual.abs() / self.scale
        }
    }
}

/// The reference-independent building blocks of `C1..C6`.
///
/// With `e1 = 1 + gamma (m1 - 1)` and `e2 = 1 + gamma (m2 - 1)`:
/// `C5 = k5 h2^e1`, `C3 = C5 - a13 h2^e1`, `C1 = C3 + a13 h1^e1`,
/// `C2 = k2 h1^e2`, `C4 = C2 - a24 h1^e2`, `C6 = C4 + a24 h2^e2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prefactors {
    pub e1: f64,
    pub e2: f64,
    pub k5: f64,
    pub k2: f64,
    pub a13: f64,
    pub a24: f64,
    /// Coefficient of `y^gamma*` in the interior piece.
    pub particular: f64,
}

impl Prefactors {
    pub fn new(model: &Model) -> Self {
        let p = model.params();
        let c = model.constants();
        let (m1, m2, gs, r, d) = (c.m1, c.m2, c.gamma_star, p.r, p.delta);
        let k2sq = c.kappa * c.kappa;
        let (za, zb) = (c.z_alpha, c.z_beta);
        let k5 = (1.0 - gs) / ((m1 - m2) * (m1 - gs))
            * (m2 * (p.beta * d + 1.0) / d * zb.powf(-m1) + (1.0 - m2) / r * zb.powf(1.0 - m1));
        let k2 = (1.0 - gs) / ((m1 - m2) * (m2 - gs))
            * (m1 * (p.alpha * d - 1.0) / d * za.powf(-m2) + (m1 - 1.0) / r * za.powf(1.0 - m2));
        let a13 = 2.0 * (1.0 - gs) / (k2sq * (m1 - m2) * m1 * (m1 - 1.0) * (m1 - gs));
        let a24 = 2.0 * (gs - 1.0) / (k2sq * (m1 - m2) * m2 * (m2 - 1.0) * (m2 - gs));
        let particular = 2.0 / (k2sq * gs * (gs - m1) * (gs - m2));
        Prefactors {
            e1: 1.0 + p.gamma * (m1 - 1.0),
            e2: 1.0 + p.gamma * (m2 - 1.0),
            k5,
            k2,
            a13,
            a24,
            particular,
        }
    }
}

/// `coef * d^der/dy^der [ exp(p ln h + m ln y) ]`.
#[inline]
fn term(coef: f64, p_lnh: f64, m: f64, ln_y: f64, der: u8) -> f64 {
    if coef == 0.0 {
        return 0.0;
    }
    match der {
        0 => coef * (p_lnh + m * ln_y).exp(),
        1 => coef * m * (p_lnh + (m - 1.0) * ln_y).exp(),
        _ => coef * m * (m - 1.0) * (p_lnh + (m - 2.0) * ln_y).exp(),
    }
}

/// Closed-form dual value function for one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSolution {
    model: Model,
    pre: Prefactors,
}

impl DualSolution {
    pub fn new(model: Model) -> Self {
        DualSolution { pre: Prefactors::new(&model), model }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn prefactors(&self) -> &Prefactors {
        &self.pre
    }

    pub fn thresholds(&self, h1: f64, h2: f64) -> Thresholds {
        let g = self.model.params().gamma;
        let c = self.model.constants();
        let ln_peak = -g * h1.ln();
        let ln_valley = -g * h2.ln();
        Thresholds {
            ln_raise: c.z_alpha.ln() + ln_peak,
            ln_peak,
            ln_valley,
            ln_lower: c.z_beta.ln() + ln_valley,
        }
    }

    /// `h1bar(y) = (y / z_alpha)^(-1/gamma)`.
    pub fn raised_peak_ln(&self, ln_y: f64) -> f64 {
        (-(ln_y - self.model.constants().z_alpha.ln()) / self.model.params().gamma).exp()
    }

    /// `h2bar(y) = (y / z_beta)^(-1/gamma)`.
    pub fn lowered_valley_ln(&self, ln_y: f64) -> f64 {
        (-(ln_y - self.model.constants().z_beta.ln()) / self.model.params().gamma).exp()
    }

    fn check(&self, y: f64, h1: f64, h2: f64) -> Result<()> {
        check_references(h1, h2)?;
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::Domain(format!("dual variable must be positive and finite, got {y}")));
        }
        Ok(())
    }

    pub fn classify(&self, y: f64, h1: f64, h2: f64) -> Result<DualRegion> {
        self.check(y, h1, h2)?;
        Ok(self.classify_ln(y.ln(), h1, h2))
    }

    pub fn classify_ln(&self, ln_y: f64, h1: f64, h2: f64) -> DualRegion {
        let tag = self.thresholds(h1, h2).classify_ln(ln_y);
        let (effective_h1, effective_h2) = match tag {
            DualRegionTag::RaisePeak => (self.raised_peak_ln(ln_y), h2),
            DualRegionTag::LowerValley => (h1, self.lowered_valley_ln(ln_y)),
            _ => (h1, h2),
        };
        DualRegion { tag, effective_h1, effective_h2 }
    }

    pub fn coefficients(&self, h1: f64, h2: f64) -> Result<CoefficientSet> {
        check_references(h1, h2)?;
        let p = &self.pre;
        let (l1, l2) = (h1.ln(), h2.ln());
        let h1e1 = (p.e1 * l1).exp();
        let h2e1 = (p.e1 * l2).exp();
        let h1e2 = (p.e2 * l1).exp();
        let h2e2 = (p.e2 * l2).exp();
        let c5 = p.k5 * h2e1;
        let c3 = (p.k5 - p.a13) * h2e1;
        let c1 = c3 + p.a13 * h1e1;
        let c2 = p.k2 * h1e2;
        let c4 = (p.k2 - p.a24) * h1e2;
        let c6 = c4 + p.a24 * h2e2;
        Ok(CoefficientSet { h1, h2, c: [c1, c2, c3, c4, c5, c6] })
    }

    /// One of the three middle pieces evaluated at `(ln y, h1, h2)` without
    /// re-classifying; `der` selects `v`, `v_y` or `v_yy`.
    pub fn piece_ln(&self, tag: DualRegionTag, ln_y: f64, h1: f64, h2: f64, der: u8) -> f64 {
        let p = &self.pre;
        let c = self.model.constants();
        let pr = self.model.params();
        let (m1, m2) = (c.m1, c.m2);
        let (l1, l2) = (h1.ln(), h2.ln());
        let y = ln_y.exp();
        let flat = |h: f64| -> f64 {
            match der {
                0 => h.powf(1.0 - pr.gamma) / (pr.delta * (1.0 - pr.gamma)) - y * h / pr.r,
                1 => -h / pr.r,
                _ => 0.0,
            }
        };
        match tag {
            DualRegionTag::PeakFlat | DualRegionTag::RaisePeak => {
                term(p.k5 - p.a13, p.e1 * l2, m1, ln_y, der)
                    + term(p.a13, p.e1 * l1, m1, ln_y, der)
                    + term(p.k2, p.e2 * l1, m2, ln_y, der)
                    + flat(h1)
            }
            DualRegionTag::Interior => {
                term(p.k5 - p.a13, p.e1 * l2, m1, ln_y, der)
                    + term(p.k2 - p.a24, p.e2 * l1, m2, ln_y, der)
                    + term(p.particular, 0.0, c.gamma_star, ln_y, der)
            }
            DualRegionTag::ValleyFlat | DualRegionTag::LowerValley => {
                term(p.k5, p.e1 * l2, m1, ln_y, der)
                    + term(p.k2 - p.a24, p.e2 * l1, m2, ln_y, der)
                    + term(p.a24, p.e2 * l2, m2, ln_y, der)
                    + flat(h2)
            }
        }
    }

    /// Full evaluation of `v`, `v_y`, `v_yy` with region handling.
    pub fn eval_ln(&self, ln_y: f64, h1: f64, h2: f64) -> (DualRegion, DualEval) {
        let region = self.classify_ln(ln_y, h1, h2);
        let pr = self.model.params();
        let (eh1, eh2) = (region.effective_h1, region.effective_h2);
        let base = |der| self.piece_ln(region.tag, ln_y, eh1, eh2, der);
        let mut v = base(0);
        match region.tag {
            DualRegionTag::RaisePeak => {
                v += pr.alpha / (1.0 - pr.gamma) * (h1.powf(1.0 - pr.gamma) - eh1.powf(1.0 - pr.gamma));
            }
            DualRegionTag::LowerValley => {
                v -= pr.beta / (1.0 - pr.gamma) * (h2.powf(1.0 - pr.gamma) - eh2.powf(1.0 - pr.gamma));
            }
            _ => {}
        }
        (region, DualEval { v, vy: base(1), vyy: base(2) })
    }

    pub fn eval(&self, y: f64, h1: f64, h2: f64) -> Result<(DualRegion, DualEval)> {
        self.check(y, h1, h2)?;
        Ok(self.eval_ln(y.ln(), h1, h2))
    }

    pub fn dual_value(&self, y: f64, h1: f64, h2: f64) -> Result<f64> {
        Ok(self.eval(y, h1, h2)?.1.v)
    }

    /// `(v_y, v_yy)`.
    pub fn dual_value_derivatives(&self, y: f64, h1: f64, h2: f64) -> Result<(f64, f64)> {
        let e = self.eval(y, h1, h2)?.1;
        Ok((e.vy, e.vyy))
    }

    /// `sup_{c in [h2, h1]} (U(c) - c y)`.
    pub fn conjugate_felicity(&self, y: f64, h1: f64, h2: f64) -> f64 {
        let pr = self.model.params();
        let g = pr.gamma;
        let gs = self.model.constants().gamma_star;
        if y < h1.powf(-g) {
            h1.powf(1.0 - g) / (1.0 - g) - h1 * y
        } else if y <= h2.powf(-g) {
            -y.powf(gs) / gs
        } else {
            h2.powf(1.0 - g) / (1.0 - g) - h2 * y
        }
    }

    /// `delta v - (kappa^2 y^2 / 2) v_yy - (delta - r) y v_y - U~(y, h1, h2)`,
    /// defined only where no reference is being adjusted.
    pub fn hjb_residual(&self, y: f64, h1: f64, h2: f64) -> Result<HjbResidual> {
        let (region, e) = self.eval(y, h1, h2)?;
        if !region.tag.is_middle() {
            return Err(Error::Region(format!(
                "dual ODE residual is undefined in region {} (y = {y})",
                region.tag.name()
            )));
        }
        let pr = self.model.params();
        let k = self.model.constants().kappa;
        let terms = [
            pr.delta * e.v,
            -0.5 * k * k * y * y * e.vyy,
            -(pr.delta - pr.r) * y * e.vy,
            -self.conjugate_felicity(y, h1, h2),
        ];
        let scale = terms.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
        Ok(HjbResidual { residual: terms.iter().sum(), scale })
    }

    /// Optimal consumption `c(y, h1, h2)` in dual coordinates.
    pub fn consumption_ln(&self, ln_y: f64, h1: f64, h2: f64) -> f64 {
        let region = self.classify_ln(ln_y, h1, h2);
        match region.tag {
            DualRegionTag::RaisePeak => region.effective_h1,
            DualRegionTag::PeakFlat => h1,
            DualRegionTag::Interior => (-ln_y / self.model.params().gamma).exp(),
            DualRegionTag::ValleyFlat => h2,
            DualRegionTag::LowerValley => region.effective_h2,
        }
    }

    /// Optimal risky allocation `((mu - r)/sigma^2) y v_yy` in dual coordinates.
    pub fn portfolio_ln(&self, ln_y: f64, h1: f64, h2: f64) -> f64 {
        let (_, e) = self.eval_ln(ln_y, h1, h2);
        let pr = self.model.params();
        (pr.mu - pr.r) / (pr.sigma * pr.sigma) * ln_y.exp() * e.vyy
    }
}
