//! Bracketed scalar root finding.
//!
//! Every free boundary in this crate comes with an analytic bracket, so the
//! solvers here only ever need to handle a sign change on `[a, b]`.

use crate::error::SolveError;

/// Termination settings for [`brent`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    /// Absolute tolerance on the abscissa.
    pub x_abs: f64,
    /// Relative tolerance on the abscissa.
    pub x_rel: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            x_abs: 1e-14,
            x_rel: 4.0 * f64::EPSILON,
            max_iter: 200,
        }
    }
}

/// A located root together with the function value there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

/// Brent's method (inverse quadratic interpolation with bisection fallback).
///
/// `f(a)` and `f(b)` must have opposite signs (or one of them must vanish).
pub fn brent<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Root, SolveError>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa.is_nan() || fb.is_nan() {
        return Err(SolveError::NonFinite { at: if fa.is_nan() { a } else { b } });
    }
    if fa == 0.0 {
        return Ok(Root { x: a, fx: fa, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, fx: fb, iterations: 0 });
    }
    if fa.signum() == fb.signum() {
        return Err(SolveError::Bracket { a, b, fa, fb });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * tol.x_rel * b.abs() + 0.5 * tol.x_abs;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(Root { x: b, fx: fb, iterations: iter });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += tol1.copysign(xm);
        }
        fb = f(b);
        if fb.is_nan() {
            return Err(SolveError::NonFinite { at: b });
        }
    }
    Err(SolveError::NoConvergence { iterations: tol.max_iter, x: b, fx: fb })
}

/// Plain bisection until the bracket stops shrinking in floating point.
///
/// Slow but unconditional; used as an independent cross-check of [`brent`].
pub fn bisect<F>(mut f: F, a: f64, b: f64) -> Result<Root, SolveError>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = (a, b);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(Root { x: lo, fx: flo, iterations: 0 });
    }
    if fhi == 0.0 {
        return Ok(Root { x: hi, fx: fhi, iterations: 0 });
    }
    if flo.signum() == fhi.signum() {
        return Err(SolveError::Bracket { a, b, fa: flo, fb: fhi });
    }
    let mut iterations = 0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) || iterations > 2000 {
            let x = if flo.abs() < f(hi).abs() { lo } else { hi };
            return Ok(Root { x, fx: f(x), iterations });
        }
        let fm = f(mid);
        iterations += 1;
        if fm == 0.0 {
            return Ok(Root { x: mid, fx: fm, iterations });
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
}
