use std::fmt;

use thiserror::Error;

/// One failed standing assumption on the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionViolation {
    pub name: &'static str,
    pub observed: f64,
    pub required: String,
}

impl fmt::Display for AssumptionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "AssumptionViolation({}): observed {}, required {}",
            self.name, self.observed, self.required
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("GammaOne: AssumptionViolation(gamma != 1): observed {0}, required gamma != 1 (logarithmic utility is not supported)")]
    GammaOne(f64),
    #[error("{}", join_violations(.0))]
    Assumptions(Vec<AssumptionViolation>),
}

fn join_violations(v: &[AssumptionViolation]) -> String {
    v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join("; ")
}

impl ModelError {
    /// Names of the violated assumptions, empty for [`ModelError::GammaOne`].
    pub fn violated(&self) -> Vec<&'static str> {
        match self {
            ModelError::GammaOne(_) => vec![],
            ModelError::Assumptions(v) => v.iter().map(|a| a.name).collect(),
        }
    }
}

/// Failures of the bracketed root finders.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("BracketFailure: f({a}) = {fa} and f({b}) = {fb} do not change sign")]
    Bracket { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("root finder did not converge after {iterations} iterations (x = {x}, f = {fx})")]
    NoConvergence { iterations: usize, x: f64, fx: f64 },
    #[error("non-finite function value at {at}")]
    NonFinite { at: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("DomainError: {0}")]
    Domain(String),
    #[error("RegionError: {0}")]
    Region(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("ConvergenceError: inverting x = {x} at (h1, h2) = ({h1}, {h2}) left residual {residual}")]
    Convergence { x: f64, h1: f64, h2: f64, residual: f64 },
    #[error("ConfigError: {0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by invalid user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Model(_) | Error::Domain(_) | Error::Config(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_references(h1: f64, h2: f64) -> Result<()> {
    if !(h1.is_finite() && h2.is_finite()) || h2 <= 0.0 || h1 < h2 {
        return Err(Error::Domain(format!(
            "references must satisfy h1 >= h2 > 0, got h1 = {h1}, h2 = {h2}"
        )));
    }
    Ok(())
}
