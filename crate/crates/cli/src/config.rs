//! Run configuration: a flat JSON document with kebab-case keys. Every key is
//! optional and defaults to the baseline model, state and simulation settings.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use peakvalley::model::ModelParams;
use peakvalley::simulate::SimConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Parameter varied by `sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Alpha,
    Beta,
    Mu,
    Gamma,
    Sigma,
    R,
    Delta,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
            SweepParam::Mu => "mu",
            SweepParam::Gamma => "gamma",
            SweepParam::Sigma => "sigma",
            SweepParam::R => "r",
            SweepParam::Delta => "delta",
        }
    }

    pub fn apply(self, p: ModelParams, value: f64) -> ModelParams {
        let mut p = p;
        match self {
            SweepParam::Alpha => p.alpha = value,
            SweepParam::Beta => p.beta = value,
            SweepParam::Mu => p.mu = value,
            SweepParam::Gamma => p.gamma = value,
            SweepParam::Sigma => p.sigma = value,
            SweepParam::R => p.r = value,
            SweepParam::Delta => p.delta = value,
        }
        p
    }

    /// Twenty evenly spaced points for the cost weights and the drift.
    fn default_grid(self) -> Option<Vec<f64>> {
        let (lo, hi) = match self {
            SweepParam::Alpha | SweepParam::Beta => (0.1, 3.0),
            SweepParam::Mu => (0.10, 0.155),
            _ => return None,
        };
        Some((0..20).map(|k| lo + (hi - lo) * k as f64 / 19.0).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct RunConfig {
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
    pub delta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub x: f64,
    pub h1: f64,
    pub h2: f64,
    pub sweep_param: SweepParam,
    /// Empty selects the default grid of `sweep_param`.
    pub sweep_grid: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub antithetic: bool,
    pub refinements: usize,
    pub burn_in: f64,
    pub max_stored_samples: usize,
    /// Number of evenly spaced times reported by `simulate`.
    pub report_points: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    /// Significant digits of every emitted number.
    pub precision: usize,
    /// Added to the solved `z_alpha`; a hook for checking that `verify` fails.
    pub perturb_z_alpha: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ModelParams::BASELINE;
        let s = SimConfig::default();
        RunConfig {
            r: p.r,
            mu: p.mu,
            sigma: p.sigma,
            delta: p.delta,
            gamma: p.gamma,
            alpha: p.alpha,
            beta: p.beta,
            x: 5.0,
            h1: 1.0,
            h2: 0.2,
            sweep_param: SweepParam::Alpha,
            sweep_grid: Vec::new(),
            horizon: s.horizon,
            dt: s.dt,
            n_paths: s.n_paths,
            seed: s.seed,
            antithetic: s.antithetic,
            refinements: s.refinements,
            burn_in: s.burn_in,
            max_stored_samples: s.max_stored_samples,
            report_points: 10,
            out: None,
            format: Format::Csv,
            precision: 10,
            perturb_z_alpha: 0.0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("invalid config {}: {e}", path.display())))
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            r: self.r,
            mu: self.mu,
            sigma: self.sigma,
            delta: self.delta,
            gamma: self.gamma,
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            horizon: self.horizon,
            dt: self.dt,
            n_paths: self.n_paths,
            seed: self.seed,
            antithetic: self.antithetic,
            refinements: self.refinements,
            burn_in: self.burn_in,
            max_stored_samples: self.max_stored_samples,
        }
    }

    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        if !self.sweep_grid.is_empty() {
            return Ok(self.sweep_grid.clone());
        }
        self.sweep_param.default_grid().ok_or_else(|| {
            CliError::Validation(format!("sweep-grid is required when sweeping {}", self.sweep_param.name()))
        })
    }

    /// Checks that do not need a solved model.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Validation(msg));
        if !(6..=17).contains(&self.precision) {
            return bad(format!("precision must lie in [6, 17], got {}", self.precision));
        }
        if self.sweep_grid.iter().any(|v| !v.is_finite()) {
            return bad("sweep-grid values must be finite".into());
        }
        if let Some(w) = self.sweep_grid.windows(2).find(|w| w[1] <= w[0]) {
            return bad(format!("sweep-grid must be strictly increasing, found {} then {}", w[0], w[1]));
        }
        if !(self.x >= 0.0 && self.x.is_finite()) {
            return bad(format!("wealth x must be finite and non-negative, got {}", self.x));
        }
        if !(self.h2 > 0.0 && self.h1 >= self.h2 && self.h1.is_finite()) {
            return bad(format!("references must satisfy h1 >= h2 > 0, got h1 = {}, h2 = {}", self.h1, self.h2));
        }
        if self.report_points == 0 {
            return bad("report-points must be positive".into());
        }
        if !self.perturb_z_alpha.is_finite() {
            return bad("perturb-z-alpha must be finite".into());
        }
        self.sim().validate().map_err(CliError::from)
    }
}
