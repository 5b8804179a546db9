use peakvalley::model::{Model, ModelParams};
use peakvalley::primal::PrimalSolution;
use peakvalley::simulate::{long_run_stats, utility_moments, Comparison};
use peakvalley::verify;

use crate::config::RunConfig;
use crate::table::{Cell, Table};
use crate::CliError;

const MERTON_NOTE: &str = "Merton degenerate: boundaries coincide";

/// Model from the configured parameters, with the optional `z_alpha` shift.
pub fn build_model(params: ModelParams, perturb_z_alpha: f64) -> Result<Model, CliError> {
    let model = Model::new(params)?;
    if perturb_z_alpha == 0.0 {
        return Ok(model);
    }
    let mut c = *model.constants();
    c.z_alpha += perturb_z_alpha;
    Ok(Model::from_parts(*model.params(), c))
}

/// Text printed to stderr next to the machine-readable output.
pub struct Output {
    pub table: Table,
    pub summary: Vec<String>,
}

pub fn solve(cfg: &RunConfig) -> Result<Output, CliError> {
    let model = build_model(cfg.params(), cfg.perturb_z_alpha)?;
    let primal = PrimalSolution::new(model);
    let (h1, h2, x) = (cfg.h1, cfg.h2, cfg.x);
    let c = model.constants();
    let coef = primal.dual().coefficients(h1, h2)?;
    let b = primal.boundaries(h1, h2)?;
    let pol = primal.policy(x, h1, h2)?;
    let u = primal.value(x, h1, h2)?;

    let mut t = Table::new("solve", &["quantity", "value"]);
    let mut row = |name: &str, v: f64| t.push(vec![name.into(), v.into()]);
    for (name, v) in [
        ("kappa", c.kappa),
        ("gamma_star", c.gamma_star),
        ("m1", c.m1),
        ("m2", c.m2),
        ("k0", c.k0),
        ("z_alpha", c.z_alpha),
        ("z_beta", c.z_beta),
        ("merton_c_ratio", c.merton_c_ratio),
        ("merton_pi_ratio", c.merton_pi_ratio),
    ] {
        row(name, v);
    }
    for (i, v) in coef.c.iter().enumerate() {
        row(&format!("c{}", i + 1), *v);
    }
    for (name, v) in [
        ("x_gloom", b.x_gloom),
        ("x_valy", b.x_valy),
        ("x_peak", b.x_peak),
        ("x_lavs", b.x_lavs),
        ("x", x),
        ("h1", h1),
        ("h2", h2),
        ("f", pol.dual_state),
        ("c_star", pol.consumption),
        ("pi_star", pol.portfolio),
        ("u", u),
        ("new_h1", pol.new_h1),
        ("new_h2", pol.new_h2),
    ] {
        row(name, v);
    }
    t.notes.push(format!("region: {}", pol.region.name()));
    if model.is_merton() {
        t.notes.push(MERTON_NOTE.into());
    }

    let mut summary = vec![
        format!("roots m1 = {:.6}, m2 = {:.6}; z_alpha = {:.6}, z_beta = {:.6}", c.m1, c.m2, c.z_alpha, c.z_beta),
        format!(
            "boundaries at (h1, h2) = ({h1}, {h2}): x_gloom {:.6}, x_valy {:.6}, x_peak {:.6}, x_lavs {:.6}",
            b.x_gloom, b.x_valy, b.x_peak, b.x_lavs
        ),
        format!(
            "at x = {x}: {} region, c* = {:.6}, pi* = {:.6}, u = {:.6}, f = {:.6}",
            pol.region.name(),
            pol.consumption,
            pol.portfolio,
            u,
            pol.dual_state
        ),
    ];
    if model.is_merton() {
        summary.push(MERTON_NOTE.into());
    }
    Ok(Output { table: t, summary })
}

pub fn sweep(cfg: &RunConfig) -> Result<Output, CliError> {
    let axis = cfg.sweep_param;
    let grid = cfg.grid()?;
    let mut t = Table::new(
        "sweep",
        &[axis.name(), "x_gloom", "x_valy", "x_peak", "x_lavs", "u", "c_star", "pi_star", "region"],
    );
    for v in &grid {
        let primal = PrimalSolution::new(build_model(axis.apply(cfg.params(), *v), cfg.perturb_z_alpha)?);
        let b = primal.boundaries(cfg.h1, cfg.h2)?;
        let pol = primal.policy(cfg.x, cfg.h1, cfg.h2)?;
        let u = primal.value(cfg.x, cfg.h1, cfg.h2)?;
        t.push(vec![
            (*v).into(),
            b.x_gloom.into(),
            b.x_valy.into(),
            b.x_peak.into(),
            b.x_lavs.into(),
            u.into(),
            pol.consumption.into(),
            pol.portfolio.into(),
            pol.region.name().into(),
        ]);
    }
    let summary = vec![format!("swept {} over {} points at x = {}, h1 = {}, h2 = {}", axis.name(), grid.len(), cfg.x, cfg.h1, cfg.h2)];
    Ok(Output { table: t, summary })
}

pub fn simulate(cfg: &RunConfig) -> Result<Output, CliError> {
    let primal = PrimalSolution::new(build_model(cfg.params(), cfg.perturb_z_alpha)?);
    let m = utility_moments(&primal, cfg.x, cfg.h1, cfg.h2, &cfg.sim(), cfg.report_points)?;
    let mut t = Table::new(
        "simulate",
        &[
            "time",
            "mean",
            "mean_se",
            "variance",
            "merton_mean",
            "merton_mean_se",
            "merton_variance",
            "mean_diff",
            "mean_diff_se",
            "var_diff",
            "var_diff_se",
        ],
    );
    for i in 0..m.ours.len() {
        let (o, mm, dm, dv) = (m.ours[i], m.merton[i], m.mean_diff[i], m.var_diff[i]);
        t.push(
            [o.time, o.mean, o.mean_se, o.variance, mm.mean, mm.mean_se, mm.variance, dm.mean, dm.std_error, dv.mean, dv.std_error]
                .into_iter()
                .map(Cell::from)
                .collect(),
        );
    }
    let sim = cfg.sim();
    let summary = vec![format!(
        "{} paths, {} steps of {:.6} up to T = {}, seed {}",
        sim.n_paths,
        sim.steps(),
        sim.effective_dt(),
        sim.horizon,
        sim.seed
    )];
    Ok(Output { table: t, summary })
}

pub fn longrun(cfg: &RunConfig) -> Result<Output, CliError> {
    let primal = PrimalSolution::new(build_model(cfg.params(), cfg.perturb_z_alpha)?);
    let r = long_run_stats(&primal, cfg.x, cfg.h1, cfg.h2, &cfg.sim())?;
    let mut t = Table::new(
        "longrun",
        &["statistic", "estimate", "std_error", "closed_form", "z_score", "mean_dt", "mean_4dt", "mean_16dt"],
    );
    let mut push = |name: &str, c: &Comparison| {
        let level = |j: usize| Cell::from(c.level_means.get(j).copied());
        t.push(vec![
            name.into(),
            c.estimate.mean.into(),
            c.estimate.std_error.into(),
            c.closed_form.into(),
            c.estimate.z_score(c.closed_form).into(),
            level(0),
            level(1),
            level(2),
        ]);
    };
    push("peak_fraction", &r.peak_fraction);
    push("valley_fraction", &r.valley_fraction);
    push("p_gloom", &r.gloom.probability);
    if let Some(e) = &r.gloom.expected_time {
        push("e_tau_gloom", e);
    }
    push("p_lavs", &r.lavish.probability);
    if let Some(e) = &r.lavish.expected_time {
        push("e_tau_lavs", e);
    }
    t.notes.push(format!("drift of ln Y: {}", r.drift));
    t.notes.push(format!("occupation exponent: {}", r.exponent));
    t.notes.push(format!("censored paths: gloom {}, lavish {}", r.gloom.censored, r.lavish.censored));
    t.notes.extend(r.notes.iter().map(|n| n.to_string()));
    let mut summary = vec![format!(
        "peak fraction {:.6} +- {:.6} (closed form {:.6}); valley fraction {:.6} +- {:.6} (closed form {:.6})",
        r.peak_fraction.estimate.mean,
        r.peak_fraction.estimate.std_error,
        r.peak_fraction.closed_form,
        r.valley_fraction.estimate.mean,
        r.valley_fraction.estimate.std_error,
        r.valley_fraction.closed_form
    )];
    summary.extend(r.notes.iter().map(|n| n.to_string()));
    Ok(Output { table: t, summary })
}

/// The report, and the first failing check if any.
pub fn verify(cfg: &RunConfig) -> Result<(Output, Option<String>), CliError> {
    let report = verify::run_all(build_model(cfg.params(), cfg.perturb_z_alpha)?, cfg.h1, cfg.h2)?;
    let mut t = Table::new("verify", &["suite", "check", "value", "tolerance", "passed"]);
    let mut summary = Vec::new();
    for s in &report.suites {
        for c in &s.checks {
            t.push(vec![s.name.into(), c.name.as_str().into(), c.value.into(), c.tolerance.into(), c.passed.into()]);
        }
        let failed = s.checks.iter().filter(|c| !c.passed).count();
        summary.push(format!("{:<15} {}", s.name, if failed == 0 { "pass".to_string() } else { format!("FAIL ({failed} checks)") }));
    }
    let first = report
        .first_failure()
        .map(|(suite, c)| format!("{suite}: {} = {:e} exceeds tolerance {:e}", c.name, c.value, c.tolerance));
    Ok((Output { table: t, summary }, first))
}
