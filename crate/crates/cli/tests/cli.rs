use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let Output { status, stdout, stderr } =
        Command::new(env!("CARGO_BIN_EXE_peakvalley")).args(args).output().expect("binary runs");
    Run {
        code: status.code().expect("exited normally"),
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

fn config(dir: &TempDir, name: &str, json: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, json).unwrap();
    path
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Numeric columns of a CSV document by header name.
fn columns(csv_text: &str) -> Vec<(String, Vec<String>)> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let headers: Vec<String> = r.headers().unwrap().iter().map(str::to_string).collect();
    let mut cols: Vec<(String, Vec<String>)> = headers.into_iter().map(|h| (h, Vec::new())).collect();
    for rec in r.records() {
        for (col, field) in cols.iter_mut().zip(rec.unwrap().iter()) {
            col.1.push(field.to_string());
        }
    }
    cols
}

fn column(csv_text: &str, name: &str) -> Vec<f64> {
    columns(csv_text)
        .into_iter()
        .find(|(h, _)| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
        .1
        .iter()
        .map(|s| s.parse().unwrap())
        .collect()
}

fn solve_value(csv_text: &str, quantity: &str) -> f64 {
    let cols = columns(csv_text);
    let i = cols[0].1.iter().position(|q| q == quantity).unwrap_or_else(|| panic!("no {quantity}"));
    cols[1].1[i].parse().unwrap()
}

fn increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

fn decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

#[test]
fn solve_reports_baseline_boundaries() {
    let r = run(&["solve"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rel = |q: &str, want: f64| (solve_value(&r.stdout, q) / want - 1.0).abs();
    assert!(rel("x_gloom", 1.0947548529308665) < 1e-9);
    assert!(rel("x_lavs", 55.799854210034135) < 1e-9);
    assert!(r.stderr.contains("interior region"));
    assert!(!r.stderr.contains("Merton degenerate"));
}

#[test]
fn solve_flags_merton_degeneration() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "m.json", r#"{"alpha": 0, "beta": 0}"#);
    let r = run(&["solve", "--config", arg(&cfg), "--format", "json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.contains("Merton degenerate: boundaries coincide"));
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert!(v["notes"].as_array().unwrap().iter().any(|n| n == "Merton degenerate: boundaries coincide"));
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = TempDir::new().unwrap();
    for (name, json, needle) in [
        ("gamma.json", r#"{"gamma": 1.0}"#, "AssumptionViolation"),
        ("k0.json", r#"{"gamma": 0.3, "mu": 0.155}"#, "AssumptionViolation(K0 > 0)"),
        ("unknown.json", r#"{"theta": 1.0}"#, "unknown field"),
        ("precision.json", r#"{"precision": 5}"#, "precision"),
        ("grid.json", r#"{"sweep-grid": [0.1, 0.2, 0.2]}"#, "strictly increasing"),
        ("refs.json", r#"{"h1": 0.1, "h2": 0.2}"#, "h1 >= h2"),
    ] {
        let cfg = config(&dir, name, json);
        let r = run(&["solve", "--config", arg(&cfg)]);
        assert_eq!(r.code, 2, "{name}: {}", r.stderr);
        assert!(r.stderr.contains(needle), "{name}: {}", r.stderr);
    }
    let r = run(&["solve", "--config", "/nonexistent/config.json"]);
    assert_eq!(r.code, 2);
    assert_eq!(run(&["solve", "--format", "xml"]).code, 2);
}

#[test]
fn sweeps_have_the_expected_orderings() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep.csv");
    let r = run(&["sweep", "--out", arg(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let a = std::fs::read_to_string(&out).unwrap();
    assert_eq!(a.lines().next().unwrap(), "alpha,x_gloom,x_valy,x_peak,x_lavs,u,c_star,pi_star,region");
    assert_eq!(a.lines().count(), 21);
    assert!(increasing(&column(&a, "x_lavs")));
    for c in ["x_gloom", "x_valy", "x_peak", "u"] {
        assert!(decreasing(&column(&a, c)), "alpha sweep {c}");
    }

    let cfg = config(&dir, "beta.json", r#"{"sweep-param": "beta"}"#);
    let b = run(&["sweep", "--config", arg(&cfg)]).stdout;
    assert!(decreasing(&column(&b, "x_gloom")));
    for c in ["x_valy", "x_peak", "x_lavs"] {
        assert!(increasing(&column(&b, c)), "beta sweep {c}");
    }

    let cfg = config(&dir, "mu.json", r#"{"sweep-param": "mu", "sweep-grid": [0.11, 0.12, 0.13, 0.14, 0.15]}"#);
    let m = run(&["sweep", "--config", arg(&cfg)]).stdout;
    for c in ["x_gloom", "x_valy", "x_peak", "x_lavs", "u"] {
        assert!(increasing(&column(&m, c)), "mu sweep {c}");
    }
}

#[test]
fn verify_passes_at_baseline_and_fails_with_a_shifted_root() {
    let r = run(&["verify"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(column(&r.stdout, "value").iter().all(|v| v.is_finite()));

    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "bad.json", r#"{"perturb-z-alpha": 1e-3}"#);
    let r = run(&["verify", "--config", arg(&cfg)]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("verification failed at"), "{}", r.stderr);
    let cols = columns(&r.stdout);
    let failing_hjb = cols[0].1.iter().zip(&cols[4].1).any(|(suite, passed)| suite == "hjb" && passed == "false");
    assert!(failing_hjb, "{}", r.stdout);
}

#[test]
fn longrun_without_peak_cost_spends_no_time_at_the_peak() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "a0.json", r#"{"alpha": 0}"#);
    let r = run(&["longrun", "--config", arg(&cfg), "--paths", "200", "--horizon", "50"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let cols = columns(&r.stdout);
    let i = cols[0].1.iter().position(|s| s == "peak_fraction").unwrap();
    let get = |c: usize| cols[c].1[i].parse::<f64>().unwrap();
    let (est, se, cf) = (get(1), get(2), get(3));
    assert_eq!(cf, 0.0);
    assert!((est - cf).abs() <= 2.0 * se);
}

#[test]
fn outputs_are_byte_stable_and_flags_override_the_config() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "sim.json", r#"{"n-paths": 5, "horizon": 2.0, "dt": 0.05, "report-points": 4}"#);
    let paths = |name: &str| dir.path().join(name);
    let sim = |out: &Path, seed: &str| {
        let r = run(&["simulate", "--config", arg(&cfg), "--paths", "64", "--seed", seed, "--out", arg(out)]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        assert!(r.stderr.contains("64 paths"), "{}", r.stderr);
        std::fs::read(out).unwrap()
    };
    let one = sim(&paths("a.csv"), "11");
    assert_eq!(one, sim(&paths("b.csv"), "11"));
    assert_ne!(one, sim(&paths("c.csv"), "12"));

    let r = run(&["simulate", "--config", arg(&cfg), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    assert!(v["rows"][0]["var_diff"].is_number());
}
