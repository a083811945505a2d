//! Drives the compiled binary end to end.

mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use common::*;
use replica_risk::cli::{
    parse_config, EXPERIMENT_HEADER, PORTFOLIO_HEADER, PREDICT_HEADER, SOLVE_HEADER,
};

const BIN: &str = env!("CARGO_BIN_EXE_replica-risk");

fn write_config(
    dir: &Path,
    name: &str,
    n: usize,
    p: usize,
    grid: &str,
    trials: usize,
    seed: u64,
) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(
        &path,
        format!(
            "# test scenario\n\
             n_assets = {n}\n\
             n_periods = {p}\n\
             cost_coefficient = 1.0\n\
             return_grid = {grid}\n\
             pareto_r_exponent = 2\npareto_r_lower = 1\npareto_r_upper = 2\n\
             pareto_h_exponent = 2\npareto_h_lower = 1\npareto_h_upper = 2\n\
             n_trials = {trials}\n\
             master_seed = {seed}\n"
        ),
    )
    .unwrap();
    path
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn data_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('R'))
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn header_value(text: &str, key: &str) -> f64 {
    let prefix = format!("# {key},");
    text.lines()
        .find_map(|l| l.strip_prefix(prefix.as_str()))
        .unwrap_or_else(|| panic!("missing {key}"))
        .parse()
        .unwrap()
}

#[test]
fn reference_config_file_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/reference.cfg");
    let cfg = parse_config(&path).unwrap();
    assert_eq!(
        (cfg.n_assets, cfg.n_periods, cfg.n_trials),
        (1000, 2000, 100)
    );
    assert_eq!(cfg.cost_coefficient, 1.0);
    assert_eq!(cfg.pareto_r, unit_pareto());
    assert_eq!(cfg.pareto_h, unit_pareto());
}

#[test]
fn predict_analytic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.cfg", 50, 100, "1.0,1.5,2.0,2.5,3.0", 2, 1);
    let out = dir.path().join("predict.csv");
    let o = run(&[
        "predict",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--moments",
        "analytic",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().any(|l| l == PREDICT_HEADER));
    assert!((header_value(&text, "R0") - 1.5).abs() < 1e-12);
    assert!((header_value(&text, "V") - 0.75).abs() < 1e-12);
    assert!((header_value(&text, "R_star") - 3.0).abs() < 1e-12);
    assert!(header_value(&text, "pythagorean_residual").abs() < 1e-12);
    let rows = data_rows(&text);
    // Vertex value (alpha - 1) C^2 / (2 m_cc) = 1 / (2 * 0.25).
    assert!((rows[1][1] - 2.0).abs() < 1e-12);
    for row in &rows {
        assert_eq!(row[4], 2.0);
    }
    // Sharpe peaks at the last grid point, which is R* here.
    let best = rows.iter().max_by(|a, b| a[2].total_cmp(&b[2])).unwrap();
    assert_eq!(best[0], 3.0);
}

#[test]
fn predict_empirical_has_constant_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.cfg", 40, 60, "1.0,1.25,1.5,1.75", 2, 5);
    let out = dir.path().join("predict.csv");
    let o = run(&[
        "predict",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let rows = data_rows(&std::fs::read_to_string(&out).unwrap());
    for row in &rows {
        assert!((row[4] - 40.0 * 1.5 / 20.0).abs() < 1e-12);
    }
}

#[test]
fn solve_outputs_feasible_and_recomputable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), "s.cfg", 30, 80, "1.2,1.7", 1, 44);
    let out = dir.path().join("solve.csv");
    let o = run(&[
        "solve",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(&out).unwrap();
    assert_eq!(summary.lines().next().unwrap(), SOLVE_HEADER);
    let portfolio_path = dir.path().join("solve.portfolio.csv");
    let portfolio = std::fs::read_to_string(&portfolio_path).unwrap();
    assert_eq!(portfolio.lines().next().unwrap(), PORTFOLIO_HEADER);

    // Independent recomputation: rebuild J from the same seed and evaluate
    // (1/2N) w^T J w with a double loop.
    let cfg = parse_config(&cfg_path).unwrap();
    let (_, j) = draw(&cfg, 0);
    for row in data_rows(&summary) {
        let (r, eps) = (row[0], row[1]);
        assert!((row[5] - 1.0).abs() < 1e-8);
        assert!((row[6] - r).abs() < 1e-8 * r.abs().max(1.0));
        let w: Vec<f64> = portfolio
            .lines()
            .skip(1)
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|f| f[0].parse::<f64>().unwrap() == r)
            .map(|f| f[2].parse().unwrap())
            .collect();
        assert_eq!(w.len(), 30);
        assert!(rel(naive_risk(j.entries(), &w), eps) < 1e-10);
    }

    // Same seed, same files.
    let again = dir.path().join("again.csv");
    let o = run(&[
        "solve",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(
        std::fs::read(&portfolio_path).unwrap(),
        std::fs::read(dir.path().join("again.portfolio.csv")).unwrap()
    );
}

#[test]
fn experiment_csv_and_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "e.cfg", 60, 120, "1.0,1.5,2.0", 12, 8);
    let out = dir.path().join("exp.csv");
    let o = run(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--no-verdict-gate",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), EXPERIMENT_HEADER);
    assert_eq!(data_rows(&text).len(), 3);
    assert!(text.lines().any(|l| l.starts_with("# verdict,")));

    // A different seed through --seed changes the output.
    let other = dir.path().join("exp2.csv");
    let o = run(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        other.to_str().unwrap(),
        "--seed",
        "9",
        "--no-verdict-gate",
    ]);
    assert!(o.status.success());
    assert_ne!(std::fs::read(&out).unwrap(), std::fs::read(&other).unwrap());
}

#[test]
fn experiment_rejects_single_trial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "e.cfg", 10, 30, "1.0,1.5", 1, 8);
    let out = dir.path().join("exp.csv");
    let o = run(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 2 trials"));
}

#[test]
fn invalid_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", 10, 10, "1.0", 2, 8);
    let out = dir.path().join("x.csv");
    let o = run(&[
        "predict",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_periods"));
}
