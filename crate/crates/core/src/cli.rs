//! Configuration parsing and the `predict`, `solve` and `experiment`
//! commands. Commands write CSV to any `io::Write`; `main.rs` only wires
//! arguments and files.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::{
    compare_report, run_experiment_with, ExperimentOptions, MomentsMode, Verdict,
};
use crate::market::PopulationMoments;
use crate::replica::{annealed_risk, quenched_risk, sharpe_geometry, Axis};
use crate::scenario::{
    generate_population, generate_returns, trial_rng, wishart, ParetoSpec, ScenarioConfig,
};
use crate::solver::{portfolio_risk, sharpe_ratio, ExactSolver};

/// Column header of the experiment CSV.
pub const EXPERIMENT_HEADER: &str =
    "R,mean_epsilon,stderr_epsilon,mean_sharpe,stderr_sharpe,predicted_epsilon,predicted_sharpe,deviation_sigma";

/// Column header of the predict CSV.
pub const PREDICT_HEADER: &str = "R,epsilon_replica,sharpe_replica,epsilon_annealed,kappa";

/// Column header of the solve summary CSV.
pub const SOLVE_HEADER: &str =
    "R,epsilon,sharpe,k_star,theta_star,achieved_cost,achieved_return,epsilon_recomputed";

/// Column header of the portfolio file written by `solve`.
pub const PORTFOLIO_HEADER: &str = "R,index,weight";

const REQUIRED_KEYS: [&str; 12] = [
    "n_assets",
    "n_periods",
    "cost_coefficient",
    "return_grid",
    "pareto_r_exponent",
    "pareto_r_lower",
    "pareto_r_upper",
    "pareto_h_exponent",
    "pareto_h_lower",
    "pareto_h_upper",
    "n_trials",
    "master_seed",
];

/// 17 significant digits, scientific notation, `.` decimal point.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text, path)
}

/// Parses `key = value` lines; `#` starts a comment. `origin` is only used
/// in diagnostics.
pub fn parse_config_str(text: &str, origin: &Path) -> Result<ScenarioConfig> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut values: HashMap<&str, (usize, &str)> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let value = value.trim();
        if !REQUIRED_KEYS.contains(&key) {
            return Err(parse_err(line_no, format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(parse_err(line_no, format!("empty value for `{key}`")));
        }
        if let Some((first, _)) = values.insert(key, (line_no, value)) {
            return Err(parse_err(
                line_no,
                format!("duplicate key `{key}` (first set on line {first})"),
            ));
        }
    }
    if let Some(missing) = REQUIRED_KEYS.iter().find(|k| !values.contains_key(*k)) {
        return Err(Error::InvalidConfig(format!(
            "{}: missing required key `{missing}`",
            origin.display()
        )));
    }

    fn field<T: std::str::FromStr>(
        values: &HashMap<&str, (usize, &str)>,
        key: &str,
        origin: &Path,
    ) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let (line, raw) = values[key];
        raw.parse::<T>().map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message: format!("`{key}`: cannot parse `{raw}`: {e}"),
        })
    }
    let f = |k: &str| field::<f64>(&values, k, origin);
    let u = |k: &str| field::<usize>(&values, k, origin);

    let (grid_line, grid_raw) = values["return_grid"];
    let return_grid = grid_raw
        .split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|e| {
                parse_err(
                    grid_line,
                    format!("`return_grid`: cannot parse `{}`: {e}", s.trim()),
                )
            })
        })
        .collect::<Result<Vec<f64>>>()?;

    let pareto = |prefix: &str| -> Result<ParetoSpec> {
        let key = format!("{prefix}_exponent");
        let line = values[key.as_str()].0;
        ParetoSpec::new(
            f(&key)?,
            f(&format!("{prefix}_lower"))?,
            f(&format!("{prefix}_upper"))?,
        )
        .map_err(|e| parse_err(line, format!("{prefix}: {e}")))
    };

    let cfg = ScenarioConfig {
        n_assets: u("n_assets")?,
        n_periods: u("n_periods")?,
        cost_coefficient: f("cost_coefficient")?,
        return_grid,
        pareto_r: pareto("pareto_r")?,
        pareto_h: pareto("pareto_h")?,
        n_trials: u("n_trials")?,
        master_seed: field::<u64>(&values, "master_seed", origin)?,
    };
    cfg.validate().map_err(|e| match e {
        Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{}: {msg}", origin.display())),
        other => other,
    })?;
    Ok(cfg)
}

/// Moments for `predict`: analytic from the generating distributions, or
/// from the population drawn for trial 0.
pub fn prediction_moments(cfg: &ScenarioConfig, mode: MomentsMode) -> Result<PopulationMoments> {
    match mode {
        MomentsMode::Analytic => Ok(cfg.analytic_moments()),
        MomentsMode::Empirical => {
            let mut rng = trial_rng(cfg.master_seed, 0);
            Ok(generate_population(cfg, &mut rng)?.moments())
        }
    }
}

pub fn cmd_predict<W: Write>(cfg: &ScenarioConfig, mode: MomentsMode, out: &mut W) -> Result<()> {
    let m = prediction_moments(cfg, mode)?;
    let alpha = cfg.alpha();
    let c = cfg.cost_coefficient;
    let vertex = quenched_risk(&m, alpha, c, c)?.coefficients;
    let geometry = match sharpe_geometry(&m, alpha, c, Axis::ByReturn) {
        Ok(g) => Some(g),
        Err(Error::VertexAtOrigin) => None,
        Err(e) => return Err(e),
    };
    let nan = f64::NAN;
    let header: [(&str, f64); 7] = [
        ("R0", vertex.r0),
        ("V", vertex.v_big),
        ("R_star", geometry.map_or(nan, |g| g.argmax)),
        ("S2_max", geometry.map_or(nan, |g| g.s2_max)),
        ("S2_min_point", geometry.map_or(nan, |g| g.s2_at_risk_min)),
        ("S2_max_point", geometry.map_or(nan, |g| g.s2_at_risk_max)),
        (
            "pythagorean_residual",
            geometry.map_or(nan, |g| g.pythagorean_residual),
        ),
    ];
    for (k, v) in header {
        writeln!(out, "# {k},{}", fmt_f64(v))?;
    }
    writeln!(out, "{PREDICT_HEADER}")?;
    for &r in &cfg.return_grid {
        let eps = quenched_risk(&m, alpha, c, r)?.risk_per_asset;
        let sharpe = sharpe_ratio(r, c, eps).unwrap_or(nan);
        let eps_or = annealed_risk(&m, alpha, c, r)?;
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r),
            fmt_f64(eps),
            fmt_f64(sharpe),
            fmt_f64(eps_or),
            fmt_f64(eps_or / eps)
        )?;
    }
    Ok(())
}

/// One draw (trial 0 of the master seed), one exact solve per grid point.
/// Writes the summary to `out` and `index,weight` rows to `portfolio`.
pub fn cmd_solve<W: Write, P: Write>(
    cfg: &ScenarioConfig,
    out: &mut W,
    portfolio: &mut P,
) -> Result<()> {
    let mut rng = trial_rng(cfg.master_seed, 0);
    let pop = generate_population(cfg, &mut rng)?;
    let x = generate_returns(&pop, cfg.n_periods, &mut rng)?;
    let j = wishart(&x);
    let solver = ExactSolver::new(&j, &pop)?;
    let c = cfg.cost_coefficient;
    writeln!(out, "{SOLVE_HEADER}")?;
    writeln!(portfolio, "{PORTFOLIO_HEADER}")?;
    for &r in &cfg.return_grid {
        let s = solver.solve(c, r)?;
        let sharpe = sharpe_ratio(r, c, s.risk_per_asset).unwrap_or(f64::NAN);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(r),
            fmt_f64(s.risk_per_asset),
            fmt_f64(sharpe),
            fmt_f64(s.k_star),
            fmt_f64(s.theta_star),
            fmt_f64(s.achieved_cost),
            fmt_f64(s.achieved_return),
            fmt_f64(portfolio_risk(&j, &s.portfolio)),
        )?;
        for (i, w) in s.portfolio.iter().enumerate() {
            writeln!(portfolio, "{},{i},{}", fmt_f64(r), fmt_f64(*w))?;
        }
    }
    Ok(())
}

/// Runs the experiment, writes the CSV, and returns the verdict.
pub fn cmd_experiment<W: Write>(
    cfg: &ScenarioConfig,
    opts: ExperimentOptions,
    out: &mut W,
) -> Result<Verdict> {
    let agg = run_experiment_with(cfg, opts)?;
    let report = compare_report(&agg);
    writeln!(out, "{EXPERIMENT_HEADER}")?;
    for (p, row) in agg.per_return_point.iter().zip(&report.rows) {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(p.return_coefficient),
            fmt_f64(p.mean_epsilon),
            fmt_f64(p.stderr_epsilon),
            fmt_f64(p.mean_sharpe),
            fmt_f64(p.stderr_sharpe),
            fmt_f64(p.predicted_epsilon),
            fmt_f64(p.predicted_sharpe),
            fmt_f64(row.deviation_sigma),
        )?;
    }
    writeln!(out, "# R_min,{}", fmt_f64(agg.r0))?;
    writeln!(out, "# vertex_epsilon,{}", fmt_f64(agg.vertex_line))?;
    writeln!(out, "# R_star,{}", fmt_f64(agg.r_star))?;
    writeln!(out, "# max_sharpe,{}", fmt_f64(agg.sharpe_line))?;
    writeln!(out, "# kappa_hat,{}", fmt_f64(report.kappa_hat))?;
    writeln!(out, "# kappa_expected,{}", fmt_f64(report.kappa_expected))?;
    writeln!(out, "# n_trials,{}", agg.n_trials)?;
    writeln!(out, "# n_trials_failed,{}", agg.n_trials_failed)?;
    writeln!(out, "# verdict,{}", report.verdict)?;
    Ok(report.verdict)
}

/// Default portfolio path for `solve`: `<out>` with a `.portfolio.csv`
/// extension.
pub fn default_portfolio_path(out: &Path) -> PathBuf {
    out.with_extension("portfolio.csv")
}
