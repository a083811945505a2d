//! Monte Carlo protocol: draw a population and return paths, build `J`,
//! solve for the quenched optimum along a grid of return coefficients, and
//! compare trial averages with the replica predictions.
//!
//! Each trial draws from its own stream derived from `(master_seed,
//! trial_index)`, and aggregation folds trials in index order, so results do
//! not depend on how many threads ran them.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::PopulationMoments;
use crate::replica::{annealed_risk, cost_only_risk, quenched_risk, sharpe_geometry, Axis};
use crate::scenario::{generate_population, generate_returns, trial_rng, wishart, ScenarioConfig};
use crate::solver::{sharpe_ratio, ExactSolver, QuadraticForms};

/// Deviation (in standard errors) at or above which a grid point fails.
pub const SIGMA_BAND: f64 = 3.0;

/// Largest tolerated fraction of failed trials.
pub const MAX_FAILED_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnPoint {
    pub return_coefficient: f64,
    pub epsilon: f64,
    pub sharpe: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial_index: usize,
    pub moments: PopulationMoments,
    pub forms: QuadraticForms,
    pub per_return_point: Vec<ReturnPoint>,
}

impl TrialResult {
    /// Re-evaluates risk and Sharpe ratio on another grid from the stored
    /// quadratic forms. No new draws or solves are needed.
    pub fn reevaluate(
        &self,
        n_assets: usize,
        cost_coefficient: f64,
        grid: &[f64],
    ) -> Result<TrialResult> {
        Ok(TrialResult {
            per_return_point: evaluate_grid(&self.forms, n_assets, cost_coefficient, grid)?,
            ..self.clone()
        })
    }
}

fn evaluate_grid(
    forms: &QuadraticForms,
    n_assets: usize,
    cost_coefficient: f64,
    grid: &[f64],
) -> Result<Vec<ReturnPoint>> {
    grid.iter()
        .map(|&r| {
            let epsilon = forms.risk_per_asset(n_assets, cost_coefficient, r)?;
            let sharpe = sharpe_ratio(r, cost_coefficient, epsilon)?;
            Ok(ReturnPoint {
                return_coefficient: r,
                epsilon,
                sharpe,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPointSummary {
    pub return_coefficient: f64,
    pub mean_epsilon: f64,
    pub stderr_epsilon: f64,
    pub mean_sharpe: f64,
    pub stderr_sharpe: f64,
    pub predicted_epsilon: f64,
    pub predicted_sharpe: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub per_return_point: Vec<GridPointSummary>,
    /// Trials that succeeded and were aggregated.
    pub n_trials: usize,
    pub n_trials_failed: usize,
    pub alpha: f64,
    pub cost_coefficient: f64,
    /// Moments the predictions were computed from.
    pub moments: PopulationMoments,
    /// Risk vertex `R0` of the predicted parabola.
    pub r0: f64,
    /// Predicted `eps(R0)`.
    pub vertex_line: f64,
    /// Predicted Sharpe-ratio stationary point `R*`.
    pub r_star: f64,
    /// Predicted `S(R*)`.
    pub sharpe_line: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MomentsMode {
    /// Average of the drawn populations' finite-N moments.
    #[default]
    Empirical,
    /// Moments of the generating distributions.
    Analytic,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExperimentOptions {
    /// Worker threads; `None` uses the ambient rayon pool.
    pub threads: Option<usize>,
    pub moments_mode: MomentsMode,
}

pub fn run_trial(cfg: &ScenarioConfig, trial_index: usize) -> Result<TrialResult> {
    let tag = |e: Error| Error::TrialFailed {
        trial_index,
        source: Box::new(e),
    };
    let mut rng = trial_rng(cfg.master_seed, trial_index);
    let pop = generate_population(cfg, &mut rng).map_err(tag)?;
    let x = generate_returns(&pop, cfg.n_periods, &mut rng).map_err(tag)?;
    let j = wishart(&x);
    drop(x);
    let solver = ExactSolver::new(&j, &pop).map_err(tag)?;
    let forms = solver.forms();
    let mut points = Vec::with_capacity(cfg.return_grid.len());
    for &r in &cfg.return_grid {
        // Full solve so the constraint post-checks run on every grid point.
        let solution = solver.solve(cfg.cost_coefficient, r).map_err(tag)?;
        let sharpe = sharpe_ratio(r, cfg.cost_coefficient, solution.risk_per_asset).map_err(tag)?;
        points.push(ReturnPoint {
            return_coefficient: r,
            epsilon: solution.risk_per_asset,
            sharpe,
        });
    }
    Ok(TrialResult {
        trial_index,
        moments: pop.moments(),
        forms,
        per_return_point: points,
    })
}

pub fn run_experiment(cfg: &ScenarioConfig) -> Result<AggregateResult> {
    run_experiment_with(cfg, ExperimentOptions::default())
}

/// Runs every trial, returning the successful results in index order and
/// the number of failures.
pub fn run_trials(
    cfg: &ScenarioConfig,
    threads: Option<usize>,
) -> Result<(Vec<TrialResult>, usize)> {
    cfg.validate()?;
    log::info!(
        "running {} trials, N={}, p={}, {} grid points",
        cfg.n_trials,
        cfg.n_assets,
        cfg.n_periods,
        cfg.return_grid.len()
    );
    let work = || -> Vec<Result<TrialResult>> {
        (0..cfg.n_trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, t))
            .collect()
    };
    let outcomes = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut trials = Vec::with_capacity(outcomes.len());
    let mut failed = 0;
    for outcome in outcomes {
        match outcome {
            Ok(t) => trials.push(t),
            Err(e) => {
                log::warn!("{e}");
                failed += 1;
            }
        }
    }
    log::info!("{} trials succeeded, {failed} failed", trials.len());
    Ok((trials, failed))
}

pub fn run_experiment_with(
    cfg: &ScenarioConfig,
    opts: ExperimentOptions,
) -> Result<AggregateResult> {
    if cfg.n_trials < 2 {
        return Err(Error::InvalidConfig(
            "an experiment needs at least 2 trials for a standard error".into(),
        ));
    }
    let (trials, failed) = run_trials(cfg, opts.threads)?;
    aggregate(cfg, &trials, failed, opts.moments_mode)
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let ss: f64 = values.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt() / n.sqrt())
}

/// Folds trial results (sorted by index, whatever order they arrive in)
/// into per-grid-point means and attaches replica predictions.
pub fn aggregate(
    cfg: &ScenarioConfig,
    trials: &[TrialResult],
    n_failed: usize,
    mode: MomentsMode,
) -> Result<AggregateResult> {
    let total = trials.len() + n_failed;
    if trials.is_empty() || n_failed as f64 > MAX_FAILED_FRACTION * total as f64 {
        return Err(Error::ExperimentFailed {
            failed: n_failed,
            total,
        });
    }
    let mut ordered: Vec<&TrialResult> = trials.iter().collect();
    ordered.sort_by_key(|t| t.trial_index);

    let moments = match mode {
        MomentsMode::Empirical => {
            PopulationMoments::mean(ordered.iter().map(|t| &t.moments)).expect("at least one trial")
        }
        MomentsMode::Analytic => cfg.analytic_moments(),
    };
    let alpha = cfg.alpha();
    let c = cfg.cost_coefficient;

    let n_points = ordered[0].per_return_point.len();
    let mut per_return_point = Vec::with_capacity(n_points);
    for k in 0..n_points {
        let r = ordered[0].per_return_point[k].return_coefficient;
        let eps: Vec<f64> = ordered
            .iter()
            .map(|t| t.per_return_point[k].epsilon)
            .collect();
        let sharpe: Vec<f64> = ordered
            .iter()
            .map(|t| t.per_return_point[k].sharpe)
            .collect();
        let (mean_epsilon, stderr_epsilon) = mean_and_stderr(&eps);
        let (mean_sharpe, stderr_sharpe) = mean_and_stderr(&sharpe);
        let predicted_epsilon = quenched_risk(&moments, alpha, c, r)?.risk_per_asset;
        let predicted_sharpe = sharpe_ratio(r, c, predicted_epsilon).unwrap_or(f64::NAN);
        per_return_point.push(GridPointSummary {
            return_coefficient: r,
            mean_epsilon,
            stderr_epsilon,
            mean_sharpe,
            stderr_sharpe,
            predicted_epsilon,
            predicted_sharpe,
        });
    }

    let r0 = quenched_risk(&moments, alpha, c, c)?.coefficients.r0;
    let vertex_line = cost_only_risk(&moments, alpha, c)?;
    let (r_star, sharpe_line) = match sharpe_geometry(&moments, alpha, c, Axis::ByReturn) {
        Ok(g) => {
            let eps = quenched_risk(&moments, alpha, c, g.argmax)?.risk_per_asset;
            (g.argmax, sharpe_ratio(g.argmax, c, eps).unwrap_or(f64::NAN))
        }
        Err(Error::VertexAtOrigin) => (f64::NAN, f64::NAN),
        Err(e) => return Err(e),
    };

    Ok(AggregateResult {
        per_return_point,
        n_trials: ordered.len(),
        n_trials_failed: n_failed,
        alpha,
        cost_coefficient: c,
        moments,
        r0,
        vertex_line,
        r_star,
        sharpe_line,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Inconsistent,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Consistent => "consistent",
            Verdict::Inconsistent => "inconsistent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub return_coefficient: f64,
    pub deviation_epsilon: f64,
    pub deviation_sharpe: f64,
    /// Larger of the two absolute deviations.
    pub deviation_sigma: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub verdict: Verdict,
    /// `eps_OR / mean eps` at the grid point nearest the vertex.
    pub kappa_hat: f64,
    pub kappa_expected: f64,
}

/// `(mean - predicted) / stderr`, with an exact match on a zero-spread
/// column (e.g. `S` at `R = C`) counting as zero deviation.
pub fn deviation_in_sigma(mean: f64, stderr: f64, predicted: f64) -> f64 {
    let diff = mean - predicted;
    if stderr > 0.0 {
        diff / stderr
    } else if diff.abs() <= 1e-12 * mean.abs().max(predicted.abs()).max(1.0) {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

pub fn compare_report(agg: &AggregateResult) -> Comparison {
    let rows: Vec<ComparisonRow> = agg
        .per_return_point
        .iter()
        .map(|p| {
            let de = deviation_in_sigma(p.mean_epsilon, p.stderr_epsilon, p.predicted_epsilon);
            let ds = deviation_in_sigma(p.mean_sharpe, p.stderr_sharpe, p.predicted_sharpe);
            let worst = de.abs().max(ds.abs());
            ComparisonRow {
                return_coefficient: p.return_coefficient,
                deviation_epsilon: de,
                deviation_sharpe: ds,
                deviation_sigma: worst,
                pass: worst < SIGMA_BAND,
            }
        })
        .collect();
    let verdict = if rows.iter().all(|r| r.pass) {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    };
    let vertex = agg.per_return_point.iter().min_by(|a, b| {
        (a.return_coefficient - agg.r0)
            .abs()
            .total_cmp(&(b.return_coefficient - agg.r0).abs())
    });
    let kappa_hat = vertex
        .and_then(|p| {
            annealed_risk(
                &agg.moments,
                agg.alpha,
                agg.cost_coefficient,
                p.return_coefficient,
            )
            .ok()
            .map(|eps_or| eps_or / p.mean_epsilon)
        })
        .unwrap_or(f64::NAN);
    Comparison {
        rows,
        verdict,
        kappa_hat,
        kappa_expected: agg.alpha / (agg.alpha - 1.0),
    }
}
