//! Investment risk minimization under an initial-cost constraint and a
//! final-return constraint.
//!
//! The crate has three layers:
//!
//! * [`solver`] computes the quenched optimum for one concrete draw of the
//!   return matrix via Lagrange multipliers and Cholesky solves.
//! * [`replica`] evaluates the closed-form large-N predictions (minimal risk
//!   per asset, order parameters, Sharpe-ratio geometry, annealed baseline
//!   and opportunity loss) from population moments.
//! * [`experiment`] runs the seeded Monte Carlo protocol that compares the
//!   two, and [`cli`] exposes everything as CSV-emitting commands.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiment;
pub mod market;
pub mod replica;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use experiment::{
    aggregate, compare_report, run_experiment, run_experiment_with, run_trial, AggregateResult,
    Comparison, ExperimentOptions, MomentsMode, TrialResult, Verdict,
};
pub use market::{
    derived_coefficients, population_moments, AssetPopulation, DerivedCoefficients,
    PopulationMoments, ProblemSpec,
};
pub use replica::{
    annealed_comparison, annealed_portfolio, cost_only_risk, moment_limits, order_parameters,
    quenched_risk, quenched_risk_by_cost, sharpe_geometry, AnnealedComparison, Axis,
    OrderParameters, ReplicaPrediction, SharpeGeometry,
};
pub use scenario::{
    analytic_pareto_mean, generate_population, generate_returns, sample_bounded_pareto, trial_rng,
    wishart, ParetoSpec, ReturnsMatrix, ScenarioConfig, WishartMatrix,
};
pub use solver::{
    optimal_portfolio, portfolio_risk, quadratic_forms, sharpe_ratio, ExactSolver, OptimalSolution,
    QuadraticForms,
};
