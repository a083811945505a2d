//! Closed-form large-N predictions from the replica-symmetric saddle point.
//!
//! Every function here takes [`PopulationMoments`] rather than a raw
//! population, so the caller decides whether the averages come from a drawn
//! finite population or from the generating distributions.

use crate::error::{Error, Result};
use crate::market::{
    derived_coefficients, AssetPopulation, DerivedCoefficients, PopulationMoments, ProblemSpec,
};
use crate::solver::{OptimalSolution, COLLINEARITY_TOL};

/// Which coefficient is treated as the free variable of the risk parabola.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// `C` fixed, risk as a function of `R`.
    ByReturn,
    /// `R` fixed, risk as a function of `C`.
    ByCost,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicaPrediction {
    pub risk_per_asset: f64,
    pub coefficients: DerivedCoefficients,
    pub alpha: f64,
    pub axis: Axis,
}

/// Replica-symmetric saddle values at inverse temperature `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderParameters {
    pub chi_s: f64,
    pub q_s: f64,
    pub chi_tilde_s: f64,
    pub q_tilde_s: f64,
    pub theta: f64,
    pub k: f64,
    pub beta: f64,
}

impl OrderParameters {
    /// `-d(phi)/d(beta)` at this `beta`:
    /// `alpha chi / (2(1 + beta chi)) + alpha q / (2(1 + beta chi)^2)`.
    pub fn thermal_risk(&self, alpha: f64) -> f64 {
        let g = 1.0 + self.beta * self.chi_s;
        alpha * self.chi_s / (2.0 * g) + alpha * self.q_s / (2.0 * g * g)
    }

    /// `beta -> infinity` limit of [`thermal_risk`](Self::thermal_risk).
    /// `beta chi_s = 1/(alpha - 1)` is beta-independent, so only the first
    /// term vanishes.
    pub fn ground_state_risk(&self, alpha: f64) -> f64 {
        let g = 1.0 + self.beta * self.chi_s;
        alpha * self.q_s / (2.0 * g * g)
    }
}

/// Large-N limits of `(1/N) r^T J^-1 r`, `(1/N) r^T J^-1 c`,
/// `(1/N) c^T J^-1 c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentLimits {
    pub rr: f64,
    pub rc: f64,
    pub cc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpeGeometry {
    pub axis: Axis,
    /// `R*` (or `C*`), the stationary point of the Sharpe ratio.
    pub argmax: f64,
    /// Risk minimizer: `R0` (or `C0`).
    pub risk_min_at: f64,
    /// Risk maximizer over the half line: `+inf` for `R`, `-inf` for `C`.
    pub risk_max_at: f64,
    pub s2_max: f64,
    pub s2_at_risk_min: f64,
    pub s2_at_risk_max: f64,
    pub pythagorean_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealedComparison {
    pub eps_or: f64,
    pub kappa: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    Ok(())
}

/// `(R^2 m_cc - 2 R C m_rc + C^2 m_rr) / (m_cc m_rr - m_rc^2)`.
fn q_form(m: &PopulationMoments, c: f64, r: f64) -> f64 {
    (r * r * m.m_cc - 2.0 * r * c * m.m_rc + c * c * m.m_rr) / m.discriminant()
}

/// Minimal investment risk per asset as a parabola in `R`:
/// `(alpha-1)/(2 m_cc) * (C^2 + (R - R0)^2 / V)`.
pub fn quenched_risk(
    m: &PopulationMoments,
    alpha: f64,
    cost_coefficient: f64,
    return_coefficient: f64,
) -> Result<ReplicaPrediction> {
    check_alpha(alpha)?;
    let coefficients = derived_coefficients(m, cost_coefficient, return_coefficient)?;
    let offset = return_coefficient - coefficients.r0;
    let risk = (alpha - 1.0) / (2.0 * m.m_cc)
        * (cost_coefficient * cost_coefficient + offset * offset / coefficients.v_big);
    Ok(ReplicaPrediction {
        risk_per_asset: risk,
        coefficients,
        alpha,
        axis: Axis::ByReturn,
    })
}

/// The same risk as a parabola in `C`:
/// `(alpha-1)/(2 m_rr) * (R^2 + (C - C0)^2 / V_r)`.
pub fn quenched_risk_by_cost(
    m: &PopulationMoments,
    alpha: f64,
    cost_coefficient: f64,
    return_coefficient: f64,
) -> Result<ReplicaPrediction> {
    check_alpha(alpha)?;
    let coefficients = derived_coefficients(m, cost_coefficient, return_coefficient)?;
    let offset = cost_coefficient - coefficients.c0;
    let risk = (alpha - 1.0) / (2.0 * m.m_rr)
        * (return_coefficient * return_coefficient + offset * offset / coefficients.v_r);
    Ok(ReplicaPrediction {
        risk_per_asset: risk,
        coefficients,
        alpha,
        axis: Axis::ByCost,
    })
}

/// Risk with only the cost constraint: `(alpha-1) C^2 / (2 m_cc)`.
pub fn cost_only_risk(m: &PopulationMoments, alpha: f64, cost_coefficient: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((alpha - 1.0) * cost_coefficient * cost_coefficient / (2.0 * m.m_cc))
}

pub fn order_parameters(
    m: &PopulationMoments,
    alpha: f64,
    cost_coefficient: f64,
    return_coefficient: f64,
    beta: f64,
) -> Result<OrderParameters> {
    check_alpha(alpha)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidBeta(beta));
    }
    derived_coefficients(m, cost_coefficient, return_coefficient)?;
    let (c, r) = (cost_coefficient, return_coefficient);
    let det = m.discriminant();
    let q = q_form(m, c, r);
    let am1 = alpha - 1.0;
    Ok(OrderParameters {
        chi_s: 1.0 / (beta * am1),
        q_s: alpha * q / am1,
        chi_tilde_s: beta * am1,
        q_tilde_s: beta * beta * am1 * q,
        theta: beta * am1 * (r * m.m_cc - c * m.m_rc) / det,
        k: beta * am1 * (c * m.m_rr - r * m.m_rc) / det,
        beta,
    })
}

pub fn moment_limits(m: &PopulationMoments, alpha: f64) -> Result<MomentLimits> {
    check_alpha(alpha)?;
    let am1 = alpha - 1.0;
    Ok(MomentLimits {
        rr: m.m_rr / am1,
        rc: m.m_rc / am1,
        cc: m.m_cc / am1,
    })
}

/// Sharpe-ratio extrema along one axis. `fixed` is `C` for
/// [`Axis::ByReturn`] and `R` for [`Axis::ByCost`].
///
/// When the vertex lies below the zero-excess point (`R0 < C`), `argmax` is
/// still the stationary point of `S` but it lies outside `R >= C`.
pub fn sharpe_geometry(
    m: &PopulationMoments,
    alpha: f64,
    fixed: f64,
    axis: Axis,
) -> Result<SharpeGeometry> {
    check_alpha(alpha)?;
    let am1 = alpha - 1.0;
    // Cost and return play mirrored roles on the two axes.
    let (scale, vertex, spread, ratio, risk_max_at) = match axis {
        Axis::ByReturn => {
            let d = derived_coefficients(m, fixed, 0.0)?;
            (m.m_cc, d.r0, d.v_big, m.m_rc / m.m_cc, f64::INFINITY)
        }
        Axis::ByCost => {
            let d = derived_coefficients(m, 0.0, fixed)?;
            (m.m_rr, d.c0, d.v_r, m.m_rc / m.m_rr, f64::NEG_INFINITY)
        }
    };
    let gap = vertex - fixed;
    if gap.abs() <= 1e-12 * vertex.abs().max(fixed.abs()).max(f64::MIN_POSITIVE) {
        return Err(Error::VertexAtOrigin);
    }
    let argmax = spread * fixed * fixed / gap + vertex;
    let s2_at_risk_min = scale / am1 * (ratio - 1.0).powi(2);
    let s2_at_risk_max = scale / am1 * spread;
    let s2_max = scale / am1 * (spread + (ratio - 1.0).powi(2));
    Ok(SharpeGeometry {
        axis,
        argmax,
        risk_min_at: vertex,
        risk_max_at,
        s2_max,
        s2_at_risk_min,
        s2_at_risk_max,
        pythagorean_residual: s2_max - s2_at_risk_min - s2_at_risk_max,
    })
}

/// Minimal expected risk per asset of the annealed problem:
/// `alpha/(2 m_cc) * (C^2 + (R - R0)^2 / V)`.
pub fn annealed_risk(
    m: &PopulationMoments,
    alpha: f64,
    cost_coefficient: f64,
    return_coefficient: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    let d = derived_coefficients(m, cost_coefficient, return_coefficient)?;
    let offset = return_coefficient - d.r0;
    Ok(alpha / (2.0 * m.m_cc) * (cost_coefficient * cost_coefficient + offset * offset / d.v_big))
}

pub fn annealed_comparison(
    m: &PopulationMoments,
    alpha: f64,
    cost_coefficient: f64,
    return_coefficient: f64,
) -> Result<AnnealedComparison> {
    let eps_or = annealed_risk(m, alpha, cost_coefficient, return_coefficient)?;
    let eps = quenched_risk(m, alpha, cost_coefficient, return_coefficient)?.risk_per_asset;
    Ok(AnnealedComparison {
        eps_or,
        kappa: eps_or / eps,
    })
}

/// `(alpha / 2N) sum_i v_i w_i^2`, the expected risk per asset of `w`.
pub fn expected_risk(pop: &AssetPopulation, alpha: f64, w: &[f64]) -> f64 {
    let n = pop.n_assets() as f64;
    let s: f64 = pop.variance().iter().zip(w).map(|(v, w)| v * w * w).sum();
    alpha * s / (2.0 * n)
}

/// Minimizer of the expected risk under both constraints:
/// `w_i = (k c_i + theta r_i) / (alpha v_i)`.
pub fn annealed_portfolio(pop: &AssetPopulation, spec: &ProblemSpec) -> Result<OptimalSolution> {
    if pop.n_assets() != spec.n_assets {
        return Err(Error::DimensionMismatch {
            expected: spec.n_assets,
            got: pop.n_assets(),
        });
    }
    let alpha = spec.alpha();
    check_alpha(alpha)?;
    let m = pop.moments();
    let det = m.discriminant();
    if !(det > COLLINEARITY_TOL * m.m_cc * m.m_rr) {
        return Err(Error::CollinearConstraints {
            relative_gram: det / (m.m_cc * m.m_rr),
        });
    }
    let (c, r) = (spec.cost_coefficient, spec.return_coefficient);
    // k m_cc + theta m_rc = alpha C,  k m_rc + theta m_rr = alpha R
    let k = alpha * (c * m.m_rr - r * m.m_rc) / det;
    let theta = alpha * (r * m.m_cc - c * m.m_rc) / det;
    let portfolio: Vec<f64> = pop
        .unit_cost()
        .iter()
        .zip(pop.expected_return())
        .zip(pop.variance())
        .map(|((ci, ri), vi)| (k * ci + theta * ri) / (alpha * vi))
        .collect();
    let n = pop.n_assets() as f64;
    let achieved_cost = pop
        .unit_cost()
        .iter()
        .zip(&portfolio)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / n;
    let achieved_return = pop
        .expected_return()
        .iter()
        .zip(&portfolio)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / n;
    let risk_per_asset = expected_risk(pop, alpha, &portfolio);
    Ok(OptimalSolution {
        portfolio,
        k_star: k,
        theta_star: theta,
        risk_per_asset,
        achieved_cost,
        achieved_return,
    })
}
