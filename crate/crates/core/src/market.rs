//! Market description: the asset population, the constrained problem, and the
//! population moments that drive every closed-form prediction.

use crate::error::{Error, Result};

/// Per-asset expected returns `r_i`, unit purchase costs `c_i` and return
/// variances `v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetPopulation {
    expected_return: Vec<f64>,
    unit_cost: Vec<f64>,
    variance: Vec<f64>,
}

impl AssetPopulation {
    pub fn new(expected_return: Vec<f64>, unit_cost: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        let n = expected_return.len();
        if n < 2 {
            return Err(Error::InvalidPopulation(format!(
                "need at least 2 assets, got {n}"
            )));
        }
        if unit_cost.len() != n || variance.len() != n {
            return Err(Error::InvalidPopulation(format!(
                "vector lengths differ: r={n}, c={}, v={}",
                unit_cost.len(),
                variance.len()
            )));
        }
        if let Some(i) = variance.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidPopulation(format!(
                "variance of asset {i} must be positive and finite, got {}",
                variance[i]
            )));
        }
        if expected_return
            .iter()
            .chain(unit_cost.iter())
            .any(|x| !x.is_finite())
        {
            return Err(Error::InvalidPopulation(
                "non-finite expected return or unit cost".into(),
            ));
        }
        Ok(Self {
            expected_return,
            unit_cost,
            variance,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.expected_return.len()
    }

    pub fn expected_return(&self) -> &[f64] {
        &self.expected_return
    }

    pub fn unit_cost(&self) -> &[f64] {
        &self.unit_cost
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn moments(&self) -> PopulationMoments {
        population_moments(self)
    }
}

/// Cost coefficient `C`, return coefficient `R`, asset count `N` and period
/// count `p`. The constraints are `N*C = c.w` and `N*R = r.w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    pub cost_coefficient: f64,
    pub return_coefficient: f64,
    pub n_assets: usize,
    pub n_periods: usize,
}

impl ProblemSpec {
    pub fn new(
        cost_coefficient: f64,
        return_coefficient: f64,
        n_assets: usize,
        n_periods: usize,
    ) -> Result<Self> {
        if n_assets < 2 {
            return Err(Error::InvalidProblem(format!(
                "n_assets must be at least 2, got {n_assets}"
            )));
        }
        if n_periods <= n_assets {
            return Err(Error::InvalidProblem(format!(
                "n_periods ({n_periods}) must exceed n_assets ({n_assets})"
            )));
        }
        if !cost_coefficient.is_finite() || !return_coefficient.is_finite() {
            return Err(Error::InvalidProblem(
                "cost and return coefficients must be finite".into(),
            ));
        }
        Ok(Self {
            cost_coefficient,
            return_coefficient,
            n_assets,
            n_periods,
        })
    }

    /// Period ratio `alpha = p / N`.
    pub fn alpha(&self) -> f64 {
        self.n_periods as f64 / self.n_assets as f64
    }
}

/// Asset averages `<c^2/v>`, `<rc/v>`, `<r^2/v>` and `<log v>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationMoments {
    pub m_cc: f64,
    pub m_rc: f64,
    pub m_rr: f64,
    pub mean_log_v: f64,
}

impl PopulationMoments {
    pub fn new(m_cc: f64, m_rc: f64, m_rr: f64, mean_log_v: f64) -> Result<Self> {
        if !(m_cc > 0.0 && m_rr > 0.0) || !m_rc.is_finite() || !mean_log_v.is_finite() {
            return Err(Error::InvalidPopulation(format!(
                "moments must satisfy m_cc > 0, m_rr > 0 and be finite (got {m_cc}, {m_rc}, {m_rr})"
            )));
        }
        // Cauchy-Schwarz, with a little room for rounding on exact equality.
        let det = m_cc * m_rr - m_rc * m_rc;
        if det < -1e-12 * m_cc * m_rr {
            return Err(Error::InvalidPopulation(format!(
                "moments violate Cauchy-Schwarz: m_cc*m_rr - m_rc^2 = {det:e}"
            )));
        }
        Ok(Self {
            m_cc,
            m_rc,
            m_rr,
            mean_log_v,
        })
    }

    /// `m_cc * m_rr - m_rc^2`, the Gram determinant shared by every formula.
    pub fn discriminant(&self) -> f64 {
        self.m_cc * self.m_rr - self.m_rc * self.m_rc
    }

    /// Component-wise arithmetic mean, folded in iteration order.
    pub fn mean<'a, I>(moments: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a PopulationMoments>,
    {
        let mut n = 0usize;
        let mut acc = [0.0f64; 4];
        for m in moments {
            acc[0] += m.m_cc;
            acc[1] += m.m_rc;
            acc[2] += m.m_rr;
            acc[3] += m.mean_log_v;
            n += 1;
        }
        if n == 0 {
            return None;
        }
        let n = n as f64;
        Some(Self {
            m_cc: acc[0] / n,
            m_rc: acc[1] / n,
            m_rr: acc[2] / n,
            mean_log_v: acc[3] / n,
        })
    }
}

/// Vertex locations and curvatures of the risk parabola in both
/// parametrizations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedCoefficients {
    /// Return coefficient minimizing risk at fixed `C`.
    pub r0: f64,
    pub v_big: f64,
    /// Cost coefficient minimizing risk at fixed `R`.
    pub c0: f64,
    pub v_r: f64,
}

/// Finite-N asset averages of the population.
pub fn population_moments(pop: &AssetPopulation) -> PopulationMoments {
    let n = pop.n_assets() as f64;
    let (mut cc, mut rc, mut rr, mut log_v) = (0.0, 0.0, 0.0, 0.0);
    for ((&r, &c), &v) in pop
        .expected_return
        .iter()
        .zip(&pop.unit_cost)
        .zip(&pop.variance)
    {
        cc += c * c / v;
        rc += r * c / v;
        rr += r * r / v;
        log_v += v.ln();
    }
    PopulationMoments {
        m_cc: cc / n,
        m_rc: rc / n,
        m_rr: rr / n,
        mean_log_v: log_v / n,
    }
}

/// Relative threshold below which `V` is treated as zero (`r` proportional
/// to `c`).
pub fn degeneracy_threshold(m: &PopulationMoments) -> f64 {
    1e-12 * (m.m_rr / m.m_cc)
}

pub fn derived_coefficients(
    m: &PopulationMoments,
    cost_coefficient: f64,
    return_coefficient: f64,
) -> Result<DerivedCoefficients> {
    let rc_over_cc = m.m_rc / m.m_cc;
    let rc_over_rr = m.m_rc / m.m_rr;
    let v_big = m.m_rr / m.m_cc - rc_over_cc * rc_over_cc;
    let threshold = degeneracy_threshold(m);
    if !(v_big >= threshold) {
        return Err(Error::DegeneratePopulation {
            discriminant: v_big,
            threshold,
        });
    }
    Ok(DerivedCoefficients {
        r0: cost_coefficient * rc_over_cc,
        v_big,
        c0: return_coefficient * rc_over_rr,
        v_r: m.m_cc / m.m_rr - rc_over_rr * rc_over_rr,
    })
}
