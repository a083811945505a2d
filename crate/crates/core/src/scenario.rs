//! Random scenario generation: bounded Pareto populations, Gaussian return
//! paths, and the Wishart risk matrix built from them.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::market::{AssetPopulation, PopulationMoments, ProblemSpec};

/// Power-law density proportional to `x^-exponent` truncated to
/// `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoSpec {
    exponent: f64,
    lower: f64,
    upper: f64,
}

impl ParetoSpec {
    pub fn new(exponent: f64, lower: f64, upper: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(Error::InvalidParetoSpec(format!(
                "exponent must be positive, got {exponent}"
            )));
        }
        // The normalization (1-c)/(u^(1-c) - l^(1-c)) has a log limit at c = 1
        // which is not supported.
        if (exponent - 1.0).abs() <= 1e-9 {
            return Err(Error::InvalidParetoSpec(format!(
                "exponent {exponent} too close to 1"
            )));
        }
        if !(lower > 0.0 && lower < upper && upper.is_finite()) {
            return Err(Error::InvalidParetoSpec(format!(
                "need 0 < lower < upper, got [{lower}, {upper}]"
            )));
        }
        let spec = Self {
            exponent,
            lower,
            upper,
        };
        // Bounds closer than rounding resolution leave an empty support.
        if !(spec.span() != 0.0 && spec.span().is_finite()) {
            return Err(Error::InvalidParetoSpec(format!(
                "support [{lower}, {upper}] is numerically empty for exponent {exponent}"
            )));
        }
        Ok(spec)
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    fn one_minus_c(&self) -> f64 {
        1.0 - self.exponent
    }

    fn span(&self) -> f64 {
        let k = self.one_minus_c();
        self.upper.powf(k) - self.lower.powf(k)
    }

    /// Normalizing constant of the density.
    pub fn normalization(&self) -> f64 {
        self.one_minus_c() / self.span()
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < self.lower || x > self.upper {
            0.0
        } else {
            self.normalization() * x.powf(-self.exponent)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lower {
            0.0
        } else if x >= self.upper {
            1.0
        } else {
            let k = self.one_minus_c();
            (x.powf(k) - self.lower.powf(k)) / self.span()
        }
    }

    /// Inverse CDF. `u` in `[0, 1]` maps onto `[lower, upper]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let k = self.one_minus_c();
        let x = (self.lower.powf(k) + u * self.span()).powf(1.0 / k);
        x.clamp(self.lower, self.upper)
    }

    /// `E[x^power]` in closed form.
    pub fn moment(&self, power: i32) -> f64 {
        let k = power as f64 + self.one_minus_c();
        let integral = if k.abs() < 1e-12 {
            (self.upper / self.lower).ln()
        } else {
            (self.upper.powf(k) - self.lower.powf(k)) / k
        };
        self.normalization() * integral
    }

    /// `E[log x]` in closed form.
    pub fn log_mean(&self) -> f64 {
        let k = self.one_minus_c();
        let antiderivative = |x: f64| x.powf(k) / k * (x.ln() - 1.0 / k);
        self.normalization() * (antiderivative(self.upper) - antiderivative(self.lower))
    }
}

/// One draw by inverse-CDF transform of a single uniform variate.
pub fn sample_bounded_pareto<R: Rng + ?Sized>(spec: &ParetoSpec, rng: &mut R) -> f64 {
    spec.quantile(rng.random::<f64>())
}

/// `E[x^power]` under the bounded Pareto density.
pub fn analytic_pareto_mean(spec: &ParetoSpec, power: i32) -> f64 {
    spec.moment(power)
}

/// Everything needed to run the Monte Carlo protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_assets: usize,
    pub n_periods: usize,
    pub cost_coefficient: f64,
    pub return_grid: Vec<f64>,
    pub pareto_r: ParetoSpec,
    pub pareto_h: ParetoSpec,
    pub n_trials: usize,
    pub master_seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_assets < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_assets must be at least 2, got {}",
                self.n_assets
            )));
        }
        if self.n_periods <= self.n_assets {
            return Err(Error::InvalidConfig(format!(
                "n_periods ({}) must exceed n_assets ({})",
                self.n_periods, self.n_assets
            )));
        }
        if !self.cost_coefficient.is_finite() {
            return Err(Error::InvalidConfig(
                "cost_coefficient must be finite".into(),
            ));
        }
        if self.return_grid.is_empty() {
            return Err(Error::InvalidConfig("return_grid is empty".into()));
        }
        if self.return_grid.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidConfig(
                "return_grid has non-finite values".into(),
            ));
        }
        if self.return_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "return_grid must be strictly increasing".into(),
            ));
        }
        if self.n_trials < 1 {
            return Err(Error::InvalidConfig("n_trials must be at least 1".into()));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.n_periods as f64 / self.n_assets as f64
    }

    pub fn problem(&self, return_coefficient: f64) -> Result<ProblemSpec> {
        ProblemSpec::new(
            self.cost_coefficient,
            return_coefficient,
            self.n_assets,
            self.n_periods,
        )
    }

    /// Population moments of the generating distributions.
    ///
    /// With `v = h r^2` and `c = r z` the ratios `c^2/v`, `rc/v`, `r^2/v`
    /// reduce to `z^2/h`, `z/h`, `1/h`, so `r` drops out and `z` is uniform
    /// on `[0, 1]`.
    pub fn analytic_moments(&self) -> PopulationMoments {
        let inv_h = self.pareto_h.moment(-1);
        PopulationMoments {
            m_cc: inv_h / 3.0,
            m_rc: inv_h / 2.0,
            m_rr: inv_h,
            mean_log_v: self.pareto_h.log_mean() + 2.0 * self.pareto_r.log_mean(),
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent stream for one trial. Depends only on the seed and index.
pub fn trial_rng(master_seed: u64, trial_index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(master_seed ^ splitmix64(trial_index as u64))
}

/// Build a population from raw draws: `v = h r^2`, `c = r z`.
pub fn population_from_draws(r: Vec<f64>, h: &[f64], z: &[f64]) -> Result<AssetPopulation> {
    if h.len() != r.len() || z.len() != r.len() {
        return Err(Error::DimensionMismatch {
            expected: r.len(),
            got: h.len().min(z.len()),
        });
    }
    let v = r.iter().zip(h).map(|(r, h)| h * r * r).collect();
    let c = r.iter().zip(z).map(|(r, z)| r * z).collect();
    AssetPopulation::new(r, c, v)
}

pub fn generate_population<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<AssetPopulation> {
    let n = cfg.n_assets;
    let mut r = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        r.push(sample_bounded_pareto(&cfg.pareto_r, rng));
        h.push(sample_bounded_pareto(&cfg.pareto_h, rng));
        z.push(rng.random::<f64>());
    }
    population_from_draws(r, &h, &z)
}

/// Centered, pre-scaled returns: entry `(i, mu)` is `(xbar - r_i) / sqrt(N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsMatrix(DMatrix<f64>);

impl ReturnsMatrix {
    pub fn from_matrix(entries: DMatrix<f64>) -> Self {
        Self(entries)
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n_assets(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_periods(&self) -> usize {
        self.0.ncols()
    }
}

/// Draws `xbar ~ N(r_i, v_i)` row by row.
pub fn generate_returns<R: Rng + ?Sized>(
    pop: &AssetPopulation,
    n_periods: usize,
    rng: &mut R,
) -> Result<ReturnsMatrix> {
    let n = pop.n_assets();
    if n_periods <= n {
        return Err(Error::InvalidProblem(format!(
            "n_periods ({n_periods}) must exceed n_assets ({n})"
        )));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let mut x = DMatrix::zeros(n, n_periods);
    for i in 0..n {
        let mean = pop.expected_return()[i];
        let sd = pop.variance()[i].sqrt();
        for mu in 0..n_periods {
            let g: f64 = rng.sample(StandardNormal);
            let raw = mean + sd * g;
            x[(i, mu)] = (raw - mean) * scale;
        }
    }
    Ok(ReturnsMatrix(x))
}

/// Symmetric empirical risk matrix `J = X X^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct WishartMatrix(DMatrix<f64>);

impl WishartMatrix {
    /// Wraps an existing matrix, checking shape and symmetry.
    pub fn from_matrix(j: DMatrix<f64>) -> Result<Self> {
        if j.nrows() != j.ncols() {
            return Err(Error::DimensionMismatch {
                expected: j.nrows(),
                got: j.ncols(),
            });
        }
        let n = j.nrows();
        for i in 0..n {
            for k in 0..i {
                let scale = j[(i, i)].abs().max(j[(k, k)].abs()).max(1.0);
                if (j[(i, k)] - j[(k, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidProblem(format!(
                        "matrix is not symmetric at ({i}, {k})"
                    )));
                }
            }
        }
        Ok(Self(j))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }
}

pub fn wishart(x: &ReturnsMatrix) -> WishartMatrix {
    let mut j = &x.0 * x.0.transpose();
    // Mirror the lower triangle so J is exactly symmetric.
    let n = j.nrows();
    for col in 0..n {
        for row in (col + 1)..n {
            j[(col, row)] = j[(row, col)];
        }
    }
    WishartMatrix(j)
}
