//! Quenched optimum for a concrete draw of the risk matrix.
//!
//! The minimizer of `(1/2) w^T J w` subject to `c.w = N C` and `r.w = N R`
//! is `w* = theta* J^-1 r + k* J^-1 c`, with the multipliers fixed by the
//! three quadratic forms `a = c^T J^-1 c`, `b = c^T J^-1 r`,
//! `d = r^T J^-1 r`. `J` is factored once (Cholesky) and solved twice; it is
//! never inverted explicitly.

use nalgebra::{Cholesky, DVector, Dyn};

use crate::error::{Error, Result};
use crate::market::{AssetPopulation, ProblemSpec};
use crate::scenario::WishartMatrix;

/// Relative Gram-determinant threshold `(ad - b^2) / (ad)` below which the
/// two constraints are treated as collinear.
pub const COLLINEARITY_TOL: f64 = 1e-10;

/// Relative tolerance for the constraint and risk post-checks.
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticForms {
    /// `c^T J^-1 c`
    pub a: f64,
    /// `c^T J^-1 r`
    pub b: f64,
    /// `r^T J^-1 r`
    pub d: f64,
}

impl QuadraticForms {
    pub fn gram_determinant(&self) -> f64 {
        self.a * self.d - self.b * self.b
    }

    fn check_collinearity(&self) -> Result<f64> {
        let det = self.gram_determinant();
        if !(det > COLLINEARITY_TOL * self.a * self.d) {
            return Err(Error::CollinearConstraints {
                relative_gram: det / (self.a * self.d),
            });
        }
        Ok(det)
    }

    /// Lagrange multipliers `(k*, theta*)` for `n` assets.
    pub fn multipliers(
        &self,
        n_assets: usize,
        cost_coefficient: f64,
        return_coefficient: f64,
    ) -> Result<(f64, f64)> {
        let det = self.check_collinearity()?;
        let n = n_assets as f64;
        let (c, r) = (cost_coefficient, return_coefficient);
        let k = n * (-r * self.b + c * self.d) / det;
        let theta = n * (r * self.a - c * self.b) / det;
        Ok((k, theta))
    }

    /// Minimal risk per asset from the forms alone (rational form).
    pub fn risk_per_asset(
        &self,
        n_assets: usize,
        cost_coefficient: f64,
        return_coefficient: f64,
    ) -> Result<f64> {
        let det = self.check_collinearity()?;
        let (c, r) = (cost_coefficient, return_coefficient);
        let numerator = r * r * self.a - 2.0 * r * c * self.b + c * c * self.d;
        Ok(0.5 * n_assets as f64 * numerator / det)
    }

    /// Same quantity written as a completed square around the vertex
    /// `R = C b / a`.
    pub fn risk_per_asset_completed_square(
        &self,
        n_assets: usize,
        cost_coefficient: f64,
        return_coefficient: f64,
    ) -> Result<f64> {
        self.check_collinearity()?;
        let ratio = self.b / self.a;
        let spread = self.d / self.a - ratio * ratio;
        let offset = return_coefficient - cost_coefficient * ratio;
        Ok(n_assets as f64 / (2.0 * self.a)
            * (cost_coefficient * cost_coefficient + offset * offset / spread))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSolution {
    pub portfolio: Vec<f64>,
    pub k_star: f64,
    pub theta_star: f64,
    pub risk_per_asset: f64,
    /// `(1/N) c.w*`
    pub achieved_cost: f64,
    /// `(1/N) r.w*`
    pub achieved_return: f64,
}

/// One factorization of `J` together with `J^-1 c` and `J^-1 r`.
pub struct ExactSolver {
    j: WishartMatrix,
    cost: DVector<f64>,
    ret: DVector<f64>,
    y_c: DVector<f64>,
    y_r: DVector<f64>,
    forms: QuadraticForms,
}

impl std::fmt::Debug for ExactSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExactSolver")
            .field("n", &self.j.n())
            .field("forms", &self.forms)
            .finish()
    }
}

impl ExactSolver {
    pub fn new(j: &WishartMatrix, pop: &AssetPopulation) -> Result<Self> {
        let n = j.n();
        if pop.n_assets() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: pop.n_assets(),
            });
        }
        let chol: Cholesky<f64, Dyn> =
            Cholesky::new(j.entries().clone()).ok_or(Error::SingularMatrix)?;
        let cost = DVector::from_column_slice(pop.unit_cost());
        let ret = DVector::from_column_slice(pop.expected_return());
        let y_c = chol.solve(&cost);
        let y_r = chol.solve(&ret);
        let a = cost.dot(&y_c);
        let b = cost.dot(&y_r);
        let d = ret.dot(&y_r);
        if ![a, b, d].iter().all(|x| x.is_finite()) || !(a > 0.0 && d > 0.0) {
            return Err(Error::SingularMatrix);
        }
        let b_mirror = ret.dot(&y_c);
        let scale = (a * d).sqrt();
        if (b - b_mirror).abs() > 1e-10 * scale.max(b.abs()) {
            log::warn!(
                "symmetry cross-check failed: c^T J^-1 r = {b:e}, r^T J^-1 c = {b_mirror:e}"
            );
        }
        Ok(Self {
            j: j.clone(),
            cost,
            ret,
            y_c,
            y_r,
            forms: QuadraticForms { a, b, d },
        })
    }

    pub fn forms(&self) -> QuadraticForms {
        self.forms
    }

    /// `c^T J^-1 r` computed from the other solve; equals `forms().b` up to
    /// rounding.
    pub fn mirrored_b(&self) -> f64 {
        self.ret.dot(&self.y_c)
    }

    pub fn n_assets(&self) -> usize {
        self.j.n()
    }

    pub fn solve(&self, cost_coefficient: f64, return_coefficient: f64) -> Result<OptimalSolution> {
        let n = self.n_assets();
        let (k, theta) = self
            .forms
            .multipliers(n, cost_coefficient, return_coefficient)?;
        let w = &self.y_r * theta + &self.y_c * k;
        let nf = n as f64;
        let achieved_cost = self.cost.dot(&w) / nf;
        let achieved_return = self.ret.dot(&w) / nf;

        let cost_residual = (achieved_cost - cost_coefficient).abs();
        if cost_residual > FEASIBILITY_TOL * cost_coefficient.abs().max(1.0) {
            return Err(Error::ConstraintViolation {
                which: "cost",
                residual: cost_residual,
            });
        }
        let return_residual = (achieved_return - return_coefficient).abs();
        if return_residual > FEASIBILITY_TOL * return_coefficient.abs().max(1.0) {
            return Err(Error::ConstraintViolation {
                which: "return",
                residual: return_residual,
            });
        }

        let risk = self
            .forms
            .risk_per_asset(n, cost_coefficient, return_coefficient)?;
        let direct = portfolio_risk(&self.j, w.as_slice());
        if (risk - direct).abs() > FEASIBILITY_TOL * risk.abs().max(direct.abs()) {
            log::warn!(
                "ill-conditioned solve: risk from forms {risk:e} vs w^T J w / 2N {direct:e}"
            );
        }
        Ok(OptimalSolution {
            portfolio: w.as_slice().to_vec(),
            k_star: k,
            theta_star: theta,
            risk_per_asset: risk,
            achieved_cost,
            achieved_return,
        })
    }
}

pub fn quadratic_forms(j: &WishartMatrix, pop: &AssetPopulation) -> Result<QuadraticForms> {
    ExactSolver::new(j, pop).map(|s| s.forms())
}

pub fn optimal_portfolio(
    j: &WishartMatrix,
    pop: &AssetPopulation,
    spec: &ProblemSpec,
) -> Result<OptimalSolution> {
    if spec.n_assets != j.n() {
        return Err(Error::DimensionMismatch {
            expected: j.n(),
            got: spec.n_assets,
        });
    }
    ExactSolver::new(j, pop)?.solve(spec.cost_coefficient, spec.return_coefficient)
}

/// `(1/N) * (1/2) w^T J w`.
pub fn portfolio_risk(j: &WishartMatrix, w: &[f64]) -> f64 {
    let n = j.n();
    assert_eq!(w.len(), n, "portfolio length must match J");
    let w = DVector::from_column_slice(w);
    0.5 * w.dot(&(j.entries() * &w)) / n as f64
}

/// `(R - C) / sqrt(2 eps)`.
pub fn sharpe_ratio(return_coefficient: f64, cost_coefficient: f64, risk: f64) -> Result<f64> {
    if !(risk > 0.0) {
        return Err(Error::NonPositiveRisk(risk));
    }
    Ok((return_coefficient - cost_coefficient) / (2.0 * risk).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn two_asset() -> AssetPopulation {
        AssetPopulation::new(vec![1.0, 2.0], vec![1.0, 1.0], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn identity_forms() {
        let f = quadratic_forms(&WishartMatrix::identity(2), &two_asset()).unwrap();
        assert_eq!((f.a, f.b, f.d), (2.0, 3.0, 5.0));
    }

    #[test]
    fn scalar_matrix_halves_forms() {
        let j = WishartMatrix::from_matrix(DMatrix::identity(2, 2) * 2.0).unwrap();
        let f = quadratic_forms(&j, &two_asset()).unwrap();
        for (got, want) in [(f.a, 1.0), (f.b, 1.5), (f.d, 2.5)] {
            assert!((got - want).abs() < 1e-15 * want);
        }
    }

    #[test]
    fn hand_solved_two_assets() {
        let spec = ProblemSpec {
            cost_coefficient: 1.0,
            return_coefficient: 1.5,
            n_assets: 2,
            n_periods: 4,
        };
        let s = optimal_portfolio(&WishartMatrix::identity(2), &two_asset(), &spec).unwrap();
        assert!((s.k_star - 1.0).abs() < 1e-12);
        assert!(s.theta_star.abs() < 1e-12);
        assert!((s.portfolio[0] - 1.0).abs() < 1e-12);
        assert!((s.portfolio[1] - 1.0).abs() < 1e-12);
        assert!((s.risk_per_asset - 0.5).abs() < 1e-12);
    }

    #[test]
    fn moving_off_vertex_raises_risk() {
        let solver = ExactSolver::new(&WishartMatrix::identity(2), &two_asset()).unwrap();
        let s = solver.solve(1.0, 2.0).unwrap();
        assert!((s.achieved_cost - 1.0).abs() < 1e-12);
        assert!((s.achieved_return - 2.0).abs() < 1e-12);
        assert!(s.risk_per_asset > 0.5);
    }

    #[test]
    fn collinear_constraints_rejected() {
        let pop = AssetPopulation::new(vec![2.0, 4.0], vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        let err = ExactSolver::new(&WishartMatrix::identity(2), &pop)
            .unwrap()
            .solve(1.0, 2.0)
            .unwrap_err();
        assert!(matches!(err, Error::CollinearConstraints { .. }));
    }

    #[test]
    fn singular_matrix_rejected() {
        let j = WishartMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]))
            .unwrap();
        assert!(matches!(
            quadratic_forms(&j, &two_asset()),
            Err(Error::SingularMatrix)
        ));
    }

    #[test]
    fn risk_of_simple_portfolios() {
        let j = WishartMatrix::identity(2);
        assert_eq!(portfolio_risk(&j, &[0.0, 0.0]), 0.0);
        assert_eq!(portfolio_risk(&j, &[1.0, 1.0]), 0.5);
    }

    #[test]
    fn sharpe_examples() {
        assert_eq!(sharpe_ratio(1.0, 1.0, 0.3).unwrap(), 0.0);
        assert!((sharpe_ratio(2.0, 1.0, 1.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((sharpe_ratio(1.5, 1.0, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!(sharpe_ratio(0.5, 1.0, 0.5).unwrap() < 0.0);
        assert!(matches!(
            sharpe_ratio(2.0, 1.0, 0.0),
            Err(Error::NonPositiveRisk(_))
        ));
    }

    proptest! {
        #[test]
        fn two_printed_forms_agree(
            a in 0.1f64..10.0, d in 0.1f64..10.0, t in -0.9f64..0.9,
            c in -3.0f64..3.0, r in -3.0f64..3.0, n in 2usize..2000,
        ) {
            let f = QuadraticForms { a, b: t * (a * d).sqrt(), d };
            let x = f.risk_per_asset(n, c, r).unwrap();
            let y = f.risk_per_asset_completed_square(n, c, r).unwrap();
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(y.abs()));
        }
    }
}
