//! Independent oracles shared by the integration and acceptance tests.
//! Nothing here goes through the Cholesky path in the library.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use replica_risk::{
    generate_population, generate_returns, trial_rng, wishart, AssetPopulation, ParetoSpec,
    ScenarioConfig, WishartMatrix,
};

/// Gaussian elimination with partial pivoting on a dense row-major system.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col];
        assert!(p != 0.0, "singular system");
        for row in (col + 1)..n {
            let f = a[row][col] / p;
            if f != 0.0 {
                let (upper, lower) = a.split_at_mut(row);
                for (x, y) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                    *x -= f * y;
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = ((row + 1)..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Gauss-Jordan inverse.
pub fn dense_inverse(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = m.nrows();
    let mut inv = vec![vec![0.0; n]; n];
    for col in 0..n {
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| m[(i, j)]).collect())
            .collect();
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let x = dense_solve(a, e);
        for i in 0..n {
            inv[i][col] = x[i];
        }
    }
    inv
}

pub struct KktSolution {
    pub w: Vec<f64>,
    pub k: f64,
    pub theta: f64,
    pub risk: f64,
}

/// Solves the bordered system
/// `[J, -c, -r; c^T, 0, 0; r^T, 0, 0] [w; k; theta] = [0; N C; N R]` directly.
pub fn kkt_oracle(j: &DMatrix<f64>, c: &[f64], r: &[f64], cost: f64, ret: f64) -> KktSolution {
    let n = c.len();
    let size = n + 2;
    let mut a = vec![vec![0.0; size]; size];
    let mut b = vec![0.0; size];
    for i in 0..n {
        for k in 0..n {
            a[i][k] = j[(i, k)];
        }
        a[i][n] = -c[i];
        a[i][n + 1] = -r[i];
        a[n][i] = c[i];
        a[n + 1][i] = r[i];
    }
    b[n] = n as f64 * cost;
    b[n + 1] = n as f64 * ret;
    let x = dense_solve(a, b);
    let w = x[..n].to_vec();
    let risk = naive_risk(j, &w);
    KktSolution {
        w,
        k: x[n],
        theta: x[n + 1],
        risk,
    }
}

/// `(1/2N) w^T J w` by explicit double loop.
pub fn naive_risk(j: &DMatrix<f64>, w: &[f64]) -> f64 {
    let n = w.len();
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            s += w[a] * j[(a, b)] * w[b];
        }
    }
    s / (2.0 * n as f64)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn unit_pareto() -> ParetoSpec {
    ParetoSpec::new(2.0, 1.0, 2.0).unwrap()
}

/// The reference Pareto setting with a configurable size.
pub fn reference_config(
    n: usize,
    p: usize,
    grid: Vec<f64>,
    n_trials: usize,
    seed: u64,
) -> ScenarioConfig {
    ScenarioConfig {
        n_assets: n,
        n_periods: p,
        cost_coefficient: 1.0,
        return_grid: grid,
        pareto_r: unit_pareto(),
        pareto_h: unit_pareto(),
        n_trials,
        master_seed: seed,
    }
}

/// One population and its Wishart matrix from trial `index`.
pub fn draw(cfg: &ScenarioConfig, index: usize) -> (AssetPopulation, WishartMatrix) {
    let mut rng = trial_rng(cfg.master_seed, index);
    let pop = generate_population(cfg, &mut rng).unwrap();
    let x = generate_returns(&pop, cfg.n_periods, &mut rng).unwrap();
    (pop, wishart(&x))
}

/// A population with unrelated `r`, `c`, `v` (no Pareto structure).
pub fn random_population(n: usize, rng: &mut ChaCha8Rng) -> AssetPopulation {
    let r = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
    let c = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
    let v = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
    AssetPopulation::new(r, c, v).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `grid` as `start + k * step`, avoiding accumulated rounding.
pub fn linear_grid(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start + step * k as f64).collect()
}
