//! Per-subject spatial precision estimation by constrained l1 minimization.
//!
//! Each column `omega_j` solves `min |omega|_1 s.t. |S omega - e_j|_inf <= lambda`
//! as an LP over `omega = u - v`, `u, v >= 0`. The assembled matrix is then
//! symmetrized by keeping, for each off-diagonal pair, the entry of smaller
//! magnitude.

mod lp;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{is_symmetric, max_abs};
pub use lp::{DualSimplex, LpError};

/// Entries at or below this magnitude count as absent edges.
pub const ZERO_TOL: f64 = 1e-8;

/// Spatial sample covariance of a `p x q` scan, columns as observations.
pub fn sample_covariance(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let q = x.ncols();
    if q < 2 {
        return Err(invalid!("sample covariance needs q >= 2 (got {q})"));
    }
    let mean = x.column_mean();
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let mut cov = &centered * centered.transpose() / (q as f64 - 1.0);
    // exact symmetry
    let p = cov.nrows();
    for j in 0..p {
        for i in (j + 1)..p {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    Ok(cov)
}

#[derive(Debug, Clone)]
pub struct ClimeSolution {
    /// Symmetrized estimate.
    pub omega: DMatrix<f64>,
    /// Column solutions before symmetrization.
    pub columns: DMatrix<f64>,
    pub lambda: f64,
    /// `max_j |S omega_j - e_j|_inf` over the unsymmetrized columns.
    pub feasibility_gap: f64,
}

impl ClimeSolution {
    /// Fraction of off-diagonal pairs whose partial correlation exceeds
    /// [`ZERO_TOL`] in magnitude.
    pub fn density(&self) -> f64 {
        off_diagonal_density(&self.omega)
    }
}

pub fn off_diagonal_density(omega: &DMatrix<f64>) -> f64 {
    let p = omega.nrows();
    if p < 2 {
        return 0.0;
    }
    let mut present = 0usize;
    for i in 0..p {
        for j in (i + 1)..p {
            let scale = omega[(i, i)] * omega[(j, j)];
            let value = if scale > 0.0 {
                omega[(i, j)] / scale.sqrt()
            } else {
                omega[(i, j)]
            };
            if value.abs() > ZERO_TOL {
                present += 1;
            }
        }
    }
    present as f64 / (p * (p - 1) / 2) as f64
}

/// Keep the smaller-magnitude entry of each symmetric pair. Ties keep the
/// upper-triangular entry.
pub fn symmetrize_min_magnitude(columns: &DMatrix<f64>) -> DMatrix<f64> {
    let p = columns.nrows();
    let mut out = columns.clone();
    for i in 0..p {
        for j in (i + 1)..p {
            let upper = columns[(i, j)];
            let lower = columns[(j, i)];
            let keep = if upper.abs() <= lower.abs() { upper } else { lower };
            out[(i, j)] = keep;
            out[(j, i)] = keep;
        }
    }
    out
}

/// CLIME solver for one covariance matrix. Column LPs keep their final basis,
/// so solving a sequence of lambdas reuses work.
#[derive(Debug, Clone)]
pub struct ClimeSolver {
    sigma: DMatrix<f64>,
    columns: Vec<DualSimplex>,
}

impl ClimeSolver {
    pub fn new(sigma_hat: &DMatrix<f64>) -> Result<Self> {
        if !sigma_hat.is_square() || !is_symmetric(sigma_hat, 1e-10) {
            return Err(invalid!("CLIME needs a symmetric covariance matrix"));
        }
        let p = sigma_hat.nrows();
        // rows: [S, -S; -S, S], columns: [u, v]
        let rows = 2 * p;
        let vars = 2 * p;
        let mut a = vec![0.0; rows * vars];
        for r in 0..p {
            for k in 0..p {
                let s = sigma_hat[(r, k)];
                a[r * vars + k] = s;
                a[r * vars + p + k] = -s;
                a[(p + r) * vars + k] = -s;
                a[(p + r) * vars + p + k] = s;
            }
        }
        let costs = vec![1.0; vars];
        let template = DualSimplex::new(&a, rows, vars, &costs)
            .map_err(|e| Error::Solver { column: 0, reason: e.to_string() })?;
        Ok(ClimeSolver {
            sigma: sigma_hat.clone(),
            columns: vec![template; p],
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn solve(&mut self, lambda: f64) -> Result<ClimeSolution> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid!("CLIME lambda must be positive (got {lambda})"));
        }
        let p = self.dim();
        let mut columns = DMatrix::zeros(p, p);
        let mut rhs = vec![lambda; 2 * p];
        for j in 0..p {
            rhs[j] = lambda + 1.0;
            rhs[p + j] = lambda - 1.0;
            let x = self.columns[j]
                .solve(&rhs)
                .map_err(|e| Error::Solver { column: j, reason: e.to_string() })?;
            rhs[j] = lambda;
            rhs[p + j] = lambda;
            for i in 0..p {
                columns[(i, j)] = x[i] - x[p + i];
            }
        }
        let residual = &self.sigma * &columns - DMatrix::<f64>::identity(p, p);
        let feasibility_gap = max_abs(&residual);
        Ok(ClimeSolution {
            omega: symmetrize_min_magnitude(&columns),
            columns,
            lambda,
            feasibility_gap,
        })
    }
}

pub fn clime_solve(sigma_hat: &DMatrix<f64>, lambda: f64) -> Result<ClimeSolution> {
    ClimeSolver::new(sigma_hat)?.solve(lambda)
}

/// Tuning-grid specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaGrid {
    /// `points` log-spaced values in `[low, high] * max|S_ij|`, decreasing.
    Relative { points: usize, low: f64, high: f64 },
    Explicit(Vec<f64>),
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Relative {
            points: 20,
            low: 0.01,
            high: 1.0,
        }
    }
}

impl LambdaGrid {
    pub fn resolve(&self, sigma_hat: &DMatrix<f64>) -> Result<Vec<f64>> {
        let grid = match self {
            LambdaGrid::Relative { points, low, high } => {
                let scale = max_abs(sigma_hat);
                if scale <= 0.0 {
                    return Err(invalid!("covariance is identically zero"));
                }
                log_spaced_desc(high * scale, low * scale, *points)?
            }
            LambdaGrid::Explicit(values) => {
                let mut v = values.clone();
                v.sort_by(|a, b| b.total_cmp(a));
                v.dedup();
                v
            }
        };
        if grid.is_empty() || grid.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(invalid!("lambda grid must be nonempty and positive"));
        }
        Ok(grid)
    }
}

/// `n` log-spaced values from `hi` down to `lo`.
pub fn log_spaced_desc(hi: f64, lo: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 || !(lo > 0.0) || !(hi >= lo) {
        return Err(invalid!("log grid needs n >= 1 and 0 < lo <= hi"));
    }
    if n == 1 {
        return Ok(vec![hi]);
    }
    let (a, b) = (hi.ln(), lo.ln());
    Ok((0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuningResult {
    pub lambda_grid: Vec<f64>,
    pub densities: Vec<f64>,
    pub chosen: usize,
}

impl TuningResult {
    pub fn lambda(&self) -> f64 {
        self.lambda_grid[self.chosen]
    }
}

/// Chooses the lambda whose estimate has off-diagonal density closest to
/// `target_density` among estimates with a positive diagonal; ties go to the
/// larger lambda. Returns the tuning record
/// and the chosen estimate.
pub fn select_lambda_dens(
    sigma_hat: &DMatrix<f64>,
    target_density: f64,
    grid: &[f64],
) -> Result<(TuningResult, ClimeSolution)> {
    if grid.is_empty() || grid.iter().any(|&l| !(l > 0.0)) {
        return Err(invalid!("lambda grid must be nonempty and positive"));
    }
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]));
    let lambda_grid: Vec<f64> = order.iter().map(|&k| grid[k]).collect();
    if lambda_grid.windows(2).any(|w| w[0] <= w[1]) {
        return Err(invalid!("lambda grid has duplicate values"));
    }

    let mut solver = ClimeSolver::new(sigma_hat)?;
    let mut densities = Vec::with_capacity(lambda_grid.len());
    let mut best: Option<(usize, f64, ClimeSolution)> = None;
    let mut last_err = None;
    for (k, &lambda) in lambda_grid.iter().enumerate() {
        match solver.solve(lambda) {
            Ok(sol) => {
                let density = sol.density();
                densities.push(density);
                let distance = (density - target_density).abs();
                let usable = sol.omega.diagonal().iter().all(|&w| w > 0.0);
                // strict improvement only: earlier (larger) lambda wins ties
                if usable && best.as_ref().map_or(true, |(_, d, _)| distance < *d) {
                    best = Some((k, distance, sol));
                }
            }
            Err(e) => {
                densities.push(f64::NAN);
                last_err = Some(e);
            }
        }
    }
    match best {
        Some((chosen, _, sol)) => Ok((
            TuningResult {
                lambda_grid,
                densities,
                chosen,
            },
            sol,
        )),
        None => Err(last_err.unwrap_or_else(|| invalid!("no lambda could be solved"))),
    }
}
