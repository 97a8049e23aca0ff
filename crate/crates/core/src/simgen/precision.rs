use nalgebra::DMatrix;
use rand::Rng;

use super::graph::GraphStructure;
use crate::error::{invalid, Result};
use crate::linalg::{is_symmetric, min_eigenvalue};

/// Margin added above the smallest eigenvalue when forcing positive definiteness.
pub const PD_MARGIN: f64 = 0.5;

/// Case/control precision matrices for one dataset and their difference.
#[derive(Debug, Clone)]
pub struct PrecisionPair {
    pub omega_x: DMatrix<f64>,
    pub omega_y: DMatrix<f64>,
    /// `omega_x - omega_y`
    pub delta: DMatrix<f64>,
    /// Sign-flipped positions, zero-based, `i < j`.
    pub flip_set: Vec<(usize, usize)>,
    pub rho: f64,
}

impl PrecisionPair {
    /// Off-diagonal support of `delta` as zero-based pairs with `i < j`.
    pub fn differential_edges(&self) -> Vec<(usize, usize)> {
        let p = self.delta.nrows();
        let mut out = Vec::new();
        for i in 0..p {
            for j in (i + 1)..p {
                if self.delta[(i, j)] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Places uniform values from `[-0.5, -0.3] U [0.3, 0.5]` on the edges of
/// `graph`, symmetrically. The diagonal is left at zero.
pub fn fill_precision<R: Rng + ?Sized>(graph: &GraphStructure, rng: &mut R) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(graph.p, graph.p);
    for &(i, j) in &graph.edges {
        let magnitude = rng.random_range(0.3..=0.5);
        let value = if rng.random_bool(0.5) { magnitude } else { -magnitude };
        omega[(i, j)] = value;
        omega[(j, i)] = value;
    }
    omega
}

/// Upper bound (exclusive, zero-based) of the block in which signs are flipped.
pub fn flip_block(rho: f64, p: usize) -> usize {
    ((rho * p as f64) + 1e-9).floor() as usize
}

/// Builds the case/control pair from a zero-diagonal base matrix: the control
/// matrix negates every base edge inside the leading `floor(rho * p)` block,
/// then each matrix is shifted by `(|lambda_min| + 0.5) I` independently.
pub fn make_pair(omega_base: &DMatrix<f64>, rho: f64) -> Result<PrecisionPair> {
    let p = omega_base.nrows();
    if !omega_base.is_square() || !is_symmetric(omega_base, 0.0) {
        return Err(invalid!("base precision matrix must be square and symmetric"));
    }
    if omega_base.diagonal().iter().any(|&v| v != 0.0) {
        return Err(invalid!("base precision matrix must have a zero diagonal"));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(invalid!("flip proportion {rho} outside (0, 1]"));
    }
    let bound = flip_block(rho, p);
    if bound < 2 {
        log::warn!("flip block floor({rho} * {p}) = {bound} < 2; the flip set is empty");
    }

    let omega_x = omega_base.clone();
    let mut omega_y = omega_base.clone();
    let mut flip_set = Vec::new();
    for i in 0..bound {
        for j in (i + 1)..bound {
            if omega_base[(i, j)] != 0.0 {
                omega_y[(i, j)] = -omega_base[(i, j)];
                omega_y[(j, i)] = -omega_base[(j, i)];
                flip_set.push((i, j));
            }
        }
    }
    let omega_x = shift_to_pd(omega_x);
    let omega_y = shift_to_pd(omega_y);
    let delta = &omega_x - &omega_y;
    Ok(PrecisionPair {
        omega_x,
        omega_y,
        delta,
        flip_set,
        rho,
    })
}

fn shift_to_pd(mut omega: DMatrix<f64>) -> DMatrix<f64> {
    let shift = min_eigenvalue(&omega).abs() + PD_MARGIN;
    for i in 0..omega.nrows() {
        omega[(i, i)] += shift;
    }
    omega
}
