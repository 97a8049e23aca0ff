//! Penalty levels at which the all-zero edge coefficient matrix becomes a
//! stationary point.
//!
//! The gradient is taken on the standardized feature scale used by the solver,
//! at the confounder-only fit, so the thresholds are exact for [`super::fit`]
//! with default options.

use nalgebra::DMatrix;

use super::design::JointDesign;
use super::solver::Solver;
use crate::error::{invalid, Result};

/// Null-model loss gradient `g` (`d x M`) with both thresholds derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaBounds {
    pub gradient: DMatrix<f64>,
}

impl LambdaBounds {
    pub fn compute(design: &JointDesign, standardize: bool) -> Result<Self> {
        let solver = Solver::new(design, standardize)?;
        let null = solver.null_state();
        Ok(LambdaBounds {
            gradient: solver.beta_gradient(&null),
        })
    }

    pub fn lambda2_max(&self) -> f64 {
        self.gradient.amax()
    }

    /// `max_l ||S(g_l, lambda2)||_2 / sqrt(M)` with `S` the soft threshold.
    pub fn lambda1_max(&self, lambda2: f64) -> Result<f64> {
        if !(lambda2 >= 0.0 && lambda2.is_finite()) {
            return Err(invalid!("lambda2 must be finite and nonnegative (got {lambda2})"));
        }
        let m = self.gradient.ncols() as f64;
        let worst = self
            .gradient
            .row_iter()
            .map(|row| {
                row.iter()
                    .map(|&g| (g.abs() - lambda2).max(0.0).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        Ok(worst / m.sqrt())
    }
}

/// Smallest `lambda2` (with `lambda1 = 0`) that keeps every edge coefficient at zero.
pub fn lambda2_max(design: &JointDesign) -> Result<f64> {
    Ok(LambdaBounds::compute(design, true)?.lambda2_max())
}

/// Smallest `lambda1` at fixed `lambda2` that keeps every edge coefficient at zero.
pub fn lambda1_max(design: &JointDesign, lambda2: f64) -> Result<f64> {
    LambdaBounds::compute(design, true)?.lambda1_max(lambda2)
}
