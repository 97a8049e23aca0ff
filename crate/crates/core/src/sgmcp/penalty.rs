use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Tuning parameters of the sparse group MCP. `lambda1` acts on row norms
/// (scaled by `sqrt(M)`), `lambda2` on individual coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

pub const DEFAULT_GAMMA: f64 = 10.0;

impl PenaltyParams {
    pub fn new(lambda1: f64, lambda2: f64) -> Self {
        PenaltyParams {
            lambda1,
            lambda2,
            gamma1: DEFAULT_GAMMA,
            gamma2: DEFAULT_GAMMA,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma1 = gamma;
        self.gamma2 = gamma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid!("{name} must be finite and nonnegative (got {v})"));
            }
        }
        for (name, v) in [("gamma1", self.gamma1), ("gamma2", self.gamma2)] {
            if !(v > 1.0 && v.is_finite()) {
                return Err(invalid!("{name} must be finite and > 1 (got {v})"));
            }
        }
        Ok(())
    }
}

/// MCP `lambda * int_0^|t| (1 - x / (gamma lambda))_+ dx` in closed form.
pub fn mcp(t: f64, lambda: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(invalid!("MCP gamma must exceed 1 (got {gamma})"));
    }
    if !(lambda >= 0.0) {
        return Err(invalid!("MCP lambda must be nonnegative (got {lambda})"));
    }
    Ok(mcp_value(t, lambda, gamma))
}

#[inline]
pub(crate) fn mcp_value(t: f64, lambda: f64, gamma: f64) -> f64 {
    let a = t.abs();
    if a <= gamma * lambda {
        lambda * a - a * a / (2.0 * gamma)
    } else {
        0.5 * gamma * lambda * lambda
    }
}

/// Derivative of the MCP in `|t|`, i.e. `(lambda - |t| / gamma)_+`.
#[inline]
pub fn mcp_derivative(t: f64, lambda: f64, gamma: f64) -> f64 {
    (lambda - t.abs() / gamma).max(0.0)
}

/// Group MCP on row norms plus elementwise MCP for a `d x M` coefficient matrix.
pub fn penalty_total(theta_beta: &DMatrix<f64>, params: &PenaltyParams) -> f64 {
    let group_lambda = (theta_beta.ncols() as f64).sqrt() * params.lambda1;
    let mut total = 0.0;
    for row in theta_beta.row_iter() {
        total += mcp_value(row.norm(), group_lambda, params.gamma1);
        total += row
            .iter()
            .map(|&b| mcp_value(b, params.lambda2, params.gamma2))
            .sum::<f64>();
    }
    total
}

/// Minimizer over a scalar of `a/2 (b - z)^2 + MCP(b; lambda, gamma)` restricted
/// to local minima. Returns the nonzero local minimizer if one exists.
#[inline]
pub(crate) fn mcp_nonzero_local_min(z: f64, a: f64, lambda: f64, gamma: f64) -> Option<f64> {
    let az = z.abs();
    if az == 0.0 {
        return None;
    }
    let t = if az >= gamma * lambda {
        az
    } else if a > 1.0 / gamma && a * az > lambda {
        (a * az - lambda) / (a - 1.0 / gamma)
    } else {
        return None;
    };
    Some(t.copysign(z))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mcp_examples() {
        assert_eq!(mcp(0.0, 0.7, 3.0).unwrap(), 0.0);
        assert!((mcp(0.5, 1.0, 10.0).unwrap() - 0.4875).abs() < 1e-15);
        assert!((mcp(100.0, 1.0, 10.0).unwrap() - 5.0).abs() < 1e-15);
        assert_eq!(mcp(-0.5, 1.0, 10.0).unwrap(), mcp(0.5, 1.0, 10.0).unwrap());
        assert!(mcp(1.0, 1.0, 1.0).is_err());
        assert!(mcp(1.0, -1.0, 3.0).is_err());
        // continuity at the knot
        let knot = 3.0 * 0.4;
        assert!((mcp_value(knot - 1e-12, 0.4, 3.0) - mcp_value(knot + 1e-12, 0.4, 3.0)).abs() < 1e-11);
    }

    #[test]
    fn penalty_examples() {
        let p = PenaltyParams::new(0.1, 0.1);
        assert_eq!(penalty_total(&DMatrix::zeros(3, 2), &p), 0.0);

        let theta = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let expected = mcp_value(5.0, 0.1 * 2f64.sqrt(), 10.0)
            + mcp_value(3.0, 0.1, 10.0)
            + mcp_value(4.0, 0.1, 10.0);
        assert!((penalty_total(&theta, &p) - expected).abs() < 1e-15);

        // single dataset: row norm is |b| and lambda1 is unscaled
        let single = DMatrix::from_row_slice(2, 1, &[0.3, -0.2]);
        let expected = mcp_value(0.3, 0.1, 10.0) * 2.0 + mcp_value(0.2, 0.1, 10.0) * 2.0;
        assert!((penalty_total(&single, &p) - expected).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(PenaltyParams::new(0.1, 0.2).validate().is_ok());
        assert!(PenaltyParams::new(-0.1, 0.2).validate().is_err());
        assert!(PenaltyParams::new(0.1, 0.2).with_gamma(1.0).validate().is_err());
    }

    #[test]
    fn scalar_thresholding() {
        // convex case (a > 1/gamma): firm thresholding
        assert_eq!(mcp_nonzero_local_min(0.05, 1.0, 0.1, 3.0), None);
        let b = mcp_nonzero_local_min(0.2, 1.0, 0.1, 3.0).unwrap();
        assert!((b - 0.1 / (1.0 - 1.0 / 3.0)).abs() < 1e-15);
        assert_eq!(mcp_nonzero_local_min(-5.0, 1.0, 0.1, 3.0), Some(-5.0));
        // nonconvex case: only the flat region hosts a nonzero minimum
        assert_eq!(mcp_nonzero_local_min(0.5, 0.05, 0.1, 10.0), None);
        assert_eq!(mcp_nonzero_local_min(1.5, 0.05, 0.1, 10.0), Some(1.5));
        // no penalty
        assert_eq!(mcp_nonzero_local_min(0.3, 0.05, 0.0, 10.0), Some(0.3));
    }
}
