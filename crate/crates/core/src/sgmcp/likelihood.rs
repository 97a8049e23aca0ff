use nalgebra::{DMatrix, DVector};

use super::design::{DatasetBlock, JointDesign};
use crate::error::{Error, Result};

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Regression coefficients on the scale of the design they were fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    /// Per-dataset intercept.
    pub intercept: Vec<f64>,
    /// Per-dataset confounder coefficients, each of length `L`.
    pub eta: Vec<DVector<f64>>,
    /// `d x M` edge coefficients.
    pub beta: DMatrix<f64>,
}

impl Coefficients {
    pub fn zeros(design: &JointDesign) -> Self {
        let m = design.n_datasets();
        Coefficients {
            intercept: vec![0.0; m],
            eta: vec![DVector::zeros(design.n_confounders()); m],
            beta: DMatrix::zeros(design.n_features(), m),
        }
    }

    pub fn check(&self, design: &JointDesign) -> Result<()> {
        let m = design.n_datasets();
        if self.intercept.len() != m
            || self.eta.len() != m
            || self.eta.iter().any(|e| e.len() != design.n_confounders())
            || self.beta.shape() != (design.n_features(), m)
        {
            return Err(Error::Dimension("coefficients do not match the design".into()));
        }
        Ok(())
    }

    pub fn linear_predictor(&self, block: &DatasetBlock, m: usize) -> DVector<f64> {
        let mut eta = &block.features * self.beta.column(m) + &block.confounders * &self.eta[m];
        eta.add_scalar_mut(self.intercept[m]);
        eta
    }
}

/// Joint negative log-likelihood averaged over all `N` observations.
pub fn negative_log_likelihood(design: &JointDesign, coef: &Coefficients) -> Result<f64> {
    coef.check(design)?;
    let n = design.n_total() as f64;
    let mut total = 0.0;
    for (m, block) in design.datasets.iter().enumerate() {
        let lp = coef.linear_predictor(block, m);
        total += lp
            .iter()
            .zip(block.labels.iter())
            .map(|(&x, &z)| softplus(x) - z * x)
            .sum::<f64>();
    }
    Ok(total / n)
}

/// Gradient of [`negative_log_likelihood`], laid out like [`Coefficients`].
pub fn negative_log_likelihood_gradient(
    design: &JointDesign,
    coef: &Coefficients,
) -> Result<Coefficients> {
    coef.check(design)?;
    let n = design.n_total() as f64;
    let mut grad = Coefficients::zeros(design);
    for (m, block) in design.datasets.iter().enumerate() {
        let lp = coef.linear_predictor(block, m);
        let resid = DVector::from_iterator(
            lp.len(),
            lp.iter().zip(block.labels.iter()).map(|(&x, &z)| (sigmoid(x) - z) / n),
        );
        grad.intercept[m] = resid.sum();
        grad.eta[m] = block.confounders.tr_mul(&resid);
        grad.beta.set_column(m, &block.features.tr_mul(&resid));
    }
    Ok(grad)
}
