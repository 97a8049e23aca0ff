use nalgebra::DVector;

use super::design::DatasetBlock;
use super::likelihood::sigmoid;
use super::solver::CoefficientFit;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub probability: f64,
    /// 1 for a case, 0 for a control.
    pub label: u8,
}

/// Case probability for one subject of dataset `dataset` (0-based).
pub fn predict(
    fit: &CoefficientFit,
    confounders: &DVector<f64>,
    features: &DVector<f64>,
    dataset: usize,
) -> Result<Prediction> {
    let coef = &fit.coefficients;
    if dataset >= coef.intercept.len() {
        return Err(Error::UnknownDataset(dataset));
    }
    if confounders.len() != coef.eta[dataset].len() || features.len() != coef.beta.nrows() {
        return Err(Error::Dimension(format!(
            "expected {} confounders and {} features, got {} and {}",
            coef.eta[dataset].len(),
            coef.beta.nrows(),
            confounders.len(),
            features.len()
        )));
    }
    let lp = coef.intercept[dataset] + coef.eta[dataset].dot(confounders) + coef.beta.column(dataset).dot(features);
    let probability = sigmoid(lp);
    Ok(Prediction {
        probability,
        label: u8::from(probability > DEFAULT_THRESHOLD),
    })
}

/// Predictions for every row of a block.
pub fn predict_block(fit: &CoefficientFit, block: &DatasetBlock, dataset: usize) -> Result<Vec<Prediction>> {
    (0..block.n())
        .map(|k| {
            predict(
                fit,
                &block.confounders.row(k).transpose(),
                &block.features.row(k).transpose(),
                dataset,
            )
        })
        .collect()
}

/// Fraction of misclassified rows.
pub fn error_rate(fit: &CoefficientFit, block: &DatasetBlock, dataset: usize) -> Result<f64> {
    let preds = predict_block(fit, block, dataset)?;
    let wrong = preds
        .iter()
        .zip(block.labels.iter())
        .filter(|(p, &z)| f64::from(p.label) != z)
        .count();
    Ok(wrong as f64 / block.n().max(1) as f64)
}
