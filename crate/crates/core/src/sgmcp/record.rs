//! JSON form of a fit: per-dataset intercept and confounder coefficients, the
//! nonzero edge coefficients as triplets, penalty, trace and convergence flag.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::likelihood::Coefficients;
use super::penalty::PenaltyParams;
use super::solver::CoefficientFit;
use crate::error::{Error, Result};
use crate::netfeat::EdgeIndex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaEntry {
    /// Zero-based feature position.
    pub row: usize,
    /// One-based node pair label, when the features are edges.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<String>,
    /// One-based dataset id.
    pub dataset: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRecord {
    pub n_features: usize,
    pub n_datasets: usize,
    pub params: PenaltyParams,
    pub intercept: Vec<f64>,
    pub eta: Vec<Vec<f64>>,
    pub beta: Vec<BetaEntry>,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl FitRecord {
    pub fn from_fit(fit: &CoefficientFit, index: Option<&EdgeIndex>) -> Self {
        let coef = &fit.coefficients;
        let mut beta = Vec::new();
        for m in 0..coef.beta.ncols() {
            for l in 0..coef.beta.nrows() {
                let value = coef.beta[(l, m)];
                if value != 0.0 {
                    beta.push(BetaEntry {
                        row: l,
                        edge: index.and_then(|ix| ix.label(l)),
                        dataset: m + 1,
                        value,
                    });
                }
            }
        }
        FitRecord {
            n_features: coef.beta.nrows(),
            n_datasets: coef.beta.ncols(),
            params: fit.params,
            intercept: coef.intercept.clone(),
            eta: coef.eta.iter().map(|e| e.iter().copied().collect()).collect(),
            beta,
            objective_trace: fit.objective_trace.clone(),
            converged: fit.converged,
            iterations: fit.iterations,
        }
    }

    pub fn into_fit(self) -> Result<CoefficientFit> {
        let bad = |msg: String| Error::Format {
            path: "fit record".into(),
            message: msg,
        };
        if self.intercept.len() != self.n_datasets || self.eta.len() != self.n_datasets {
            return Err(bad(format!("expected {} datasets", self.n_datasets)));
        }
        let mut beta = DMatrix::zeros(self.n_features, self.n_datasets);
        for e in &self.beta {
            if e.row >= self.n_features || e.dataset == 0 || e.dataset > self.n_datasets {
                return Err(bad(format!("coefficient ({}, {}) out of range", e.row, e.dataset)));
            }
            beta[(e.row, e.dataset - 1)] = e.value;
        }
        Ok(CoefficientFit {
            coefficients: Coefficients {
                intercept: self.intercept,
                eta: self.eta.into_iter().map(DVector::from_vec).collect(),
                beta,
            },
            params: self.params,
            objective_trace: self.objective_trace,
            converged: self.converged,
            iterations: self.iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut beta = DMatrix::zeros(3, 2);
        beta[(2, 1)] = -0.25;
        let fit = CoefficientFit {
            coefficients: Coefficients {
                intercept: vec![0.1, -0.2],
                eta: vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![2.0])],
                beta,
            },
            params: PenaltyParams::new(0.1, 0.2),
            objective_trace: vec![0.7, 0.6],
            converged: true,
            iterations: 1,
        };
        let record = FitRecord::from_fit(&fit, Some(&EdgeIndex::new(3)));
        assert_eq!(record.beta[0].edge.as_deref(), Some("2_3"));
        let json = serde_json::to_string(&record).unwrap();
        let back: FitRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_fit().unwrap(), fit);
    }
}
