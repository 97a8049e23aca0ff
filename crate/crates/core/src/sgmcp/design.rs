use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Observations of one dataset: edge features, confounders and 0/1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBlock {
    /// `n x d`
    pub features: DMatrix<f64>,
    /// `n x L`
    pub confounders: DMatrix<f64>,
    pub labels: DVector<f64>,
}

impl DatasetBlock {
    pub fn new(features: DMatrix<f64>, confounders: DMatrix<f64>, labels: DVector<f64>) -> Self {
        DatasetBlock {
            features,
            confounders,
            labels,
        }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cases(&self) -> usize {
        self.labels.iter().filter(|&&z| z == 1.0).count()
    }

    /// Rows selected (with repetition allowed) in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DatasetBlock {
        DatasetBlock {
            features: self.features.select_rows(rows),
            confounders: self.confounders.select_rows(rows),
            labels: DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.labels[r])),
        }
    }

    /// Row indices of cases and of controls.
    pub fn class_rows(&self) -> (Vec<usize>, Vec<usize>) {
        (0..self.n()).partition(|&k| self.labels[k] == 1.0)
    }
}

/// Joint regression design across `M` datasets sharing the same `d` edge
/// features and `L` confounders. Every fit also carries an unpenalized
/// per-dataset intercept that is not part of the confounder matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDesign {
    pub datasets: Vec<DatasetBlock>,
}

impl JointDesign {
    pub fn new(datasets: Vec<DatasetBlock>) -> Result<Self> {
        let design = JointDesign { datasets };
        design.validate()?;
        Ok(design)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .datasets
            .first()
            .ok_or_else(|| Error::Dimension("design has no datasets".into()))?;
        let d = first.features.ncols();
        let l = first.confounders.ncols();
        for (m, block) in self.datasets.iter().enumerate() {
            let n = block.labels.len();
            if n == 0 {
                return Err(Error::Dimension(format!("dataset {m} has no observations")));
            }
            if block.features.nrows() != n || block.confounders.nrows() != n {
                return Err(Error::Dimension(format!(
                    "dataset {m}: {n} labels but {} feature rows and {} confounder rows",
                    block.features.nrows(),
                    block.confounders.nrows()
                )));
            }
            if block.features.ncols() != d || block.confounders.ncols() != l {
                return Err(Error::Dimension(format!(
                    "dataset {m} has {} features / {} confounders, expected {d} / {l}",
                    block.features.ncols(),
                    block.confounders.ncols()
                )));
            }
            if block.labels.iter().any(|&z| z != 0.0 && z != 1.0) {
                return Err(Error::InvalidParameter(format!("dataset {m} has labels outside {{0, 1}}")));
            }
            if block
                .features
                .iter()
                .chain(block.confounders.iter())
                .any(|v| !v.is_finite())
            {
                return Err(Error::InvalidParameter(format!("dataset {m} has non-finite covariates")));
            }
        }
        Ok(())
    }

    pub fn n_datasets(&self) -> usize {
        self.datasets.len()
    }

    pub fn n_features(&self) -> usize {
        self.datasets[0].features.ncols()
    }

    pub fn n_confounders(&self) -> usize {
        self.datasets[0].confounders.ncols()
    }

    /// Total sample size `N`.
    pub fn n_total(&self) -> usize {
        self.datasets.iter().map(DatasetBlock::n).sum()
    }

    pub fn require_both_classes(&self) -> Result<()> {
        for (m, block) in self.datasets.iter().enumerate() {
            let cases = block.n_cases();
            if cases == 0 || cases == block.n() {
                return Err(Error::DegenerateLabels {
                    dataset: m,
                    reason: "all observations share one class".into(),
                });
            }
        }
        Ok(())
    }

    /// Keeps only the given feature columns, in the given order.
    pub fn select_features(&self, columns: &[usize]) -> JointDesign {
        JointDesign {
            datasets: self
                .datasets
                .iter()
                .map(|b| DatasetBlock {
                    features: b.features.select_columns(columns),
                    confounders: b.confounders.clone(),
                    labels: b.labels.clone(),
                })
                .collect(),
        }
    }

    /// Single-dataset design for dataset `m`.
    pub fn dataset(&self, m: usize) -> Result<JointDesign> {
        self.datasets
            .get(m)
            .map(|b| JointDesign {
                datasets: vec![b.clone()],
            })
            .ok_or(Error::UnknownDataset(m))
    }
}
