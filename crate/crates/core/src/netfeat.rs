//! Fisher-transformed partial-correlation edge features.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::clime::{sample_covariance, select_lambda_dens, LambdaGrid};
use crate::error::{invalid, Result};
use crate::simgen::{Group, SubjectScan};

/// Correlations are clamped to `+-(1 - CLAMP)` before transforming.
pub const CLAMP: f64 = 1e-6;

/// Bijection between feature positions and node pairs `(i, j)`, `i < j`
/// (zero-based), ordered `(0,1), (0,2), ..., (0,p-1), (1,2), ...`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeIndex {
    p: usize,
}

impl EdgeIndex {
    pub fn new(p: usize) -> Self {
        EdgeIndex { p }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `p (p - 1) / 2`
    pub fn len(&self) -> usize {
        self.p * self.p.saturating_sub(1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        if i == j || j >= self.p {
            return None;
        }
        Some(i * self.p - i * (i + 1) / 2 + (j - i - 1))
    }

    pub fn pair(&self, position: usize) -> Option<(usize, usize)> {
        if position >= self.len() {
            return None;
        }
        let mut start = 0;
        for i in 0..self.p {
            let row = self.p - i - 1;
            if position < start + row {
                return Some((i, i + 1 + position - start));
            }
            start += row;
        }
        None
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.p).flat_map(move |i| ((i + 1)..self.p).map(move |j| (i, j)))
    }

    /// Column label `"i_j"` with one-based node numbers.
    pub fn label(&self, position: usize) -> Option<String> {
        self.pair(position).map(|(i, j)| format!("{}_{}", i + 1, j + 1))
    }

    pub fn parse_label(label: &str) -> Option<(usize, usize)> {
        let (a, b) = label.split_once('_')?;
        let i: usize = a.trim().parse().ok()?;
        let j: usize = b.trim().parse().ok()?;
        (i >= 1 && j > i).then(|| (i - 1, j - 1))
    }

    /// Upper-triangular entries of a symmetric matrix in feature order.
    pub fn vectorize(&self, m: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.pairs().map(|(i, j)| m[(i, j)]))
    }
}

/// `D^{-1/2} Omega D^{-1/2}` with `D = diag(Omega)`. Off-diagonal entries are
/// clamped to `[-1 + CLAMP, 1 - CLAMP]`.
pub fn partial_correlation(omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !omega.is_square() {
        return Err(invalid!("precision matrix must be square"));
    }
    let p = omega.nrows();
    let diag = omega.diagonal();
    if let Some(k) = (0..p).find(|&k| !(diag[k] > 0.0)) {
        return Err(invalid!("precision diagonal entry {k} is not positive ({})", diag[k]));
    }
    let inv_sqrt = diag.map(|v| 1.0 / v.sqrt());
    Ok(DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            (omega[(i, j)] * inv_sqrt[i] * inv_sqrt[j]).clamp(-1.0 + CLAMP, 1.0 - CLAMP)
        }
    }))
}

/// `0.5 ln((1 + r) / (1 - r))` after clamping `|r| <= 1 - CLAMP`.
pub fn fisher_transform(r: f64) -> Result<f64> {
    if r.is_nan() {
        return Err(invalid!("Fisher transform of NaN"));
    }
    let t = r.abs().min(1.0 - CLAMP).atanh();
    Ok(if r < 0.0 { -t } else { t })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClimeConfig {
    pub target_density: f64,
    pub grid: LambdaGrid,
}

impl Default for ClimeConfig {
    fn default() -> Self {
        ClimeConfig {
            target_density: 0.5,
            grid: LambdaGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFeatureVector {
    pub values: DVector<f64>,
    pub index: EdgeIndex,
    pub group: Group,
    pub dataset: usize,
    /// CLIME tuning parameter used for this subject.
    pub lambda: f64,
    /// Achieved off-diagonal density at that lambda.
    pub density: f64,
}

/// Covariance, tuned CLIME, partial correlation, then Fisher transform.
/// The scan is used as given; whiten beforehand if needed.
pub fn features_from_scan(scan: &SubjectScan, config: &ClimeConfig) -> Result<EdgeFeatureVector> {
    scan.validate()?;
    let sigma_hat = sample_covariance(&scan.data)?;
    let grid = config.grid.resolve(&sigma_hat)?;
    let (tuning, solution) = select_lambda_dens(&sigma_hat, config.target_density, &grid)?;
    let r = partial_correlation(&solution.omega)?;
    let index = EdgeIndex::new(scan.data.nrows());
    let values = index
        .pairs()
        .map(|(i, j)| fisher_transform(r[(i, j)]))
        .collect::<Result<Vec<_>>>()?;
    Ok(EdgeFeatureVector {
        values: DVector::from_vec(values),
        index,
        group: scan.group,
        dataset: scan.dataset,
        lambda: tuning.lambda(),
        density: solution.density(),
    })
}
