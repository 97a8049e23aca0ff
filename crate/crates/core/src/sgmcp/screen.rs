//! Sure independence screening by pooled marginal correlation.

use super::design::JointDesign;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Screening {
    /// Retained feature columns of the input design, ascending.
    pub kept: Vec<usize>,
    /// Marginal utility of every input feature.
    pub utility: Vec<f64>,
    pub design: JointDesign,
}

impl Screening {
    /// Maps a column of the reduced design back to the input design.
    pub fn original_index(&self, reduced: usize) -> usize {
        self.kept[reduced]
    }
}

fn standardized(values: impl Iterator<Item = f64> + Clone, n: usize) -> Vec<f64> {
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.clone().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    if sd <= 1e-12 * (1.0 + mean.abs()) {
        vec![0.0; n]
    } else {
        values.map(|v| (v - mean) / sd).collect()
    }
}

/// Absolute correlation between each feature and the labels, with both
/// standardized within each dataset and the products pooled over all `N`
/// observations.
pub fn marginal_utility(design: &JointDesign) -> Vec<f64> {
    let d = design.n_features();
    let n_total = design.n_total() as f64;
    let mut utility = vec![0.0; d];
    for block in &design.datasets {
        let n = block.n();
        let z = standardized(block.labels.iter().copied(), n);
        for (l, u) in utility.iter_mut().enumerate() {
            let x = standardized(block.features.column(l).iter().copied(), n);
            *u += x.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    utility.iter().map(|u| (u / n_total).abs()).collect()
}

/// Keeps the `keep` features with the largest marginal utility (ties to the
/// lower index).
pub fn sis_screen(design: &JointDesign, keep: usize) -> Result<Screening> {
    design.validate()?;
    let d = design.n_features();
    if keep == 0 || keep > d {
        return Err(invalid!("keep must lie in 1..={d} (got {keep})"));
    }
    let utility = marginal_utility(design);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| utility[b].total_cmp(&utility[a]).then(a.cmp(&b)));
    let mut kept = order[..keep].to_vec();
    kept.sort_unstable();
    Ok(Screening {
        design: design.select_features(&kept),
        kept,
        utility,
    })
}
