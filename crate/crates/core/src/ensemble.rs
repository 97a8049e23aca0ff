//! Bootstrap ensemble: refit on stratified resamples and record how often
//! each edge coefficient is nonzero.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::netfeat::EdgeIndex;
use crate::rng::{derive_seed, key, stream, Purpose};
use crate::sgmcp::{cross_validate, fit, CvOptions, DatasetBlock, FitOptions, JointDesign, PenaltyParams};

pub const DEFAULT_REPLICATES: usize = 100;
pub const DEFAULT_TAU: f64 = 0.5;
/// Largest tolerated fraction of failed replicate fits.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleOptions {
    pub replicates: usize,
    pub seed: u64,
    /// Re-tune the penalty on every replicate instead of reusing the given one.
    pub cv_per_replicate: bool,
    pub cv: CvOptions,
    pub fit: FitOptions,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            replicates: DEFAULT_REPLICATES,
            seed: 0,
            cv_per_replicate: false,
            cv: CvOptions::default(),
            fit: FitOptions::default(),
        }
    }
}

/// Resamples cases and controls of every dataset separately, with
/// replacement, keeping both class sizes.
pub fn stratified_bootstrap<R: Rng + ?Sized>(design: &JointDesign, rng: &mut R) -> Result<JointDesign> {
    design.require_both_classes()?;
    let datasets = design
        .datasets
        .iter()
        .map(|block| resample_block(block, rng))
        .collect();
    Ok(JointDesign { datasets })
}

fn resample_block<R: Rng + ?Sized>(block: &DatasetBlock, rng: &mut R) -> DatasetBlock {
    let (cases, controls) = block.class_rows();
    let mut rows = Vec::with_capacity(block.n());
    for class in [&cases, &controls] {
        rows.extend((0..class.len()).map(|_| class[rng.random_range(0..class.len())]));
    }
    block.select_rows(&rows)
}

/// Bootstrap inclusion frequencies `psi` (`d x M`).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeightMatrix {
    pub psi: DMatrix<f64>,
    /// Number of replicates with a nonzero coefficient.
    pub counts: DMatrix<u32>,
    /// Replicates that contributed (`B` effective).
    pub replicates: usize,
    pub requested: usize,
    /// Failed replicate ids with the reason.
    pub failures: Vec<(usize, String)>,
    pub index: Option<EdgeIndex>,
}

impl EdgeWeightMatrix {
    pub fn from_counts(counts: DMatrix<u32>, replicates: usize, index: Option<EdgeIndex>) -> Result<Self> {
        if replicates == 0 {
            return Err(invalid!("at least one replicate is required"));
        }
        if counts.iter().any(|&c| c as usize > replicates) {
            return Err(invalid!("inclusion count exceeds the number of replicates"));
        }
        if let Some(ix) = &index {
            if ix.len() != counts.nrows() {
                return Err(Error::Dimension(format!(
                    "edge index has {} pairs but psi has {} rows",
                    ix.len(),
                    counts.nrows()
                )));
            }
        }
        Ok(EdgeWeightMatrix {
            psi: counts.map(|c| c as f64 / replicates as f64),
            counts,
            replicates,
            requested: replicates,
            failures: Vec::new(),
            index,
        })
    }

    pub fn with_index(mut self, index: EdgeIndex) -> Result<Self> {
        if index.len() != self.psi.nrows() {
            return Err(Error::Dimension(format!(
                "edge index has {} pairs but psi has {} rows",
                index.len(),
                self.psi.nrows()
            )));
        }
        self.index = Some(index);
        Ok(self)
    }

    pub fn n_datasets(&self) -> usize {
        self.psi.ncols()
    }

    fn row_label(&self, row: usize) -> String {
        self.index
            .as_ref()
            .and_then(|ix| ix.label(row))
            .unwrap_or_else(|| (row + 1).to_string())
    }

    /// CSV with one row per edge and one column per (one-based) dataset.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "edge")?;
        for m in 0..self.n_datasets() {
            write!(out, ",{}", m + 1)?;
        }
        writeln!(out)?;
        for l in 0..self.psi.nrows() {
            write!(out, "{}", self.row_label(l))?;
            for m in 0..self.n_datasets() {
                write!(out, ",{}", self.psi[(l, m)])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    /// Reads a CSV written by [`EdgeWeightMatrix::write_csv`]; `replicates` restores the counts.
    pub fn load_csv(path: &Path, replicates: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::format(path, "empty file"))?;
        let m = header.split(',').count().saturating_sub(1);
        let mut labels = Vec::new();
        let mut values = Vec::new();
        for (k, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let mut fields = line.split(',');
            labels.push(fields.next().unwrap_or_default().to_string());
            let row: Vec<f64> = fields
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(path, format!("line {}: {e}", k + 2)))?;
            if row.len() != m {
                return Err(Error::format(path, format!("line {} has {} values, expected {m}", k + 2, row.len())));
            }
            values.extend(row);
        }
        let d = labels.len();
        let psi = DMatrix::from_row_slice(d, m, &values);
        let counts = psi.map(|v| (v * replicates as f64).round() as u32);
        let index = labels
            .iter()
            .all(|l| EdgeIndex::parse_label(l).is_some())
            .then(|| edge_index_for(d))
            .flatten();
        EdgeWeightMatrix::from_counts(counts, replicates, index)
    }
}

/// Node count `p` with `p (p - 1) / 2 == d`, if any.
fn edge_index_for(d: usize) -> Option<EdgeIndex> {
    let p = ((1.0 + (1.0 + 8.0 * d as f64).sqrt()) / 2.0).round() as usize;
    (p * p.saturating_sub(1) / 2 == d && d > 0).then(|| EdgeIndex::new(p))
}

/// Fits every bootstrap replicate with a fixed penalty (or a per-replicate
/// CV choice) and counts nonzero coefficients.
pub fn run_ensemble(design: &JointDesign, params: &PenaltyParams, opts: &EnsembleOptions) -> Result<EdgeWeightMatrix> {
    design.validate()?;
    design.require_both_classes()?;
    params.validate()?;
    let b_total = opts.replicates;
    if b_total == 0 {
        return Err(invalid!("at least one replicate is required"));
    }
    let outcomes: Vec<std::result::Result<DMatrix<bool>, String>> = (0..b_total)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(opts.seed, key(Purpose::Bootstrap, 0, 0, b as u64));
            let sample = stratified_bootstrap(design, &mut rng).map_err(|e| e.to_string())?;
            let chosen = if opts.cv_per_replicate {
                let cv = CvOptions {
                    seed: derive_seed(opts.cv.seed, Purpose::Folds, b as u64),
                    ..opts.cv.clone()
                };
                cross_validate(&sample, &cv).map_err(|e| e.to_string())?.params
            } else {
                *params
            };
            fit(&sample, &chosen, &opts.fit)
                .map(|f| f.support())
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut counts = DMatrix::<u32>::zeros(design.n_features(), design.n_datasets());
    let mut failures = Vec::new();
    for (b, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(support) => {
                for (c, s) in counts.iter_mut().zip(support.iter()) {
                    *c += u32::from(*s);
                }
            }
            Err(reason) => {
                warn!("bootstrap replicate {b} failed: {reason}");
                failures.push((b, reason));
            }
        }
    }
    if failures.len() as f64 > MAX_FAILURE_FRACTION * b_total as f64 || failures.len() == b_total {
        return Err(Error::EnsembleFailures {
            failed: failures.len(),
            total: b_total,
        });
    }
    let mut psi = EdgeWeightMatrix::from_counts(counts, b_total - failures.len(), None)?;
    psi.requested = b_total;
    psi.failures = failures;
    Ok(psi)
}

/// Selected edges per dataset: rows with `psi > tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSet {
    pub tau: f64,
    /// Zero-based feature rows per dataset, ascending.
    pub rows: Vec<Vec<usize>>,
    /// Zero-based node pairs per dataset when an edge index is known.
    pub edges: Option<Vec<BTreeSet<(usize, usize)>>>,
}

impl SupportSet {
    /// One-based `"i_j"` labels (or row numbers) for dataset `m`, one per line.
    pub fn write_list<W: Write>(&self, m: usize, index: Option<&EdgeIndex>, mut out: W) -> std::io::Result<()> {
        for &row in &self.rows[m] {
            match index.and_then(|ix| ix.label(row)) {
                Some(label) => writeln!(out, "{label}")?,
                None => writeln!(out, "{}", row + 1)?,
            }
        }
        Ok(())
    }
}

pub fn threshold_support(psi: &EdgeWeightMatrix, tau: f64) -> Result<SupportSet> {
    if !(0.0..1.0).contains(&tau) {
        return Err(invalid!("tau must lie in [0, 1) (got {tau})"));
    }
    let rows: Vec<Vec<usize>> = (0..psi.n_datasets())
        .map(|m| (0..psi.psi.nrows()).filter(|&l| psi.psi[(l, m)] > tau).collect())
        .collect();
    let edges = psi.index.as_ref().map(|ix| {
        rows.iter()
            .map(|r| r.iter().filter_map(|&l| ix.pair(l)).collect())
            .collect()
    });
    Ok(SupportSet { tau, rows, edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn design(n_per_class: usize) -> JointDesign {
        let n = 2 * n_per_class;
        let z = DVector::from_fn(n, |k, _| f64::from(k < n_per_class));
        let x = DMatrix::from_fn(n, 3, |k, l| ((k * 5 + l * 11) as f64).sin() + if l == 0 { 2.0 * z[k] } else { 0.0 });
        JointDesign::new(vec![DatasetBlock::new(x, DMatrix::zeros(n, 0), z)]).unwrap()
    }

    #[test]
    fn bootstrap_keeps_class_sizes() {
        let d = design(7);
        let mut rng = stream(1, 0);
        let b = stratified_bootstrap(&d, &mut rng).unwrap();
        assert_eq!(b.datasets[0].n_cases(), 7);
        assert_eq!(b.datasets[0].n(), 14);
    }

    #[test]
    fn psi_counts_and_threshold() {
        let counts = DMatrix::from_row_slice(3, 1, &[3u32, 2, 4]);
        let psi = EdgeWeightMatrix::from_counts(counts, 4, Some(EdgeIndex::new(3))).unwrap();
        assert_eq!(psi.psi[(0, 0)], 0.75);
        let s = threshold_support(&psi, 0.5).unwrap();
        assert_eq!(s.rows[0], vec![0, 2]);
        assert_eq!(s.edges.as_ref().unwrap()[0], BTreeSet::from([(0, 1), (1, 2)]));
        assert_eq!(threshold_support(&psi, 1.0 - 0.1).unwrap().rows[0], vec![2]);
        assert!(threshold_support(&psi, 1.0).is_err());
    }

    #[test]
    fn ensemble_is_deterministic() {
        let d = design(8);
        let opts = EnsembleOptions {
            replicates: 6,
            seed: 9,
            ..EnsembleOptions::default()
        };
        let params = PenaltyParams::new(0.0, 0.05);
        let a = run_ensemble(&d, &params, &opts).unwrap();
        let b = run_ensemble(&d, &params, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.replicates, 6);
        assert!(a.psi.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn csv_round_trip() {
        let counts = DMatrix::from_row_slice(3, 2, &[1u32, 0, 2, 2, 0, 1]);
        let psi = EdgeWeightMatrix::from_counts(counts, 2, Some(EdgeIndex::new(3))).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("psi.csv");
        psi.save_csv(&path).unwrap();
        assert_eq!(EdgeWeightMatrix::load_csv(&path, 2).unwrap(), psi);
    }
}
