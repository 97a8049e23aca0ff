//! Stage glue shared by the command line and the tests: whitening, feature
//! tables, the joint and separate estimators, and evaluation against a known
//! truth.

use std::io::Write;
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{run_ensemble, threshold_support, EdgeWeightMatrix, EnsembleOptions, DEFAULT_TAU};
use crate::error::{invalid, Error, Result};
use crate::metrics::{pr_curve, score_support, select_tau_max_tpr_tdr, EdgeSet, PrPoint, RecoveryScore};
use crate::netfeat::{features_from_scan, ClimeConfig, EdgeIndex};
use crate::rng::{derive_seed, Purpose};
use crate::sgmcp::{cross_validate, sis_screen, CvOptions, DatasetBlock, GridSpec, JointDesign, PenaltyParams};
use crate::simgen::{ar_covariance, estimate_ar1, Group, SubjectScan, Whitener};

/// Temporal covariance used for whitening.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Temporal {
    /// AR(1) covariance with known parameters per group.
    Known { case: f64, control: f64 },
    /// AR(1) parameter estimated from each scan.
    EstimatedAr1,
    /// Scans are used as given.
    None,
}

/// Whitens every scan according to `temporal`.
pub fn whiten_scans(scans: &[SubjectScan], temporal: Temporal) -> Result<Vec<SubjectScan>> {
    let q = match scans.first() {
        Some(s) => s.data.ncols(),
        None => return Ok(Vec::new()),
    };
    let known = match temporal {
        Temporal::Known { case, control } => Some((
            Whitener::new(&ar_covariance(q, case)?)?,
            Whitener::new(&ar_covariance(q, control)?)?,
        )),
        _ => None,
    };
    scans
        .par_iter()
        .map(|scan| {
            let data = match (&known, temporal) {
                (Some((case, control)), _) => match scan.group {
                    Group::Case => case.apply(&scan.data)?,
                    Group::Control => control.apply(&scan.data)?,
                },
                (None, Temporal::EstimatedAr1) => {
                    let rho = estimate_ar1(&scan.data);
                    Whitener::new(&ar_covariance(scan.data.ncols(), rho)?)?.apply(&scan.data)?
                }
                _ => scan.data.clone(),
            };
            Ok(SubjectScan { data, ..scan.clone() })
        })
        .collect()
}

/// Edge features of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub subject: String,
    pub group: Group,
    pub confounders: DVector<f64>,
    pub values: DVector<f64>,
    /// CLIME tuning parameter and achieved density, when known.
    pub lambda: Option<f64>,
    pub density: Option<f64>,
}

/// Feature rows grouped by dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub index: EdgeIndex,
    pub datasets: Vec<Vec<FeatureRow>>,
}

/// Subject identifiers `case_001`, `control_001`, ... in scan order.
pub fn subject_ids(scans: &[SubjectScan]) -> Vec<String> {
    let (mut cases, mut controls) = (0, 0);
    scans
        .iter()
        .map(|s| {
            let k = match s.group {
                Group::Case => {
                    cases += 1;
                    cases
                }
                Group::Control => {
                    controls += 1;
                    controls
                }
            };
            format!("{}_{k:03}", s.group.as_str())
        })
        .collect()
}

impl FeatureTable {
    /// Whitens and featurizes every scan; subjects run in parallel.
    pub fn from_scans(datasets: &[Vec<SubjectScan>], temporal: Temporal, clime: &ClimeConfig) -> Result<Self> {
        let p = datasets
            .iter()
            .flatten()
            .next()
            .map(|s| s.data.nrows())
            .ok_or_else(|| invalid!("no scans"))?;
        let mut out = Vec::with_capacity(datasets.len());
        for scans in datasets {
            if let Some(s) = scans.iter().find(|s| s.data.nrows() != p) {
                return Err(Error::Dimension(format!("scan with {} nodes, expected {p}", s.data.nrows())));
            }
            let ids = subject_ids(scans);
            let white = whiten_scans(scans, temporal)?;
            let rows = white
                .par_iter()
                .zip(ids)
                .map(|(scan, subject)| {
                    let f = features_from_scan(scan, clime)?;
                    Ok(FeatureRow {
                        subject,
                        group: scan.group,
                        confounders: scan.confounders.clone(),
                        values: f.values,
                        lambda: Some(f.lambda),
                        density: Some(f.density),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            out.push(rows);
        }
        Ok(FeatureTable {
            index: EdgeIndex::new(p),
            datasets: out,
        })
    }

    pub fn to_design(&self) -> Result<JointDesign> {
        let d = self.index.len();
        let blocks = self
            .datasets
            .iter()
            .enumerate()
            .map(|(m, rows)| {
                let n = rows.len();
                if n == 0 {
                    return Err(Error::Dimension(format!("dataset {} has no subjects", m + 1)));
                }
                let l = rows[0].confounders.len();
                if rows.iter().any(|r| r.values.len() != d || r.confounders.len() != l) {
                    return Err(Error::Dimension(format!("dataset {} has ragged feature rows", m + 1)));
                }
                Ok(DatasetBlock::new(
                    DMatrix::from_fn(n, d, |k, j| rows[k].values[j]),
                    DMatrix::from_fn(n, l, |k, j| rows[k].confounders[j]),
                    DVector::from_fn(n, |k, _| rows[k].group.label()),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        JointDesign::new(blocks)
    }

    /// CSV for dataset `m`: `subject,group,dataset,clime_lambda,clime_density`,
    /// then `conf_1..conf_L`, then one `i_j` column per edge.
    pub fn write_csv<W: Write>(&self, m: usize, mut out: W) -> std::io::Result<()> {
        let rows = &self.datasets[m];
        let l = rows.first().map_or(0, |r| r.confounders.len());
        write!(out, "subject,group,dataset,clime_lambda,clime_density")?;
        for k in 0..l {
            write!(out, ",conf_{}", k + 1)?;
        }
        for pos in 0..self.index.len() {
            write!(out, ",{}", self.index.label(pos).unwrap_or_default())?;
        }
        writeln!(out)?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        for r in rows {
            write!(out, "{},{},{},{},{}", r.subject, r.group.as_str(), m + 1, opt(r.lambda), opt(r.density))?;
            for v in r.confounders.iter().chain(r.values.iter()) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for m in 0..self.datasets.len() {
            let path = dir.join(feature_file_name(m));
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = std::io::BufWriter::new(file);
            self.write_csv(m, &mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Reads `features_1.csv`, `features_2.csv`, ... until one is missing.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut datasets = Vec::new();
        let mut index: Option<EdgeIndex> = None;
        loop {
            let path = dir.join(feature_file_name(datasets.len()));
            if !path.exists() {
                break;
            }
            let (ix, rows) = parse_feature_csv(&path)?;
            if let Some(prev) = &index {
                if prev != &ix {
                    return Err(Error::format(&path, "edge columns differ from the first dataset"));
                }
            }
            index = Some(ix);
            datasets.push(rows);
        }
        let index = index.ok_or_else(|| Error::format(dir, "no features_1.csv found"))?;
        Ok(FeatureTable { index, datasets })
    }
}

pub fn feature_file_name(m: usize) -> String {
    format!("features_{}.csv", m + 1)
}

fn parse_feature_csv(path: &Path) -> Result<(EdgeIndex, Vec<FeatureRow>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty file"))?
        .split(',')
        .map(str::trim)
        .collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let (subject, group) = match (col("subject"), col("group")) {
        (Some(s), Some(g)) => (s, g),
        _ => return Err(Error::format(path, "missing subject or group column")),
    };
    let (lambda, density) = (col("clime_lambda"), col("clime_density"));
    let conf: Vec<usize> = (0..header.len()).filter(|&k| header[k].starts_with("conf_")).collect();
    let edges: Vec<(usize, (usize, usize))> = (0..header.len())
        .filter_map(|k| EdgeIndex::parse_label(header[k]).map(|pair| (k, pair)))
        .collect();
    let p = edges.iter().map(|(_, (_, j))| j + 1).max().unwrap_or(0);
    let index = EdgeIndex::new(p);
    if edges.len() != index.len() || edges.iter().enumerate().any(|(pos, (_, pair))| index.pair(pos) != Some(*pair)) {
        return Err(Error::format(path, "edge columns must list every pair i_j in order"));
    }
    let mut rows = Vec::new();
    for (line_no, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let at = |msg: String| Error::format(path, format!("line {}: {msg}", line_no + 2));
        if fields.len() != header.len() {
            return Err(at(format!("{} fields, expected {}", fields.len(), header.len())));
        }
        let num = |k: usize| fields[k].parse::<f64>().map_err(|e| at(format!("column {}: {e}", header[k])));
        let opt = |k: Option<usize>| -> Result<Option<f64>> {
            match k {
                Some(k) if !fields[k].is_empty() => num(k).map(Some),
                _ => Ok(None),
            }
        };
        let group = match fields[group] {
            "case" | "1" => Group::Case,
            "control" | "0" => Group::Control,
            other => return Err(at(format!("unknown group {other:?}"))),
        };
        rows.push(FeatureRow {
            subject: fields[subject].to_string(),
            group,
            confounders: DVector::from_vec(conf.iter().map(|&k| num(k)).collect::<Result<_>>()?),
            values: DVector::from_vec(edges.iter().map(|&(k, _)| num(k)).collect::<Result<_>>()?),
            lambda: opt(lambda)?,
            density: opt(density)?,
        });
    }
    Ok((index, rows))
}

/// Tuning and ensemble settings of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodOptions {
    pub cv: CvOptions,
    pub ensemble: EnsembleOptions,
    /// Keep only this many features by screening before tuning and fitting.
    pub screen: Option<usize>,
}

impl Default for MethodOptions {
    fn default() -> Self {
        MethodOptions {
            cv: CvOptions::default(),
            ensemble: EnsembleOptions::default(),
            screen: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    /// Chosen penalty, one per fitted design (one for the joint estimator,
    /// one per dataset for the separate one).
    pub params: Vec<PenaltyParams>,
    pub psi: EdgeWeightMatrix,
}

/// Screens the design when `screen` is below the feature count; returns the
/// kept columns in that case.
pub fn screen_design(design: &JointDesign, screen: Option<usize>) -> Result<(JointDesign, Option<Vec<usize>>)> {
    match screen {
        Some(k) if k < design.n_features() => {
            let s = sis_screen(design, k)?;
            Ok((s.design, Some(s.kept)))
        }
        _ => Ok((design.clone(), None)),
    }
}

/// Scatters rows of a screened `psi` back to `d` rows.
pub fn expand_psi(psi: EdgeWeightMatrix, kept: Option<&[usize]>, d: usize) -> EdgeWeightMatrix {
    match kept {
        Some(kept) => {
            let mut counts = DMatrix::zeros(d, psi.n_datasets());
            for (r, &orig) in kept.iter().enumerate() {
                counts.set_row(orig, &psi.counts.row(r));
            }
            EdgeWeightMatrix {
                psi: counts.map(|c: u32| c as f64 / psi.replicates as f64),
                counts,
                index: None,
                ..psi
            }
        }
        None => psi,
    }
}

fn tuned_ensemble(
    design: &JointDesign,
    params: Option<PenaltyParams>,
    opts: &MethodOptions,
) -> Result<(PenaltyParams, EdgeWeightMatrix)> {
    let (work, kept) = screen_design(design, opts.screen)?;
    let params = match params {
        Some(p) => p,
        None => cross_validate(&work, &opts.cv)?.params,
    };
    let psi = run_ensemble(&work, &params, &opts.ensemble)?;
    Ok((params, expand_psi(psi, kept.as_deref(), design.n_features())))
}

/// Joint estimator: one CV over the `(lambda1, lambda2)` grid (unless
/// `params` is given), then the bootstrap ensemble at that penalty.
pub fn run_joint(
    design: &JointDesign,
    index: Option<&EdgeIndex>,
    params: Option<PenaltyParams>,
    opts: &MethodOptions,
) -> Result<MethodResult> {
    let (params, mut psi) = tuned_ensemble(design, params, opts)?;
    if let Some(ix) = index {
        psi = psi.with_index(ix.clone())?;
    }
    Ok(MethodResult {
        params: vec![params],
        psi,
    })
}

/// Separate estimator: each dataset alone with `lambda1 = 0`, tuned over
/// `lambda2` only.
pub fn run_separate(design: &JointDesign, index: Option<&EdgeIndex>, opts: &MethodOptions) -> Result<MethodResult> {
    let grid = match opts.cv.grid {
        GridSpec::Relative { n_lambda2, low, high, .. } | GridSpec::Lambda2Path { n_lambda2, low, high } => {
            GridSpec::Lambda2Path { n_lambda2, low, high }
        }
        GridSpec::Pairs { ref pairs } => GridSpec::Pairs {
            pairs: pairs.iter().map(|&(_, l2)| (0.0, l2)).collect(),
        },
    };
    let m_count = design.n_datasets();
    let mut params = Vec::with_capacity(m_count);
    let mut counts = DMatrix::zeros(design.n_features(), m_count);
    let mut replicates = None;
    for m in 0..m_count {
        let single = design.dataset(m)?;
        let sub = MethodOptions {
            cv: CvOptions {
                grid: grid.clone(),
                seed: derive_seed(opts.cv.seed, Purpose::Folds, m as u64),
                ..opts.cv.clone()
            },
            ensemble: EnsembleOptions {
                seed: derive_seed(opts.ensemble.seed, Purpose::Bootstrap, m as u64),
                ..opts.ensemble.clone()
            },
            screen: opts.screen,
        };
        let (p, psi) = tuned_ensemble(&single, None, &sub)?;
        if *replicates.get_or_insert(psi.replicates) != psi.replicates {
            return Err(Error::Numerical(format!(
                "dataset {} kept {} bootstrap replicates, others kept {}",
                m + 1,
                psi.replicates,
                replicates.unwrap_or(0)
            )));
        }
        counts.set_column(m, &psi.counts.column(0));
        params.push(p);
    }
    let mut psi = EdgeWeightMatrix::from_counts(counts, replicates.unwrap_or(0), None)?;
    psi.requested = opts.ensemble.replicates;
    if let Some(ix) = index {
        psi = psi.with_index(ix.clone())?;
    }
    Ok(MethodResult { params, psi })
}

/// How the inclusion threshold is chosen when scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TauRule {
    Fixed { tau: f64 },
    /// Maximize `TPR + TDR` against the truth (simulation only).
    MaxTprTdr,
}

impl Default for TauRule {
    fn default() -> Self {
        TauRule::Fixed { tau: DEFAULT_TAU }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEvaluation {
    pub tau: f64,
    pub score: RecoveryScore,
    pub curve: Vec<PrPoint>,
}

/// Scores each dataset's column of `psi` against its true differential edges.
pub fn evaluate(psi: &EdgeWeightMatrix, truth: &[EdgeSet], rule: TauRule) -> Result<Vec<DatasetEvaluation>> {
    let index = psi
        .index
        .as_ref()
        .ok_or_else(|| invalid!("psi has no edge index; cannot map rows to node pairs"))?;
    if truth.len() != psi.n_datasets() {
        return Err(Error::Dimension(format!(
            "{} truth sets for {} datasets",
            truth.len(),
            psi.n_datasets()
        )));
    }
    truth
        .iter()
        .enumerate()
        .map(|(m, t)| {
            let column: Vec<f64> = psi.psi.column(m).iter().copied().collect();
            let tau = match rule {
                TauRule::Fixed { tau } => tau,
                TauRule::MaxTprTdr if t.is_empty() => {
                    warn!("dataset {}: no true edges, so TPR + TDR cannot be maximized; using tau = {DEFAULT_TAU}", m + 1);
                    DEFAULT_TAU
                }
                TauRule::MaxTprTdr => select_tau_max_tpr_tdr(&column, psi.replicates, t, index)?,
            };
            let support = threshold_support(psi, tau)?;
            let estimate: EdgeSet = support.rows[m].iter().filter_map(|&l| index.pair(l)).collect();
            Ok(DatasetEvaluation {
                tau,
                score: score_support(t, &estimate, index.p())?,
                curve: pr_curve(&column, psi.replicates, t, index)?,
            })
        })
        .collect()
}
