//! Support recovery scores, precision-recall curves over the bootstrap
//! threshold grid, and a summary table.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::netfeat::EdgeIndex;

/// Zero-based node pairs `(i, j)` with `i < j`.
pub type EdgeSet = BTreeSet<(usize, usize)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Rates are `None` when their denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryScore {
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub tdr: Option<f64>,
    pub counts: Counts,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl RecoveryScore {
    pub fn from_counts(counts: Counts) -> Self {
        RecoveryScore {
            tpr: ratio(counts.tp, counts.tp + counts.fn_),
            tnr: ratio(counts.tn, counts.tn + counts.fp),
            tdr: ratio(counts.tp, counts.tp + counts.fp),
            counts,
        }
    }
}

fn check_pairs(set: &EdgeSet, p: usize, what: &str) -> Result<()> {
    match set.iter().find(|&&(i, j)| !(i < j && j < p)) {
        Some(&(i, j)) => Err(invalid!("{what} pair ({i}, {j}) is not an upper-triangular pair of {p} nodes")),
        None => Ok(()),
    }
}

/// Counts over all `p (p - 1) / 2` upper-triangular positions.
pub fn score_support(truth: &EdgeSet, estimate: &EdgeSet, p: usize) -> Result<RecoveryScore> {
    check_pairs(truth, p, "truth")?;
    check_pairs(estimate, p, "estimate")?;
    let d = p * p.saturating_sub(1) / 2;
    let tp = truth.intersection(estimate).count();
    let fp = estimate.len() - tp;
    let fn_ = truth.len() - tp;
    Ok(RecoveryScore::from_counts(Counts {
        tp,
        fp,
        tn: d - tp - fp - fn_,
        fn_,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub tau: f64,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub score: RecoveryScore,
}

fn column_counts(psi_column: &[f64], replicates: usize) -> Result<Vec<usize>> {
    if replicates == 0 {
        return Err(invalid!("replicate count must be positive"));
    }
    psi_column
        .iter()
        .map(|&v| {
            let c = v * replicates as f64;
            if !(0.0..=1.0).contains(&v) || (c - c.round()).abs() > 1e-6 {
                Err(invalid!("psi entry {v} is not a multiple of 1/{replicates} in [0, 1]"))
            } else {
                Ok(c.round() as usize)
            }
        })
        .collect()
}

/// One point per `tau` in `{0, 1/B, ..., (B-1)/B}`; an edge is selected when
/// `psi > tau`.
pub fn pr_curve(psi_column: &[f64], replicates: usize, truth: &EdgeSet, index: &EdgeIndex) -> Result<Vec<PrPoint>> {
    if psi_column.len() != index.len() {
        return Err(Error::Dimension(format!(
            "psi column has {} entries, expected {}",
            psi_column.len(),
            index.len()
        )));
    }
    check_pairs(truth, index.p(), "truth")?;
    let counts = column_counts(psi_column, replicates)?;
    let truth_rows: Vec<bool> = index.pairs().map(|pair| truth.contains(&pair)).collect();
    Ok((0..replicates)
        .map(|t| {
            let mut c = Counts { tp: 0, fp: 0, tn: 0, fn_: 0 };
            for (&count, &is_true) in counts.iter().zip(&truth_rows) {
                match (count > t, is_true) {
                    (true, true) => c.tp += 1,
                    (true, false) => c.fp += 1,
                    (false, true) => c.fn_ += 1,
                    (false, false) => c.tn += 1,
                }
            }
            let score = RecoveryScore::from_counts(c);
            PrPoint {
                tau: t as f64 / replicates as f64,
                recall: score.tpr,
                precision: score.tdr,
                score,
            }
        })
        .collect())
}

/// Grid threshold maximizing `TPR + TDR`; ties go to the larger threshold.
/// Thresholds where either rate is undefined are skipped.
pub fn select_tau_max_tpr_tdr(psi_column: &[f64], replicates: usize, truth: &EdgeSet, index: &EdgeIndex) -> Result<f64> {
    if truth.is_empty() {
        return Err(invalid!("true support is empty; TPR is undefined"));
    }
    let curve = pr_curve(psi_column, replicates, truth, index)?;
    let mut best: Option<(f64, f64)> = None;
    for point in &curve {
        if let (Some(r), Some(p)) = (point.recall, point.precision) {
            if best.map_or(true, |(s, _)| r + p >= s) {
                best = Some((r + p, point.tau));
            }
        }
    }
    best.map(|(_, tau)| tau)
        .ok_or_else(|| invalid!("no threshold selects any edge; TDR is undefined everywhere"))
}

pub fn write_pr_csv<W: Write>(curve: &[PrPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "tau,recall,precision,tp,fp,tn,fn")?;
    for p in curve {
        let c = p.score.counts;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.tau,
            fmt_rate(p.recall),
            fmt_rate(p.precision),
            c.tp,
            c.fp,
            c.tn,
            c.fn_
        )?;
    }
    Ok(())
}

/// Rate as a number, or `NA` when undefined.
pub fn fmt_rate(rate: Option<f64>) -> String {
    rate.map_or_else(|| "NA".to_string(), |r| r.to_string())
}

/// Mean of the defined values, with the number that were defined.
pub fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let defined: Vec<f64> = values.into_iter().flatten().collect();
    let n = defined.len();
    ((n > 0).then(|| defined.iter().sum::<f64>() / n as f64), n)
}

/// Mean rates of one method on one dataset over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub setting: String,
    pub dataset: usize,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub tdr: Option<f64>,
    pub replications: usize,
}

impl SummaryRow {
    pub fn from_scores(method: &str, setting: &str, dataset: usize, scores: &[RecoveryScore]) -> Self {
        SummaryRow {
            method: method.to_string(),
            setting: setting.to_string(),
            dataset,
            tpr: mean_defined(scores.iter().map(|s| s.tpr)).0,
            tnr: mean_defined(scores.iter().map(|s| s.tnr)).0,
            tdr: mean_defined(scores.iter().map(|s| s.tdr)).0,
            replications: scores.len(),
        }
    }
}

/// Text table: one line per setting and method, rates in percent per dataset.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let datasets: BTreeSet<usize> = rows.iter().map(|r| r.dataset).collect();
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in rows {
        let k = (r.setting.clone(), r.method.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let pct = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{:.1}", 100.0 * x));
    let mut out = String::new();
    let _ = write!(out, "{:<16} {:<10}", "setting", "method");
    for m in &datasets {
        let _ = write!(out, " | {:>6} {:>6} {:>6}", format!("TPR{m}"), format!("TNR{m}"), format!("TDR{m}"));
    }
    out.push('\n');
    for (setting, method) in &keys {
        let _ = write!(out, "{setting:<16} {method:<10}");
        for &m in &datasets {
            match rows
                .iter()
                .find(|r| &r.setting == setting && &r.method == method && r.dataset == m)
            {
                Some(r) => {
                    let _ = write!(out, " | {:>6} {:>6} {:>6}", pct(r.tpr), pct(r.tnr), pct(r.tdr));
                }
                None => {
                    let _ = write!(out, " | {:>6} {:>6} {:>6}", "", "", "");
                }
            }
        }
        out.push('\n');
    }
    out
}
