use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, WhiteningMode};
use super::study_dir::{read_json, read_study, write_json, write_study, write_support_lists, write_text, LoadedStudy, MANIFEST};
use crate::ensemble::{threshold_support, EdgeWeightMatrix};
use crate::error::{Error, Result};
use crate::metrics::{fmt_rate, format_summary, write_pr_csv, RecoveryScore, SummaryRow};
use crate::netfeat::EdgeIndex;
use crate::pipeline::{evaluate, run_joint, run_separate, screen_design, FeatureTable, MethodResult, Temporal};
use crate::rng::{derive_seed, Purpose};
use crate::sgmcp::{cross_validate, fit, CvResult, FitRecord, PenaltyParams};
use crate::simgen::generate_study;

pub const FEATURES_DIR: &str = "features";
pub const JOINT: &str = "joint";
pub const SEPARATE: &str = "separate";
pub const EVALUATION_DIR: &str = "evaluation";

/// Study directories under `root`: `root` itself when it holds a study,
/// else its `rep_*` subdirectories in name order.
pub fn study_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join(MANIFEST).exists() || root.join("dataset_1").is_dir() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("rep_"))
        })
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::format(root, "no study found (expected manifest.json, dataset_1/ or rep_*/)"));
    }
    Ok(dirs)
}

pub fn replication_dir(root: &Path, r: usize) -> PathBuf {
    root.join(format!("rep_{:03}", r + 1))
}

/// Writes one study per replication and the resolved config.
pub fn cmd_simulate(config: &ExperimentConfig, root: &Path) -> Result<Vec<PathBuf>> {
    write_text(&root.join("config.toml"), &config.to_toml()?)?;
    let mut dirs = Vec::with_capacity(config.replications);
    for r in 0..config.replications {
        let design = crate::simgen::StudyDesign {
            seed: derive_seed(config.seed, Purpose::Replication, r as u64),
            ..config.study.clone()
        };
        let study = generate_study(&design)?;
        let dir = replication_dir(root, r);
        write_study(&dir, &study, Some(r + 1))?;
        info!("simulated {}", dir.display());
        dirs.push(dir);
    }
    Ok(dirs)
}

fn temporal_for(study: &LoadedStudy, mode: WhiteningMode) -> Temporal {
    match mode {
        WhiteningMode::None => Temporal::None,
        WhiteningMode::EstimatedAr1 => Temporal::EstimatedAr1,
        WhiteningMode::Auto => study.temporal().unwrap_or_else(|| {
            warn!(
                "{}: temporal covariance unknown; whitening with estimated AR(1) parameters",
                study.dir.display()
            );
            Temporal::EstimatedAr1
        }),
    }
}

pub fn cmd_features(config: &ExperimentConfig, root: &Path) -> Result<()> {
    for dir in study_dirs(root)? {
        let study = read_study(&dir)?;
        let table = FeatureTable::from_scans(&study.datasets, temporal_for(&study, config.whitening), &config.clime)?;
        table.save(&dir.join(FEATURES_DIR))?;
        info!("features written for {}", dir.display());
    }
    Ok(())
}

/// Seed for the estimators on one study: the study's simulation seed when
/// known, else the configured seed.
fn study_seed(dir: &Path, config: &ExperimentConfig) -> u64 {
    read_json::<super::study_dir::Manifest>(&dir.join(MANIFEST))
        .ok()
        .and_then(|m| m.design)
        .map_or(config.seed, |d| d.seed)
}

fn load_features(dir: &Path) -> Result<FeatureTable> {
    FeatureTable::load(&dir.join(FEATURES_DIR))
}

pub fn cmd_fit(config: &ExperimentConfig, root: &Path) -> Result<()> {
    for dir in study_dirs(root)? {
        let table = load_features(&dir)?;
        let design = table.to_design()?;
        let opts = config.method_options(study_seed(&dir, config));
        let (work, kept) = screen_design(&design, opts.screen)?;
        let cv = cross_validate(&work, &opts.cv)?;
        let mut result = fit(&work, &cv.params, &opts.cv.fit)?;
        if let Some(k) = &kept {
            result = result.expand_rows(k, design.n_features());
        }
        let out = dir.join(JOINT);
        write_json(&out.join("cv.json"), &cv)?;
        write_json(&out.join("fit.json"), &FitRecord::from_fit(&result, Some(&table.index)))?;
        info!(
            "{}: lambda1 = {}, lambda2 = {}, {} nonzero rows",
            dir.display(),
            cv.params.lambda1,
            cv.params.lambda2,
            result.nonzero_rows()
        );
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub params: Vec<PenaltyParams>,
    pub replicates: usize,
    pub requested: usize,
    pub failures: Vec<(usize, String)>,
    pub tau: f64,
}

fn save_method(dir: &Path, result: &MethodResult, tau: f64) -> Result<()> {
    result.psi.save_csv(&dir.join("psi.csv"))?;
    let support = threshold_support(&result.psi, tau)?;
    write_support_lists(dir, &support, result.psi.index.as_ref())?;
    write_json(
        &dir.join("ensemble.json"),
        &EnsembleRecord {
            params: result.params.clone(),
            replicates: result.psi.replicates,
            requested: result.psi.requested,
            failures: result.psi.failures.clone(),
            tau,
        },
    )
}

pub fn cmd_ensemble(config: &ExperimentConfig, root: &Path) -> Result<()> {
    for dir in study_dirs(root)? {
        let table = load_features(&dir)?;
        let design = table.to_design()?;
        let opts = config.method_options(study_seed(&dir, config));
        let cv_path = dir.join(JOINT).join("cv.json");
        let params = if cv_path.exists() {
            Some(read_json::<CvResult>(&cv_path)?.params)
        } else {
            None
        };
        let joint = run_joint(&design, Some(&table.index), params, &opts)?;
        save_method(&dir.join(JOINT), &joint, config.ensemble.tau)?;
        if config.evaluate.baseline {
            let separate = run_separate(&design, Some(&table.index), &opts)?;
            save_method(&dir.join(SEPARATE), &separate, config.ensemble.tau)?;
        }
        info!("ensembles written for {}", dir.display());
    }
    Ok(())
}

/// Scores of one method on one study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub study: String,
    pub setting: String,
    pub method: String,
    pub dataset: usize,
    pub tau: f64,
    pub score: RecoveryScore,
}

fn setting_label(study: &LoadedStudy) -> String {
    match study.manifest.as_ref().and_then(|m| m.design.as_ref()) {
        Some(d) => {
            let rho: Vec<String> = d.rho.iter().map(|r| format!("{}", (r * 100.0).round())).collect();
            let kind = match d.structure {
                crate::simgen::GraphKind::Hub => "hub",
                crate::simgen::GraphKind::SmallWorld => "sw",
            };
            format!("{kind} ({})", rho.join(","))
        }
        None => "study".to_string(),
    }
}

fn load_psi(dir: &Path, index: &EdgeIndex) -> Result<EdgeWeightMatrix> {
    let record: EnsembleRecord = read_json(&dir.join("ensemble.json"))?;
    EdgeWeightMatrix::load_csv(&dir.join("psi.csv"), record.replicates)?.with_index(index.clone())
}

/// Scores every study with a known truth; writes per-study files and a
/// summary table under `root`. Returns the summary rows.
pub fn cmd_evaluate(config: &ExperimentConfig, root: &Path) -> Result<Vec<SummaryRow>> {
    let mut records: Vec<ScoreRecord> = Vec::new();
    for dir in study_dirs(root)? {
        let study = read_study(&dir)?;
        let Some(truth) = study.truth() else {
            warn!("{}: no ground truth recorded; evaluation skipped", dir.display());
            continue;
        };
        let index = EdgeIndex::new(study.p());
        let setting = setting_label(&study);
        let out = dir.join(EVALUATION_DIR);
        let mut csv = String::from("method,dataset,tau,tpr,tnr,tdr,tp,fp,tn,fn\n");
        for method in [JOINT, SEPARATE] {
            let mdir = dir.join(method);
            if !mdir.join("psi.csv").exists() {
                if method == JOINT {
                    return Err(Error::format(&mdir, "missing psi.csv; run the ensemble stage first"));
                }
                continue;
            }
            let psi = load_psi(&mdir, &index)?;
            for (m, e) in evaluate(&psi, &truth, config.evaluate.tau)?.iter().enumerate() {
                let c = e.score.counts;
                csv.push_str(&format!(
                    "{method},{},{},{},{},{},{},{},{},{}\n",
                    m + 1,
                    e.tau,
                    fmt_rate(e.score.tpr),
                    fmt_rate(e.score.tnr),
                    fmt_rate(e.score.tdr),
                    c.tp,
                    c.fp,
                    c.tn,
                    c.fn_
                ));
                let mut buf = Vec::new();
                write_pr_csv(&e.curve, &mut buf).map_err(|err| Error::io(&out, err))?;
                write_text(
                    &out.join(format!("pr_{method}_{}.csv", m + 1)),
                    &String::from_utf8_lossy(&buf),
                )?;
                records.push(ScoreRecord {
                    study: dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string(),
                    setting: setting.clone(),
                    method: method.to_string(),
                    dataset: m + 1,
                    tau: e.tau,
                    score: e.score,
                });
            }
        }
        write_text(&out.join("scores.csv"), &csv)?;
    }
    if records.is_empty() {
        return Err(Error::format(root, "no study with ground truth to evaluate"));
    }
    let rows = summarize(&records);
    write_text(&root.join("summary.txt"), &format_summary(&rows))?;
    write_json(&root.join("summary.json"), &rows)?;
    write_json(&root.join("scores.json"), &records)?;
    Ok(rows)
}

/// Mean rates per (setting, method, dataset), in first-seen order.
pub fn summarize(records: &[ScoreRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, String, String, usize), Vec<RecoveryScore>> = BTreeMap::new();
    let mut order: Vec<(String, String)> = Vec::new();
    for r in records {
        let k = (r.setting.clone(), r.method.clone());
        let pos = order.iter().position(|o| *o == k).unwrap_or_else(|| {
            order.push(k.clone());
            order.len() - 1
        });
        groups
            .entry((pos, r.setting.clone(), r.method.clone(), r.dataset))
            .or_default()
            .push(r.score);
    }
    groups
        .iter()
        .map(|((_, setting, method, m), scores)| SummaryRow::from_scores(method, setting, *m, scores))
        .collect()
}

/// All stages in order.
pub fn cmd_pipeline(config: &ExperimentConfig, root: &Path) -> Result<Option<Vec<SummaryRow>>> {
    let has_study = study_dirs(root).is_ok();
    if !has_study {
        cmd_simulate(config, root)?;
    }
    cmd_features(config, root)?;
    cmd_fit(config, root)?;
    cmd_ensemble(config, root)?;
    let has_truth = study_dirs(root)?
        .iter()
        .any(|d| read_study(d).map(|s| s.truth().is_some()).unwrap_or(false));
    if has_truth {
        let rows = cmd_evaluate(config, root)?;
        println!("{}", format_summary(&rows));
        Ok(Some(rows))
    } else {
        warn!("no ground truth available; skipping evaluation");
        Ok(None)
    }
}
