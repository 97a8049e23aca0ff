//! On-disk study layout:
//!
//! ```text
//! <study>/manifest.json
//! <study>/dataset_<m>/case_<k>.csv      headerless p x q
//! <study>/dataset_<m>/control_<k>.csv
//! <study>/truth_<m>.txt                 one "i_j" per line (simulations only)
//! ```
//!
//! Dataset and node numbers on disk are one-based.

use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::EdgeSet;
use crate::netfeat::EdgeIndex;
use crate::pipeline::{subject_ids, Temporal};
use crate::simgen::{Group, Study, StudyDesign, SubjectScan};

pub const MANIFEST: &str = "manifest.json";
pub const FORMAT: &str = "diffnet-study-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSubject {
    pub file: String,
    pub group: Group,
    #[serde(default)]
    pub confounders: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestDataset {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub subjects: Vec<ManifestSubject>,
    /// One-based node pairs of the true differential edges.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub differential_edges: Option<Vec<[usize; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub p: usize,
    pub q: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replication: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<StudyDesign>,
    /// Temporal covariance the scans were drawn with, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal: Option<Temporal>,
    pub datasets: Vec<ManifestDataset>,
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(path, format!("line {}: {e}", k + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::format(path, format!("line {} has {} values, expected {}", k + 1, row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::format(path, "empty matrix"));
    }
    let (n, q) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_row_iterator(n, q, rows.into_iter().flatten()))
}

pub fn edge_list(edges: &EdgeSet) -> String {
    edges.iter().map(|(i, j)| format!("{}_{}\n", i + 1, j + 1)).collect()
}

fn dataset_dir(m: usize) -> String {
    format!("dataset_{}", m + 1)
}

/// Writes scans, manifest and truth lists of a generated study.
pub fn write_study(dir: &Path, study: &Study, replication: Option<usize>) -> Result<Manifest> {
    let design = &study.design;
    let mut datasets = Vec::with_capacity(study.datasets.len());
    for (m, scans) in study.datasets.iter().enumerate() {
        let ids = subject_ids(scans);
        let mut subjects = Vec::with_capacity(scans.len());
        for (scan, id) in scans.iter().zip(ids) {
            let file = format!("{}/{id}.csv", dataset_dir(m));
            write_text(&dir.join(&file), &matrix_csv(&scan.data))?;
            subjects.push(ManifestSubject {
                file,
                group: scan.group,
                confounders: scan.confounders.iter().copied().collect(),
            });
        }
        let truth: EdgeSet = study.pairs[m].differential_edges().into_iter().collect();
        write_text(&dir.join(format!("truth_{}.txt", m + 1)), &edge_list(&truth))?;
        datasets.push(ManifestDataset {
            id: m + 1,
            rho: Some(design.rho[m]),
            subjects,
            differential_edges: Some(truth.iter().map(|&(i, j)| [i + 1, j + 1]).collect()),
        });
    }
    let manifest = Manifest {
        format: FORMAT.to_string(),
        p: design.p,
        q: design.q,
        replication,
        design: Some(design.clone()),
        temporal: Some(Temporal::Known {
            case: design.temporal_rho_case,
            control: design.temporal_rho_control,
        }),
        datasets,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

/// Scans and (when available) truth read back from a study directory.
#[derive(Debug, Clone)]
pub struct LoadedStudy {
    pub dir: PathBuf,
    pub manifest: Option<Manifest>,
    pub datasets: Vec<Vec<SubjectScan>>,
}

impl LoadedStudy {
    pub fn temporal(&self) -> Option<Temporal> {
        self.manifest.as_ref().and_then(|m| m.temporal)
    }

    pub fn p(&self) -> usize {
        self.datasets
            .iter()
            .flatten()
            .next()
            .map_or(0, |s| s.data.nrows())
    }

    /// True differential edges per dataset (zero-based), if recorded.
    pub fn truth(&self) -> Option<Vec<EdgeSet>> {
        let manifest = self.manifest.as_ref()?;
        manifest
            .datasets
            .iter()
            .map(|d| {
                d.differential_edges
                    .as_ref()
                    .map(|edges| edges.iter().map(|&[i, j]| (i - 1, j - 1)).collect())
            })
            .collect()
    }
}

fn load_scan(path: &Path, group: Group, dataset: usize, confounders: Vec<f64>) -> Result<SubjectScan> {
    let scan = SubjectScan {
        data: read_matrix_csv(path)?,
        group,
        dataset,
        confounders: DVector::from_vec(confounders),
    };
    scan.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(scan)
}

pub fn read_study(dir: &Path) -> Result<LoadedStudy> {
    let manifest_path = dir.join(MANIFEST);
    if manifest_path.exists() {
        let manifest: Manifest = read_json(&manifest_path)?;
        if manifest.format != FORMAT {
            return Err(Error::format(&manifest_path, format!("unsupported format {:?}", manifest.format)));
        }
        let mut datasets = Vec::new();
        for (m, ds) in manifest.datasets.iter().enumerate() {
            if ds.id != m + 1 {
                return Err(Error::format(&manifest_path, "dataset ids must be 1, 2, ... in order"));
            }
            let scans = ds
                .subjects
                .iter()
                .map(|s| load_scan(&dir.join(&s.file), s.group, m, s.confounders.clone()))
                .collect::<Result<Vec<_>>>()?;
            for (s, spec) in scans.iter().zip(&ds.subjects) {
                if s.data.shape() != (manifest.p, manifest.q) {
                    return Err(Error::format(
                        dir.join(&spec.file),
                        format!("scan is {}x{}, manifest says {}x{}", s.data.nrows(), s.data.ncols(), manifest.p, manifest.q),
                    ));
                }
            }
            if let Some(edges) = &ds.differential_edges {
                if edges.iter().any(|&[i, j]| !(1 <= i && i < j && j <= manifest.p)) {
                    return Err(Error::format(&manifest_path, format!("dataset {} has an invalid edge", ds.id)));
                }
            }
            datasets.push(scans);
        }
        return Ok(LoadedStudy {
            dir: dir.to_path_buf(),
            manifest: Some(manifest),
            datasets,
        });
    }

    warn!("{} has no {MANIFEST}; reading dataset_* directories", dir.display());
    let mut datasets = Vec::new();
    loop {
        let ddir = dir.join(dataset_dir(datasets.len()));
        if !ddir.is_dir() {
            break;
        }
        let mut files: Vec<PathBuf> = std::fs::read_dir(&ddir)
            .map_err(|e| Error::io(&ddir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        let m = datasets.len();
        let mut scans = Vec::new();
        for group in [Group::Case, Group::Control] {
            for f in &files {
                let name = f.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                if name.starts_with(&format!("{}_", group.as_str())) {
                    scans.push(load_scan(f, group, m, Vec::new())?);
                }
            }
        }
        if scans.is_empty() {
            return Err(Error::format(&ddir, "no case_*.csv or control_*.csv scans"));
        }
        datasets.push(scans);
    }
    if datasets.is_empty() {
        return Err(Error::format(dir, "no manifest.json and no dataset_1 directory"));
    }
    Ok(LoadedStudy {
        dir: dir.to_path_buf(),
        manifest: None,
        datasets,
    })
}

/// Writes `support_<m>.txt` lists.
pub fn write_support_lists(dir: &Path, support: &crate::ensemble::SupportSet, index: Option<&EdgeIndex>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for m in 0..support.rows.len() {
        let path = dir.join(format!("support_{}.txt", m + 1));
        let mut buf = Vec::new();
        support
            .write_list(m, index, &mut buf)
            .and_then(|_| buf.flush())
            .map_err(|e| Error::io(&path, e))?;
        std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::generate_study;

    #[test]
    fn study_round_trip() {
        let study = generate_study(&StudyDesign {
            n_datasets: 2,
            p: 4,
            q: 5,
            n_case: 2,
            n_control: 3,
            rho: vec![1.0, 0.5],
            hub_groups: 2,
            n_confounders: 1,
            ..StudyDesign::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_study(dir.path(), &study, Some(1)).unwrap();
        let loaded = read_study(dir.path()).unwrap();
        assert_eq!(loaded.datasets, study.datasets);
        let truth = loaded.truth().unwrap();
        assert_eq!(truth[0], study.pairs[0].differential_edges().into_iter().collect());
        assert!(dir.path().join("dataset_2/control_003.csv").exists());

        std::fs::remove_file(dir.path().join(MANIFEST)).unwrap();
        let bare = read_study(dir.path()).unwrap();
        assert!(bare.truth().is_none());
        assert_eq!(bare.datasets[1].len(), 5);
        assert_eq!(bare.datasets[1][0].data, study.datasets[1][0].data);
    }

    #[test]
    fn malformed_scan_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        write_text(&dir.path().join("dataset_1/case_001.csv"), "1,2\n3,x\n").unwrap();
        let err = read_study(dir.path()).unwrap_err().to_string();
        assert!(err.contains("case_001.csv"), "{err}");
    }
}
