use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleOptions, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::netfeat::ClimeConfig;
use crate::pipeline::{MethodOptions, TauRule};
use crate::sgmcp::{CvOptions, FitOptions, GridSpec, DEFAULT_GAMMA};
use crate::simgen::StudyDesign;

/// How scans are whitened before precision estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WhiteningMode {
    /// Known AR parameters from the study manifest, else estimated.
    #[default]
    Auto,
    EstimatedAr1,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgmcpSettings {
    pub folds: usize,
    pub grid: GridSpec,
    pub gammas: Vec<f64>,
    pub fit: FitOptions,
    pub screen: Option<usize>,
}

impl Default for SgmcpSettings {
    fn default() -> Self {
        SgmcpSettings {
            folds: 5,
            grid: GridSpec::default(),
            gammas: vec![DEFAULT_GAMMA],
            fit: FitOptions::default(),
            screen: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSettings {
    pub replicates: usize,
    /// Threshold for the exported support lists.
    pub tau: f64,
    pub cv_per_replicate: bool,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        EnsembleSettings {
            replicates: 50,
            tau: DEFAULT_TAU,
            cv_per_replicate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateSettings {
    pub tau: TauRule,
    /// Also run the separate per-dataset estimator.
    pub baseline: bool,
}

impl Default for EvaluateSettings {
    fn default() -> Self {
        EvaluateSettings {
            tau: TauRule::MaxTprTdr,
            baseline: true,
        }
    }
}

/// Everything an experiment needs. Defaults are the desk-scale profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replications: usize,
    pub out: Option<PathBuf>,
    pub study: StudyDesign,
    pub whitening: WhiteningMode,
    pub clime: ClimeConfig,
    pub sgmcp: SgmcpSettings,
    pub ensemble: EnsembleSettings,
    pub evaluate: EvaluateSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            replications: 10,
            out: None,
            study: StudyDesign {
                p: 30,
                ..StudyDesign::default()
            },
            whitening: WhiteningMode::Auto,
            clime: ClimeConfig::default(),
            sgmcp: SgmcpSettings::default(),
            ensemble: EnsembleSettings::default(),
            evaluate: EvaluateSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.replications == 0 {
            return bad("replications must be positive");
        }
        self.study.validate().map_err(|e| Error::Config(format!("study: {e}")))?;
        if !(0.0..=1.0).contains(&self.clime.target_density) {
            return bad("clime.target_density must lie in [0, 1]");
        }
        if self.sgmcp.folds < 2 {
            return bad("sgmcp.folds must be at least 2");
        }
        if self.sgmcp.gammas.is_empty() || self.sgmcp.gammas.iter().any(|g| !(*g > 1.0)) {
            return bad("sgmcp.gammas must be nonempty and every value > 1");
        }
        self.sgmcp.fit.validate().map_err(|e| Error::Config(format!("sgmcp.fit: {e}")))?;
        if self.sgmcp.screen == Some(0) {
            return bad("sgmcp.screen must be positive");
        }
        if self.ensemble.replicates == 0 {
            return bad("ensemble.replicates must be positive");
        }
        if !(0.0..1.0).contains(&self.ensemble.tau) {
            return bad("ensemble.tau must lie in [0, 1)");
        }
        if let TauRule::Fixed { tau } = self.evaluate.tau {
            if !(0.0..1.0).contains(&tau) {
                return bad("evaluate.tau must lie in [0, 1)");
            }
        }
        Ok(())
    }

    /// Estimator settings with seeds derived from `seed`.
    pub fn method_options(&self, seed: u64) -> MethodOptions {
        MethodOptions {
            cv: CvOptions {
                folds: self.sgmcp.folds,
                grid: self.sgmcp.grid.clone(),
                gammas: self.sgmcp.gammas.clone(),
                fit: self.sgmcp.fit,
                seed,
            },
            ensemble: EnsembleOptions {
                replicates: self.ensemble.replicates,
                seed,
                cv_per_replicate: self.ensemble.cv_per_replicate,
                cv: CvOptions {
                    folds: self.sgmcp.folds,
                    grid: self.sgmcp.grid.clone(),
                    gammas: self.sgmcp.gammas.clone(),
                    fit: self.sgmcp.fit,
                    seed,
                },
                fit: self.sgmcp.fit,
            },
            screen: self.sgmcp.screen,
        }
    }
}
