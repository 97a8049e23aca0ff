use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{generate_hub_graph, generate_small_world, GraphKind, GraphStructure};
use super::precision::{fill_precision, make_pair, PrecisionPair};
use super::sampling::{ar_covariance, MatrixNormal};
use crate::error::{invalid, Result};
use crate::linalg::spd_inverse;
use crate::rng::{key, stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Case,
    Control,
}

impl Group {
    /// Regression response: 1 for cases, 0 for controls.
    pub fn label(self) -> f64 {
        match self {
            Group::Case => 1.0,
            Group::Control => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Case => "case",
            Group::Control => "control",
        }
    }

    fn stream_tag(self) -> u64 {
        match self {
            Group::Case => 0,
            Group::Control => 1,
        }
    }
}

/// One `p x q` spatial-by-temporal observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectScan {
    pub data: DMatrix<f64>,
    pub group: Group,
    /// Zero-based dataset index.
    pub dataset: usize,
    pub confounders: DVector<f64>,
}

impl SubjectScan {
    pub fn validate(&self) -> Result<()> {
        if self.data.ncols() < 2 {
            return Err(invalid!("scan needs at least 2 time points"));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(invalid!("scan contains non-finite entries"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyDesign {
    pub n_datasets: usize,
    pub p: usize,
    pub q: usize,
    pub n_case: usize,
    pub n_control: usize,
    /// Flip proportion per dataset; its length must equal `n_datasets`.
    pub rho: Vec<f64>,
    pub temporal_rho_case: f64,
    pub temporal_rho_control: f64,
    pub structure: GraphKind,
    pub hub_groups: usize,
    pub small_world_neighbors: usize,
    pub small_world_rewire: f64,
    /// Reuse one base graph and edge values for every dataset.
    pub shared_base: bool,
    /// Number of (uninformative) standard-normal confounders per subject.
    pub n_confounders: usize,
    pub seed: u64,
}

impl Default for StudyDesign {
    fn default() -> Self {
        StudyDesign {
            n_datasets: 3,
            p: 100,
            q: 30,
            n_case: 30,
            n_control: 30,
            rho: vec![0.4, 0.4, 0.4],
            temporal_rho_case: 0.5,
            temporal_rho_control: 0.6,
            structure: GraphKind::Hub,
            hub_groups: 5,
            small_world_neighbors: 10,
            small_world_rewire: 0.05,
            shared_base: true,
            n_confounders: 0,
            seed: 1,
        }
    }
}

impl StudyDesign {
    pub fn validate(&self) -> Result<()> {
        if self.n_datasets == 0 || self.p < 2 || self.q < 2 || self.n_case == 0 || self.n_control == 0
        {
            return Err(invalid!("design counts must be positive (p >= 2, q >= 2)"));
        }
        if self.rho.len() != self.n_datasets {
            return Err(invalid!(
                "rho has {} entries for {} datasets",
                self.rho.len(),
                self.n_datasets
            ));
        }
        if let Some(r) = self.rho.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(invalid!("rho value {r} outside (0, 1]"));
        }
        if self.n_datasets > u16::MAX as usize {
            return Err(invalid!("too many datasets"));
        }
        Ok(())
    }

    pub fn temporal_rho(&self, group: Group) -> f64 {
        match group {
            Group::Case => self.temporal_rho_case,
            Group::Control => self.temporal_rho_control,
        }
    }
}

/// A generated study: scans grouped by dataset, and the ground truth behind them.
#[derive(Debug, Clone)]
pub struct Study {
    pub design: StudyDesign,
    pub graphs: Vec<GraphStructure>,
    pub pairs: Vec<PrecisionPair>,
    /// `datasets[m]` lists all case scans followed by all control scans.
    pub datasets: Vec<Vec<SubjectScan>>,
}

fn base_graph(design: &StudyDesign, index: u64) -> Result<GraphStructure> {
    match design.structure {
        GraphKind::Hub => generate_hub_graph(design.p, design.hub_groups),
        GraphKind::SmallWorld => generate_small_world(
            design.p,
            design.small_world_neighbors,
            design.small_world_rewire,
            &mut stream(design.seed, key(Purpose::Graph, index, 0, 0)),
        ),
    }
}

pub fn generate_study(design: &StudyDesign) -> Result<Study> {
    design.validate()?;
    let m_count = design.n_datasets;

    let mut graphs = Vec::with_capacity(m_count);
    let mut pairs = Vec::with_capacity(m_count);
    let mut shared: Option<(GraphStructure, DMatrix<f64>)> = None;
    for m in 0..m_count {
        let (graph, base) = match (&shared, design.shared_base) {
            (Some(s), true) => s.clone(),
            _ => {
                let index = if design.shared_base { 0 } else { m as u64 };
                let graph = base_graph(design, index)?;
                let base = fill_precision(
                    &graph,
                    &mut stream(design.seed, key(Purpose::Values, index, 0, 0)),
                );
                if design.shared_base {
                    shared = Some((graph.clone(), base.clone()));
                }
                (graph, base)
            }
        };
        pairs.push(make_pair(&base, design.rho[m])?);
        graphs.push(graph);
    }

    let sigma_t_case = ar_covariance(design.q, design.temporal_rho_case)?;
    let sigma_t_control = ar_covariance(design.q, design.temporal_rho_control)?;

    let mut datasets = Vec::with_capacity(m_count);
    for (m, pair) in pairs.iter().enumerate() {
        let case = MatrixNormal::zero_mean(&spd_inverse(&pair.omega_x, "case precision")?, &sigma_t_case)?;
        let control =
            MatrixNormal::zero_mean(&spd_inverse(&pair.omega_y, "control precision")?, &sigma_t_control)?;
        let jobs: Vec<(Group, usize)> = (0..design.n_case)
            .map(|k| (Group::Case, k))
            .chain((0..design.n_control).map(|k| (Group::Control, k)))
            .collect();
        let scans = jobs
            .par_iter()
            .map(|&(group, k)| {
                let sampler = if group == Group::Case { &case } else { &control };
                let mut rng = stream(
                    design.seed,
                    key(Purpose::Subject, m as u64, group.stream_tag(), k as u64),
                );
                let data = sampler.sample(&mut rng);
                let mut crng = stream(
                    design.seed,
                    key(Purpose::Confounder, m as u64, group.stream_tag(), k as u64),
                );
                let confounders = DVector::from_fn(design.n_confounders, |_, _| {
                    crng.sample::<f64, _>(StandardNormal)
                });
                SubjectScan {
                    data,
                    group,
                    dataset: m,
                    confounders,
                }
            })
            .collect();
        datasets.push(scans);
    }

    Ok(Study {
        design: design.clone(),
        graphs,
        pairs,
        datasets,
    })
}
