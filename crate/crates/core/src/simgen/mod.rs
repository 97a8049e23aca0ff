//! Simulation of ground-truth differential networks and matrix-normal scans.

mod graph;
mod precision;
mod sampling;
mod study;

pub use graph::{generate_hub_graph, generate_small_world, GraphKind, GraphStructure};
pub use precision::{fill_precision, flip_block, make_pair, PrecisionPair, PD_MARGIN};
pub use sampling::{
    ar_covariance, estimate_ar1, sample_matrix_normal, whiten, MatrixNormal, Whitener,
};
pub use study::{generate_study, Group, Study, StudyDesign, SubjectScan};
