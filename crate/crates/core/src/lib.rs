//! Joint estimation of differential brain networks from matrix-valued scans.
//!
//! The pipeline runs in stages:
//! 1. [`clime`] estimates each subject's spatial precision matrix;
//! 2. [`netfeat`] turns it into Fisher-transformed partial correlations, one
//!    feature per node pair;
//! 3. [`sgmcp`] fits a logistic model per dataset with a sparse group MCP
//!    penalty that ties each edge across datasets;
//! 4. [`ensemble`] repeats the fit on stratified bootstrap samples and reports
//!    edge inclusion frequencies.
//!
//! [`simgen`] generates synthetic studies with known differential edges and
//! [`metrics`] scores recovered supports against them.

pub mod cli;
pub mod clime;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod netfeat;
pub mod pipeline;
pub mod rng;
pub mod sgmcp;
pub mod simgen;

pub use error::{Error, Result};
