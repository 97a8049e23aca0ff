//! Joint sparse group MCP logistic regression across datasets.

mod cv;
mod design;
mod lambda;
mod likelihood;
mod penalty;
mod predict;
mod record;
mod screen;
mod solver;

pub use cv::{cross_validate, stratified_folds, CvOptions, CvPoint, CvResult, GridSpec};
pub use design::{DatasetBlock, JointDesign};
pub use lambda::{lambda1_max, lambda2_max, LambdaBounds};
pub use likelihood::{negative_log_likelihood, negative_log_likelihood_gradient, sigmoid, softplus, Coefficients};
pub use penalty::{mcp, mcp_derivative, penalty_total, PenaltyParams, DEFAULT_GAMMA};
pub use predict::{error_rate, predict, predict_block, Prediction, DEFAULT_THRESHOLD};
pub use record::{BetaEntry, FitRecord};
pub use screen::{marginal_utility, sis_screen, Screening};
pub use solver::{fit, fit_from, CoefficientFit, FitOptions};
