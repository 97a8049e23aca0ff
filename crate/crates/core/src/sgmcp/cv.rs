//! Two-dimensional grid search over `(lambda1, lambda2)` with stratified
//! K-fold cross-validation.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::{DatasetBlock, JointDesign};
use super::lambda::LambdaBounds;
use super::likelihood::negative_log_likelihood;
use super::penalty::{PenaltyParams, DEFAULT_GAMMA};
use super::solver::{FitOptions, Solver};
use crate::clime::log_spaced_desc;
use crate::error::{invalid, Error, Result};
use crate::rng::{key, stream, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// `n_lambda2` values log-spaced over `[low, high] * lambda2_max`; for
    /// each, `n_lambda1` values over `[low, high] * lambda1_max(lambda2)`.
    Relative {
        n_lambda1: usize,
        n_lambda2: usize,
        low: f64,
        high: f64,
    },
    /// `lambda1 = 0` with `n_lambda2` values over `[low, high] * lambda2_max`.
    Lambda2Path { n_lambda2: usize, low: f64, high: f64 },
    /// Explicit `(lambda1, lambda2)` pairs, each fitted from a cold start.
    Pairs { pairs: Vec<(f64, f64)> },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Relative {
            n_lambda1: 10,
            n_lambda2: 10,
            low: 0.05,
            high: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvOptions {
    pub folds: usize,
    pub grid: GridSpec,
    /// Concavity values searched (shared by both penalty levels).
    pub gammas: Vec<f64>,
    pub fit: FitOptions,
    pub seed: u64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            folds: 5,
            grid: GridSpec::default(),
            gammas: vec![DEFAULT_GAMMA],
            fit: FitOptions::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub params: PenaltyParams,
    pub mean_nll: f64,
    pub fold_nll: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub params: PenaltyParams,
    pub points: Vec<CvPoint>,
}

/// Fold id of every row of every dataset, stratified within dataset x class.
pub fn stratified_folds(design: &JointDesign, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(invalid!("need at least 2 folds (got {folds})"));
    }
    design
        .datasets
        .iter()
        .enumerate()
        .map(|(m, block)| {
            let mut assignment = vec![0; block.n()];
            let (cases, controls) = block.class_rows();
            for (class, mut rows) in [(1u64, cases), (0u64, controls)] {
                if rows.len() < folds {
                    return Err(Error::DegenerateLabels {
                        dataset: m,
                        reason: format!(
                            "class {class} has {} observations, fewer than {folds} folds",
                            rows.len()
                        ),
                    });
                }
                rows.shuffle(&mut stream(seed, key(Purpose::Folds, m as u64, class as u64, 0)));
                for (pos, r) in rows.into_iter().enumerate() {
                    assignment[r] = pos % folds;
                }
            }
            Ok(assignment)
        })
        .collect()
}

fn split(design: &JointDesign, assignment: &[Vec<usize>], fold: usize) -> (JointDesign, JointDesign) {
    let pick = |block: &DatasetBlock, a: &[usize], keep: bool| {
        let rows: Vec<usize> = (0..block.n()).filter(|&k| (a[k] == fold) != keep).collect();
        block.select_rows(&rows)
    };
    let train = design
        .datasets
        .iter()
        .zip(assignment)
        .map(|(b, a)| pick(b, a, true))
        .collect();
    let test = design
        .datasets
        .iter()
        .zip(assignment)
        .map(|(b, a)| pick(b, a, false))
        .collect();
    (JointDesign { datasets: train }, JointDesign { datasets: test })
}

/// Grid rows: each inner vector is warm-started along its order; rows start cold.
fn resolve_grid(design: &JointDesign, opts: &CvOptions) -> Result<Vec<Vec<PenaltyParams>>> {
    if opts.gammas.is_empty() {
        return Err(invalid!("at least one gamma value is required"));
    }
    let mut rows = Vec::new();
    match &opts.grid {
        GridSpec::Pairs { pairs } => {
            if pairs.is_empty() {
                return Err(invalid!("empty lambda grid"));
            }
            for &gamma in &opts.gammas {
                for &(l1, l2) in pairs {
                    let p = PenaltyParams::new(l1, l2).with_gamma(gamma);
                    p.validate()?;
                    rows.push(vec![p]);
                }
            }
        }
        &GridSpec::Relative {
            n_lambda1,
            n_lambda2,
            low,
            high,
        } => {
            if n_lambda1 == 0 || n_lambda2 == 0 || !(low > 0.0 && low <= high) {
                return Err(invalid!("relative grid needs positive sizes and 0 < low <= high"));
            }
            let bounds = LambdaBounds::compute(design, opts.fit.standardize)?;
            let l2max = bounds.lambda2_max();
            for &gamma in &opts.gammas {
                for l2 in scaled_grid(l2max, low, high, n_lambda2)? {
                    let l1max = bounds.lambda1_max(l2)?;
                    let row = scaled_grid(l1max, low, high, n_lambda1)?
                        .into_iter()
                        .map(|l1| PenaltyParams::new(l1, l2).with_gamma(gamma))
                        .collect::<Vec<_>>();
                    for p in &row {
                        p.validate()?;
                    }
                    rows.push(row);
                }
            }
        }
        &GridSpec::Lambda2Path { n_lambda2, low, high } => {
            if n_lambda2 == 0 || !(low > 0.0 && low <= high) {
                return Err(invalid!("lambda2 path needs a positive size and 0 < low <= high"));
            }
            let l2max = LambdaBounds::compute(design, opts.fit.standardize)?.lambda2_max();
            for &gamma in &opts.gammas {
                let row = scaled_grid(l2max, low, high, n_lambda2)?
                    .into_iter()
                    .map(|l2| PenaltyParams::new(0.0, l2).with_gamma(gamma))
                    .collect::<Vec<_>>();
                for p in &row {
                    p.validate()?;
                }
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// `n` values log-spaced over `[low, high] * max`, or a single zero when `max` is zero.
fn scaled_grid(max: f64, low: f64, high: f64, n: usize) -> Result<Vec<f64>> {
    if max > 0.0 {
        log_spaced_desc(high * max, low * max, n)
    } else {
        Ok(vec![0.0])
    }
}

fn fold_scores(train: &JointDesign, test: &JointDesign, grid: &[Vec<PenaltyParams>], opts: &FitOptions) -> Result<Vec<f64>> {
    let solver = Solver::new(train, opts.standardize)?;
    let null = solver.null_state();
    let mut scores = Vec::new();
    for row in grid {
        let mut state = null.clone();
        for params in row {
            let (next, _, _, _) = solver.solve(params, opts, state);
            scores.push(negative_log_likelihood(test, &solver.to_original(&next))?);
            state = next;
        }
    }
    Ok(scores)
}

/// Selects the grid point with the smallest mean validation negative
/// log-likelihood; ties go to the larger `lambda2`, then the larger `lambda1`.
pub fn cross_validate(design: &JointDesign, opts: &CvOptions) -> Result<CvResult> {
    design.validate()?;
    design.require_both_classes()?;
    opts.fit.validate()?;
    let assignment = stratified_folds(design, opts.folds, opts.seed)?;
    let grid = resolve_grid(design, opts)?;
    let per_fold: Vec<Vec<f64>> = (0..opts.folds)
        .into_par_iter()
        .map(|fold| {
            let (train, test) = split(design, &assignment, fold);
            fold_scores(&train, &test, &grid, &opts.fit)
        })
        .collect::<Result<_>>()?;

    let points: Vec<CvPoint> = grid
        .iter()
        .flatten()
        .enumerate()
        .map(|(i, params)| {
            let fold_nll: Vec<f64> = per_fold.iter().map(|s| s[i]).collect();
            CvPoint {
                params: *params,
                mean_nll: fold_nll.iter().sum::<f64>() / fold_nll.len() as f64,
                fold_nll,
            }
        })
        .collect();
    let best = points
        .iter()
        .filter(|p| p.mean_nll.is_finite())
        .min_by(|a, b| {
            a.mean_nll
                .total_cmp(&b.mean_nll)
                .then(b.params.lambda2.total_cmp(&a.params.lambda2))
                .then(b.params.lambda1.total_cmp(&a.params.lambda1))
        })
        .ok_or_else(|| Error::Numerical("no grid point has a finite validation loss".into()))?;
    Ok(CvResult {
        params: best.params,
        points,
    })
}
