//! Majorization-minimization solver for the sparse group MCP logistic model.
//!
//! Each outer iteration
//! 1. takes one damped Newton step on every dataset's intercept and
//!    confounder coefficients (unpenalized), then
//! 2. majorizes the logistic loss in the edge coefficients by the quadratic with
//!    curvature `1/4` per observation and minimizes the penalized surrogate by
//!    block coordinate descent over the rows of the `d x M` coefficient matrix.
//!
//! Before step 2 the same descent is tried on the local quadratic model with
//! curvature `p (1 - p)`; it is kept when it does not increase the objective,
//! which speeds up convergence once fitted probabilities move away from 1/2.
//! Row updates never increase their surrogate, so the penalized objective is
//! non-increasing. A coefficient sitting at zero stays there while zero is a
//! local minimizer of its subproblem; this makes the lambda-max thresholds
//! exact.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::design::JointDesign;
use super::likelihood::{sigmoid, softplus, Coefficients};
use super::penalty::{mcp_nonzero_local_min, mcp_value, penalty_total, PenaltyParams};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Outer convergence: max absolute coefficient change.
    pub tol: f64,
    pub max_iter: usize,
    pub inner_tol: f64,
    pub inner_max_sweeps: usize,
    /// Standardize each feature column within each dataset before fitting.
    pub standardize: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-5,
            max_iter: 500,
            inner_tol: 1e-6,
            inner_max_sweeps: 100,
            standardize: true,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.inner_tol > 0.0) || self.max_iter == 0 || self.inner_max_sweeps == 0 {
            return Err(invalid!("fit tolerances and iteration limits must be positive"));
        }
        Ok(())
    }
}

/// Result of one penalized fit; coefficients are on the original feature scale.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFit {
    pub coefficients: Coefficients,
    pub params: PenaltyParams,
    /// Penalized objective, starting with the initial point.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl CoefficientFit {
    pub fn theta_beta(&self) -> &DMatrix<f64> {
        &self.coefficients.beta
    }

    /// Indicator matrix of nonzero edge coefficients.
    pub fn support(&self) -> DMatrix<bool> {
        self.coefficients.beta.map(|b| b != 0.0)
    }

    pub fn nonzero_rows(&self) -> usize {
        self.coefficients
            .beta
            .row_iter()
            .filter(|r| r.iter().any(|&b| b != 0.0))
            .count()
    }

    /// Scatters a fit on screened features back to `d` rows.
    pub fn expand_rows(&self, kept: &[usize], d: usize) -> CoefficientFit {
        let m = self.coefficients.beta.ncols();
        let mut beta = DMatrix::zeros(d, m);
        for (r, &orig) in kept.iter().enumerate() {
            beta.set_row(orig, &self.coefficients.beta.row(r));
        }
        CoefficientFit {
            coefficients: Coefficients {
                beta,
                ..self.coefficients.clone()
            },
            ..self.clone()
        }
    }
}

/// Working state on the standardized scale. `eta[m][0]` is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct State {
    pub eta: Vec<DVector<f64>>,
    pub beta: DMatrix<f64>,
}

struct Block {
    /// `n x d`, column-major, standardized.
    x: DMatrix<f64>,
    /// `n x (L + 1)`, leading column of ones.
    q: DMatrix<f64>,
    z: DVector<f64>,
    mean: DVector<f64>,
    /// Zero marks a constant column; its coefficient is held at zero.
    scale: DVector<f64>,
    /// `||x_l||^2 / (4 N)`
    curvature: Vec<f64>,
}

/// Standardized design and solver workspace.
pub(crate) struct Solver {
    blocks: Vec<Block>,
    n_total: f64,
    d: usize,
}

const NEWTON_RIDGE: f64 = 1e-10;
const LOCAL_WEIGHT_FLOOR: f64 = 1e-6;
const ROW_PROX_STEPS: usize = 1;
const LOCAL_BACKTRACKS: usize = 4;
const LOCAL_MAX_SWEEPS: usize = 20;

/// Quadratic model used by a coordinate descent pass: the global bound
/// `1/4` on the logistic curvature (a true majorizer), or the local
/// curvature `p (1 - p)` at the current fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Curvature {
    Majorizer,
    Local,
}

impl Solver {
    pub fn new(design: &JointDesign, standardize: bool) -> Result<Self> {
        design.validate()?;
        design.require_both_classes()?;
        let n_total = design.n_total() as f64;
        let d = design.n_features();
        let blocks = design
            .datasets
            .iter()
            .map(|b| {
                let n = b.n();
                let mut x = b.features.clone();
                let mut mean = DVector::zeros(d);
                let mut scale = DVector::from_element(d, 1.0);
                let mut curvature = vec![0.0; d];
                for l in 0..d {
                    let mut col = x.column_mut(l);
                    if standardize {
                        let mu = col.mean();
                        col.add_scalar_mut(-mu);
                        let sd = (col.norm_squared() / n as f64).sqrt();
                        if sd > 1e-12 * (1.0 + mu.abs()) {
                            col /= sd;
                            scale[l] = sd;
                        } else {
                            col.fill(0.0);
                            scale[l] = 0.0;
                        }
                        mean[l] = mu;
                    } else if col.norm_squared() == 0.0 {
                        scale[l] = 0.0;
                    }
                    curvature[l] = col.norm_squared() / (4.0 * n_total);
                }
                let mut q = DMatrix::from_element(n, b.confounders.ncols() + 1, 1.0);
                q.columns_mut(1, b.confounders.ncols()).copy_from(&b.confounders);
                Block {
                    x,
                    q,
                    z: b.labels.clone(),
                    mean,
                    scale,
                    curvature,
                }
            })
            .collect();
        Ok(Solver { blocks, n_total, d })
    }

    fn m(&self) -> usize {
        self.blocks.len()
    }

    fn linear_predictor(&self, state: &State, m: usize) -> DVector<f64> {
        let block = &self.blocks[m];
        let mut lp = &block.q * &state.eta[m];
        let n = block.z.len();
        let xs = block.x.as_slice();
        for l in 0..self.d {
            let b = state.beta[(l, m)];
            if b != 0.0 {
                let col = &xs[l * n..(l + 1) * n];
                for (v, x) in lp.iter_mut().zip(col) {
                    *v += b * x;
                }
            }
        }
        lp
    }

    fn dataset_loss(&self, lp: &DVector<f64>, m: usize) -> f64 {
        lp.iter()
            .zip(self.blocks[m].z.iter())
            .map(|(&x, &z)| softplus(x) - z * x)
            .sum::<f64>()
            / self.n_total
    }

    pub fn objective(&self, state: &State, params: &PenaltyParams) -> f64 {
        let loss: f64 = (0..self.m())
            .map(|m| self.dataset_loss(&self.linear_predictor(state, m), m))
            .sum();
        loss + penalty_total(&state.beta, params)
    }

    /// One damped Newton step on `eta[m]` with the edge coefficients fixed.
    /// Returns the largest coefficient change.
    fn newton_eta(&self, state: &mut State, lp: &mut DVector<f64>, m: usize) -> f64 {
        let block = &self.blocks[m];
        let k = block.q.ncols();
        let mut grad = DVector::zeros(k);
        let mut hess = DMatrix::zeros(k, k);
        for (r, (&x, &z)) in lp.iter().zip(block.z.iter()).enumerate() {
            let p = sigmoid(x);
            let w = p * (1.0 - p);
            let row = block.q.row(r);
            for a in 0..k {
                grad[a] += (p - z) * row[a];
                for b in 0..=a {
                    hess[(a, b)] += w * row[a] * row[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
            hess[(a, a)] += NEWTON_RIDGE * self.n_total;
        }
        grad /= self.n_total;
        hess /= self.n_total;
        let step = match hess.cholesky() {
            Some(ch) => -ch.solve(&grad),
            None => -&grad * 4.0,
        };
        let slope = grad.dot(&step);
        if !(slope < 0.0) {
            return 0.0;
        }
        let base = self.dataset_loss(lp, m);
        let offset = &*lp - &block.q * &state.eta[m];
        let mut t = 1.0;
        for _ in 0..40 {
            let trial = &state.eta[m] + &step * t;
            let trial_lp = &offset + &block.q * &trial;
            if self.dataset_loss(&trial_lp, m) <= base + 1e-4 * t * slope {
                let change = (&step * t).amax();
                state.eta[m] = trial;
                *lp = trial_lp;
                return change;
            }
            t *= 0.5;
        }
        0.0
    }

    /// Starting point: zero edge coefficients and confounder-only fits.
    pub fn null_state(&self) -> State {
        let mut state = State {
            eta: self.blocks.iter().map(|b| DVector::zeros(b.q.ncols())).collect(),
            beta: DMatrix::zeros(self.d, self.m()),
        };
        for m in 0..self.m() {
            let block = &self.blocks[m];
            let rate = block.z.mean();
            state.eta[m][0] = (rate / (1.0 - rate)).ln();
            let mut lp = self.linear_predictor(&state, m);
            for _ in 0..100 {
                if self.newton_eta(&mut state, &mut lp, m) < 1e-13 {
                    break;
                }
            }
        }
        state
    }

    /// Loss gradient in the (standardized) edge coefficients, `d x M`.
    pub fn beta_gradient(&self, state: &State) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.d, self.m());
        for m in 0..self.m() {
            let lp = self.linear_predictor(state, m);
            let block = &self.blocks[m];
            let resid = DVector::from_iterator(
                lp.len(),
                lp.iter().zip(block.z.iter()).map(|(&x, &z)| (sigmoid(x) - z) / self.n_total),
            );
            g.set_column(m, &block.x.tr_mul(&resid));
        }
        g
    }

    pub fn solve(
        &self,
        params: &PenaltyParams,
        opts: &FitOptions,
        mut state: State,
    ) -> (State, Vec<f64>, bool, usize) {
        let m_count = self.m();
        let mut trace = vec![self.objective(&state, params)];
        let mut converged = false;
        let mut iterations = 0;
        let mut lps: Vec<DVector<f64>> = (0..m_count).map(|m| self.linear_predictor(&state, m)).collect();
        // Iterations alternate between passes restricted to the nonzero rows and
        // full passes; convergence is only declared after a full pass.
        let mut restrict = false;
        for iter in 0..opts.max_iter {
            iterations = iter + 1;
            let mut change = 0.0f64;
            for (m, lp) in lps.iter_mut().enumerate() {
                change = change.max(self.newton_eta(&mut state, lp, m));
            }
            let current = self.loss(&lps) + penalty_total(&state.beta, params);

            // Local-curvature step, shortened until it does not increase the
            // objective; otherwise the majorizer step.
            let mut target = state.clone();
            self.cd_step(&mut target, &lps, params, opts, Curvature::Local, restrict);
            let direction = &target.beta - &state.beta;
            let mut accepted = None;
            let mut t = 1.0;
            for _ in 0..LOCAL_BACKTRACKS {
                let trial = State {
                    eta: state.eta.clone(),
                    beta: &state.beta + &direction * t,
                };
                let trial_lps: Vec<DVector<f64>> = (0..m_count).map(|m| self.linear_predictor(&trial, m)).collect();
                let trial_value = self.loss(&trial_lps) + penalty_total(&trial.beta, params);
                if trial_value <= current {
                    accepted = Some((trial, trial_lps, trial_value));
                    break;
                }
                t *= 0.5;
            }
            let value = if let Some((trial, trial_lps, trial_value)) = accepted {
                state = trial;
                lps = trial_lps;
                change = change.max(direction.amax() * t);
                trial_value
            } else {
                change = change.max(self.cd_step(&mut state, &lps, params, opts, Curvature::Majorizer, restrict));
                for (m, lp) in lps.iter_mut().enumerate() {
                    *lp = self.linear_predictor(&state, m);
                }
                self.loss(&lps) + penalty_total(&state.beta, params)
            };
            trace.push(value);
            if change < opts.tol {
                if !restrict {
                    converged = true;
                    break;
                }
                restrict = false;
            } else {
                restrict = true;
            }
        }
        (state, trace, converged, iterations)
    }

    fn loss(&self, lps: &[DVector<f64>]) -> f64 {
        lps.iter().enumerate().map(|(m, lp)| self.dataset_loss(lp, m)).sum()
    }

    /// Minimizes a quadratic model of the loss plus the penalty by block
    /// coordinate descent. Returns the largest coefficient change.
    fn cd_step(
        &self,
        state: &mut State,
        lps: &[DVector<f64>],
        params: &PenaltyParams,
        opts: &FitOptions,
        curvature: Curvature,
        restrict: bool,
    ) -> f64 {
        let m_count = self.m();
        let inv_n = 1.0 / self.n_total;
        // weights[m][k]: curvature of observation k; the model gradient is X^T work
        let weights: Vec<Option<Vec<f64>>> = lps
            .iter()
            .map(|lp| match curvature {
                Curvature::Majorizer => None,
                Curvature::Local => Some(
                    lp.iter()
                        .map(|&x| {
                            let p = sigmoid(x);
                            (p * (1.0 - p)).max(LOCAL_WEIGHT_FLOOR)
                        })
                        .collect(),
                ),
            })
            .collect();
        let mut work: Vec<DVector<f64>> = (0..m_count)
            .map(|m| {
                DVector::from_iterator(
                    lps[m].len(),
                    lps[m]
                        .iter()
                        .zip(self.blocks[m].z.iter())
                        .map(|(&x, &z)| (sigmoid(x) - z) * inv_n),
                )
            })
            .collect();
        let curv_of = |m: usize, l: usize| -> f64 {
            let block = &self.blocks[m];
            match &weights[m] {
                None => block.curvature[l],
                Some(w) if block.curvature[l] > 0.0 => {
                    let n = block.z.len();
                    let col = &block.x.as_slice()[l * n..(l + 1) * n];
                    col.iter().zip(w).map(|(x, w)| w * x * x).sum::<f64>() * inv_n
                }
                Some(_) => 0.0,
            }
        };
        let mut curv_cache: Vec<Option<Vec<f64>>> = vec![None; self.d];
        // the local model is only trusted near the current point
        let allow_zeroing = curvature == Curvature::Majorizer;
        let start = state.beta.clone();
        let group_lambda = (m_count as f64).sqrt() * params.lambda1;

        let mut grad = vec![0.0; m_count];
        let mut row = vec![0.0; m_count];
        let mut sweeps = 0;
        let mut full = !restrict;
        let max_sweeps = match curvature {
            Curvature::Majorizer => opts.inner_max_sweeps,
            Curvature::Local => opts.inner_max_sweeps.min(LOCAL_MAX_SWEEPS),
        };
        while sweeps < max_sweeps {
            sweeps += 1;
            let mut max_change = 0.0f64;
            for l in 0..self.d {
                if !full && (0..m_count).all(|m| state.beta[(l, m)] == 0.0) {
                    continue;
                }
                let curv = curv_cache[l].get_or_insert_with(|| (0..m_count).map(|m| curv_of(m, l)).collect());
                for m in 0..m_count {
                    let block = &self.blocks[m];
                    let n = block.z.len();
                    row[m] = state.beta[(l, m)];
                    grad[m] = if curv[m] > 0.0 {
                        dot(&block.x.as_slice()[l * n..(l + 1) * n], work[m].as_slice())
                    } else {
                        0.0
                    };
                }
                let updated = if params.lambda1 == 0.0 {
                    (0..m_count)
                        .map(|m| {
                            scalar_update(row[m], grad[m], curv[m], params.lambda2, params.gamma2, allow_zeroing)
                        })
                        .collect::<Vec<_>>()
                } else {
                    row_update(&row, &grad, curv, group_lambda, params, allow_zeroing)
                };
                for m in 0..m_count {
                    let delta = updated[m] - row[m];
                    if delta != 0.0 {
                        state.beta[(l, m)] = updated[m];
                        let block = &self.blocks[m];
                        let n = block.z.len();
                        let col = &block.x.as_slice()[l * n..(l + 1) * n];
                        let s = delta * inv_n;
                        match &weights[m] {
                            None => {
                                for (w, x) in work[m].iter_mut().zip(col) {
                                    *w += 0.25 * s * x;
                                }
                            }
                            Some(wt) => {
                                for ((w, x), c) in work[m].iter_mut().zip(col).zip(wt) {
                                    *w += c * s * x;
                                }
                            }
                        }
                        max_change = max_change.max(delta.abs());
                    }
                }
            }
            if max_change < opts.inner_tol {
                if full || restrict {
                    break;
                }
                full = true;
            } else {
                full = false;
            }
        }
        (&state.beta - start).amax()
    }

    pub fn to_original(&self, state: &State) -> Coefficients {
        let m_count = self.m();
        let mut beta = DMatrix::zeros(self.d, m_count);
        let mut intercept = vec![0.0; m_count];
        let mut eta = Vec::with_capacity(m_count);
        for (m, block) in self.blocks.iter().enumerate() {
            let mut shift = 0.0;
            for l in 0..self.d {
                let b = state.beta[(l, m)];
                if b != 0.0 && block.scale[l] > 0.0 {
                    beta[(l, m)] = b / block.scale[l];
                    shift += beta[(l, m)] * block.mean[l];
                }
            }
            intercept[m] = state.eta[m][0] - shift;
            eta.push(state.eta[m].rows(1, state.eta[m].len() - 1).into_owned());
        }
        Coefficients { intercept, eta, beta }
    }

    pub fn from_original(&self, coef: &Coefficients) -> State {
        let m_count = self.m();
        let mut beta = DMatrix::zeros(self.d, m_count);
        let mut eta = Vec::with_capacity(m_count);
        for (m, block) in self.blocks.iter().enumerate() {
            let mut shift = 0.0;
            for l in 0..self.d {
                if block.scale[l] > 0.0 {
                    beta[(l, m)] = coef.beta[(l, m)] * block.scale[l];
                    shift += coef.beta[(l, m)] * block.mean[l];
                }
            }
            let mut e = DVector::zeros(block.q.ncols());
            e[0] = coef.intercept[m] + shift;
            e.rows_mut(1, coef.eta[m].len()).copy_from(&coef.eta[m]);
            eta.push(e);
        }
        State { eta, beta }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Coordinate update for `G (b - b0) + a/2 (b - b0)^2 + MCP(b; lambda, gamma)`.
/// Without `allow_zeroing` a nonzero coefficient moves to the nonzero local
/// minimizer when there is one.
pub(crate) fn scalar_update(b0: f64, g: f64, a: f64, lambda: f64, gamma: f64, allow_zeroing: bool) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let z = b0 - g / a;
    let zero_is_local_min = (a * z).abs() <= lambda;
    if b0 == 0.0 && zero_is_local_min {
        return 0.0;
    }
    if !allow_zeroing && b0 != 0.0 {
        if let Some(c) = mcp_nonzero_local_min(z, a, lambda, gamma) {
            return c;
        }
    }
    let f = |b: f64| 0.5 * a * (b - z) * (b - z) + mcp_value(b, lambda, gamma);
    match (zero_is_local_min, mcp_nonzero_local_min(z, a, lambda, gamma)) {
        (true, Some(c)) => {
            if f(c) < f(0.0) {
                c
            } else {
                0.0
            }
        }
        (true, None) => 0.0,
        (false, Some(c)) => c,
        (false, None) => b0,
    }
}

fn soft(x: f64, t: f64) -> f64 {
    (x.abs() - t).max(0.0).copysign(x)
}

/// Row update for the sparse group MCP surrogate
/// `sum_m [G_m (b_m - b0_m) + a_m/2 (b_m - b0_m)^2] + MCP(|b|_2; lg, g1) + sum_m MCP(b_m; l2, g2)`.
///
/// A candidate comes from iterating the two-level thresholding map (elementwise
/// MCP, then group MCP on the resulting norm) under the uniform curvature
/// `max a_m`; the update keeps whichever of the current row, the candidate and
/// (if it is a local minimizer) the zero row has the lowest surrogate value.
pub(crate) fn row_update(
    b0: &[f64],
    g: &[f64],
    a: &[f64],
    group_lambda: f64,
    params: &PenaltyParams,
    allow_zeroing: bool,
) -> Vec<f64> {
    let m_count = b0.len();
    let (lambda2, gamma1, gamma2) = (params.lambda2, params.gamma1, params.gamma2);
    // smooth gradient at the zero row
    let zero_grad_norm = (0..m_count)
        .filter(|&m| a[m] > 0.0)
        .map(|m| soft(g[m] - a[m] * b0[m], lambda2).powi(2))
        .sum::<f64>()
        .sqrt();
    let zero_is_local_min = zero_grad_norm <= group_lambda;
    let at_zero = b0.iter().all(|&b| b == 0.0);
    if at_zero && zero_is_local_min {
        return vec![0.0; m_count];
    }

    let objective = |b: &[f64]| -> f64 {
        let mut v = 0.0;
        let mut norm2 = 0.0;
        for m in 0..m_count {
            let d = b[m] - b0[m];
            v += g[m] * d + 0.5 * a[m] * d * d + mcp_value(b[m], lambda2, gamma2);
            norm2 += b[m] * b[m];
        }
        v + mcp_value(norm2.sqrt(), group_lambda, gamma1)
    };

    let v = a.iter().copied().fold(0.0f64, f64::max);
    let mut candidate = b0.to_vec();
    if v > 0.0 {
        let mut next = vec![0.0; m_count];
        for _ in 0..ROW_PROX_STEPS {
            for m in 0..m_count {
                next[m] = if a[m] > 0.0 {
                    let grad = g[m] + a[m] * (candidate[m] - b0[m]);
                    let y = candidate[m] - grad / v;
                    if (v * y).abs() <= lambda2 {
                        0.0
                    } else {
                        mcp_nonzero_local_min(y, v, lambda2, gamma2).unwrap_or(0.0)
                    }
                } else {
                    0.0
                };
            }
            let s = next.iter().map(|x| x * x).sum::<f64>().sqrt();
            let t = if s == 0.0 {
                0.0
            } else if s >= gamma1 * group_lambda {
                s
            } else if v > 1.0 / gamma1 && v * s > group_lambda {
                (v * s - group_lambda) / (v - 1.0 / gamma1)
            } else {
                0.0
            };
            let scale = if s > 0.0 { t / s } else { 0.0 };
            let mut diff = 0.0f64;
            for m in 0..m_count {
                let c = next[m] * scale;
                diff = diff.max((c - candidate[m]).abs());
                candidate[m] = c;
            }
            if diff < 1e-13 {
                break;
            }
        }
    }

    let mut best = b0.to_vec();
    let mut best_value = objective(b0);
    let zero = vec![0.0; m_count];
    if zero_is_local_min && allow_zeroing {
        let value = objective(&zero);
        if value <= best_value {
            best = zero;
            best_value = value;
        }
    }
    let value = objective(&candidate);
    if value < best_value || (!allow_zeroing && !at_zero && candidate.iter().any(|&c| c != 0.0)) {
        best = candidate;
    }
    best
}

/// Fits the penalized joint model from the deterministic starting point.
pub fn fit(design: &JointDesign, params: &PenaltyParams, opts: &FitOptions) -> Result<CoefficientFit> {
    fit_from(design, params, opts, None)
}

/// Like [`fit`], optionally warm-started from coefficients on the original scale.
pub fn fit_from(
    design: &JointDesign,
    params: &PenaltyParams,
    opts: &FitOptions,
    start: Option<&Coefficients>,
) -> Result<CoefficientFit> {
    params.validate()?;
    opts.validate()?;
    let solver = Solver::new(design, opts.standardize)?;
    let initial = match start {
        Some(c) => {
            c.check(design)?;
            solver.from_original(c)
        }
        None => solver.null_state(),
    };
    let (state, trace, converged, iterations) = solver.solve(params, opts, initial);
    if trace.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("objective became non-finite".into()));
    }
    Ok(CoefficientFit {
        coefficients: solver.to_original(&state),
        params: *params,
        objective_trace: trace,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sgmcp::penalty::mcp_derivative;

    #[test]
    fn scalar_update_is_global_among_local_minima() {
        let (lambda, gamma) = (0.1, 10.0);
        for &a in &[0.05, 0.08, 0.2, 1.0] {
            for k in -40..=40 {
                let b0 = 0.37 * (k as f64 % 3.0);
                let g = k as f64 * 0.02;
                let b = scalar_update(b0, g, a, lambda, gamma, true);
                let f = |x: f64| g * (x - b0) + 0.5 * a * (x - b0) * (x - b0) + mcp_value(x, lambda, gamma);
                assert!(f(b) <= f(b0) + 1e-15, "a={a} b0={b0} g={g}");
                if b != 0.0 {
                    let grad = g + a * (b - b0) + mcp_derivative(b, lambda, gamma) * b.signum();
                    assert!(grad.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_is_sticky_only_when_locally_optimal() {
        // |g| <= lambda at zero: stays
        assert_eq!(scalar_update(0.0, 0.09, 0.05, 0.1, 10.0, true), 0.0);
        // |g| > lambda: moves
        assert!(scalar_update(0.0, 0.11, 0.05, 0.1, 10.0, true) < 0.0);
    }

    #[test]
    fn row_update_never_increases_surrogate() {
        let params = PenaltyParams::new(0.05, 0.02);
        let lg = 3f64.sqrt() * params.lambda1;
        let cases = [
            ([0.0, 0.0, 0.0], [0.3, -0.2, 0.1], [0.08, 0.09, 0.07]),
            ([0.5, 0.0, -0.2], [0.01, 0.02, -0.03], [0.08, 0.08, 0.08]),
            ([0.1, 0.1, 0.0], [-0.5, 0.4, 0.0], [0.3, 0.2, 0.0]),
        ];
        for (b0, g, a) in cases {
            let b = row_update(&b0, &g, &a, lg, &params, true);
            let f = |x: &[f64]| {
                let mut v = 0.0;
                for m in 0..3 {
                    let d = x[m] - b0[m];
                    v += g[m] * d + 0.5 * a[m] * d * d + mcp_value(x[m], 0.02, 10.0);
                }
                v + mcp_value(x.iter().map(|t| t * t).sum::<f64>().sqrt(), lg, 10.0)
            };
            assert!(f(&b) <= f(&b0) + 1e-15);
            // inactive coordinate stays zero
            if a[2] == 0.0 {
                assert_eq!(b[2], 0.0);
            }
        }
    }
}
