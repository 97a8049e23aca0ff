//! C ABI for `diffnet`.
//!
//! Conventions:
//! - every function returns a [`DiffnetStatus`]; results go through out-pointers;
//! - on failure a message is available from [`diffnet_last_error`] on the
//!   calling thread until the next failing call;
//! - matrices are dense, column-major `double` arrays;
//! - objects are opaque handles released by their `_free` function; strings
//!   returned by the library are released by [`diffnet_string_free`];
//! - panics never cross the boundary and are reported as `DIFFNET_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use diffnet::ensemble::{run_ensemble, EdgeWeightMatrix, EnsembleOptions};
use diffnet::metrics::{score_support, EdgeSet};
use diffnet::sgmcp::{
    cross_validate, fit, CoefficientFit, CvOptions, DatasetBlock, FitOptions, FitRecord, GridSpec, JointDesign,
    LambdaBounds, PenaltyParams,
};
use diffnet::Error;
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffnetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Numerical = 4,
    DegenerateLabels = 5,
    Io = 6,
    Panic = 7,
    Other = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> DiffnetStatus {
    match err {
        Error::InvalidParameter(_) | Error::Config(_) | Error::UnknownDataset(_) => DiffnetStatus::InvalidArgument,
        Error::Dimension(_) => DiffnetStatus::Dimension,
        Error::NotPositiveDefinite(_) | Error::Solver { .. } | Error::Numerical(_) | Error::EnsembleFailures { .. } => {
            DiffnetStatus::Numerical
        }
        Error::DegenerateLabels { .. } => DiffnetStatus::DegenerateLabels,
        Error::Io { .. } | Error::Format { .. } => DiffnetStatus::Io,
    }
}

struct Failure(DiffnetStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DiffnetStatus::NullPointer, format!("{what} is null"))
}

fn bad(message: impl Into<String>) -> Failure {
    Failure(DiffnetStatus::InvalidArgument, message.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DiffnetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DiffnetStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            DiffnetStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn penalty(lambda1: f64, lambda2: f64, gamma: f64) -> Result<PenaltyParams, Failure> {
    let params = PenaltyParams::new(lambda1, lambda2).with_gamma(gamma);
    params.validate()?;
    Ok(params)
}

/// Message of the last failure on this thread, or null. Owned by the library.
#[no_mangle]
pub extern "C" fn diffnet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn diffnet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn diffnet_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Minimax concave penalty of `t`.
///
/// # Safety
/// `value` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn diffnet_mcp(t: f64, lambda: f64, gamma: f64, value: *mut f64) -> DiffnetStatus {
    guard(|| {
        *out(value, "value")? = diffnet::sgmcp::mcp(t, lambda, gamma)?;
        Ok(())
    })
}

/// CLIME estimate for a `p x p` covariance at `lambda`. `omega` receives the
/// symmetrized `p x p` estimate.
///
/// # Safety
/// `sigma` and `omega` must hold `p * p` doubles.
#[no_mangle]
pub unsafe extern "C" fn diffnet_clime_solve(sigma: *const f64, p: usize, lambda: f64, omega: *mut f64) -> DiffnetStatus {
    guard(|| {
        let s = DMatrix::from_column_slice(p, p, slice(sigma, p * p, "sigma")?);
        let sol = diffnet::clime::clime_solve(&s, lambda)?;
        slice_mut(omega, p * p, "omega")?.copy_from_slice(sol.omega.as_slice());
        Ok(())
    })
}

/// Datasets for the joint model, filled with [`diffnet_design_add_dataset`].
pub struct DiffnetDesign {
    blocks: Vec<DatasetBlock>,
}

impl DiffnetDesign {
    fn joint(&self) -> Result<JointDesign, Failure> {
        Ok(JointDesign::new(self.blocks.clone())?)
    }
}

/// # Safety
/// `design` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn diffnet_design_new(design: *mut *mut DiffnetDesign) -> DiffnetStatus {
    guard(|| {
        *out(design, "design")? = Box::into_raw(Box::new(DiffnetDesign { blocks: Vec::new() }));
        Ok(())
    })
}

/// Appends one dataset: `n x d` features, `n x l` confounders (may be null
/// when `l = 0`) and `n` labels in {0, 1}.
///
/// # Safety
/// Arrays must hold the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn diffnet_design_add_dataset(
    design: *mut DiffnetDesign,
    n: usize,
    d: usize,
    l: usize,
    features: *const f64,
    confounders: *const f64,
    labels: *const f64,
) -> DiffnetStatus {
    guard(|| {
        let design = out(design, "design")?;
        let block = DatasetBlock::new(
            DMatrix::from_column_slice(n, d, slice(features, n * d, "features")?),
            DMatrix::from_column_slice(n, l, slice(confounders, n * l, "confounders")?),
            DVector::from_column_slice(slice(labels, n, "labels")?),
        );
        let mut blocks = design.blocks.clone();
        blocks.push(block);
        JointDesign::new(blocks.clone())?;
        design.blocks = blocks;
        Ok(())
    })
}

/// # Safety
/// `design` must come from [`diffnet_design_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn diffnet_design_free(design: *mut DiffnetDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// `lambda2_max` and `lambda1_max(lambda2)` on standardized features.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn diffnet_lambda_max(
    design: *const DiffnetDesign,
    lambda2: f64,
    lambda2_max: *mut f64,
    lambda1_max: *mut f64,
) -> DiffnetStatus {
    guard(|| {
        let bounds = LambdaBounds::compute(&handle(design, "design")?.joint()?, true)?;
        *out(lambda2_max, "lambda2_max")? = bounds.lambda2_max();
        *out(lambda1_max, "lambda1_max")? = bounds.lambda1_max(lambda2)?;
        Ok(())
    })
}

/// A fitted joint model.
pub struct DiffnetFit {
    fit: CoefficientFit,
}

/// Fits the joint model with `gamma1 = gamma2 = gamma`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn diffnet_fit(
    design: *const DiffnetDesign,
    lambda1: f64,
    lambda2: f64,
    gamma: f64,
    result: *mut *mut DiffnetFit,
) -> DiffnetStatus {
    guard(|| {
        let design = handle(design, "design")?.joint()?;
        let f = fit(&design, &penalty(lambda1, lambda2, gamma)?, &FitOptions::default())?;
        *out(result, "result")? = Box::into_raw(Box::new(DiffnetFit { fit: f }));
        Ok(())
    })
}

/// Number of features `d` and datasets `M` of a fit, and whether it converged.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn diffnet_fit_info(
    fit: *const DiffnetFit,
    d: *mut usize,
    m: *mut usize,
    converged: *mut bool,
) -> DiffnetStatus {
    guard(|| {
        let beta = &handle(fit, "fit")?.fit.coefficients.beta;
        *out(d, "d")? = beta.nrows();
        *out(m, "m")? = beta.ncols();
        *out(converged, "converged")? = handle(fit, "fit")?.fit.converged;
        Ok(())
    })
}

/// Copies the `d x M` edge coefficients (original feature scale).
///
/// # Safety
/// `beta` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn diffnet_fit_beta(fit: *const DiffnetFit, beta: *mut f64, len: usize) -> DiffnetStatus {
    guard(|| {
        let b = &handle(fit, "fit")?.fit.coefficients.beta;
        if len != b.len() {
            return Err(bad(format!("beta buffer has {len} entries, need {}", b.len())));
        }
        slice_mut(beta, len, "beta")?.copy_from_slice(b.as_slice());
        Ok(())
    })
}

/// The fit as a JSON document; release with [`diffnet_string_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn diffnet_fit_to_json(fit: *const DiffnetFit, json: *mut *mut c_char) -> DiffnetStatus {
    guard(|| {
        let record = FitRecord::from_fit(&handle(fit, "fit")?.fit, None);
        let text = serde_json::to_string(&record).map_err(|e| Failure(DiffnetStatus::Other, e.to_string()))?;
        *out(json, "json")? = CString::new(text).map_err(|e| bad(e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `fit` must come from [`diffnet_fit`] or be null.
#[no_mangle]
pub unsafe extern "C" fn diffnet_fit_free(fit: *mut DiffnetFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// `folds`-fold cross-validation over the default relative grid
/// (`n_grid x n_grid` values in `[0.05, 1]` of the lambda maxima).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn diffnet_cross_validate(
    design: *const DiffnetDesign,
    folds: usize,
    n_grid: usize,
    seed: u64,
    lambda1: *mut f64,
    lambda2: *mut f64,
) -> DiffnetStatus {
    guard(|| {
        let design = handle(design, "design")?.joint()?;
        let opts = CvOptions {
            folds,
            grid: GridSpec::Relative {
                n_lambda1: n_grid,
                n_lambda2: n_grid,
                low: 0.05,
                high: 1.0,
            },
            seed,
            ..CvOptions::default()
        };
        let cv = cross_validate(&design, &opts)?;
        *out(lambda1, "lambda1")? = cv.params.lambda1;
        *out(lambda2, "lambda2")? = cv.params.lambda2;
        Ok(())
    })
}

/// Bootstrap inclusion frequencies.
pub struct DiffnetPsi {
    psi: EdgeWeightMatrix,
}

/// Runs `replicates` stratified bootstrap fits at a fixed penalty.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn diffnet_ensemble(
    design: *const DiffnetDesign,
    lambda1: f64,
    lambda2: f64,
    gamma: f64,
    replicates: usize,
    seed: u64,
    result: *mut *mut DiffnetPsi,
) -> DiffnetStatus {
    guard(|| {
        let design = handle(design, "design")?.joint()?;
        let opts = EnsembleOptions {
            replicates,
            seed,
            ..EnsembleOptions::default()
        };
        let psi = run_ensemble(&design, &penalty(lambda1, lambda2, gamma)?, &opts)?;
        *out(result, "result")? = Box::into_raw(Box::new(DiffnetPsi { psi }));
        Ok(())
    })
}

/// Copies the `d x M` inclusion frequencies and reports the number of
/// successful replicates.
///
/// # Safety
/// `psi_out` must hold `len` doubles; pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn diffnet_psi_values(
    psi: *const DiffnetPsi,
    psi_out: *mut f64,
    len: usize,
    replicates: *mut usize,
) -> DiffnetStatus {
    guard(|| {
        let p = &handle(psi, "psi")?.psi;
        if len != p.psi.len() {
            return Err(bad(format!("psi buffer has {len} entries, need {}", p.psi.len())));
        }
        slice_mut(psi_out, len, "psi_out")?.copy_from_slice(p.psi.as_slice());
        *out(replicates, "replicates")? = p.replicates;
        Ok(())
    })
}

/// # Safety
/// `psi` must come from [`diffnet_ensemble`] or be null.
#[no_mangle]
pub unsafe extern "C" fn diffnet_psi_free(psi: *mut DiffnetPsi) {
    if !psi.is_null() {
        drop(Box::from_raw(psi));
    }
}

/// Recovery counts and rates; a rate is NaN when its denominator is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffnetScore {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub tpr: f64,
    pub tnr: f64,
    pub tdr: f64,
}

unsafe fn edge_set(pairs: *const usize, n: usize, what: &str) -> Result<EdgeSet, Failure> {
    let flat = slice(pairs, 2 * n, what)?;
    Ok(flat
        .chunks_exact(2)
        .map(|c| (c[0].min(c[1]), c[0].max(c[1])))
        .collect())
}

/// Scores an estimated edge set against the truth over `p` nodes. Edges are
/// zero-based `(i, j)` pairs stored consecutively.
///
/// # Safety
/// `truth` and `estimate` must hold `2 * n` entries each; `score` must be valid.
#[no_mangle]
pub unsafe extern "C" fn diffnet_score_support(
    p: usize,
    truth: *const usize,
    n_truth: usize,
    estimate: *const usize,
    n_estimate: usize,
    score: *mut DiffnetScore,
) -> DiffnetStatus {
    guard(|| {
        let s = score_support(&edge_set(truth, n_truth, "truth")?, &edge_set(estimate, n_estimate, "estimate")?, p)?;
        *out(score, "score")? = DiffnetScore {
            tp: s.counts.tp,
            fp: s.counts.fp,
            tn: s.counts.tn,
            fn_: s.counts.fn_,
            tpr: s.tpr.unwrap_or(f64::NAN),
            tnr: s.tnr.unwrap_or(f64::NAN),
            tdr: s.tdr.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Reads the last error as a Rust string (for tests and wrappers).
pub fn last_error_message() -> Option<String> {
    let p = diffnet_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}
