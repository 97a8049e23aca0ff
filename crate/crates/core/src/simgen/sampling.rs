use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::linalg::{cholesky_lower, inverse_sqrt};

/// AR(1) correlation matrix with entries `rho^|i-j|`.
pub fn ar_covariance(q: usize, rho: f64) -> Result<DMatrix<f64>> {
    if q == 0 {
        return Err(invalid!("AR covariance needs q >= 1"));
    }
    if !(rho.abs() < 1.0) {
        return Err(invalid!("AR parameter {rho} must satisfy |rho| < 1"));
    }
    Ok(DMatrix::from_fn(q, q, |i, j| rho.powi(i.abs_diff(j) as i32)))
}

/// Matrix-normal distribution `N(mean, sigma_t (x) sigma_s)` with cached factors.
#[derive(Debug, Clone)]
pub struct MatrixNormal {
    mean: DMatrix<f64>,
    spatial_factor: DMatrix<f64>,
    temporal_factor_t: DMatrix<f64>,
}

impl MatrixNormal {
    pub fn new(mean: DMatrix<f64>, sigma_s: &DMatrix<f64>, sigma_t: &DMatrix<f64>) -> Result<Self> {
        if sigma_s.nrows() != mean.nrows() || sigma_t.nrows() != mean.ncols() {
            return Err(crate::Error::Dimension(format!(
                "mean is {}x{}, sigma_s is {}x{}, sigma_t is {}x{}",
                mean.nrows(),
                mean.ncols(),
                sigma_s.nrows(),
                sigma_s.ncols(),
                sigma_t.nrows(),
                sigma_t.ncols()
            )));
        }
        let spatial_factor = cholesky_lower(sigma_s, "spatial covariance")?;
        let temporal_factor_t = cholesky_lower(sigma_t, "temporal covariance")?.transpose();
        Ok(MatrixNormal {
            mean,
            spatial_factor,
            temporal_factor_t,
        })
    }

    pub fn zero_mean(sigma_s: &DMatrix<f64>, sigma_t: &DMatrix<f64>) -> Result<Self> {
        Self::new(DMatrix::zeros(sigma_s.nrows(), sigma_t.nrows()), sigma_s, sigma_t)
    }

    /// `mean + A Z B^T` with `A A^T = sigma_s`, `B B^T = sigma_t`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let (p, q) = self.mean.shape();
        let z = DMatrix::from_fn(p, q, |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + &self.spatial_factor * z * &self.temporal_factor_t
    }
}

pub fn sample_matrix_normal<R: Rng + ?Sized>(
    mean: &DMatrix<f64>,
    sigma_s: &DMatrix<f64>,
    sigma_t: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    Ok(MatrixNormal::new(mean.clone(), sigma_s, sigma_t)?.sample(rng))
}

/// Right-multiplies by the symmetric inverse square root of a temporal covariance.
#[derive(Debug, Clone)]
pub struct Whitener {
    transform: DMatrix<f64>,
}

impl Whitener {
    pub fn new(sigma_t: &DMatrix<f64>) -> Result<Self> {
        Ok(Whitener {
            transform: inverse_sqrt(sigma_t, "temporal covariance")?,
        })
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.transform.nrows() {
            return Err(crate::Error::Dimension(format!(
                "scan has {} columns, whitener expects {}",
                x.ncols(),
                self.transform.nrows()
            )));
        }
        Ok(x * &self.transform)
    }
}

pub fn whiten(x: &DMatrix<f64>, sigma_t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Whitener::new(sigma_t)?.apply(x)
}

/// Lag-1 autocorrelation of the row-demeaned scan, pooled over rows. Used to
/// whiten scans whose temporal covariance is unknown.
pub fn estimate_ar1(x: &DMatrix<f64>) -> f64 {
    let q = x.ncols();
    if q < 2 {
        return 0.0;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for row in x.row_iter() {
        let mean = row.mean();
        for t in 0..q {
            let r = row[t] - mean;
            den += r * r;
            if t + 1 < q {
                num += r * (row[t + 1] - mean);
            }
        }
    }
    if den <= 0.0 {
        return 0.0;
    }
    (num / den).clamp(-0.95, 0.95)
}
