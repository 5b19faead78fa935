use nalgebra::{DMatrix, DVector};

use super::RegressionTask;
use crate::error::{Error, Result};

/// Gaussian kernel Gram matrix on the design.
pub fn gram_matrix(design: &[f64], lengthscale: f64) -> DMatrix<f64> {
    let n = design.len();
    let c = 1.0 / (2.0 * lengthscale * lengthscale);
    DMatrix::from_fn(n, n, |i, j| (-(design[i] - design[j]).powi(2) * c).exp())
}

/// The linear map `y -> K (K + n ridge I)^{-1} y` for one ridge value.
#[derive(Clone, Debug)]
pub struct KernelSmoother {
    hat: DMatrix<f64>,
}

impl KernelSmoother {
    pub fn new(task: &RegressionTask, lengthscale: f64, ridge: f64) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::Invalid(format!("lengthscale must be positive, got {lengthscale}")));
        }
        if !(ridge > 0.0) || ridge.is_nan() {
            return Err(Error::Invalid(format!("ridge must be positive, got {ridge}")));
        }
        let n = task.n();
        let k = gram_matrix(&task.design, lengthscale);
        if ridge.is_infinite() {
            return Ok(Self { hat: DMatrix::zeros(n, n) });
        }
        let mut a = k.clone();
        for i in 0..n {
            a[(i, i)] += n as f64 * ridge;
        }
        let chol = a.cholesky().ok_or_else(|| {
            Error::numeric("kernel_ridge_fit", format!("K + n*ridge*I is not positive definite at ridge {ridge:e}"))
        })?;
        // K commutes with K + cI, so K A^{-1} = A^{-1} K.
        let hat = chol.solve(&k);
        if hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("kernel_ridge_fit", format!("non-finite smoother at ridge {ridge:e}")));
        }
        Ok(Self { hat })
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        (&self.hat * DVector::from_column_slice(y)).as_slice().to_vec()
    }
}

/// Closed-form kernel ridge predictions on the design.
pub fn kernel_ridge_fit(task: &RegressionTask, sample: &[f64], lengthscale: f64, ridge: f64) -> Result<Vec<f64>> {
    if sample.len() != task.n() {
        return Err(Error::Shape(format!("sample has {} responses, design has {}", sample.len(), task.n())));
    }
    Ok(KernelSmoother::new(task, lengthscale, ridge)?.apply(sample))
}

/// Fit with the training loss multiplied by `t`: the ridge becomes `ridge / t`, and
/// `t = 0` returns the zero predictor.
pub fn kernel_ridge_scaled(task: &RegressionTask, sample: &[f64], lengthscale: f64, ridge: f64, t: f64) -> Result<Vec<f64>> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::Invalid(format!("loss scale must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(vec![0.0; task.n()]);
    }
    kernel_ridge_fit(task, sample, lengthscale, ridge / t)
}
