use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positive semidefinite kernels on real feature vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `exp(−‖a − b‖² / (2L²))`, bounded by κ² = 1.
    Gaussian {
        length_scale: f64,
    },
    Linear,
    /// `(⟨a, b⟩ + offset)^degree`
    Polynomial {
        degree: u32,
        offset: f64,
    },
}

impl KernelSpec {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelSpec::Gaussian { length_scale } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / (2.0 * length_scale * length_scale)).exp()
            }
            KernelSpec::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            KernelSpec::Polynomial { degree, offset } => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                (dot + offset).powi(*degree as i32)
            }
        }
    }

    /// `sup k`, when it does not depend on the feature domain.
    pub fn bound(&self) -> Option<f64> {
        match self {
            KernelSpec::Gaussian { .. } => Some(1.0),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Gaussian { length_scale } if !(*length_scale > 0.0) => Err(Error::Config(
                format!("length scale must be positive, got {length_scale}"),
            )),
            KernelSpec::Polynomial { offset, .. } if *offset < 0.0 => Err(Error::Config(
                "polynomial kernel offset must be nonnegative".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn gram(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let n = points.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.eval(&points[i], &points[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

/// Gram matrix with `1e-8·trace/n` added to the diagonal when it is not
/// numerically positive definite. Returns the matrix and the jitter applied.
pub fn stabilized_gram(kernel: &KernelSpec, points: &[Vec<f64>]) -> Result<(DMatrix<f64>, f64)> {
    kernel.validate()?;
    let mut k = kernel.gram(points);
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("kernel produced non-finite Gram entries"));
    }
    let n = k.nrows();
    if n == 0 || k.clone().cholesky().is_some() {
        return Ok((k, 0.0));
    }
    let jitter = 1e-8 * k.trace().max(f64::MIN_POSITIVE) / n as f64;
    for i in 0..n {
        k[(i, i)] += jitter;
    }
    if k.clone().cholesky().is_none() {
        return Err(Error::numeric(
            "Gram matrix is not positive semidefinite after jitter",
        ));
    }
    Ok((k, jitter))
}
