use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::layout::Unit;
use crate::error::{Error, Result};

/// A pretrained point predictor `μ̂`.
pub trait Predictor: Send + Sync + fmt::Debug {
    fn predict(&self, x: &[f64]) -> f64;
}

/// `μ̂(x) = intercept + ⟨slope, x⟩`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearPredictor {
    pub intercept: f64,
    pub slope: Vec<f64>,
}

impl LinearPredictor {
    pub fn constant(value: f64) -> Self {
        LinearPredictor {
            intercept: value,
            slope: Vec::new(),
        }
    }

    /// Least squares, optionally through the origin. Rank-deficient designs
    /// get the minimum-norm solution.
    pub fn fit(x: &[Vec<f64>], y: &[f64], intercept: bool) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::structural("covariate and response counts differ"));
        }
        if x.is_empty() {
            return Err(Error::data("cannot fit a predictor on zero observations"));
        }
        let d = x[0].len();
        let cols = d + usize::from(intercept);
        let a = DMatrix::from_fn(x.len(), cols, |i, j| {
            if intercept {
                if j == 0 {
                    1.0
                } else {
                    x[i][j - 1]
                }
            } else {
                x[i][j]
            }
        });
        let b = DVector::from_column_slice(y);
        let beta = a
            .svd(true, true)
            .solve(&b, 1e-12)
            .map_err(|e| Error::numeric(format!("least squares failed: {e}")))?;
        let (icpt, slope) = if intercept {
            (beta[0], beta.iter().skip(1).copied().collect())
        } else {
            (0.0, beta.iter().copied().collect())
        };
        Ok(LinearPredictor {
            intercept: icpt,
            slope,
        })
    }
}

impl Predictor for LinearPredictor {
    fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Absolute-residual scores `sᵢ = |yᵢ − μ̂(xᵢ)|`, with one predictor shared by
/// every unit or one per unit key (cluster, or treatment arm).
#[derive(Clone, Debug)]
pub struct ScoreTransform {
    predictors: Vec<Arc<dyn Predictor>>,
}

impl ScoreTransform {
    pub fn shared(predictor: Arc<dyn Predictor>) -> Self {
        ScoreTransform {
            predictors: vec![predictor],
        }
    }

    pub fn per_key(predictors: Vec<Arc<dyn Predictor>>) -> Result<Self> {
        if predictors.is_empty() {
            return Err(Error::Config("score transform needs a predictor".into()));
        }
        Ok(ScoreTransform { predictors })
    }

    fn predictor(&self, key: usize) -> Result<&dyn Predictor> {
        if self.predictors.len() == 1 {
            return Ok(self.predictors[0].as_ref());
        }
        self.predictors
            .get(key)
            .map(|p| p.as_ref())
            .ok_or_else(|| Error::structural(format!("no predictor for key {key}")))
    }

    pub fn predict(&self, unit: &Unit) -> Result<f64> {
        let v = self.predictor(unit.key)?.predict(&unit.covariates());
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::numeric("predictor returned a non-finite value"))
        }
    }

    /// Observed units get their score; the target stays `None`.
    pub fn score(&self, unit: &Unit) -> Result<Option<f64>> {
        let mu = self.predict(unit)?;
        Ok(unit.y.map(|y| (y - mu).abs()))
    }
}
