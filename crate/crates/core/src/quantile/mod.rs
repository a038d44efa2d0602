//! Weighted pinball-loss quantile regression over constant, linear and RKHS
//! threshold classes.

mod kernel;
mod linear;
pub(crate) mod lp;

use serde::{Deserialize, Serialize};

use crate::dual::{solve_kernel_box, KernelBoxSolve};
use crate::error::{Error, Result};
use crate::symmetry::OrbitProblem;

pub use kernel::{stabilized_gram, KernelSpec};
pub(crate) use linear::solve_linear;

/// Cumulative-weight slack used when comparing against `1 − α`.
pub const QUANTILE_TOL: f64 = 1e-12;

/// `ℓ_α(t, s) = α·[t − s]₊ + (1 − α)·[s − t]₊`
#[inline]
pub fn pinball(t: f64, s: f64, alpha: f64) -> f64 {
    if t >= s {
        alpha * (t - s)
    } else {
        (1.0 - alpha) * (s - t)
    }
}

/// `Σ wᵢ ℓ_α(tᵢ, sᵢ)`
pub fn pinball_objective(fitted: &[f64], scores: &[f64], weights: &[f64], alpha: f64) -> f64 {
    fitted
        .iter()
        .zip(scores)
        .zip(weights)
        .map(|((&t, &s), &w)| w * pinball(t, s, alpha))
        .sum()
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Left-continuous weighted quantile `inf{t : Σ wᵢ 1{sᵢ ≤ t} ≥ 1 − α}`.
///
/// Weights are used as given; callers pass normalized weights.
pub fn weighted_quantile(scores: &[f64], weights: &[f64], alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::data("weighted quantile of an empty sample"));
    }
    if scores.len() != weights.len() {
        return Err(Error::structural("scores and weights differ in length"));
    }
    check_alpha(alpha)?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::data("non-finite score"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let target = 1.0 - alpha - QUANTILE_TOL;
    let mut cum = 0.0;
    for &i in &order {
        cum += weights[i];
        if cum >= target {
            return Ok(scores[i]);
        }
    }
    Ok(scores[*order.last().expect("nonempty")])
}

/// Optimal dual of the constant-class problem, `λ ∈ [−α, 1−α]ⁿ` with
/// `Σ wᵢλᵢ = 0`. Mass is handed to the largest scores first; tied scores
/// share the partial coordinate equally.
pub fn constant_dual(scores: &[f64], weights: &[f64], alpha: f64) -> Vec<f64> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut lambda = vec![-alpha; n];
    let total: f64 = weights.iter().sum();
    let mut remaining = alpha * total;
    let mut k = 0;
    while k < n && remaining > 0.0 {
        let mut end = k;
        while end < n && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        let group_weight: f64 = order[k..end].iter().map(|&i| weights[i]).sum();
        let value = if group_weight <= remaining {
            1.0 - alpha
        } else {
            -alpha + remaining / group_weight
        };
        for &i in &order[k..end] {
            lambda[i] = value;
        }
        remaining -= group_weight;
        k = end;
    }
    lambda
}

/// Feature maps `φ` for the linear threshold class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMap {
    /// `φ(w) = (1)`
    Intercept,
    Identity,
    /// `φ(w) = (1, w)`
    Affine,
    /// `(1, w_j, w_j², …, w_j^degree)` for every coordinate `j`.
    Polynomial {
        degree: u32,
    },
    Scaled {
        inner: Box<FeatureMap>,
        factor: f64,
    },
}

impl FeatureMap {
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        match self {
            FeatureMap::Intercept => vec![1.0],
            FeatureMap::Identity => w.to_vec(),
            FeatureMap::Affine => std::iter::once(1.0).chain(w.iter().copied()).collect(),
            FeatureMap::Polynomial { degree } => {
                let mut out = vec![1.0];
                for &v in w {
                    for k in 1..=*degree {
                        out.push(v.powi(k as i32));
                    }
                }
                out
            }
            FeatureMap::Scaled { inner, factor } => {
                inner.apply(w).into_iter().map(|v| v * factor).collect()
            }
        }
    }
}

/// A fitted threshold function `t̂(w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdModel {
    Constant {
        t: f64,
    },
    Linear {
        theta: Vec<f64>,
        feature_map: FeatureMap,
        /// `None` means an unconstrained `θ`.
        b_theta: Option<f64>,
        /// Declared bound on `‖φ‖₂`, for reporting only.
        b_phi: Option<f64>,
    },
    Kernel {
        coefficients: Vec<f64>,
        anchors: Vec<Vec<f64>>,
        kernel: KernelSpec,
        lambda: f64,
        /// RKHS ball radius; `None` is `M = ∞`.
        m: Option<f64>,
        /// Penalty actually in force once a finite `M` binds.
        effective_lambda: f64,
    },
}

impl ThresholdModel {
    pub fn evaluate(&self, w: &[f64]) -> Result<f64> {
        match self {
            ThresholdModel::Constant { t } => Ok(*t),
            ThresholdModel::Linear {
                theta, feature_map, ..
            } => {
                let phi = feature_map.apply(w);
                if phi.len() != theta.len() {
                    return Err(Error::structural(format!(
                        "feature map gives {} coordinates, model has {}",
                        phi.len(),
                        theta.len()
                    )));
                }
                Ok(phi.iter().zip(theta).map(|(a, b)| a * b).sum())
            }
            ThresholdModel::Kernel {
                coefficients,
                anchors,
                kernel,
                ..
            } => {
                if let Some(a) = anchors.first() {
                    if a.len() != w.len() {
                        return Err(Error::structural(format!(
                            "feature has {} coordinates, anchors have {}",
                            w.len(),
                            a.len()
                        )));
                    }
                }
                Ok(coefficients
                    .iter()
                    .zip(anchors)
                    .map(|(c, a)| c * kernel.eval(a, w))
                    .sum())
            }
        }
    }
}

/// A solved quantile regression on an orbit problem.
#[derive(Clone, Debug)]
pub struct Fit {
    pub model: ThresholdModel,
    /// Primal objective, including the penalty for the kernel class.
    pub objective: f64,
    /// `t̂` at every slot.
    pub fitted: Vec<f64>,
    /// Dual coordinates `λᵢ ∈ [−α, 1−α]`.
    pub dual: Vec<f64>,
}

pub fn fit_constant(problem: &OrbitProblem, s_test: f64) -> Result<Fit> {
    let scores = problem.scores_with(s_test);
    let t = weighted_quantile(&scores, &problem.weights, problem.alpha)?;
    let fitted = vec![t; scores.len()];
    Ok(Fit {
        objective: pinball_objective(&fitted, &scores, &problem.weights, problem.alpha),
        dual: constant_dual(&scores, &problem.weights, problem.alpha),
        model: ThresholdModel::Constant { t },
        fitted,
    })
}

/// `θ̂ = argmin_{‖θ‖₂ ≤ b_θ} Σ wᵢ ℓ_α(⟨θ, φ(wᵢ)⟩, sᵢ)`; `b_theta = None` drops the ball.
pub fn fit_linear(
    problem: &OrbitProblem,
    s_test: f64,
    feature_map: &FeatureMap,
    b_theta: Option<f64>,
) -> Result<Fit> {
    let scores = problem.scores_with(s_test);
    check_scores(&scores)?;
    let phi: Vec<Vec<f64>> = problem
        .features
        .iter()
        .map(|w| feature_map.apply(w))
        .collect();
    if phi.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::data("feature map produced non-finite values"));
    }
    let sol = solve_linear(&phi, &scores, &problem.weights, problem.alpha, b_theta)?;
    let fitted = phi
        .iter()
        .map(|row| row.iter().zip(&sol.theta).map(|(a, b)| a * b).sum())
        .collect();
    let dual = sol
        .scaled_dual
        .iter()
        .zip(&problem.weights)
        .map(|(u, w)| u / w)
        .collect();
    Ok(Fit {
        model: ThresholdModel::Linear {
            theta: sol.theta,
            feature_map: feature_map.clone(),
            b_theta,
            b_phi: None,
        },
        objective: sol.objective,
        fitted,
        dual,
    })
}

/// `min Σ wᵢ ℓ_α((Kc)ᵢ, sᵢ) + λ·cᵀKc` subject to `cᵀKc ≤ M²`, solved through
/// the box-constrained dual with `c = (w ⊙ λ̂)/(2λ)`.
pub fn fit_kernel(
    problem: &OrbitProblem,
    s_test: f64,
    kernel: &KernelSpec,
    lambda: f64,
    m: Option<f64>,
) -> Result<Fit> {
    let scores = problem.scores_with(s_test);
    check_scores(&scores)?;
    let (gram, _) = stabilized_gram(kernel, &problem.features)?;
    let KernelBoxSolve {
        u,
        fitted,
        effective_lambda,
        ..
    } = solve_kernel_box(
        &gram,
        &scores,
        &problem.weights,
        problem.alpha,
        lambda,
        m,
        None,
    )?;
    let penalty: f64 = u.iter().zip(&fitted).map(|(a, b)| a * b).sum::<f64>() / 2.0;
    let objective = pinball_objective(&fitted, &scores, &problem.weights, problem.alpha)
        + penalty * lambda / effective_lambda;
    Ok(Fit {
        dual: u.iter().zip(&problem.weights).map(|(u, w)| u / w).collect(),
        model: ThresholdModel::Kernel {
            coefficients: u.iter().map(|v| v / (2.0 * effective_lambda)).collect(),
            anchors: problem.features.clone(),
            kernel: kernel.clone(),
            lambda,
            m,
            effective_lambda,
        },
        objective,
        fitted,
    })
}

/// Penalty level `1/√(|G|/|H|)` from the RKHS rate analysis; `orbit_size` is
/// the number of distinct orbit terms.
pub fn rate_optimal_lambda(orbit_size: usize) -> f64 {
    1.0 / (orbit_size.max(1) as f64).sqrt()
}

fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.iter().any(|s| !s.is_finite()) {
        Err(Error::data("non-finite score"))
    } else {
        Ok(())
    }
}
