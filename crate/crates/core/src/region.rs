//! Prediction intervals for the unknown response under absolute-residual
//! scores: `{y : |y − μ̂| ≤ s*}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dual::{threshold_by_bisection, ConjugateSpec, DualProblem};
use crate::error::{Error, Result};
use crate::group::GroupSpec;
use crate::quantile::{stabilized_gram, FeatureMap, KernelSpec, QUANTILE_TOL};
use crate::symmetry::{
    build_orbit_problem, sampled_orbit_problem, target_center, DataLayout, OrbitProblem,
    Projection, ScoreTransform,
};

pub const DEFAULT_EPS: f64 = 1e-4;

/// Threshold function class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelClass {
    Constant,
    Linear {
        feature_map: FeatureMap,
        #[serde(default)]
        b_theta: Option<f64>,
    },
    Kernel {
        kernel: KernelSpec,
        lambda: f64,
        #[serde(default)]
        m: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SymmPi,
    CSymmPi,
    Projected,
    Sampled,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub dual_gap: Option<f64>,
    pub bisection_iterations: usize,
    pub lambda_at_boundary: Option<f64>,
    pub empty: bool,
    pub unbounded: bool,
}

/// `[center − threshold, center + threshold]`; infinite ends serialize as
/// the strings `"inf"` and `"-inf"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    #[serde(with = "extended_f64")]
    pub lo: f64,
    #[serde(with = "extended_f64")]
    pub hi: f64,
    #[serde(with = "extended_f64")]
    pub threshold: f64,
    pub center: f64,
    pub method: Method,
    pub alpha: f64,
    pub diagnostics: Diagnostics,
}

impl PredictionInterval {
    pub fn from_threshold(center: f64, threshold: f64, method: Method, alpha: f64) -> Self {
        PredictionInterval {
            lo: center - threshold,
            hi: center + threshold,
            threshold,
            center,
            method,
            alpha,
            diagnostics: Diagnostics {
                unbounded: threshold.is_infinite(),
                ..Diagnostics::default()
            },
        }
    }

    pub fn length(&self) -> f64 {
        if self.diagnostics.empty {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn contains(&self, y: f64) -> bool {
        !self.diagnostics.empty && self.lo <= y && y <= self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

pub(crate) mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

/// Exact constant-class threshold:
/// `inf{v : Σ_{fixed i, sᵢ ≤ v} wᵢ ≥ 1 − α}`, or `+∞` if the fixed slots
/// never reach `1 − α`. A test score `s` is covered exactly when `s ≤ v`.
pub fn symmpi_threshold(problem: &OrbitProblem) -> f64 {
    let mut order: Vec<usize> = (0..problem.len())
        .filter(|&i| i != problem.test_index)
        .collect();
    order.sort_by(|&a, &b| problem.scores[a].total_cmp(&problem.scores[b]));
    let target = 1.0 - problem.alpha - QUANTILE_TOL;
    let mut cum = 0.0;
    for i in order {
        cum += problem.weights[i];
        if cum >= target {
            return problem.scores[i];
        }
    }
    f64::INFINITY
}

pub fn symmpi_region(problem: &OrbitProblem, center: f64) -> PredictionInterval {
    PredictionInterval::from_threshold(
        center,
        symmpi_threshold(problem),
        Method::SymmPi,
        problem.alpha,
    )
}

/// The dual of `problem` for a non-constant class; the test slot moves last.
pub fn dual_problem(problem: &OrbitProblem, class: &ModelClass) -> Result<DualProblem> {
    let (features, weights, fixed) = problem.test_last();
    let conjugate = match class {
        ModelClass::Constant => ConjugateSpec::Zero,
        ModelClass::Linear {
            feature_map,
            b_theta,
        } => ConjugateSpec::Linear {
            features: features.iter().map(|w| feature_map.apply(w)).collect(),
            radius: *b_theta,
        },
        ModelClass::Kernel { kernel, lambda, m } => ConjugateSpec::KernelQuadratic {
            gram: stabilized_gram(kernel, &features)?.0,
            lambda_reg: *lambda,
            radius: *m,
        },
    };
    DualProblem::new(weights, fixed, problem.alpha, conjugate)
}

/// Adaptive interval: scores are accepted while the test slot's dual
/// coordinate stays below `1 − α`. The constant class uses the exact rule.
pub fn csymmpi_region(
    problem: &OrbitProblem,
    class: &ModelClass,
    center: f64,
    eps: f64,
) -> Result<PredictionInterval> {
    if !center.is_finite() {
        return Err(Error::numeric("non-finite interval center"));
    }
    if let ModelClass::Constant = class {
        let mut out = symmpi_region(problem, center);
        out.method = Method::CSymmPi;
        return Ok(out);
    }
    let dual = dual_problem(problem, class)?;
    let b = threshold_by_bisection(&dual, eps, 0.0, None)?;
    let mut out =
        PredictionInterval::from_threshold(center, b.threshold, Method::CSymmPi, problem.alpha);
    out.diagnostics = Diagnostics {
        dual_gap: Some(b.gap),
        bisection_iterations: b.iterations,
        lambda_at_boundary: Some(b.lambda_at_boundary),
        empty: b.empty,
        unbounded: b.unbounded,
    };
    if b.empty {
        out.lo = center;
        out.hi = center;
        out.threshold = 0.0;
    }
    Ok(out)
}

pub fn projected_region(
    layout: &DataLayout,
    transform: &ScoreTransform,
    eta: &Projection,
    class: &ModelClass,
    alpha: f64,
    eps: f64,
) -> Result<PredictionInterval> {
    let problem = build_orbit_problem(layout, transform, eta, alpha)?;
    let center = target_center(layout, transform)?;
    let mut out = csymmpi_region(&problem, class, center, eps)?;
    out.method = Method::Projected;
    Ok(out)
}

/// Region from `draws` Haar samples of `group`, seeded deterministically.
#[allow(clippy::too_many_arguments)]
pub fn sampled_region(
    layout: &DataLayout,
    transform: &ScoreTransform,
    eta: &Projection,
    class: &ModelClass,
    group: &GroupSpec,
    draws: usize,
    seed: u64,
    alpha: f64,
    eps: f64,
) -> Result<PredictionInterval> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let problem = sampled_orbit_problem(layout, transform, eta, alpha, group, draws, &mut rng)?;
    let center = target_center(layout, transform)?;
    let mut out = csymmpi_region(&problem, class, center, eps)?;
    out.method = Method::Sampled;
    Ok(out)
}
