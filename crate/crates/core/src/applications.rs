//! Turn-key pipelines for exchangeable, hierarchical, cluster-randomized
//! and network data.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::{projected_region, ModelClass, PredictionInterval};
use crate::symmetry::{
    CrtData, CrtTarget, DataLayout, FlatData, HierarchicalData, NetworkData, Predictor, Projection,
    ScoreTransform,
};

/// Conditional split-conformal interval for `y_{n+1}` given `x_{n+1}`.
pub fn split_conditional(
    data: &FlatData,
    predictor: Arc<dyn Predictor>,
    class: &ModelClass,
    alpha: f64,
    eps: f64,
) -> Result<PredictionInterval> {
    if data.y.is_empty() {
        return Err(Error::data("at least one calibration pair is required"));
    }
    projected_region(
        &DataLayout::Flat(data.clone()),
        &ScoreTransform::shared(predictor),
        &Projection::TestCovariate,
        class,
        alpha,
        eps,
    )
}

/// Interval for the last individual of the last cluster. `transform` holds
/// either one pooled predictor or one predictor per cluster.
pub fn hierarchical_interval(
    data: &HierarchicalData,
    transform: &ScoreTransform,
    class: &ModelClass,
    alpha: f64,
    eps: f64,
) -> Result<PredictionInterval> {
    projected_region(
        &DataLayout::Hierarchical(data.clone()),
        transform,
        &Projection::TestCovariate,
        class,
        alpha,
        eps,
    )
}

/// Treatment-effect interval and the counterfactual interval it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrtEffectInterval {
    pub target: CrtTarget,
    pub observed_arm: u8,
    /// Interval for `Y(1) − Y(0)`.
    pub interval: PredictionInterval,
    /// Interval for the outcome under the arm not received.
    pub counterfactual_interval: PredictionInterval,
}

fn crt_effect(
    data: &CrtData,
    predictors: [Arc<dyn Predictor>; 2],
    class: &ModelClass,
    alpha: f64,
    eps: f64,
) -> Result<CrtEffectInterval> {
    let (observed_arm, _) = data.arms()?;
    let y_obs = data.observed_target()?;
    let counterfactual = projected_region(
        &DataLayout::Crt(data.clone()),
        &ScoreTransform::per_key(predictors.to_vec())?,
        &Projection::CovariatePair,
        class,
        alpha,
        eps,
    )?;
    let mut effect = counterfactual.clone();
    if observed_arm == 0 {
        // Ĉ(1) − Y(0)
        effect.lo = counterfactual.lo - y_obs;
        effect.hi = counterfactual.hi - y_obs;
        effect.center = counterfactual.center - y_obs;
    } else {
        // Y(1) − Ĉ(0)
        effect.lo = y_obs - counterfactual.hi;
        effect.hi = y_obs - counterfactual.lo;
        effect.center = y_obs - counterfactual.center;
    }
    Ok(CrtEffectInterval {
        target: data.target,
        observed_arm,
        interval: effect,
        counterfactual_interval: counterfactual,
    })
}

/// Individual effect `Δ_mn`; `predictors[a]` is `μ̂_a` on `(x, C)`.
pub fn crt_individual_effect(
    data: &CrtData,
    predictors: [Arc<dyn Predictor>; 2],
    class: &ModelClass,
    alpha: f64,
    eps: f64,
) -> Result<CrtEffectInterval> {
    if !matches!(data.target, CrtTarget::Individual { .. }) {
        return Err(Error::Config(
            "individual effect needs an individual target".into(),
        ));
    }
    crt_effect(data, predictors, class, alpha, eps)
}

/// Cluster-average effect `Δ_m` from cluster means of covariates and outcomes.
pub fn crt_cluster_effect(
    data: &CrtData,
    predictors: [Arc<dyn Predictor>; 2],
    class: &ModelClass,
    alpha: f64,
    eps: f64,
) -> Result<CrtEffectInterval> {
    if !matches!(data.target, CrtTarget::Cluster(_)) {
        return Err(Error::Config(
            "cluster effect needs a cluster target".into(),
        ));
    }
    crt_effect(data, predictors, class, alpha, eps)
}

/// Interval for the last node, conditioning on its covariate and network
/// statistics. The predictor sees `(x, c)`.
pub fn network_interval(
    data: &NetworkData,
    predictor: Arc<dyn Predictor>,
    class: &ModelClass,
    alpha: f64,
    eps: f64,
) -> Result<PredictionInterval> {
    projected_region(
        &DataLayout::Network(data.clone()),
        &ScoreTransform::shared(predictor),
        &Projection::CovariatePair,
        class,
        alpha,
        eps,
    )
}
