//! Intervals and fitted threshold models for user-supplied datasets.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use csymmpi::applications::{crt_cluster_effect, crt_individual_effect, CrtEffectInterval};
use csymmpi::harness::CONFIG_VERSION;
use csymmpi::quantile::{fit_constant, fit_kernel, fit_linear, KernelSpec, ThresholdModel};
use csymmpi::region::{projected_region, DEFAULT_EPS};
use csymmpi::symmetry::{build_orbit_problem, CrtTarget, DataLayout};
use csymmpi::{
    LinearPredictor, ModelClass, PredictionInterval, Predictor, Projection, ScoreTransform,
};

use crate::data::{ClusterTable, CrtTable, FlatTable, NetworkTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    Flat,
    Hierarchical,
    Crt,
    Network,
}

/// `symmpi` is the constant class; `csymmpi` uses the configured class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    #[default]
    Csymmpi,
    Symmpi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictConfig {
    pub version: u32,
    pub alpha: f64,
    pub eps: f64,
    pub method: IntervalMethod,
    pub class: ModelClass,
    /// Fit predictors with an intercept.
    pub intercept: bool,
    /// One pooled predictor for hierarchical data instead of one per cluster.
    pub pooled: bool,
    /// Fixed predictor; skips fitting on training data.
    pub predictor: Option<LinearPredictor>,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig {
            version: CONFIG_VERSION,
            alpha: 0.1,
            eps: DEFAULT_EPS,
            method: IntervalMethod::Csymmpi,
            class: ModelClass::Kernel {
                kernel: KernelSpec::Gaussian { length_scale: 0.1 },
                lambda: 0.005,
                m: None,
            },
            intercept: true,
            pooled: false,
            predictor: None,
        }
    }
}

impl PredictConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let config: PredictConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text)
                    .map_err(|e| csymmpi::Error::Config(format!("{}: {e}", p.display())))?
            }
            None => PredictConfig::default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            bail!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            );
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha must lie in (0, 1)");
        }
        if !(self.eps > 0.0) {
            bail!("eps must be positive");
        }
        if let ModelClass::Kernel { kernel, .. } = &self.class {
            kernel.validate()?;
        }
        Ok(())
    }

    pub fn effective_class(&self) -> ModelClass {
        match self.method {
            IntervalMethod::Symmpi => ModelClass::Constant,
            IntervalMethod::Csymmpi => self.class.clone(),
        }
    }
}

/// Where the data and the predictor's training data live.
#[derive(Clone, Debug)]
pub struct Inputs {
    pub layout: LayoutKind,
    pub data: PathBuf,
    /// Edge list for network data.
    pub edges: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub train_edges: Option<PathBuf>,
    /// CRT target, `ID` or `ID:ROW`.
    pub crt_target: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetInterval {
    /// 0-based data row (header excluded).
    pub row: usize,
    pub x: f64,
    pub interval: PredictionInterval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictOutput {
    pub version: u32,
    pub layout: LayoutKind,
    pub method: IntervalMethod,
    pub alpha: f64,
    pub intervals: Vec<TargetInterval>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub effect: Option<CrtEffectInterval>,
}

/// One prepared problem per target.
struct Prepared {
    row: usize,
    x: f64,
    layout: DataLayout,
    transform: ScoreTransform,
    eta: Projection,
    crt: Option<[Arc<dyn Predictor>; 2]>,
}

fn arc(p: LinearPredictor) -> Arc<dyn Predictor> {
    Arc::new(p)
}

fn need_train(inputs: &Inputs) -> Result<&Path> {
    inputs
        .train
        .as_deref()
        .context("a training file (--train) or a fixed [predictor] in the config is required")
}

fn prepare(inputs: &Inputs, config: &PredictConfig) -> Result<(Vec<Prepared>, Option<CrtTarget>)> {
    let fixed = config.predictor.clone();
    let mut out = Vec::new();
    match inputs.layout {
        LayoutKind::Flat => {
            let table = FlatTable::read(&inputs.data)?;
            let predictor = match fixed {
                Some(p) => p,
                None => {
                    let train = FlatTable::read(need_train(inputs)?)?;
                    let (x, y) = train.observed();
                    LinearPredictor::fit(&x, &y, config.intercept)?
                }
            };
            let transform = ScoreTransform::shared(arc(predictor));
            for row in table.targets() {
                out.push(Prepared {
                    row,
                    x: table.x[row],
                    layout: DataLayout::Flat(table.layout_for(row)),
                    transform: transform.clone(),
                    eta: Projection::TestCovariate,
                    crt: None,
                });
            }
        }
        LayoutKind::Hierarchical => {
            let table = ClusterTable::read(&inputs.data)?;
            let per_cluster: Option<Vec<LinearPredictor>> = match (&fixed, config.pooled) {
                (Some(_), _) | (None, true) => None,
                (None, false) => {
                    let train = ClusterTable::read(need_train(inputs)?)?;
                    let mut fits = Vec::with_capacity(table.ids.len());
                    for id in &table.ids {
                        let k = train.ids.iter().position(|t| t == id).with_context(|| {
                            format!("cluster {id} has no training rows; set pooled = true")
                        })?;
                        let (x, y) = train.observed(k);
                        fits.push(LinearPredictor::fit(&x, &y, config.intercept)?);
                    }
                    Some(fits)
                }
            };
            let shared = match (fixed, &per_cluster) {
                (Some(p), _) => Some(p),
                (None, None) => {
                    let train = ClusterTable::read(need_train(inputs)?)?;
                    let (mut x, mut y) = (Vec::new(), Vec::new());
                    for k in 0..train.ids.len() {
                        let (a, b) = train.observed(k);
                        x.extend(a);
                        y.extend(b);
                    }
                    Some(LinearPredictor::fit(&x, &y, config.intercept)?)
                }
                (None, Some(_)) => None,
            };
            for (cluster, row) in table.targets() {
                let (layout, order) = table.layout_for(cluster, row)?;
                let transform = match (&shared, &per_cluster) {
                    (Some(p), _) => ScoreTransform::shared(arc(p.clone())),
                    (None, Some(fits)) => ScoreTransform::per_key(
                        order.iter().map(|&k| arc(fits[k].clone())).collect(),
                    )?,
                    (None, None) => unreachable!("a predictor source is always chosen"),
                };
                let x = table.rows[cluster]
                    .iter()
                    .find(|r| r.0 == row)
                    .map_or(f64::NAN, |r| r.1);
                out.push(Prepared {
                    row,
                    x,
                    layout: DataLayout::Hierarchical(layout),
                    transform,
                    eta: Projection::TestCovariate,
                    crt: None,
                });
            }
        }
        LayoutKind::Crt => {
            let table = CrtTable::read(&inputs.data)?;
            let spec = inputs
                .crt_target
                .as_deref()
                .context("CRT data needs --target ID or ID:ROW")?;
            let target = table.target(spec)?;
            let predictors = crt_predictors(inputs, config)?;
            let layout = DataLayout::Crt(table.layout_for(target));
            out.push(Prepared {
                row: 0,
                x: f64::NAN,
                layout,
                transform: ScoreTransform::per_key(predictors.to_vec())?,
                eta: Projection::CovariatePair,
                crt: Some(predictors),
            });
            return Ok((out, Some(target)));
        }
        LayoutKind::Network => {
            let edges = inputs
                .edges
                .as_deref()
                .context("network data needs --edges")?;
            let table = NetworkTable::read(&inputs.data, edges)?;
            let predictor = match fixed {
                Some(p) => p,
                None => {
                    let train_edges = inputs
                        .train_edges
                        .as_deref()
                        .context("network training data needs --train-edges")?;
                    let train = NetworkTable::read(need_train(inputs)?, train_edges)?;
                    let (x, y) = train.observed_pairs();
                    LinearPredictor::fit(&x, &y, config.intercept)?
                }
            };
            let transform = ScoreTransform::shared(arc(predictor));
            for row in table.targets() {
                out.push(Prepared {
                    row,
                    x: table.x[row],
                    layout: DataLayout::Network(table.layout_for(row)),
                    transform: transform.clone(),
                    eta: Projection::CovariatePair,
                    crt: None,
                });
            }
        }
    }
    if out.is_empty() {
        bail!("no target rows: leave the y cell empty for each unit to predict");
    }
    Ok((out, None))
}

pub fn predict(inputs: &Inputs, config: &PredictConfig) -> Result<PredictOutput> {
    let class = config.effective_class();
    let (prepared, crt_target) = prepare(inputs, config)?;
    let mut output = PredictOutput {
        version: CONFIG_VERSION,
        layout: inputs.layout,
        method: config.method,
        alpha: config.alpha,
        intervals: Vec::new(),
        effect: None,
    };
    if let Some(target) = crt_target {
        let p = &prepared[0];
        let DataLayout::Crt(data) = &p.layout else {
            unreachable!("CRT targets come with a CRT layout")
        };
        let predictors = p.crt.clone().expect("CRT predictors are prepared");
        let effect = match target {
            CrtTarget::Individual { .. } => {
                crt_individual_effect(data, predictors, &class, config.alpha, config.eps)?
            }
            CrtTarget::Cluster(_) => {
                crt_cluster_effect(data, predictors, &class, config.alpha, config.eps)?
            }
        };
        output.effect = Some(effect);
        return Ok(output);
    }
    for p in prepared {
        let interval = projected_region(
            &p.layout,
            &p.transform,
            &p.eta,
            &class,
            config.alpha,
            config.eps,
        )
        .with_context(|| format!("target row {}", p.row))?;
        output.intervals.push(TargetInterval {
            row: p.row,
            x: p.x,
            interval,
        });
    }
    Ok(output)
}

fn crt_predictors(inputs: &Inputs, config: &PredictConfig) -> Result<[Arc<dyn Predictor>; 2]> {
    if let Some(p) = &config.predictor {
        return Ok([arc(p.clone()), arc(p.clone())]);
    }
    let train = CrtTable::read(need_train(inputs)?)?;
    let fit = |arm: u8| -> Result<Arc<dyn Predictor>> {
        let (x, y) = train.arm_pairs(arm);
        Ok(arc(LinearPredictor::fit(&x, &y, config.intercept)
            .with_context(|| {
                format!("fitting the arm-{arm} predictor")
            })?))
    };
    Ok([fit(0)?, fit(1)?])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibratedModel {
    pub version: u32,
    pub alpha: f64,
    pub class: ModelClass,
    /// Data row of the target the model was fitted for.
    pub row: usize,
    /// Candidate test score plugged into the target slot.
    pub s_test: f64,
    pub interval: PredictionInterval,
    pub model: ThresholdModel,
    pub objective: f64,
}

/// Fits the threshold function for the first target with the test score set
/// to `s_test`, defaulting to the interval's boundary score.
pub fn calibrate(
    inputs: &Inputs,
    config: &PredictConfig,
    s_test: Option<f64>,
) -> Result<CalibratedModel> {
    let class = config.effective_class();
    let (prepared, _) = prepare(inputs, config)?;
    let p = &prepared[0];
    let interval = projected_region(
        &p.layout,
        &p.transform,
        &p.eta,
        &class,
        config.alpha,
        config.eps,
    )?;
    let problem = build_orbit_problem(&p.layout, &p.transform, &p.eta, config.alpha)?;
    let s = match s_test {
        Some(s) => s,
        None if interval.threshold.is_finite() => interval.threshold,
        None => {
            let fallback = (0..problem.len())
                .filter(|&i| i != problem.test_index)
                .map(|i| problem.scores[i])
                .fold(0.0, f64::max);
            log::warn!(
                "interval is unbounded; fitting at the largest calibration score {fallback}"
            );
            fallback
        }
    };
    let fit = match &class {
        ModelClass::Constant => fit_constant(&problem, s)?,
        ModelClass::Linear {
            feature_map,
            b_theta,
        } => fit_linear(&problem, s, feature_map, *b_theta)?,
        ModelClass::Kernel { kernel, lambda, m } => fit_kernel(&problem, s, kernel, *lambda, *m)?,
    };
    Ok(CalibratedModel {
        version: CONFIG_VERSION,
        alpha: config.alpha,
        class,
        row: p.row,
        s_test: s,
        interval,
        model: fit.model,
        objective: fit.objective,
    })
}
