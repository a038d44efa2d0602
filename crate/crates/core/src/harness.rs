//! Two-layer simulation, the six comparison methods, and coverage/length
//! summaries by covariate region.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::KernelSpec;
use crate::region::{csymmpi_region, symmpi_region, ModelClass, PredictionInterval};
use crate::symmetry::{
    build_orbit_problem, target_center, Cluster, DataLayout, FlatData, HierarchicalData,
    LinearPredictor, Predictor, Projection, ScoreTransform,
};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    #[serde(rename = "csymmpi")]
    CSymmPi,
    #[serde(rename = "symmpi")]
    SymmPi,
    StandardConditionalCp,
    StandardSplitCp,
    SingleTreeConditionalCp,
    SingleTreeSplitCp,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 6] = [
        BaselineMethod::CSymmPi,
        BaselineMethod::SymmPi,
        BaselineMethod::StandardConditionalCp,
        BaselineMethod::StandardSplitCp,
        BaselineMethod::SingleTreeConditionalCp,
        BaselineMethod::SingleTreeSplitCp,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BaselineMethod::CSymmPi => "C-SymmPI",
            BaselineMethod::SymmPi => "SymmPI",
            BaselineMethod::StandardConditionalCp => "Standard Conditional-CP",
            BaselineMethod::StandardSplitCp => "Standard Split-CP",
            BaselineMethod::SingleTreeConditionalCp => "Single-Tree Conditional-CP",
            BaselineMethod::SingleTreeSplitCp => "Single-Tree Split-CP",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            BaselineMethod::CSymmPi => "csymmpi",
            BaselineMethod::SymmPi => "symmpi",
            BaselineMethod::StandardConditionalCp => "standard_conditional_cp",
            BaselineMethod::StandardSplitCp => "standard_split_cp",
            BaselineMethod::SingleTreeConditionalCp => "single_tree_conditional_cp",
            BaselineMethod::SingleTreeSplitCp => "single_tree_split_cp",
        }
    }

    fn adaptive(self) -> bool {
        matches!(
            self,
            BaselineMethod::CSymmPi
                | BaselineMethod::StandardConditionalCp
                | BaselineMethod::SingleTreeConditionalCp
        )
    }
}

impl FromStr for BaselineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        BaselineMethod::ALL
            .into_iter()
            .find(|m| {
                m.key() == norm || m.label().to_ascii_lowercase().replace(['-', ' '], "_") == norm
            })
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub clusters: usize,
    /// Poisson mean of each cluster size.
    pub mean_cluster_size: f64,
    pub sigma_theta: f64,
    pub sigma_eps: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            clusters: 5,
            mean_cluster_size: 100.0,
            sigma_theta: 1.0,
            sigma_eps: 0.5,
            x_min: -0.5,
            x_max: 0.5,
        }
    }
}

/// A band `lower < |x| ≤ upper` (`lower ≤ |x|` when `lower_closed`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateRegion {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub lower_closed: bool,
}

impl CovariateRegion {
    pub fn contains(&self, x: f64) -> bool {
        let a = x.abs();
        let above = if self.lower_closed {
            a >= self.lower
        } else {
            a > self.lower
        };
        above && a <= self.upper
    }

    fn overlaps(&self, other: &CovariateRegion) -> bool {
        let lo = self.lower.max(other.lower);
        let hi = self.upper.min(other.upper);
        if lo < hi {
            return true;
        }
        // touching endpoints overlap only if both are closed there
        lo == hi
            && ((self.lower == lo && self.lower_closed && other.upper == lo)
                || (other.lower == lo && other.lower_closed && self.upper == lo))
    }
}

/// Test functions `f(x)` for the multi-accuracy estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DictionaryFn {
    One,
    X,
    XSquared,
    /// `exp(−(x − center)²/(2·width²))`
    Bump {
        center: f64,
        width: f64,
    },
}

impl DictionaryFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            DictionaryFn::One => 1.0,
            DictionaryFn::X => x,
            DictionaryFn::XSquared => x * x,
            DictionaryFn::Bump { center, width } => {
                (-(x - center) * (x - center) / (2.0 * width * width)).exp()
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            DictionaryFn::One => "1".into(),
            DictionaryFn::X => "x".into(),
            DictionaryFn::XSquared => "x^2".into(),
            DictionaryFn::Bump { center, width } => format!("bump({center},{width})"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    pub alpha: f64,
    pub split_fraction: f64,
    pub trials: usize,
    pub reps: usize,
    pub eps: f64,
    /// Fit predictors with an intercept.
    pub intercept: bool,
    pub generator: GeneratorConfig,
    pub class: ModelClass,
    pub methods: Vec<BaselineMethod>,
    pub regions: Vec<CovariateRegion>,
    pub dictionary: Vec<DictionaryFn>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            seed: 2025,
            alpha: 0.1,
            split_fraction: 0.5,
            trials: 40,
            reps: 100,
            eps: 1e-4,
            intercept: true,
            generator: GeneratorConfig::default(),
            class: ModelClass::Kernel {
                kernel: KernelSpec::Gaussian { length_scale: 0.1 },
                lambda: 0.005,
                m: None,
            },
            methods: BaselineMethod::ALL.to_vec(),
            regions: vec![
                CovariateRegion {
                    name: "R1".into(),
                    lower: 0.0,
                    upper: 0.1,
                    lower_closed: true,
                },
                CovariateRegion {
                    name: "R2".into(),
                    lower: 0.1,
                    upper: 0.3,
                    lower_closed: false,
                },
                CovariateRegion {
                    name: "R3".into(),
                    lower: 0.3,
                    upper: 0.5,
                    lower_closed: false,
                },
            ],
            dictionary: default_dictionary(),
            output: OutputConfig::default(),
        }
    }
}

pub fn default_dictionary() -> Vec<DictionaryFn> {
    let mut d = vec![DictionaryFn::One, DictionaryFn::X, DictionaryFn::XSquared];
    for c in [-0.4, -0.2, 0.0, 0.2, 0.4] {
        d.push(DictionaryFn::Bump {
            center: c,
            width: 0.1,
        });
    }
    d
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("alpha must lie in (0, 1)".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Config("split fraction must lie in (0, 1)".into()));
        }
        if self.trials == 0 || self.reps == 0 {
            return Err(Error::Config("trials and reps must be positive".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("eps must be positive".into()));
        }
        let g = &self.generator;
        if g.clusters == 0 || !(g.mean_cluster_size > 0.0) {
            return Err(Error::Config(
                "generator needs clusters and a positive mean size".into(),
            ));
        }
        if !(g.sigma_theta >= 0.0 && g.sigma_eps >= 0.0) || !(g.x_min < g.x_max) {
            return Err(Error::Config(
                "invalid generator scales or covariate range".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        for (i, a) in self.regions.iter().enumerate() {
            if !(a.lower <= a.upper) {
                return Err(Error::Config(format!("region {} is empty", a.name)));
            }
            for b in &self.regions[i + 1..] {
                if a.overlaps(b) {
                    return Err(Error::Config(format!(
                        "regions {} and {} overlap",
                        a.name, b.name
                    )));
                }
            }
        }
        if let ModelClass::Kernel { kernel, lambda, m } = &self.class {
            kernel.validate()?;
            if !(*lambda > 0.0) && m.is_none() {
                return Err(Error::Config(
                    "kernel class needs lambda > 0 or a finite m".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One draw of the two-layer model plus a fresh target in the last cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerSample {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub target_x: f64,
    pub target_y: f64,
}

/// `Y = X(θᵢ + ε)`, `Nᵢ ~ Poisson(mean)` redrawn while zero,
/// `X ~ U[x_min, x_max]`, `θᵢ ~ N(0, σ_θ²)`, `ε ~ N(0, σ_ε²)`.
pub fn gen_two_layer<R: Rng + ?Sized>(g: &GeneratorConfig, rng: &mut R) -> Result<TwoLayerSample> {
    let sizes = Poisson::new(g.mean_cluster_size)
        .map_err(|e| Error::Config(format!("cluster size distribution: {e}")))?;
    let theta_d = Normal::new(0.0, g.sigma_theta)
        .map_err(|e| Error::Config(format!("slope distribution: {e}")))?;
    let eps_d = Normal::new(0.0, g.sigma_eps)
        .map_err(|e| Error::Config(format!("noise distribution: {e}")))?;
    let x_d = Uniform::new_inclusive(g.x_min, g.x_max)
        .map_err(|e| Error::Config(format!("covariate distribution: {e}")))?;
    let mut xs = Vec::with_capacity(g.clusters);
    let mut ys = Vec::with_capacity(g.clusters);
    let mut theta = Vec::with_capacity(g.clusters);
    for _ in 0..g.clusters {
        let n = loop {
            let n = sizes.sample(rng) as usize;
            if n > 0 {
                break n;
            }
        };
        let th = theta_d.sample(rng);
        let mut cx = Vec::with_capacity(n);
        let mut cy = Vec::with_capacity(n);
        for _ in 0..n {
            let x = x_d.sample(rng);
            cx.push(x);
            cy.push(x * (th + eps_d.sample(rng)));
        }
        theta.push(th);
        xs.push(cx);
        ys.push(cy);
    }
    let th = *theta.last().expect("at least one cluster");
    let target_x = x_d.sample(rng);
    let target_y = target_x * (th + eps_d.sample(rng));
    Ok(TwoLayerSample {
        x: xs,
        y: ys,
        theta,
        target_x,
        target_y,
    })
}

/// Per-cluster train/calibration split of a sample.
#[derive(Clone, Debug)]
pub struct SplitSample {
    pub train: Vec<(Vec<f64>, Vec<f64>)>,
    pub calibration: Vec<(Vec<f64>, Vec<f64>)>,
    pub target_x: f64,
    pub target_y: f64,
}

/// Shuffles each cluster and sends `round(fraction·Nᵢ)` points (at least one)
/// to training.
pub fn split_sample<R: Rng + ?Sized>(
    s: &TwoLayerSample,
    fraction: f64,
    rng: &mut R,
) -> SplitSample {
    let mut train = Vec::with_capacity(s.x.len());
    let mut cal = Vec::with_capacity(s.x.len());
    for (cx, cy) in s.x.iter().zip(&s.y) {
        let mut idx: Vec<usize> = (0..cx.len()).collect();
        idx.shuffle(rng);
        let n_train = ((fraction * cx.len() as f64).round() as usize).clamp(1, cx.len());
        let pick = |ids: &[usize]| -> (Vec<f64>, Vec<f64>) {
            (
                ids.iter().map(|&i| cx[i]).collect(),
                ids.iter().map(|&i| cy[i]).collect(),
            )
        };
        train.push(pick(&idx[..n_train]));
        cal.push(pick(&idx[n_train..]));
    }
    SplitSample {
        train,
        calibration: cal,
        target_x: s.target_x,
        target_y: s.target_y,
    }
}

fn rows(x: &[f64]) -> Vec<Vec<f64>> {
    x.iter().map(|&v| vec![v]).collect()
}

/// Least squares per cluster.
pub fn fit_per_cluster(split: &SplitSample, intercept: bool) -> Result<Vec<LinearPredictor>> {
    split
        .train
        .iter()
        .map(|(x, y)| LinearPredictor::fit(&rows(x), y, intercept))
        .collect()
}

/// Least squares on all training data.
pub fn fit_pooled(split: &SplitSample, intercept: bool) -> Result<LinearPredictor> {
    let x: Vec<f64> = split
        .train
        .iter()
        .flat_map(|(x, _)| x.iter().copied())
        .collect();
    let y: Vec<f64> = split
        .train
        .iter()
        .flat_map(|(_, y)| y.iter().copied())
        .collect();
    LinearPredictor::fit(&rows(&x), &y, intercept)
}

fn interval_on(
    layout: &DataLayout,
    transform: &ScoreTransform,
    class: Option<&ModelClass>,
    alpha: f64,
    eps: f64,
) -> Result<PredictionInterval> {
    let problem = build_orbit_problem(layout, transform, &Projection::TestCovariate, alpha)?;
    let center = target_center(layout, transform)?;
    match class {
        Some(c) => csymmpi_region(&problem, c, center, eps),
        None => Ok(symmpi_region(&problem, center)),
    }
}

/// Intervals for the target from each requested method.
pub fn run_baselines(
    split: &SplitSample,
    config: &ExperimentConfig,
) -> Result<Vec<(BaselineMethod, PredictionInterval)>> {
    let k = split.calibration.len();
    let per_cluster = fit_per_cluster(split, config.intercept)?;
    let pooled = Arc::new(fit_pooled(split, config.intercept)?);
    let tx = split.target_x;

    let flat = |clusters: &[usize]| -> DataLayout {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for &i in clusters {
            x.extend(split.calibration[i].0.iter().map(|&v| vec![v]));
            y.extend(split.calibration[i].1.iter().copied());
        }
        x.push(vec![tx]);
        DataLayout::Flat(FlatData { x, y })
    };
    let all: Vec<usize> = (0..k).collect();
    let pooled_layout = flat(&all);
    let single_layout = flat(&[k - 1]);
    let mut clusters = Vec::new();
    let mut predictors: Vec<Arc<dyn Predictor>> = Vec::new();
    for (i, ((x, y), fit)) in split.calibration.iter().zip(&per_cluster).enumerate() {
        let mut cx = rows(x);
        if i + 1 == k {
            cx.push(vec![tx]);
        } else if x.is_empty() {
            log::warn!("cluster {i} has no calibration points and is skipped");
            continue;
        }
        clusters.push(Cluster {
            x: cx,
            y: y.clone(),
        });
        predictors.push(Arc::new(fit.clone()));
    }
    let hier = DataLayout::Hierarchical(HierarchicalData { clusters });
    let hier_transform = ScoreTransform::per_key(predictors)?;
    let pooled_transform = ScoreTransform::shared(pooled);
    let single_transform = ScoreTransform::shared(Arc::new(per_cluster[k - 1].clone()));

    let mut out = Vec::with_capacity(config.methods.len());
    for &m in &config.methods {
        let class = m.adaptive().then_some(&config.class);
        let (layout, transform) = match m {
            BaselineMethod::CSymmPi | BaselineMethod::SymmPi => (&hier, &hier_transform),
            BaselineMethod::StandardConditionalCp | BaselineMethod::StandardSplitCp => {
                (&pooled_layout, &pooled_transform)
            }
            BaselineMethod::SingleTreeConditionalCp | BaselineMethod::SingleTreeSplitCp => {
                (&single_layout, &single_transform)
            }
        };
        out.push((
            m,
            interval_on(layout, transform, class, config.alpha, config.eps)?,
        ));
    }
    Ok(out)
}

/// One interval from one repetition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub trial: usize,
    pub rep: usize,
    pub method: BaselineMethod,
    pub x: f64,
    pub y: f64,
    #[serde(with = "crate::region::extended_f64")]
    pub lo: f64,
    #[serde(with = "crate::region::extended_f64")]
    pub hi: f64,
    pub covered: bool,
}

impl RepRecord {
    pub fn length(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream seed for `(trial, rep)`.
pub fn task_seed(base: u64, trial: usize, rep: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ trial as u64) ^ rep as u64)
}

/// Generates, splits, fits and evaluates one repetition.
pub fn run_rep(config: &ExperimentConfig, trial: usize, rep: usize) -> Result<Vec<RepRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(task_seed(config.seed, trial, rep));
    let sample = gen_two_layer(&config.generator, &mut rng)?;
    let split = split_sample(&sample, config.split_fraction, &mut rng);
    Ok(run_baselines(&split, config)?
        .into_iter()
        .map(|(method, iv)| RepRecord {
            trial,
            rep,
            method,
            x: split.target_x,
            y: split.target_y,
            lo: iv.lo,
            hi: iv.hi,
            covered: iv.contains(split.target_y),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub region: String,
    pub method: BaselineMethod,
    #[serde(with = "crate::region::extended_f64")]
    pub length_mean: f64,
    #[serde(with = "crate::region::extended_f64")]
    pub length_sd: f64,
    #[serde(with = "crate::region::extended_f64")]
    pub coverage_mean: f64,
    #[serde(with = "crate::region::extended_f64")]
    pub coverage_sd: f64,
    /// Trials with at least one test point in the region.
    pub trials: usize,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiAccuracyRow {
    pub method: BaselineMethod,
    pub function: String,
    /// `Ê[f(X)(1{covered} − (1 − α))]`
    #[serde(with = "crate::region::extended_f64")]
    pub estimate: f64,
    #[serde(with = "crate::region::extended_f64")]
    pub standard_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub version: u32,
    pub alpha: f64,
    pub trials: usize,
    pub reps: usize,
    pub rows: Vec<ReportRow>,
    pub multi_accuracy: Vec<MultiAccuracyRow>,
}

pub const OVERALL: &str = "Overall";

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 || !mean.is_finite() {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Trial-level averages per region and method, then their mean and standard
/// deviation across trials.
pub fn evaluate(records: &[RepRecord], config: &ExperimentConfig) -> CoverageReport {
    let unassigned = records
        .iter()
        .filter(|r| !config.regions.iter().any(|g| g.contains(r.x)))
        .count();
    if unassigned > 0 && !config.regions.is_empty() {
        log::warn!("{unassigned} record(s) fall outside every region; counted in Overall only");
    }
    let mut rows = Vec::new();
    let names: Vec<Option<&CovariateRegion>> = std::iter::once(None)
        .chain(config.regions.iter().map(Some))
        .collect();
    for region in names {
        for &method in &config.methods {
            // trial → (length sum, covered count, n)
            let mut per_trial: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
            let mut points = 0;
            for r in records.iter().filter(|r| r.method == method) {
                if region.is_some_and(|g| !g.contains(r.x)) {
                    continue;
                }
                let e = per_trial.entry(r.trial).or_insert((0.0, 0.0, 0));
                e.0 += r.length();
                e.1 += f64::from(u8::from(r.covered));
                e.2 += 1;
                points += 1;
            }
            let lengths: Vec<f64> = per_trial.values().map(|(l, _, n)| l / *n as f64).collect();
            let covs: Vec<f64> = per_trial.values().map(|(_, c, n)| c / *n as f64).collect();
            let (length_mean, length_sd) = mean_sd(&lengths);
            let (coverage_mean, coverage_sd) = mean_sd(&covs);
            rows.push(ReportRow {
                region: region.map_or(OVERALL.to_string(), |g| g.name.clone()),
                method,
                length_mean,
                length_sd,
                coverage_mean,
                coverage_sd,
                trials: per_trial.len(),
                points,
            });
        }
    }
    let target = 1.0 - config.alpha;
    let mut multi_accuracy = Vec::new();
    for &method in &config.methods {
        let recs: Vec<&RepRecord> = records.iter().filter(|r| r.method == method).collect();
        for f in &config.dictionary {
            let v: Vec<f64> = recs
                .iter()
                .map(|r| f.eval(r.x) * (f64::from(u8::from(r.covered)) - target))
                .collect();
            let (estimate, sd) = mean_sd(&v);
            multi_accuracy.push(MultiAccuracyRow {
                method,
                function: f.name(),
                estimate,
                standard_error: sd / (v.len().max(1) as f64).sqrt(),
            });
        }
    }
    CoverageReport {
        version: CONFIG_VERSION,
        alpha: config.alpha,
        trials: config.trials,
        reps: config.reps,
        rows,
        multi_accuracy,
    }
}

/// Markdown coverage table: one block of methods per region, `mean (sd)`
/// cells.
pub fn render_markdown(report: &CoverageReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "| Region | Method | Interval Length | Coverage Probability |"
    );
    let _ = writeln!(s, "|---|---|---|---|");
    for r in &report.rows {
        if r.points == 0 {
            let _ = writeln!(s, "| {} | {} | n/a | n/a |", r.region, r.method.label());
            continue;
        }
        let _ = writeln!(
            s,
            "| {} | {} | {:.2} ({:.2}) | {:.3} ({:.3}) |",
            r.region,
            r.method.label(),
            r.length_mean,
            r.length_sd,
            r.coverage_mean,
            r.coverage_sd
        );
    }
    s
}
