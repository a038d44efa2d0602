//! Data layouts, score transforms, projections, and the collapse of a group
//! orbit into a weighted regression problem.

mod layout;
mod network;
mod score;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{ratio_to_f64, GroupSpec};
use crate::quantile::{check_alpha, pinball};

pub use layout::{
    Cluster, CrtCluster, CrtData, CrtTarget, DataLayout, FlatData, HierarchicalData, NetworkData,
    Unit,
};
pub use network::network_statistics;
pub use score::{LinearPredictor, Predictor, ScoreTransform};

/// Weighted (feature, score) pairs from one orbit. The score at
/// `test_index` is symbolic: its stored value is ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitProblem {
    pub features: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
    pub weights: Vec<f64>,
    pub alpha: f64,
    pub test_index: usize,
}

impl OrbitProblem {
    /// Validates lengths and normalizes positive weights to sum to one.
    pub fn new(
        features: Vec<Vec<f64>>,
        scores: Vec<f64>,
        weights: Vec<f64>,
        alpha: f64,
        test_index: usize,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let n = weights.len();
        if n == 0 {
            return Err(Error::data("orbit problem has no slots"));
        }
        if features.len() != n || scores.len() != n {
            return Err(Error::structural(
                "features, scores and weights differ in length",
            ));
        }
        if test_index >= n {
            return Err(Error::structural("test index out of range"));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::data("orbit weights must be positive and finite"));
        }
        if scores
            .iter()
            .enumerate()
            .any(|(i, s)| i != test_index && !s.is_finite())
        {
            return Err(Error::data("non-finite score"));
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.iter().map(|w| w / total).collect();
        let mut scores = scores;
        scores[test_index] = 0.0;
        Ok(OrbitProblem {
            features,
            scores,
            weights,
            alpha,
            test_index,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(OrbitProblem {
            alpha,
            ..self.clone()
        })
    }

    pub fn scores_with(&self, s_test: f64) -> Vec<f64> {
        let mut s = self.scores.clone();
        s[self.test_index] = s_test;
        s
    }

    pub fn test_feature(&self) -> &[f64] {
        &self.features[self.test_index]
    }

    /// `Σ wᵢ ℓ_α(t(wᵢ), sᵢ)` for an arbitrary threshold function.
    pub fn objective<F: Fn(&[f64]) -> f64>(&self, t: F, s_test: f64) -> f64 {
        self.scores_with(s_test)
            .iter()
            .zip(&self.features)
            .zip(&self.weights)
            .map(|((&s, f), &w)| w * pinball(t(f), s, self.alpha))
            .sum()
    }

    /// Features, weights and fixed scores with the test slot moved last.
    pub fn test_last(&self) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let mut order: Vec<usize> = (0..self.len()).filter(|&i| i != self.test_index).collect();
        let fixed = order.iter().map(|&i| self.scores[i]).collect();
        order.push(self.test_index);
        (
            order.iter().map(|&i| self.features[i].clone()).collect(),
            order.iter().map(|&i| self.weights[i]).collect(),
            fixed,
        )
    }
}

/// Projection callback taking `(x, c)`.
pub type ProjectionFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;

/// User projection `η(x, c)`.
#[derive(Clone)]
pub struct UserProjection(pub Arc<ProjectionFn>);

impl fmt::Debug for UserProjection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("UserProjection(..)")
    }
}

/// The embedding `η` of the observation the threshold conditions on, read
/// off the coordinate an orbit element moves into the target slot.
#[derive(Clone, Debug)]
pub enum Projection {
    /// The covariate `x`.
    TestCovariate,
    /// `(x, c)` with the cluster or network statistic `c`.
    CovariatePair,
    /// No information; collapses every class to a constant.
    Constant,
    User(UserProjection),
}

impl Projection {
    pub fn apply(&self, unit: &Unit) -> Vec<f64> {
        match self {
            Projection::TestCovariate => unit.x.clone(),
            Projection::CovariatePair => unit.covariates(),
            Projection::Constant => Vec::new(),
            Projection::User(f) => (f.0)(&unit.x, &unit.c),
        }
    }
}

/// Scores aligned with [`DataLayout::units`]; the target is `None`.
pub fn scores_from(layout: &DataLayout, transform: &ScoreTransform) -> Result<Vec<Option<f64>>> {
    layout.units()?.iter().map(|u| transform.score(u)).collect()
}

/// `η` at every orbit coordinate.
pub fn project(layout: &DataLayout, eta: &Projection) -> Result<Vec<Vec<f64>>> {
    let feats: Vec<Vec<f64>> = layout.units()?.iter().map(|u| eta.apply(u)).collect();
    if feats.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::data("projection produced non-finite values"));
    }
    Ok(feats)
}

/// Point prediction for the target.
pub fn target_center(layout: &DataLayout, transform: &ScoreTransform) -> Result<f64> {
    let units = layout.units()?;
    transform.predict(units.last().expect("layouts have a target"))
}

/// Collapses the layout's own symmetry group.
pub fn build_orbit_problem(
    layout: &DataLayout,
    transform: &ScoreTransform,
    eta: &Projection,
    alpha: f64,
) -> Result<OrbitProblem> {
    build_orbit_problem_for_group(layout, transform, eta, alpha, &layout.group()?)
}

/// Collapses an arbitrary group acting on the layout's coordinates: one slot
/// per coset of the target's stabilizer, weighted by `|H|/|G|`.
pub fn build_orbit_problem_for_group(
    layout: &DataLayout,
    transform: &ScoreTransform,
    eta: &Projection,
    alpha: f64,
    group: &GroupSpec,
) -> Result<OrbitProblem> {
    let units = layout.units()?;
    if group.degree() != units.len() {
        return Err(Error::structural(format!(
            "group acts on {} coordinates, layout has {}",
            group.degree(),
            units.len()
        )));
    }
    let order = group.cardinality();
    let mut mass: BTreeMap<usize, f64> = BTreeMap::new();
    for c in group.target_cosets()? {
        *mass.entry(c.label).or_insert(0.0) += ratio_to_f64(&c.multiplicity, &order);
    }
    slots_from_mass(&units, transform, eta, alpha, mass)
}

/// Orbit problem from `draws` Haar samples: each draw contributes mass
/// `1/(N+1)` to the coordinate it moves into the target slot, and one extra
/// test slot of mass `1/(N+1)` is always present.
pub fn sampled_orbit_problem<R: Rng + ?Sized>(
    layout: &DataLayout,
    transform: &ScoreTransform,
    eta: &Projection,
    alpha: f64,
    group: &GroupSpec,
    draws: usize,
    rng: &mut R,
) -> Result<OrbitProblem> {
    if draws == 0 {
        return Err(Error::Config("at least one group draw is required".into()));
    }
    let units = layout.units()?;
    if group.degree() != units.len() {
        return Err(Error::structural(format!(
            "group acts on {} coordinates, layout has {}",
            group.degree(),
            units.len()
        )));
    }
    let unit_mass = 1.0 / (draws as f64 + 1.0);
    let mut mass: BTreeMap<usize, f64> = BTreeMap::new();
    mass.insert(units.len() - 1, unit_mass);
    for g in group.haar_sample(rng, draws) {
        *mass.entry(g.target_source()).or_insert(0.0) += unit_mass;
    }
    slots_from_mass(&units, transform, eta, alpha, mass)
}

fn slots_from_mass(
    units: &[Unit],
    transform: &ScoreTransform,
    eta: &Projection,
    alpha: f64,
    mass: BTreeMap<usize, f64>,
) -> Result<OrbitProblem> {
    let target = units.len() - 1;
    let mut features = Vec::with_capacity(mass.len());
    let mut scores = Vec::with_capacity(mass.len());
    let mut weights = Vec::with_capacity(mass.len());
    let mut test_index = None;
    for (label, w) in mass {
        let unit = &units[label];
        if label == target {
            test_index = Some(features.len());
            scores.push(0.0);
        } else {
            scores.push(
                transform
                    .score(unit)?
                    .ok_or_else(|| Error::data("observed coordinate without a response"))?,
            );
        }
        features.push(eta.apply(unit));
        weights.push(w);
    }
    let test_index =
        test_index.ok_or_else(|| Error::structural("target slot missing from orbit"))?;
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::data("projection produced non-finite values"));
    }
    OrbitProblem::new(features, scores, weights, alpha, test_index)
}
