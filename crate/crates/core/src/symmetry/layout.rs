use serde::{Deserialize, Serialize};

use super::network::network_statistics;
use crate::error::{Error, Result};
use crate::group::GroupSpec;

/// `n` observed pairs followed by one target covariate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatData {
    /// `n + 1` covariates; the last one belongs to the target.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

/// Two-layer data. The last cluster carries one covariate more than
/// responses: its final individual is the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalData {
    pub clusters: Vec<Cluster>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrtCluster {
    /// Treatment arm, 0 or 1.
    pub arm: u8,
    /// Cluster-level covariate `Cᵢ`.
    pub covariate: f64,
    pub x: Vec<Vec<f64>>,
    /// Observed outcomes under `arm`.
    pub y: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrtTarget {
    Individual { cluster: usize, unit: usize },
    Cluster(usize),
}

/// Cluster-randomized trial; the unknown is the target's outcome under the
/// arm it did not receive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrtData {
    pub clusters: Vec<CrtCluster>,
    pub target: CrtTarget,
}

/// Nodes `0..=n` with the last node's response unknown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkData {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub edges: Vec<(usize, usize)>,
    /// Node statistics `Cᵢ`; computed by [`network_statistics`] when absent.
    pub statistics: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataLayout {
    Flat(FlatData),
    Hierarchical(HierarchicalData),
    Crt(CrtData),
    Network(NetworkData),
}

/// One orbit coordinate: covariate, auxiliary statistic, response and the
/// index of the predictor that scores it.
#[derive(Clone, Debug, PartialEq)]
pub struct Unit {
    pub x: Vec<f64>,
    pub c: Vec<f64>,
    pub y: Option<f64>,
    pub key: usize,
}

impl Unit {
    /// Predictor input `(x, c)`.
    pub fn covariates(&self) -> Vec<f64> {
        self.x.iter().chain(&self.c).copied().collect()
    }
}

fn check_dim(rows: &[Vec<f64>], what: &str) -> Result<()> {
    if let Some(first) = rows.first() {
        if rows.iter().any(|r| r.len() != first.len()) {
            return Err(Error::data(format!(
                "{what} covariates differ in dimension"
            )));
        }
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::data(format!("non-finite {what} covariate")));
    }
    Ok(())
}

fn check_y(y: &[f64]) -> Result<()> {
    if y.iter().any(|v| !v.is_finite()) {
        Err(Error::data("non-finite response"))
    } else {
        Ok(())
    }
}

fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows.first().map_or(0, Vec::len);
    let mut m = vec![0.0; d];
    for r in rows {
        for (a, b) in m.iter_mut().zip(r) {
            *a += b;
        }
    }
    m.iter().map(|v| v / rows.len() as f64).collect()
}

impl CrtData {
    /// Observed arm of the target and the arm whose outcome is unknown.
    pub fn arms(&self) -> Result<(u8, u8)> {
        let m = match self.target {
            CrtTarget::Individual { cluster, .. } | CrtTarget::Cluster(cluster) => cluster,
        };
        let c = self
            .clusters
            .get(m)
            .ok_or_else(|| Error::data(format!("target cluster {m} does not exist")))?;
        if c.arm > 1 {
            return Err(Error::data("treatment arm must be 0 or 1"));
        }
        Ok((c.arm, 1 - c.arm))
    }

    /// Clusters assigned to `arm`, in index order.
    pub fn arm_clusters(&self, arm: u8) -> Vec<usize> {
        (0..self.clusters.len())
            .filter(|&i| self.clusters[i].arm == arm)
            .collect()
    }

    /// Observed outcome of the target (individual, or cluster mean).
    pub fn observed_target(&self) -> Result<f64> {
        match self.target {
            CrtTarget::Individual { cluster, unit } => self.clusters[cluster]
                .y
                .get(unit)
                .copied()
                .ok_or_else(|| Error::data(format!("target unit {unit} does not exist"))),
            CrtTarget::Cluster(m) => {
                let y = &self.clusters[m].y;
                if y.is_empty() {
                    return Err(Error::data("empty target cluster"));
                }
                Ok(y.iter().sum::<f64>() / y.len() as f64)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        for (i, c) in self.clusters.iter().enumerate() {
            if c.x.len() != c.y.len() {
                return Err(Error::data(format!(
                    "cluster {i}: covariate and outcome counts differ"
                )));
            }
            if c.x.is_empty() {
                return Err(Error::data(format!("cluster {i} is empty")));
            }
            if c.arm > 1 {
                return Err(Error::data(format!("cluster {i}: arm must be 0 or 1")));
            }
            if !c.covariate.is_finite() {
                return Err(Error::data(format!(
                    "cluster {i}: non-finite cluster covariate"
                )));
            }
            check_dim(&c.x, "CRT")?;
            check_y(&c.y)?;
        }
        self.observed_target()?;
        Ok(())
    }
}

impl DataLayout {
    /// Orbit coordinates in the order the layout's group acts on; the
    /// target is always last.
    pub fn units(&self) -> Result<Vec<Unit>> {
        match self {
            DataLayout::Flat(d) => {
                if d.x.len() != d.y.len() + 1 {
                    return Err(Error::data(
                        "flat layout needs exactly one more covariate than responses",
                    ));
                }
                check_dim(&d.x, "flat")?;
                check_y(&d.y)?;
                Ok(d.x
                    .iter()
                    .enumerate()
                    .map(|(i, x)| Unit {
                        x: x.clone(),
                        c: Vec::new(),
                        y: d.y.get(i).copied(),
                        key: 0,
                    })
                    .collect())
            }
            DataLayout::Hierarchical(d) => {
                let k = d.clusters.len();
                if k == 0 {
                    return Err(Error::data("hierarchical layout has no clusters"));
                }
                let mut out = Vec::new();
                for (i, c) in d.clusters.iter().enumerate() {
                    let expected = if i + 1 == k { c.y.len() + 1 } else { c.y.len() };
                    if c.x.len() != expected {
                        return Err(Error::data(format!(
                            "cluster {i}: expected {expected} covariates, found {}",
                            c.x.len()
                        )));
                    }
                    if c.x.is_empty() {
                        return Err(Error::data(format!("cluster {i} is empty")));
                    }
                    check_y(&c.y)?;
                    for (j, x) in c.x.iter().enumerate() {
                        out.push(Unit {
                            x: x.clone(),
                            c: Vec::new(),
                            y: c.y.get(j).copied(),
                            key: i,
                        });
                    }
                }
                let xs: Vec<Vec<f64>> = out.iter().map(|u| u.x.clone()).collect();
                check_dim(&xs, "hierarchical")?;
                Ok(out)
            }
            DataLayout::Crt(d) => {
                d.validate()?;
                let (_, unobserved) = d.arms()?;
                let pool = d.arm_clusters(unobserved);
                if pool.is_empty() {
                    return Err(Error::data(format!(
                        "no clusters in arm {unobserved}; the counterfactual cannot be calibrated"
                    )));
                }
                let key = unobserved as usize;
                let mut out = Vec::new();
                match d.target {
                    CrtTarget::Individual { cluster, unit } => {
                        for &i in &pool {
                            let c = &d.clusters[i];
                            for (x, y) in c.x.iter().zip(&c.y) {
                                out.push(Unit {
                                    x: x.clone(),
                                    c: vec![c.covariate],
                                    y: Some(*y),
                                    key,
                                });
                            }
                        }
                        let m = &d.clusters[cluster];
                        out.push(Unit {
                            x: m.x[unit].clone(),
                            c: vec![m.covariate],
                            y: None,
                            key,
                        });
                    }
                    CrtTarget::Cluster(m) => {
                        for &i in &pool {
                            let c = &d.clusters[i];
                            out.push(Unit {
                                x: mean_rows(&c.x),
                                c: vec![c.covariate],
                                y: Some(c.y.iter().sum::<f64>() / c.y.len() as f64),
                                key,
                            });
                        }
                        let c = &d.clusters[m];
                        out.push(Unit {
                            x: mean_rows(&c.x),
                            c: vec![c.covariate],
                            y: None,
                            key,
                        });
                    }
                }
                Ok(out)
            }
            DataLayout::Network(d) => {
                let n = d.x.len();
                if n != d.y.len() + 1 {
                    return Err(Error::data(
                        "network layout needs exactly one more node than responses",
                    ));
                }
                check_dim(&d.x, "network")?;
                check_y(&d.y)?;
                let stats = match &d.statistics {
                    Some(s) if s.len() == n => s.clone(),
                    Some(_) => return Err(Error::data("one statistic row per node is required")),
                    None => network_statistics(n, &d.edges, &d.x)?,
                };
                Ok((0..n)
                    .map(|i| Unit {
                        x: d.x[i].clone(),
                        c: stats[i].clone(),
                        y: d.y.get(i).copied(),
                        key: 0,
                    })
                    .collect())
            }
        }
    }

    /// The symmetry group whose stabilizer cosets give the orbit weights.
    pub fn group(&self) -> Result<GroupSpec> {
        Ok(match self {
            DataLayout::Flat(d) => GroupSpec::Symmetric(d.x.len()),
            DataLayout::Network(d) => GroupSpec::Symmetric(d.x.len()),
            DataLayout::Hierarchical(d) => {
                GroupSpec::NestedSymmetric(d.clusters.iter().map(|c| c.x.len()).collect())
            }
            DataLayout::Crt(d) => {
                let (_, unobserved) = d.arms()?;
                let pool = d.arm_clusters(unobserved);
                match d.target {
                    // the target enters as its own singleton cluster
                    CrtTarget::Individual { .. } => GroupSpec::NestedSymmetric(
                        pool.iter()
                            .map(|&i| d.clusters[i].x.len())
                            .chain(std::iter::once(1))
                            .collect(),
                    ),
                    CrtTarget::Cluster(_) => GroupSpec::Symmetric(pool.len() + 1),
                }
            }
        })
    }
}
