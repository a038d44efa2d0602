//! CSV datasets. A row whose `y` cell is empty is a prediction target.
//!
//! | layout       | columns                        |
//! |--------------|--------------------------------|
//! | flat         | `x,y`                          |
//! | hierarchical | `cluster_id,x,y`               |
//! | crt          | `cluster_id,arm,C,x,y`         |
//! | network      | nodes `x,y`, edges `source,target` |

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use csymmpi::symmetry::{
    network_statistics, Cluster, CrtCluster, CrtData, CrtTarget, FlatData, HierarchicalData,
    NetworkData,
};

#[derive(Debug, Deserialize)]
struct FlatRow {
    x: f64,
    y: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct ClusterRow {
    cluster_id: String,
    x: f64,
    y: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct CrtRow {
    cluster_id: String,
    arm: u8,
    #[serde(rename = "C")]
    c: f64,
    x: f64,
    y: f64,
}

#[derive(Debug, Deserialize)]
struct EdgeRow {
    source: usize,
    target: usize,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        // header is line 1
        out.push(row.with_context(|| format!("{}: line {}", path.display(), i + 2))?);
    }
    Ok(out)
}

fn check_finite(path: &Path, values: impl IntoIterator<Item = f64>) -> Result<()> {
    if values.into_iter().any(|v| !v.is_finite()) {
        bail!("{}: non-finite value", path.display());
    }
    Ok(())
}

/// Exchangeable pairs. `targets` holds row indices with a missing `y`.
#[derive(Clone, Debug)]
pub struct FlatTable {
    pub x: Vec<f64>,
    pub y: Vec<Option<f64>>,
}

impl FlatTable {
    pub fn read(path: &Path) -> Result<Self> {
        let rows: Vec<FlatRow> = read_rows(path)?;
        check_finite(
            path,
            rows.iter()
                .map(|r| r.x)
                .chain(rows.iter().filter_map(|r| r.y)),
        )?;
        Ok(FlatTable {
            x: rows.iter().map(|r| r.x).collect(),
            y: rows.iter().map(|r| r.y).collect(),
        })
    }

    pub fn targets(&self) -> Vec<usize> {
        (0..self.y.len()).filter(|&i| self.y[i].is_none()).collect()
    }

    pub fn observed(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.y
            .iter()
            .zip(&self.x)
            .filter_map(|(y, x)| y.map(|y| (vec![*x], y)))
            .unzip()
    }

    /// Calibration pairs plus the covariate of row `target`.
    pub fn layout_for(&self, target: usize) -> FlatData {
        let (mut x, y) = self.observed();
        x.push(vec![self.x[target]]);
        FlatData { x, y }
    }
}

/// Two-layer data grouped by `cluster_id`, in order of first appearance.
#[derive(Clone, Debug)]
pub struct ClusterTable {
    pub ids: Vec<String>,
    /// `(row, x, y)` per cluster.
    pub rows: Vec<Vec<(usize, f64, Option<f64>)>>,
}

impl ClusterTable {
    pub fn read(path: &Path) -> Result<Self> {
        let raw: Vec<ClusterRow> = read_rows(path)?;
        check_finite(
            path,
            raw.iter()
                .map(|r| r.x)
                .chain(raw.iter().filter_map(|r| r.y)),
        )?;
        let mut ids: Vec<String> = Vec::new();
        let mut rows: Vec<Vec<(usize, f64, Option<f64>)>> = Vec::new();
        for (i, r) in raw.into_iter().enumerate() {
            let k = match ids.iter().position(|id| *id == r.cluster_id) {
                Some(k) => k,
                None => {
                    ids.push(r.cluster_id);
                    rows.push(Vec::new());
                    ids.len() - 1
                }
            };
            rows[k].push((i, r.x, r.y));
        }
        Ok(ClusterTable { ids, rows })
    }

    /// `(cluster, row)` for every missing response.
    pub fn targets(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(k, rows)| rows.iter().filter(|r| r.2.is_none()).map(move |r| (k, r.0)))
            .collect();
        out.sort_by_key(|t| t.1);
        out
    }

    pub fn observed(&self, k: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.rows[k]
            .iter()
            .filter_map(|&(_, x, y)| y.map(|y| (vec![x], y)))
            .unzip()
    }

    /// Layout with the target's cluster last, and the order of original
    /// cluster indices it uses. Other clusters without observations are
    /// dropped.
    pub fn layout_for(&self, cluster: usize, row: usize) -> Result<(HierarchicalData, Vec<usize>)> {
        let x_target = self.rows[cluster]
            .iter()
            .find(|r| r.0 == row)
            .map(|r| r.1)
            .with_context(|| format!("row {row} is not in cluster {}", self.ids[cluster]))?;
        let mut clusters = Vec::new();
        let mut order = Vec::new();
        for k in (0..self.ids.len()).filter(|&k| k != cluster) {
            let (x, y) = self.observed(k);
            if y.is_empty() {
                log::warn!(
                    "cluster {} has no observed responses and is skipped",
                    self.ids[k]
                );
                continue;
            }
            clusters.push(Cluster { x, y });
            order.push(k);
        }
        let (mut x, y) = self.observed(cluster);
        x.push(vec![x_target]);
        clusters.push(Cluster { x, y });
        order.push(cluster);
        Ok((HierarchicalData { clusters }, order))
    }
}

/// Cluster-randomized trial data.
#[derive(Clone, Debug)]
pub struct CrtTable {
    pub ids: Vec<String>,
    pub clusters: Vec<CrtCluster>,
}

impl CrtTable {
    pub fn read(path: &Path) -> Result<Self> {
        let raw: Vec<CrtRow> = read_rows(path)?;
        check_finite(path, raw.iter().flat_map(|r| [r.c, r.x, r.y]))?;
        let mut ids: Vec<String> = Vec::new();
        let mut clusters: Vec<CrtCluster> = Vec::new();
        for (i, r) in raw.into_iter().enumerate() {
            if r.arm > 1 {
                bail!("{}: line {}: arm must be 0 or 1", path.display(), i + 2);
            }
            match ids.iter().position(|id| *id == r.cluster_id) {
                Some(k) => {
                    let c = &mut clusters[k];
                    if c.arm != r.arm || c.covariate != r.c {
                        bail!(
                            "{}: line {}: arm and C must be constant within cluster {}",
                            path.display(),
                            i + 2,
                            r.cluster_id
                        );
                    }
                    c.x.push(vec![r.x]);
                    c.y.push(r.y);
                }
                None => {
                    ids.push(r.cluster_id);
                    clusters.push(CrtCluster {
                        arm: r.arm,
                        covariate: r.c,
                        x: vec![vec![r.x]],
                        y: vec![r.y],
                    });
                }
            }
        }
        Ok(CrtTable { ids, clusters })
    }

    /// Parses `ID` (cluster effect) or `ID:ROW` (individual effect; `ROW` is
    /// the 0-based position within the cluster).
    pub fn target(&self, spec: &str) -> Result<CrtTarget> {
        let (id, unit) = match spec.rsplit_once(':') {
            Some((id, row)) => (
                id,
                Some(
                    row.parse::<usize>()
                        .with_context(|| format!("bad row in target '{spec}'"))?,
                ),
            ),
            None => (spec, None),
        };
        let cluster = self
            .ids
            .iter()
            .position(|c| c == id)
            .with_context(|| format!("unknown cluster '{id}'"))?;
        Ok(match unit {
            Some(unit) => {
                if unit >= self.clusters[cluster].y.len() {
                    bail!("cluster '{id}' has no row {unit}");
                }
                CrtTarget::Individual { cluster, unit }
            }
            None => CrtTarget::Cluster(cluster),
        })
    }

    pub fn layout_for(&self, target: CrtTarget) -> CrtData {
        CrtData {
            clusters: self.clusters.clone(),
            target,
        }
    }

    /// Training pairs `((x, C), y)` of one arm.
    pub fn arm_pairs(&self, arm: u8) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for c in self.clusters.iter().filter(|c| c.arm == arm) {
            for (x, y) in c.x.iter().zip(&c.y) {
                xs.push(vec![x[0], c.covariate]);
                ys.push(*y);
            }
        }
        (xs, ys)
    }
}

/// Graph nodes with statistics computed on the full graph, so that missing
/// nodes still count toward their neighbors' degrees.
#[derive(Clone, Debug)]
pub struct NetworkTable {
    pub x: Vec<f64>,
    pub y: Vec<Option<f64>>,
    pub edges: Vec<(usize, usize)>,
    pub statistics: Vec<Vec<f64>>,
}

impl NetworkTable {
    pub fn read(nodes: &Path, edges: &Path) -> Result<Self> {
        let rows: Vec<FlatRow> = read_rows(nodes)?;
        check_finite(
            nodes,
            rows.iter()
                .map(|r| r.x)
                .chain(rows.iter().filter_map(|r| r.y)),
        )?;
        let edges: Vec<(usize, usize)> = read_rows::<EdgeRow>(edges)?
            .into_iter()
            .map(|e| (e.source, e.target))
            .collect();
        let x: Vec<f64> = rows.iter().map(|r| r.x).collect();
        let xv: Vec<Vec<f64>> = x.iter().map(|v| vec![*v]).collect();
        let statistics = network_statistics(x.len(), &edges, &xv)?;
        Ok(NetworkTable {
            y: rows.iter().map(|r| r.y).collect(),
            x,
            edges,
            statistics,
        })
    }

    pub fn targets(&self) -> Vec<usize> {
        (0..self.y.len()).filter(|&i| self.y[i].is_none()).collect()
    }

    /// Observed `((x, c), y)` pairs, the predictor's training input.
    pub fn observed_pairs(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        (0..self.x.len())
            .filter_map(|i| {
                self.y[i].map(|y| {
                    let mut v = vec![self.x[i]];
                    v.extend(&self.statistics[i]);
                    (v, y)
                })
            })
            .unzip()
    }

    pub fn layout_for(&self, target: usize) -> NetworkData {
        let keep: Vec<usize> = (0..self.x.len())
            .filter(|&i| self.y[i].is_some())
            .chain(std::iter::once(target))
            .collect();
        NetworkData {
            x: keep.iter().map(|&i| vec![self.x[i]]).collect(),
            y: keep.iter().filter_map(|&i| self.y[i]).collect(),
            edges: Vec::new(),
            statistics: Some(keep.iter().map(|&i| self.statistics[i].clone()).collect()),
        }
    }
}
