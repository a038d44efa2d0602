use crate::error::{Error, Result};

/// Label-equivariant node statistics `(degree, mean neighbor covariate…)`.
///
/// Isolated nodes get neighbor means of 0.
pub fn network_statistics(
    n_nodes: usize,
    edges: &[(usize, usize)],
    x: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    if x.len() != n_nodes {
        return Err(Error::structural("one covariate row per node is required"));
    }
    let d = x.first().map_or(0, Vec::len);
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for &(a, b) in edges {
        if a >= n_nodes || b >= n_nodes {
            return Err(Error::data(format!(
                "edge ({a}, {b}) references a missing node"
            )));
        }
        if a == b {
            continue;
        }
        neighbors[a].push(b);
        neighbors[b].push(a);
    }
    for list in &mut neighbors {
        list.sort_unstable();
        list.dedup();
    }
    let mut isolated = 0;
    let stats = (0..n_nodes)
        .map(|i| {
            let nb = &neighbors[i];
            let mut row = vec![nb.len() as f64];
            if nb.is_empty() {
                isolated += 1;
                row.extend(std::iter::repeat_n(0.0, d));
            } else {
                row.extend(
                    (0..d).map(|k| nb.iter().map(|&j| x[j][k]).sum::<f64>() / nb.len() as f64),
                );
            }
            row
        })
        .collect();
    if isolated > 0 {
        log::warn!("{isolated} isolated node(s): neighbor averages set to 0");
    }
    Ok(stats)
}
