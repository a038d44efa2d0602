//! Projected Newton method for `min ½uᵀQu − sᵀu` over a box, `Q` symmetric PSD.
//!
//! Variables that sit (nearly) on a bound with the gradient pushing outward
//! take a diagonally scaled gradient step; the rest take a Newton step on
//! their reduced Hessian. Steps follow the projection arc with an Armijo rule.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub(crate) struct BoxQpResult {
    pub u: Vec<f64>,
    /// `Qu − s` at the solution.
    pub grad: Vec<f64>,
    /// Largest projected-gradient component.
    pub residual: f64,
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
const CD_SWEEPS: usize = 20;

fn clip(v: f64, lo: f64, hi: f64) -> f64 {
    v.max(lo).min(hi)
}

/// Projected gradient residual in the units of `s`.
fn kkt_residual(u: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..u.len() {
        let r = if u[i] <= lower[i] {
            g[i].min(0.0)
        } else if u[i] >= upper[i] {
            g[i].max(0.0)
        } else {
            g[i]
        };
        worst = worst.max(r.abs());
    }
    worst
}

/// Exact minimization along each coordinate in turn. Returns whether any
/// coordinate moved.
fn coordinate_sweeps(
    q: &DMatrix<f64>,
    s: &[f64],
    lower: &[f64],
    upper: &[f64],
    u: &mut [f64],
    sweeps: usize,
) -> bool {
    let n = u.len();
    let uv = DVector::from_column_slice(u);
    let mut g: Vec<f64> = (q * &uv).iter().zip(s).map(|(a, b)| a - b).collect();
    let mut moved = false;
    for _ in 0..sweeps {
        for i in 0..n {
            let qii = q[(i, i)];
            if qii <= 0.0 {
                continue;
            }
            let next = clip(u[i] - g[i] / qii, lower[i], upper[i]);
            let delta = next - u[i];
            if delta != 0.0 {
                u[i] = next;
                for (j, gj) in g.iter_mut().enumerate() {
                    *gj += q[(j, i)] * delta;
                }
                moved = true;
            }
        }
    }
    moved
}

pub(crate) fn minimize_box_qp(
    q: &DMatrix<f64>,
    s: &[f64],
    lower: &[f64],
    upper: &[f64],
    warm: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<BoxQpResult> {
    let n = s.len();
    if q.nrows() != n || q.ncols() != n || lower.len() != n || upper.len() != n {
        return Err(Error::structural("box QP dimensions disagree"));
    }
    if lower.iter().zip(upper).any(|(l, h)| l > h) {
        return Err(Error::structural("box QP has an empty box"));
    }
    let mut u: Vec<f64> = match warm {
        Some(w) if w.len() == n => (0..n).map(|i| clip(w[i], lower[i], upper[i])).collect(),
        _ => (0..n).map(|i| clip(0.0, lower[i], upper[i])).collect(),
    };
    let diag: Vec<f64> = (0..n)
        .map(|i| q[(i, i)].max(1e-12 * (1.0 + q.diagonal().amax())))
        .collect();
    let sv = DVector::from_column_slice(s);
    let mut iterations = 0;
    loop {
        let uv = DVector::from_column_slice(&u);
        let g = q * &uv - &sv;
        let residual = kkt_residual(&u, g.as_slice(), lower, upper);
        if residual <= tol {
            return Ok(BoxQpResult {
                u,
                grad: g.iter().copied().collect(),
                residual,
            });
        }
        if iterations >= max_iter {
            return Err(Error::Solver {
                context: "box-constrained dual QP".into(),
                iterations,
                residual,
            });
        }
        iterations += 1;

        // ε-active set from the scaled projected step length
        let step_len = (0..n)
            .map(|i| (u[i] - clip(u[i] - g[i] / diag[i], lower[i], upper[i])).abs())
            .fold(0.0f64, f64::max);
        let mut free = Vec::with_capacity(n);
        let mut active = vec![false; n];
        for i in 0..n {
            let eps = step_len.min(0.1 * (upper[i] - lower[i]));
            let near_lo = u[i] <= lower[i] + eps && g[i] > 0.0;
            let near_hi = u[i] >= upper[i] - eps && g[i] < 0.0;
            if near_lo || near_hi {
                active[i] = true;
            } else {
                free.push(i);
            }
        }

        let mut d = vec![0.0; n];
        for i in 0..n {
            if active[i] {
                d[i] = -g[i] / diag[i];
            }
        }
        if !free.is_empty() {
            let m = free.len();
            let mut h = DMatrix::from_fn(m, m, |a, b| q[(free[a], free[b])]);
            let rhs = DVector::from_iterator(m, free.iter().map(|&i| -g[i]));
            let ridge = 1e-13 * (1.0 + h.diagonal().amax());
            let mut shift = ridge;
            let chol = loop {
                if let Some(c) = h.clone().cholesky() {
                    break c;
                }
                for a in 0..m {
                    h[(a, a)] += shift;
                }
                shift *= 10.0;
                if shift > 1e6 * (1.0 + h.diagonal().amax()) {
                    return Err(Error::numeric("reduced Hessian is not positive definite"));
                }
            };
            let sol = chol.solve(&rhs);
            for (a, &i) in free.iter().enumerate() {
                d[i] = sol[a];
            }
        }

        let mut beta = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = (0..n)
                .map(|i| clip(u[i] + beta * d[i], lower[i], upper[i]))
                .collect();
            let delta = DVector::from_iterator(n, (0..n).map(|i| trial[i] - u[i]));
            let decrease = -(g.dot(&delta) + 0.5 * delta.dot(&(q * &delta)));
            let mut predicted = 0.0;
            for i in 0..n {
                if active[i] {
                    predicted += g[i] * (u[i] - trial[i]);
                } else {
                    predicted -= beta * g[i] * d[i];
                }
            }
            if decrease >= ARMIJO * predicted && decrease >= 0.0 {
                let moved = delta.amax() > 0.0;
                u = trial;
                accepted = moved;
                break;
            }
            beta *= 0.5;
        }
        if !accepted && coordinate_sweeps(q, s, lower, upper, &mut u, CD_SWEEPS) {
            // ill-conditioned reduced Hessian; exact coordinate steps always descend
            accepted = true;
        }
        if !accepted {
            // no representable descent left; accept if already close
            let uv = DVector::from_column_slice(&u);
            let g = q * &uv - &sv;
            let residual = kkt_residual(&u, g.as_slice(), lower, upper);
            if residual <= tol * 1e3 {
                return Ok(BoxQpResult {
                    u,
                    grad: g.iter().copied().collect(),
                    residual,
                });
            }
            return Err(Error::Solver {
                context: "box-constrained dual QP line search stalled".into(),
                iterations,
                residual,
            });
        }
    }
}
