use super::lp::BoundedLp;
use super::pinball_objective;
use crate::error::{Error, Result};

const MAX_CUTS: usize = 500;

#[derive(Clone, Debug)]
pub(crate) struct LinearSolve {
    pub theta: Vec<f64>,
    /// Optimal `w ⊙ λ` for the pinball terms.
    pub scaled_dual: Vec<f64>,
    pub objective: f64,
}

/// Minimizes `Σ wᵢ ℓ_α(⟨θ, φᵢ⟩, sᵢ)` over `‖θ‖₂ ≤ radius`.
///
/// The unconstrained problem is solved exactly through its box-constrained
/// dual LP; `θ` is read off the simplex multipliers. A binding ball is handled
/// by tangent cutting planes until the relaxation gap closes.
pub(crate) fn solve_linear(
    phi: &[Vec<f64>],
    scores: &[f64],
    weights: &[f64],
    alpha: f64,
    radius: Option<f64>,
) -> Result<LinearSolve> {
    let n = phi.len();
    let d = phi.first().map_or(0, Vec::len);
    if d == 0 {
        return Err(Error::structural("feature map produced no coordinates"));
    }
    if phi.iter().any(|row| row.len() != d) {
        return Err(Error::structural("feature rows differ in length"));
    }
    if scores.len() != n || weights.len() != n {
        return Err(Error::structural(
            "features, scores and weights differ in length",
        ));
    }
    if let Some(r) = radius {
        if !(r > 0.0) {
            return Err(Error::Config(format!(
                "ball radius must be positive, got {r}"
            )));
        }
    }
    let scale = 1.0 + scores.iter().fold(0.0f64, |a, s| a.max(s.abs()));
    let mut lp = BoundedLp {
        columns: phi.to_vec(),
        rhs: vec![0.0; d],
        cost: scores.to_vec(),
        lower: weights.iter().map(|w| -alpha * w).collect(),
        upper: weights.iter().map(|w| (1.0 - alpha) * w).collect(),
    };
    let max_iter = 50 * (n + d) + 1000;
    let mut cuts = 0;
    loop {
        let sol = lp.maximize(1e-11 * scale, max_iter)?;
        let theta = sol.duals.clone();
        let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        let fitted = |th: &[f64]| -> Vec<f64> {
            phi.iter()
                .map(|row| row.iter().zip(th).map(|(a, b)| a * b).sum())
                .collect()
        };
        match radius {
            Some(r) if norm > r * (1.0 + 1e-12) => {
                let lower_bound = sol.objective;
                let scaled: Vec<f64> = theta.iter().map(|v| v * r / norm).collect();
                let upper_bound = pinball_objective(&fitted(&scaled), scores, weights, alpha);
                if upper_bound - lower_bound <= 1e-10 * (1.0 + upper_bound.abs()) {
                    return Ok(LinearSolve {
                        theta: scaled,
                        scaled_dual: sol.x[..n].to_vec(),
                        objective: upper_bound,
                    });
                }
                if cuts >= MAX_CUTS {
                    return Err(Error::Solver {
                        context: "ball-constrained linear quantile regression".into(),
                        iterations: cuts,
                        residual: upper_bound - lower_bound,
                    });
                }
                // a·θ ≤ r enters the dual as a column −a with cost −r
                lp.columns.push(theta.iter().map(|v| -v / norm).collect());
                lp.cost.push(-r);
                lp.lower.push(0.0);
                lp.upper.push(f64::INFINITY);
                cuts += 1;
            }
            _ => {
                let objective = pinball_objective(&fitted(&theta), scores, weights, alpha);
                return Ok(LinearSolve {
                    theta,
                    scaled_dual: sol.x[..n].to_vec(),
                    objective,
                });
            }
        }
    }
}
