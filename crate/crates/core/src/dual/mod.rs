//! Dual of the regularized weighted pinball problem and the bisection that
//! turns the test coordinate's dual variable into a score threshold.
//!
//! In scaled variables `u = w ⊙ λ` the dual reads
//! `max sᵀu − R*(u)` over `−α wᵢ ≤ uᵢ ≤ (1−α) wᵢ`.

mod boxqp;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quantile::{
    check_alpha, constant_dual, pinball_objective, solve_linear, weighted_quantile,
};

pub(crate) use boxqp::minimize_box_qp;

/// Slack on `λ̂ₙ < 1 − α` when deciding which side of the boundary a score is on.
pub const BOUNDARY_TOL: f64 = 1e-9;
const MAX_DOUBLINGS: usize = 60;

/// The regularizer's conjugate `R*`.
#[derive(Clone, Debug)]
pub enum ConjugateSpec {
    /// `R ≡ 0` over constant thresholds: `R*(u) = 0` if `Σuᵢ = 0`, else `∞`.
    Zero,
    /// `R ≡ 0` over `⟨θ, φ⟩` with `‖θ‖₂ ≤ radius`; `features` holds `φ(wᵢ)`.
    Linear {
        features: Vec<Vec<f64>>,
        radius: Option<f64>,
    },
    /// `R(t) = λ‖t‖²_K`, giving `R*(u) = uᵀKu/(4λ)`. A finite `radius` adds
    /// the ball `cᵀKc ≤ M²`.
    KernelQuadratic {
        gram: DMatrix<f64>,
        lambda_reg: f64,
        radius: Option<f64>,
    },
}

impl ConjugateSpec {
    /// `R*(a)`; `∞` outside the conjugate's domain.
    pub fn value(&self, a: &[f64]) -> f64 {
        match self {
            ConjugateSpec::Zero => {
                let total: f64 = a.iter().sum();
                if total.abs() <= 1e-9 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ConjugateSpec::Linear { features, radius } => {
                let d = features.first().map_or(0, Vec::len);
                let mut v = vec![0.0; d];
                for (row, ai) in features.iter().zip(a) {
                    for (vk, fk) in v.iter_mut().zip(row) {
                        *vk += ai * fk;
                    }
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                match radius {
                    Some(r) => r * norm,
                    None if norm <= 1e-9 => 0.0,
                    None => f64::INFINITY,
                }
            }
            ConjugateSpec::KernelQuadratic {
                gram, lambda_reg, ..
            } => {
                let av = DVector::from_column_slice(a);
                av.dot(&(gram * &av)) / (4.0 * lambda_reg)
            }
        }
    }

    fn dimension(&self) -> Option<usize> {
        match self {
            ConjugateSpec::Zero => None,
            ConjugateSpec::Linear { features, .. } => Some(features.len()),
            ConjugateSpec::KernelQuadratic { gram, .. } => Some(gram.nrows()),
        }
    }
}

/// Dual problem with the symbolic test score in the last slot.
#[derive(Clone, Debug)]
pub struct DualProblem {
    pub weights: Vec<f64>,
    pub fixed_scores: Vec<f64>,
    pub alpha: f64,
    pub conjugate: ConjugateSpec,
}

impl DualProblem {
    pub fn new(
        weights: Vec<f64>,
        fixed_scores: Vec<f64>,
        alpha: f64,
        conjugate: ConjugateSpec,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        if weights.len() != fixed_scores.len() + 1 {
            return Err(Error::structural(
                "dual problem needs one weight per fixed score plus the test slot",
            ));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::data("dual weights must be positive"));
        }
        if fixed_scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::data("non-finite score"));
        }
        if let Some(d) = conjugate.dimension() {
            if d != weights.len() {
                return Err(Error::structural(format!(
                    "conjugate acts on {d} slots, problem has {}",
                    weights.len()
                )));
            }
        }
        if let ConjugateSpec::KernelQuadratic {
            lambda_reg, radius, ..
        } = &conjugate
        {
            if !(*lambda_reg >= 0.0) || (*lambda_reg == 0.0 && radius.is_none()) {
                return Err(Error::Config(
                    "kernel class needs lambda > 0 or a finite radius".into(),
                ));
            }
        }
        Ok(DualProblem {
            weights,
            fixed_scores,
            alpha,
            conjugate,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn scores(&self, s_test: f64) -> Vec<f64> {
        let mut s = self.fixed_scores.clone();
        s.push(s_test);
        s
    }
}

#[derive(Clone, Debug)]
pub struct DualSolution {
    /// `λ`, one entry per slot, test slot last.
    pub lambda_vec: Vec<f64>,
    /// Dual objective `sᵀ(w⊙λ) − R*(w⊙λ)`.
    pub objective: f64,
    pub lambda_test: f64,
    /// Primal threshold at every slot recovered from the dual.
    pub fitted: Vec<f64>,
    pub primal_objective: f64,
    pub gap: f64,
    pub kkt_residual: f64,
    /// Penalty in force for the kernel class after a finite radius is applied.
    pub effective_lambda: Option<f64>,
}

/// Result of the kernel dual at a fixed penalty search.
#[derive(Clone, Debug)]
pub(crate) struct KernelBoxSolve {
    pub u: Vec<f64>,
    pub fitted: Vec<f64>,
    pub effective_lambda: f64,
    pub residual: f64,
}

fn kernel_tol(scores: &[f64]) -> f64 {
    1e-10 * (1.0 + scores.iter().fold(0.0f64, |a, s| a.max(s.abs())))
}

fn kernel_at(
    gram: &DMatrix<f64>,
    scores: &[f64],
    lower: &[f64],
    upper: &[f64],
    lambda: f64,
    warm: Option<&[f64]>,
) -> Result<KernelBoxSolve> {
    let q = gram / (2.0 * lambda);
    let n = scores.len();
    let r = minimize_box_qp(
        &q,
        scores,
        lower,
        upper,
        warm,
        kernel_tol(scores),
        50 * n + 500,
    )?;
    let fitted = r.grad.iter().zip(scores).map(|(g, s)| g + s).collect();
    Ok(KernelBoxSolve {
        u: r.u,
        fitted,
        effective_lambda: lambda,
        residual: r.residual,
    })
}

fn rkhs_norm_sq(sol: &KernelBoxSolve) -> f64 {
    // cᵀKc = uᵀt / (2λ)
    sol.u
        .iter()
        .zip(&sol.fitted)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / (2.0 * sol.effective_lambda)
}

/// Kernel dual in scaled variables. With a finite `m` the penalty is raised
/// to the smallest `λ' ≥ lambda` whose solution satisfies `cᵀKc ≤ M²`,
/// which is the Lagrangian form of the ball constraint.
pub(crate) fn solve_kernel_box(
    gram: &DMatrix<f64>,
    scores: &[f64],
    weights: &[f64],
    alpha: f64,
    lambda: f64,
    m: Option<f64>,
    warm: Option<&[f64]>,
) -> Result<KernelBoxSolve> {
    let lower: Vec<f64> = weights.iter().map(|w| -alpha * w).collect();
    let upper: Vec<f64> = weights.iter().map(|w| (1.0 - alpha) * w).collect();
    let Some(m) = m else {
        if !(lambda > 0.0) {
            return Err(Error::Config(
                "kernel class needs lambda > 0 or a finite radius".into(),
            ));
        }
        return kernel_at(gram, scores, &lower, &upper, lambda, warm);
    };
    if !(m > 0.0) {
        return Err(Error::Config(format!(
            "RKHS radius must be positive, got {m}"
        )));
    }
    let budget = m * m;
    let mut lo = lambda;
    if lambda > 0.0 {
        let sol = kernel_at(gram, scores, &lower, &upper, lambda, warm)?;
        if rkhs_norm_sq(&sol) <= budget {
            return Ok(sol);
        }
    } else {
        lo = 0.0;
    }
    // the norm is nonincreasing in λ'; bracket then bisect on a log scale
    let mut hi = if lambda > 0.0 { 2.0 * lambda } else { 1e-6 };
    let mut best = kernel_at(gram, scores, &lower, &upper, hi, warm)?;
    let mut guard = 0;
    while rkhs_norm_sq(&best) > budget {
        lo = hi;
        hi *= 4.0;
        best = kernel_at(gram, scores, &lower, &upper, hi, Some(&best.u))?;
        guard += 1;
        if guard > 200 {
            return Err(Error::numeric("could not satisfy the RKHS radius"));
        }
    }
    if lo == 0.0 {
        // shrink toward zero until the ball binds
        let mut probe = hi;
        loop {
            let next = probe / 4.0;
            if next < 1e-14 {
                return Ok(best);
            }
            let sol = kernel_at(gram, scores, &lower, &upper, next, Some(&best.u))?;
            if rkhs_norm_sq(&sol) > budget {
                lo = next;
                hi = probe;
                break;
            }
            best = sol;
            probe = next;
        }
    }
    for _ in 0..200 {
        if hi / lo - 1.0 <= 1e-10 {
            break;
        }
        let mid = (lo * hi).sqrt();
        let sol = kernel_at(gram, scores, &lower, &upper, mid, Some(&best.u))?;
        let norm = rkhs_norm_sq(&sol);
        if norm > budget {
            lo = mid;
        } else {
            hi = mid;
            best = sol;
            if budget - norm <= 1e-9 * budget {
                break;
            }
        }
    }
    Ok(best)
}

/// Maximizes the dual at test score `s_test`.
pub fn solve_dual(problem: &DualProblem, s_test: f64) -> Result<DualSolution> {
    solve_dual_warm(problem, s_test, None)
}

/// As [`solve_dual`], starting the iterative solver from a previous solution.
pub fn solve_dual_warm(
    problem: &DualProblem,
    s_test: f64,
    warm: Option<&DualSolution>,
) -> Result<DualSolution> {
    if !s_test.is_finite() {
        return Err(Error::data("test score must be finite"));
    }
    let scores = problem.scores(s_test);
    let w = &problem.weights;
    let alpha = problem.alpha;
    let n = scores.len();
    let (lambda_vec, fitted, dual_obj, primal, residual, effective) = match &problem.conjugate {
        ConjugateSpec::Zero => {
            let lambda = constant_dual(&scores, w, alpha);
            let t = weighted_quantile(&scores, w, alpha)?;
            let fitted = vec![t; n];
            let dual_obj: f64 = (0..n).map(|i| w[i] * lambda[i] * scores[i]).sum();
            let primal = pinball_objective(&fitted, &scores, w, alpha);
            (lambda, fitted, dual_obj, primal, 0.0, None)
        }
        ConjugateSpec::Linear { features, radius } => {
            let sol = solve_linear(features, &scores, w, alpha, *radius)?;
            let fitted: Vec<f64> = features
                .iter()
                .map(|row| row.iter().zip(&sol.theta).map(|(a, b)| a * b).sum())
                .collect();
            let lambda: Vec<f64> = sol.scaled_dual.iter().zip(w).map(|(u, w)| u / w).collect();
            let u: Vec<f64> = sol.scaled_dual.clone();
            let dual_obj = u.iter().zip(&scores).map(|(a, b)| a * b).sum::<f64>()
                - problem.conjugate.value(&u).min(f64::MAX);
            (lambda, fitted, dual_obj, sol.objective, 0.0, None)
        }
        ConjugateSpec::KernelQuadratic {
            gram,
            lambda_reg,
            radius,
        } => {
            let warm_u: Option<Vec<f64>> =
                warm.map(|d| d.lambda_vec.iter().zip(w).map(|(l, w)| l * w).collect());
            let sol = solve_kernel_box(
                gram,
                &scores,
                w,
                alpha,
                *lambda_reg,
                *radius,
                warm_u.as_deref(),
            )?;
            let quad: f64 = sol
                .u
                .iter()
                .zip(&sol.fitted)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / 2.0;
            let linear: f64 = sol.u.iter().zip(&scores).map(|(a, b)| a * b).sum();
            let primal = pinball_objective(&sol.fitted, &scores, w, alpha) + quad;
            let lambda = sol.u.iter().zip(w).map(|(u, w)| u / w).collect();
            (
                lambda,
                sol.fitted,
                linear - quad,
                primal,
                sol.residual,
                Some(sol.effective_lambda),
            )
        }
    };
    Ok(DualSolution {
        lambda_test: lambda_vec[n - 1],
        lambda_vec,
        objective: dual_obj,
        fitted,
        primal_objective: primal,
        gap: primal - dual_obj,
        kkt_residual: residual,
        effective_lambda: effective,
    })
}

/// `λ̂ₙ(s)` along an ascending grid, warm-started point to point.
pub fn lambda_test_curve(problem: &DualProblem, s_grid: &[f64]) -> Result<Vec<f64>> {
    if s_grid.windows(2).any(|p| p[0] > p[1]) {
        return Err(Error::data("score grid must be sorted ascending"));
    }
    let mut out = Vec::with_capacity(s_grid.len());
    let mut prev: Option<DualSolution> = None;
    for &s in s_grid {
        let sol = solve_dual_warm(problem, s, prev.as_ref())?;
        out.push(sol.lambda_test);
        prev = Some(sol);
    }
    Ok(out)
}

/// Outcome of the threshold search.
#[derive(Clone, Debug, PartialEq)]
pub struct Bisection {
    /// Upper end of the final bracket; `+∞` when unbounded.
    pub threshold: f64,
    /// `λ̂ₙ(s_lo) ≥ 1 − α`: not even the lowest score is accepted.
    pub empty: bool,
    /// `λ̂ₙ` never reached `1 − α` within the doubling budget.
    pub unbounded: bool,
    pub iterations: usize,
    pub lambda_at_boundary: f64,
    pub gap: f64,
}

/// Locates `s* ≈ sup{s : λ̂ₙ(s) < 1 − α}` to within `eps`.
///
/// `s_hi = None` starts from `2·max(fixed scores) + 1` and doubles.
pub fn threshold_by_bisection(
    problem: &DualProblem,
    eps: f64,
    s_lo: f64,
    s_hi: Option<f64>,
) -> Result<Bisection> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("eps must be positive, got {eps}")));
    }
    let target = 1.0 - problem.alpha - BOUNDARY_TOL;
    let below = |sol: &DualSolution| sol.lambda_test < target;
    let lo_sol = solve_dual(problem, s_lo)?;
    if !below(&lo_sol) {
        return Ok(Bisection {
            threshold: s_lo,
            empty: true,
            unbounded: false,
            iterations: 0,
            lambda_at_boundary: lo_sol.lambda_test,
            gap: lo_sol.gap,
        });
    }
    let max_fixed = problem.fixed_scores.iter().fold(0.0f64, |a, s| a.max(*s));
    let mut hi = match s_hi {
        Some(h) if h > s_lo => h,
        Some(h) => {
            return Err(Error::Config(format!(
                "upper bracket {h} must exceed lower bracket {s_lo}"
            )))
        }
        None => (2.0 * max_fixed + 1.0).max(s_lo + 1.0),
    };
    let mut iterations = 0;
    let mut hi_sol = solve_dual_warm(problem, hi, Some(&lo_sol))?;
    let mut doublings = 0;
    while below(&hi_sol) {
        if doublings == MAX_DOUBLINGS {
            return Ok(Bisection {
                threshold: f64::INFINITY,
                empty: false,
                unbounded: true,
                iterations,
                lambda_at_boundary: hi_sol.lambda_test,
                gap: hi_sol.gap,
            });
        }
        hi = s_lo + 2.0 * (hi - s_lo);
        hi_sol = solve_dual_warm(problem, hi, Some(&hi_sol))?;
        doublings += 1;
    }
    let mut lo = s_lo;
    let mut lo_sol = lo_sol;
    while hi - lo > eps {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let sol = solve_dual_warm(problem, mid, Some(&lo_sol))?;
        iterations += 1;
        if below(&sol) {
            lo = mid;
            lo_sol = sol;
        } else {
            hi = mid;
            hi_sol = sol;
        }
    }
    Ok(Bisection {
        threshold: hi,
        empty: false,
        unbounded: false,
        iterations,
        lambda_at_boundary: hi_sol.lambda_test,
        gap: hi_sol.gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    #[test]
    fn single_slot_zero_conjugate() {
        // n = 1: the only feasible λ with Σwλ = 0 is 0; with R ≡ 0 and no
        // balance constraint the linear objective would push to 1−α, which
        // the linear class with φ ≡ 0 reproduces.
        let p = DualProblem::new(
            vec![1.0],
            vec![],
            0.1,
            ConjugateSpec::Linear {
                features: vec![vec![0.0]],
                radius: None,
            },
        )
        .unwrap();
        let sol = solve_dual(&p, 2.0).unwrap();
        assert!((sol.lambda_test - 0.9).abs() < 1e-12);
    }

    #[test]
    fn zero_conjugate_case_structure() {
        let fixed = vec![0.5, 1.5, 0.2, 0.9, 1.1];
        let p = DualProblem::new(uniform(6), fixed.clone(), 0.2, ConjugateSpec::Zero).unwrap();
        let low = solve_dual(&p, 0.0).unwrap();
        assert_eq!(low.lambda_test, -0.2);
        let high = solve_dual(&p, 10.0).unwrap();
        assert_eq!(high.lambda_test, 0.8);
        assert!(low.gap.abs() < 1e-12 && high.gap.abs() < 1e-12);
    }

    #[test]
    fn zero_scores_give_unbounded_region() {
        let p = DualProblem::new(uniform(4), vec![0.0; 3], 0.1, ConjugateSpec::Zero).unwrap();
        let b = threshold_by_bisection(&p, 1e-4, 0.0, None).unwrap();
        assert!(b.unbounded);
        assert!(b.threshold.is_infinite());
    }

    #[test]
    fn identity_gram_two_points() {
        // α = 0.5, K = I, λ = 1: max Σ uᵢsᵢ − ‖u‖²/4 over |uᵢ| ≤ 0.25
        // ⇒ uᵢ = clip(2sᵢ, ±0.25)
        let p = DualProblem::new(
            vec![0.5, 0.5],
            vec![0.1],
            0.5,
            ConjugateSpec::KernelQuadratic {
                gram: DMatrix::identity(2, 2),
                lambda_reg: 1.0,
                radius: None,
            },
        )
        .unwrap();
        let sol = solve_dual(&p, -0.1).unwrap();
        assert!((sol.lambda_vec[0] * 0.5 - 0.2).abs() < 1e-12);
        assert!((sol.lambda_vec[1] * 0.5 + 0.2).abs() < 1e-12);
        let sol = solve_dual(&p, 3.0).unwrap();
        assert!((sol.lambda_test - 0.5).abs() < 1e-15);
        assert!(sol.gap.abs() < 1e-10);
    }
}
