//! Solver results against independent oracles written from the problem
//! definitions, not from the library's solvers.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use csymmpi::quantile::{fit_kernel, fit_linear, pinball_objective};
use csymmpi::region::symmpi_threshold;
use csymmpi::{
    lambda_test_curve, solve_dual, threshold_by_bisection, ConjugateSpec, DualProblem, FeatureMap,
    KernelSpec, OrbitProblem,
};

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| vec![rng.random_range(-1.0..1.0)]).collect()
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

/// Exact coordinate descent on `½uᵀQu − sᵀu` over a box.
fn coordinate_descent(q: &DMatrix<f64>, s: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let n = s.len();
    let mut u = vec![0.0; n];
    for _sweep in 0..200_000 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let g: f64 = (0..n).map(|j| q[(i, j)] * u[j]).sum::<f64>() - s[i];
            let next = (u[i] - g / q[(i, i)]).clamp(lo[i], hi[i]);
            moved = moved.max((next - u[i]).abs());
            u[i] = next;
        }
        if moved < 1e-14 {
            break;
        }
    }
    u
}

/// `t̂` at every slot for the kernel class, via coordinate descent on the dual.
fn kernel_fit_oracle(
    gram: &DMatrix<f64>,
    scores: &[f64],
    w: &[f64],
    alpha: f64,
    lambda: f64,
) -> Vec<f64> {
    let q = gram / (2.0 * lambda);
    let lo: Vec<f64> = w.iter().map(|v| -alpha * v).collect();
    let hi: Vec<f64> = w.iter().map(|v| (1.0 - alpha) * v).collect();
    let u = coordinate_descent(&q, scores, &lo, &hi);
    (&q * DVector::from_vec(u)).iter().copied().collect()
}

/// Largest grid score that the primal condition `s ≤ t̂(s)` accepts, found on
/// a coarse grid and refined on a grid of spacing `step`.
fn primal_grid_threshold(accepts: &dyn Fn(f64) -> bool, upper: f64, step: f64) -> f64 {
    let coarse = 400;
    let mut last = 0.0;
    for k in 0..=coarse {
        let s = upper * k as f64 / coarse as f64;
        if accepts(s) {
            last = s;
        }
    }
    let mut best = last;
    let mut s = last;
    let end = last + upper / coarse as f64;
    while s <= end {
        if accepts(s) {
            best = s;
        }
        s += step;
    }
    best
}

#[test]
fn kernel_bisection_matches_primal_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let eps = 1e-4;
    for case in 0..10 {
        let n = rng.random_range(4..16);
        let alpha = [0.1, 0.2][case % 2];
        let lambda = [0.01, 0.1][(case / 2) % 2];
        let pts = random_points(&mut rng, n + 1);
        let kernel = KernelSpec::Gaussian { length_scale: 0.5 };
        let gram = kernel.gram(&pts);
        let w = random_weights(&mut rng, n + 1);
        let fixed: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let problem = DualProblem::new(
            w.clone(),
            fixed.clone(),
            alpha,
            ConjugateSpec::KernelQuadratic {
                gram: gram.clone(),
                lambda_reg: lambda,
                radius: None,
            },
        )
        .unwrap();
        let b = threshold_by_bisection(&problem, eps, 0.0, None).unwrap();
        let accepts = |s: f64| {
            let mut scores = fixed.clone();
            scores.push(s);
            s <= kernel_fit_oracle(&gram, &scores, &w, alpha, lambda)[n] + 1e-12
        };
        let mut upper = 2.0 * fixed.iter().cloned().fold(0.0, f64::max) + 1.0;
        while accepts(upper) {
            upper *= 2.0;
        }
        let grid = primal_grid_threshold(&accepts, upper, eps / 4.0);
        assert!(!b.unbounded && !b.empty);
        assert!(
            (b.threshold - grid).abs() <= 2.0 * eps,
            "case {case}: bisection {} vs grid {grid}",
            b.threshold
        );
        let sol = solve_dual(&problem, b.threshold).unwrap();
        assert!(
            sol.gap.abs() <= 1e-6 * (1.0 + sol.primal_objective.abs()),
            "gap {}",
            sol.gap
        );
    }
}

#[test]
fn kernel_fit_matches_brute_force_grid_over_coefficients() {
    // three slots, Gaussian kernel L = 1, c ∈ [−2, 2]³ with step 0.01
    let pts = vec![vec![0.0], vec![0.5], vec![1.2]];
    let kernel = KernelSpec::Gaussian { length_scale: 1.0 };
    let gram = kernel.gram(&pts);
    let scores = [0.3, 0.9, 0.5];
    let w = [1.0 / 3.0; 3];
    let (alpha, lambda) = (0.2, 0.1);
    let problem =
        OrbitProblem::new(pts.clone(), vec![0.3, 0.9, 0.0], w.to_vec(), alpha, 2).unwrap();
    let fit = fit_kernel(&problem, 0.5, &kernel, lambda, None).unwrap();
    let mut best = f64::INFINITY;
    let steps = 401;
    for a in 0..steps {
        for b in 0..steps {
            for c in 0..steps {
                let cv = [
                    -2.0 + 0.01 * a as f64,
                    -2.0 + 0.01 * b as f64,
                    -2.0 + 0.01 * c as f64,
                ];
                let mut t = [0.0; 3];
                let mut pen = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        t[i] += gram[(i, j)] * cv[j];
                        pen += cv[i] * gram[(i, j)] * cv[j];
                    }
                }
                let obj = pinball_objective(&t, &scores, &w, alpha) + lambda * pen;
                best = best.min(obj);
            }
        }
    }
    // the grid can only overestimate the true minimum
    assert!(
        fit.objective <= best + 1e-9,
        "{} vs grid {best}",
        fit.objective
    );
    assert!(
        best - fit.objective < 1e-3,
        "{} vs grid {best}",
        fit.objective
    );
}

#[test]
fn linear_fit_matches_vertex_enumeration() {
    // Unconstrained d = 2 quantile regression attains its optimum at a point
    // interpolating two slots; enumerate every pair.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let n = rng.random_range(5..25);
        let pts = random_points(&mut rng, n);
        let scores: Vec<f64> = pts
            .iter()
            .map(|p| 0.5 + 0.3 * p[0] + rng.random_range(0.0..1.0))
            .collect();
        let w = random_weights(&mut rng, n);
        let alpha = 0.15;
        let problem =
            OrbitProblem::new(pts.clone(), scores.clone(), w.clone(), alpha, n - 1).unwrap();
        let fit = fit_linear(&problem, scores[n - 1], &FeatureMap::Affine, None).unwrap();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let (xi, xj) = (pts[i][0], pts[j][0]);
                if (xi - xj).abs() < 1e-12 {
                    continue;
                }
                let slope = (scores[i] - scores[j]) / (xi - xj);
                let icpt = scores[i] - slope * xi;
                let t: Vec<f64> = pts.iter().map(|p| icpt + slope * p[0]).collect();
                best = best.min(pinball_objective(&t, &scores, &w, alpha));
            }
        }
        assert!(
            (fit.objective - best).abs() <= 1e-9 * (1.0 + best),
            "{} vs {best}",
            fit.objective
        );
    }
}

/// Projected subgradient descent with diminishing steps; slow but independent.
#[test]
fn linear_fit_matches_subgradient_descent() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 12;
    let pts = random_points(&mut rng, n);
    let scores: Vec<f64> = pts
        .iter()
        .map(|p| 0.4 + 0.2 * p[0] + rng.random_range(0.0..0.5))
        .collect();
    let w = vec![1.0 / n as f64; n];
    let alpha = 0.1;
    let b_theta = 0.5;
    let problem = OrbitProblem::new(pts.clone(), scores.clone(), w.clone(), alpha, n - 1).unwrap();
    let fit = fit_linear(&problem, scores[n - 1], &FeatureMap::Affine, Some(b_theta)).unwrap();

    let objective = |th: [f64; 2]| {
        let t: Vec<f64> = pts.iter().map(|p| th[0] + th[1] * p[0]).collect();
        pinball_objective(&t, &scores, &w, alpha)
    };
    let mut th = [0.0f64; 2];
    let mut best = objective(th);
    for k in 1..=1_000_000u64 {
        let mut g = [0.0; 2];
        for i in 0..n {
            let t = th[0] + th[1] * pts[i][0];
            let d = if t > scores[i] { alpha } else { alpha - 1.0 };
            g[0] += w[i] * d;
            g[1] += w[i] * d * pts[i][0];
        }
        let step = 0.5 / (k as f64).sqrt();
        th[0] -= step * g[0];
        th[1] -= step * g[1];
        let norm = (th[0] * th[0] + th[1] * th[1]).sqrt();
        if norm > b_theta {
            th[0] *= b_theta / norm;
            th[1] *= b_theta / norm;
        }
        best = best.min(objective(th));
    }
    assert!(fit.objective <= best + 1e-9);
    assert!(best - fit.objective <= 1e-6, "{} vs {best}", fit.objective);
}

#[test]
fn lambda_test_is_monotone_with_saturated_ends() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for case in 0..50 {
        let n = rng.random_range(3..20);
        let alpha = [0.05, 0.1, 0.2][case % 3];
        let pts = random_points(&mut rng, n + 1);
        let w = random_weights(&mut rng, n + 1);
        let fixed: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let conjugate = match case % 3 {
            0 => ConjugateSpec::Zero,
            1 => ConjugateSpec::Linear {
                features: pts.iter().map(|p| vec![1.0, p[0]]).collect(),
                radius: None,
            },
            _ => ConjugateSpec::KernelQuadratic {
                gram: KernelSpec::Gaussian { length_scale: 0.4 }.gram(&pts),
                lambda_reg: 0.05,
                radius: None,
            },
        };
        let problem = DualProblem::new(w, fixed, alpha, conjugate).unwrap();
        let grid: Vec<f64> = (0..20).map(|k| -1.0 + 0.2 * k as f64).collect();
        let curve = lambda_test_curve(&problem, &grid).unwrap();
        for pair in curve.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-6, "case {case}: {curve:?}");
        }
        for &v in &curve {
            assert!((-alpha - 1e-9..=1.0 - alpha + 1e-9).contains(&v));
        }
        // −α strictly below the fitted test value, 1 − α strictly above
        for &s in &grid {
            let sol = solve_dual(&problem, s).unwrap();
            let t = *sol.fitted.last().unwrap();
            if s < t - 1e-6 {
                assert!(
                    (sol.lambda_test + alpha).abs() < 1e-6,
                    "case {case}, s {s}: {}",
                    sol.lambda_test
                );
            } else if s > t + 1e-6 {
                assert!(
                    (sol.lambda_test - (1.0 - alpha)).abs() < 1e-6,
                    "case {case}, s {s}: {}",
                    sol.lambda_test
                );
            }
        }
        assert!((solve_dual(&problem, -50.0).unwrap().lambda_test + alpha).abs() < 1e-6);
    }
}

#[test]
fn constant_class_bisection_matches_split_conformal() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..30 {
        let n = rng.random_range(5..40);
        let fixed: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let alpha = 0.1;
        let k = ((1.0 - alpha) * (n as f64 + 1.0)).ceil() as usize;
        let w = vec![1.0 / (n as f64 + 1.0); n + 1];
        let problem = DualProblem::new(w, fixed.clone(), alpha, ConjugateSpec::Zero).unwrap();
        let b = threshold_by_bisection(&problem, 1e-6, 0.0, None).unwrap();
        if k > n {
            assert!(b.unbounded);
            continue;
        }
        let mut sorted = fixed.clone();
        sorted.sort_by(f64::total_cmp);
        assert!(
            (b.threshold - sorted[k - 1]).abs() <= 1e-6,
            "{} vs {}",
            b.threshold,
            sorted[k - 1]
        );
    }
}

#[test]
fn huge_penalty_collapses_the_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 30;
    let pts = random_points(&mut rng, n + 1);
    let scores: Vec<f64> = (0..=n).map(|_| rng.random_range(0.1..1.0)).collect();
    let p = OrbitProblem::new(pts.clone(), scores.clone(), vec![1.0; n + 1], 0.1, n).unwrap();
    let kernel = KernelSpec::Gaussian { length_scale: 0.3 };
    let fit = fit_kernel(&p, 0.5, &kernel, 1e6, None).unwrap();
    assert!(fit.fitted.iter().all(|t| t.abs() < 1e-3));
    let mut s = p.scores_with(0.5);
    s.iter_mut().for_each(|v| *v *= 0.9 / (n as f64 + 1.0));
    assert!((fit.objective - s.iter().sum::<f64>()).abs() < 1e-3);
    let region = csymmpi::region::csymmpi_region(
        &p,
        &csymmpi::ModelClass::Kernel {
            kernel,
            lambda: 1e6,
            m: None,
        },
        0.0,
        1e-6,
    )
    .unwrap();
    assert!(region.length() <= 1e-3, "length {}", region.length());
    // the exact constant rule is unaffected by penalties
    assert!(symmpi_threshold(&p) > 0.1);
}

#[test]
fn finite_radius_binds_and_is_respected() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 25;
    let pts = random_points(&mut rng, n + 1);
    let scores: Vec<f64> = (0..=n).map(|_| rng.random_range(0.5..1.5)).collect();
    let p = OrbitProblem::new(pts, scores, vec![1.0; n + 1], 0.1, n).unwrap();
    let kernel = KernelSpec::Gaussian { length_scale: 0.3 };
    let free = fit_kernel(&p, 1.0, &kernel, 1e-3, None).unwrap();
    let norm = |f: &csymmpi::Fit| match &f.model {
        csymmpi::ThresholdModel::Kernel {
            coefficients,
            anchors,
            kernel,
            ..
        } => {
            let g = kernel.gram(anchors);
            let c = DVector::from_column_slice(coefficients);
            c.dot(&(g * &c)).sqrt()
        }
        _ => unreachable!(),
    };
    let m = 0.5 * norm(&free);
    let capped = fit_kernel(&p, 1.0, &kernel, 1e-3, Some(m)).unwrap();
    assert!(norm(&capped) <= m * (1.0 + 1e-6), "{} > {m}", norm(&capped));
    assert!(
        norm(&capped) >= m * 0.99,
        "ball should bind: {} vs {m}",
        norm(&capped)
    );
}

/// Dense 1-D Gaussian Grams are numerically singular; the solver must still
/// reach a small gap at every bisection point.
#[test]
fn ill_conditioned_kernel_instances_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..50 {
        let n = rng.random_range(3..=30);
        let lambda = [0.01, 0.1][case % 2];
        let pts = random_points(&mut rng, n + 1);
        let gram = KernelSpec::Gaussian { length_scale: 0.5 }.gram(&pts);
        let w = random_weights(&mut rng, n + 1);
        let fixed: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let problem = DualProblem::new(
            w,
            fixed,
            0.1,
            ConjugateSpec::KernelQuadratic {
                gram,
                lambda_reg: lambda,
                radius: None,
            },
        )
        .unwrap();
        let b = threshold_by_bisection(&problem, 1e-4, 0.0, None)
            .unwrap_or_else(|e| panic!("case {case}: {e}"));
        assert!(b.gap.abs() <= 1e-6, "case {case}: gap {}", b.gap);
    }
}
