use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use csymmpi::group::DEFAULT_ENUMERATION_CAP;
use csymmpi::quantile::pinball;
use csymmpi::region::{csymmpi_region, projected_region, symmpi_threshold};
use csymmpi::symmetry::{
    build_orbit_problem, network_statistics, Cluster, FlatData, HierarchicalData, NetworkData,
};
use csymmpi::{
    DataLayout, FeatureMap, KernelSpec, LinearPredictor, ModelClass, Predictor, Projection,
    ScoreTransform,
};

fn shared(intercept: f64, slope: f64) -> ScoreTransform {
    ScoreTransform::shared(Arc::new(LinearPredictor {
        intercept,
        slope: vec![slope],
    }))
}

/// Cluster sizes counted with the target included in the last cluster.
fn hierarchical(sizes: &[usize], rng: &mut ChaCha8Rng) -> HierarchicalData {
    let k = sizes.len();
    let clusters = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-0.5..0.5)]).collect();
            let observed = if i + 1 == k { n - 1 } else { n };
            let y = (0..observed)
                .map(|j| 0.7 * x[j][0] + rng.random_range(-1.0..1.0))
                .collect();
            Cluster { x, y }
        })
        .collect();
    HierarchicalData { clusters }
}

fn random_threshold(rng: &mut ChaCha8Rng) -> impl Fn(&[f64]) -> f64 {
    let (a, b, c) = (
        rng.random_range(-1.0..1.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-1.0..1.0),
    );
    move |w: &[f64]| a + b * w[0] + c * (3.0 * w[0]).sin()
}

/// `(1/|G|) Σ_g ℓ(t(η(ρ(g)z)), ψ(ρ(g)V(z)))` by walking every group element.
fn enumerated_objective(
    layout: &DataLayout,
    transform: &ScoreTransform,
    t: &dyn Fn(&[f64]) -> f64,
    s_test: f64,
    alpha: f64,
) -> f64 {
    let units = layout.units().unwrap();
    let group = layout.group().unwrap();
    let elems = group.enumerate(DEFAULT_ENUMERATION_CAP).unwrap();
    let idx: Vec<usize> = (0..units.len()).collect();
    let mut total = 0.0;
    for g in &elems {
        let moved = g.act(&idx).unwrap();
        let j = *moved.last().unwrap();
        let s = transform.score(&units[j]).unwrap().unwrap_or(s_test);
        total += pinball(t(&units[j].x), s, alpha);
    }
    total / elems.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn collapse_matches_full_enumeration(
        sizes in prop::collection::vec(1usize..4, 1..4),
        seed in any::<u64>(),
        s_test in 0.0f64..2.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = DataLayout::Hierarchical(hierarchical(&sizes, &mut rng));
        let transform = shared(0.1, 0.5);
        let problem = build_orbit_problem(&layout, &transform, &Projection::TestCovariate, 0.1).unwrap();
        let t = random_threshold(&mut rng);
        let collapsed = problem.objective(&t, s_test);
        let brute = enumerated_objective(&layout, &transform, &t, s_test, 0.1);
        prop_assert!((collapsed - brute).abs() <= 1e-10 * brute.abs().max(1e-300), "{collapsed} vs {brute}");
    }

    #[test]
    fn orbit_weights_are_normalized(sizes in prop::collection::vec(1usize..6, 1..5), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = DataLayout::Hierarchical(hierarchical(&sizes, &mut rng));
        let p = build_orbit_problem(&layout, &shared(0.0, 1.0), &Projection::TestCovariate, 0.2).unwrap();
        prop_assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.weights.iter().all(|w| *w > 0.0));
        // (1/K)(1/nᵢ) per individual
        let k = sizes.len() as f64;
        let mut slot = 0;
        for &n in &sizes {
            for _ in 0..n {
                prop_assert!((p.weights[slot] - 1.0 / (k * n as f64)).abs() < 1e-12);
                slot += 1;
            }
        }
    }

    /// `V(ρ(g)z) = ρ(g)V(z)` for Haar draws of the layout's group.
    #[test]
    fn scores_are_equivariant(sizes in prop::collection::vec(1usize..5, 1..4), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = hierarchical(&sizes, &mut rng);
        let layout = DataLayout::Hierarchical(data);
        let predictors: Vec<Arc<dyn Predictor>> = (0..sizes.len())
            .map(|i| Arc::new(LinearPredictor { intercept: i as f64 * 0.1, slope: vec![1.0 - i as f64 * 0.2] }) as Arc<dyn Predictor>)
            .collect();
        let transform = ScoreTransform::per_key(predictors).unwrap();
        let units = layout.units().unwrap();
        let scores: Vec<Option<f64>> = units.iter().map(|u| transform.score(u).unwrap()).collect();
        for g in layout.group().unwrap().haar_sample(&mut rng, 20) {
            let moved_units = g.act(&units).unwrap();
            let lhs: Vec<Option<f64>> = moved_units.iter().map(|u| transform.score(u).unwrap()).collect();
            prop_assert_eq!(lhs, g.act(&scores).unwrap());
        }
    }

    /// Reordering calibration points leaves every threshold unchanged.
    #[test]
    fn flat_threshold_ignores_calibration_order(n in 2usize..25, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..=n).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let y: Vec<f64> = (0..n).map(|i| x[i][0] + rng.random_range(-1.0..1.0)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let mut x2: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
        x2.push(x[n].clone());
        let y2: Vec<f64> = order.iter().map(|&i| y[i]).collect();
        let t = shared(0.0, 1.0);
        let class = ModelClass::Linear { feature_map: FeatureMap::Affine, b_theta: None };
        let a = projected_region(&DataLayout::Flat(FlatData { x, y }), &t, &Projection::TestCovariate, &class, 0.2, 1e-6).unwrap();
        let b = projected_region(&DataLayout::Flat(FlatData { x: x2, y: y2 }), &t, &Projection::TestCovariate, &class, 0.2, 1e-6).unwrap();
        prop_assert!((a.threshold - b.threshold).abs() <= 1e-9 || a.threshold == b.threshold);
    }
}

#[test]
fn collapse_oracle_on_the_two_named_layouts() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for sizes in [[2usize, 2], [2, 3]] {
        let layout = DataLayout::Hierarchical(hierarchical(&sizes, &mut rng));
        let order = layout
            .group()
            .unwrap()
            .enumerate(DEFAULT_ENUMERATION_CAP)
            .unwrap()
            .len();
        assert_eq!(order, if sizes == [2, 2] { 8 } else { 24 });
        let transform = shared(0.0, 0.3);
        let p = build_orbit_problem(&layout, &transform, &Projection::TestCovariate, 0.1).unwrap();
        assert_eq!(p.len(), sizes.iter().sum::<usize>());
        for _ in 0..10 {
            let t = random_threshold(&mut rng);
            let s_test = rng.random_range(0.0..1.5);
            let a = p.objective(&t, s_test);
            let b = enumerated_objective(&layout, &transform, &t, s_test, 0.1);
            assert!((a - b).abs() <= 1e-10 * b.abs(), "{sizes:?}: {a} vs {b}");
        }
    }
    // weights (1/4, 1/4, 1/6, 1/6, 1/6) for sizes (2, 3)
    let layout = DataLayout::Hierarchical(hierarchical(&[2, 3], &mut rng));
    let p =
        build_orbit_problem(&layout, &shared(0.0, 1.0), &Projection::TestCovariate, 0.1).unwrap();
    let expected = [0.25, 0.25, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
    for (w, e) in p.weights.iter().zip(expected) {
        assert!((w - e).abs() < 1e-15);
    }
}

#[test]
fn single_cluster_matches_flat() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = hierarchical(&[30], &mut rng);
    let flat = FlatData {
        x: data.clusters[0].x.clone(),
        y: data.clusters[0].y.clone(),
    };
    let t = shared(0.05, 0.7);
    for class in [
        ModelClass::Constant,
        ModelClass::Kernel {
            kernel: KernelSpec::Gaussian { length_scale: 0.2 },
            lambda: 0.01,
            m: None,
        },
    ] {
        let a = projected_region(
            &DataLayout::Hierarchical(data.clone()),
            &t,
            &Projection::TestCovariate,
            &class,
            0.1,
            1e-9,
        )
        .unwrap();
        let b = projected_region(
            &DataLayout::Flat(flat.clone()),
            &t,
            &Projection::TestCovariate,
            &class,
            0.1,
            1e-9,
        )
        .unwrap();
        assert!(
            (a.threshold - b.threshold).abs() < 1e-8,
            "{class:?}: {} vs {}",
            a.threshold,
            b.threshold
        );
    }
}

/// Hierarchical SymmPI threshold against a brute-force scan of the
/// augmented weighted quantile over a fine grid of test scores.
#[test]
fn hierarchical_symmpi_matches_augmented_quantile_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let layout = DataLayout::Hierarchical(hierarchical(&[2, 3], &mut rng));
    let transform = shared(0.0, 0.7);
    let p = build_orbit_problem(&layout, &transform, &Projection::TestCovariate, 0.3).unwrap();
    let v = symmpi_threshold(&p);
    // s is covered when s ≤ weighted (1−α)-quantile of the augmented scores
    let covered = |s: f64| {
        let scores = p.scores_with(s);
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        let mut cum = 0.0;
        for &i in &order {
            cum += p.weights[i];
            if cum >= 0.7 - 1e-12 {
                return s <= scores[i];
            }
        }
        true
    };
    let mut last = f64::NEG_INFINITY;
    for k in 0..=40_000 {
        let s = k as f64 * 1e-4;
        if covered(s) {
            last = s;
        }
    }
    assert!((last - v).abs() <= 1e-4, "scan {last} vs exact {v}");
}

fn relabel(net: &NetworkData, perm: &[usize]) -> NetworkData {
    // perm[i] is the new label of node i; the target keeps the last label
    let n = net.x.len();
    let mut x = vec![Vec::new(); n];
    let mut y = vec![0.0; n - 1];
    for i in 0..n {
        x[perm[i]] = net.x[i].clone();
        if i < n - 1 {
            y[perm[i]] = net.y[i];
        }
    }
    NetworkData {
        x,
        y,
        edges: net.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect(),
        statistics: None,
    }
}

#[test]
fn network_statistics_and_threshold_are_label_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let n = rng.random_range(5..30);
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random_bool(0.2) {
                    edges.push((a, b));
                }
            }
        }
        let y: Vec<f64> = (0..n - 1)
            .map(|i| x[i][0] + rng.random_range(-0.5..0.5))
            .collect();
        let net = NetworkData {
            x: x.clone(),
            y,
            edges: edges.clone(),
            statistics: None,
        };
        let mut perm: Vec<usize> = (0..n - 1).collect();
        for i in (1..n - 1).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        perm.push(n - 1);
        let moved = relabel(&net, &perm);

        let s0 = network_statistics(n, &edges, &x).unwrap();
        let s1 = network_statistics(n, &moved.edges, &moved.x).unwrap();
        for i in 0..n {
            assert_eq!(s0[i], s1[perm[i]]);
        }

        let t = ScoreTransform::shared(Arc::new(LinearPredictor {
            intercept: 0.0,
            slope: vec![1.0, 0.0, 0.2],
        }));
        let class = ModelClass::Kernel {
            kernel: KernelSpec::Gaussian { length_scale: 0.5 },
            lambda: 0.05,
            m: None,
        };
        let a = projected_region(
            &DataLayout::Network(net),
            &t,
            &Projection::CovariatePair,
            &class,
            0.2,
            1e-8,
        )
        .unwrap();
        let b = projected_region(
            &DataLayout::Network(moved),
            &t,
            &Projection::CovariatePair,
            &class,
            0.2,
            1e-8,
        )
        .unwrap();
        assert!(
            (a.threshold - b.threshold).abs() < 1e-7,
            "{} vs {}",
            a.threshold,
            b.threshold
        );
        assert!((a.center - b.center).abs() < 1e-12);
    }
}

/// Smaller α gives a superset interval (same data, same class).
#[test]
fn regions_are_nested_in_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let layout = DataLayout::Hierarchical(hierarchical(&[20, 25, 15], &mut rng));
    let t = shared(0.0, 0.7);
    let class = ModelClass::Kernel {
        kernel: KernelSpec::Gaussian { length_scale: 0.2 },
        lambda: 0.02,
        m: None,
    };
    let p = build_orbit_problem(&layout, &t, &Projection::TestCovariate, 0.05).unwrap();
    let mut prev = f64::INFINITY;
    for alpha in [0.05, 0.1, 0.2, 0.3, 0.5] {
        let r = csymmpi_region(&p.with_alpha(alpha).unwrap(), &class, 0.0, 1e-7).unwrap();
        assert!(
            r.threshold <= prev + 2e-7,
            "alpha {alpha}: {} > {prev}",
            r.threshold
        );
        prev = r.threshold;
    }
}
