use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use csymmpi::applications::{crt_individual_effect, split_conditional};
use csymmpi::harness::{gen_two_layer, GeneratorConfig};
use csymmpi::region::{projected_region, sampled_region};
use csymmpi::symmetry::{Cluster, CrtCluster, CrtData, CrtTarget, FlatData, HierarchicalData};
use csymmpi::{
    DataLayout, KernelSpec, LinearPredictor, ModelClass, Predictor, Projection, ScoreTransform,
};

#[derive(Debug)]
struct Affine2 {
    a: f64,
    bx: f64,
    bc: f64,
}

impl Predictor for Affine2 {
    fn predict(&self, w: &[f64]) -> f64 {
        self.a + self.bx * w[0] + self.bc * w[1]
    }
}

fn arc(a: f64, bx: f64, bc: f64) -> Arc<dyn Predictor> {
    Arc::new(Affine2 { a, bx, bc })
}

fn kernel_class() -> ModelClass {
    ModelClass::Kernel {
        kernel: KernelSpec::Gaussian { length_scale: 0.5 },
        lambda: 0.01,
        m: None,
    }
}

fn crt_world(seed: u64) -> CrtData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let clusters = (0..8)
        .map(|i| {
            let arm = (i % 2) as u8;
            let c: f64 = rng.random_range(-1.0..1.0);
            let n = rng.random_range(2..5);
            let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
            let y = x
                .iter()
                .map(|v| {
                    v[0] + 0.5 * c + f64::from(arm) * (1.0 + 0.5 * v[0]) + noise.sample(&mut rng)
                })
                .collect();
            CrtCluster {
                arm,
                covariate: c,
                x,
                y,
            }
        })
        .collect();
    CrtData {
        clusters,
        target: CrtTarget::Individual {
            cluster: 0,
            unit: 1,
        },
    }
}

fn mu() -> [Arc<dyn Predictor>; 2] {
    [arc(0.0, 1.0, 0.5), arc(1.0, 1.5, 0.5)]
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn crt_effect_formula_matches_counterfactual() {
    for target_cluster in [0, 1] {
        let mut data = crt_world(3);
        data.target = CrtTarget::Individual {
            cluster: target_cluster,
            unit: 0,
        };
        let r = crt_individual_effect(&data, mu(), &kernel_class(), 0.1, 1e-6).unwrap();
        let y = data.clusters[target_cluster].y[0];
        let c = &r.counterfactual_interval;
        if r.observed_arm == 0 {
            assert!(close(r.interval.lo, c.lo - y) && close(r.interval.hi, c.hi - y));
        } else {
            assert!(close(r.interval.lo, y - c.hi) && close(r.interval.hi, y - c.lo));
        }
        assert!(r.interval.lo <= r.interval.hi);
    }
}

/// Relabelling arms, negating outcomes, or both, acts on the effect
/// interval as `Δ ↦ −Δ`, `Δ ↦ −Δ` and `Δ ↦ Δ`.
#[test]
fn crt_reflections() {
    let data = crt_world(5);
    let class = kernel_class();
    let base = crt_individual_effect(&data, mu(), &class, 0.1, 1e-7)
        .unwrap()
        .interval;

    let mut swapped = data.clone();
    for c in &mut swapped.clusters {
        c.arm = 1 - c.arm;
    }
    let [m0, m1] = mu();
    let s = crt_individual_effect(&swapped, [m1.clone(), m0.clone()], &class, 0.1, 1e-7)
        .unwrap()
        .interval;
    assert!(
        (s.lo + base.hi).abs() < 1e-5 && (s.hi + base.lo).abs() < 1e-5,
        "{s:?} vs {base:?}"
    );

    let mut negated = data.clone();
    for c in &mut negated.clusters {
        c.y.iter_mut().for_each(|v| *v = -*v);
    }
    let neg_mu = [arc(-0.0, -1.0, -0.5), arc(-1.0, -1.5, -0.5)];
    let n = crt_individual_effect(&negated, neg_mu.clone(), &class, 0.1, 1e-7)
        .unwrap()
        .interval;
    assert!(
        (n.lo + base.hi).abs() < 1e-5 && (n.hi + base.lo).abs() < 1e-5,
        "{n:?} vs {base:?}"
    );

    let mut both = negated.clone();
    for c in &mut both.clusters {
        c.arm = 1 - c.arm;
    }
    let [n0, n1] = neg_mu;
    let b = crt_individual_effect(&both, [n1, n0], &class, 0.1, 1e-7)
        .unwrap()
        .interval;
    assert!((b.lo - base.lo).abs() < 1e-5 && (b.hi - base.hi).abs() < 1e-5);
}

#[test]
fn crt_rejects_mismatched_target_kind() {
    let mut data = crt_world(1);
    data.target = CrtTarget::Cluster(0);
    assert!(crt_individual_effect(&data, mu(), &ModelClass::Constant, 0.1, 1e-4).is_err());
}

/// `Y = x·ε` with a calibration set fixed across the grid: the kernel
/// interval widens with `|x|`.
#[test]
fn heteroskedastic_lengths_grow_with_x() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 200;
    let noise = Normal::new(0.0, 1.0).unwrap();
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| x * noise.sample(&mut rng)).collect();
    let class = ModelClass::Kernel {
        kernel: KernelSpec::Gaussian { length_scale: 0.2 },
        lambda: 0.005,
        m: None,
    };
    let grid = [0.05, 0.25, 0.5, 0.75, 0.95];
    let lengths: Vec<f64> = grid
        .iter()
        .map(|&x0| {
            let mut x: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
            x.push(vec![x0]);
            let data = FlatData { x, y: ys.clone() };
            split_conditional(
                &data,
                Arc::new(LinearPredictor::constant(0.0)),
                &class,
                0.1,
                1e-5,
            )
            .unwrap()
            .length()
        })
        .collect();
    for w in lengths.windows(2) {
        assert!(w[1] > w[0] * 0.9, "{lengths:?}");
    }
    assert!(lengths[4] > 3.0 * lengths[0], "{lengths:?}");
}

fn sampled_fixture() -> (DataLayout, ScoreTransform) {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let sizes = [4, 5, 6, 6];
    let clusters: Vec<Cluster> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let m = if i + 1 == sizes.len() { n - 1 } else { n };
            let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-0.5..0.5)]).collect();
            let y = (0..m)
                .map(|j| x[j][0] * rng.random_range(-1.0..1.0))
                .collect();
            Cluster { x, y }
        })
        .collect();
    (
        DataLayout::Hierarchical(HierarchicalData { clusters }),
        ScoreTransform::shared(Arc::new(LinearPredictor::constant(0.0))),
    )
}

/// Thresholds from Haar draws approach the exact collapsed threshold.
#[test]
fn sampled_threshold_converges() {
    let (layout, transform) = sampled_fixture();
    let class = kernel_class();
    let group = layout.group().unwrap();
    let eta = Projection::TestCovariate;
    let exact = projected_region(&layout, &transform, &eta, &class, 0.1, 1e-6)
        .unwrap()
        .threshold;
    let median_err = |draws: usize| {
        let mut e: Vec<f64> = (0..15)
            .map(|seed| {
                let t = sampled_region(
                    &layout, &transform, &eta, &class, &group, draws, seed, 0.1, 1e-6,
                )
                .unwrap()
                .threshold;
                (t - exact).abs()
            })
            .collect();
        e.sort_by(f64::total_cmp);
        e[e.len() / 2]
    };
    let coarse = median_err(100);
    let fine = median_err(5000);
    assert!(
        fine <= 0.02,
        "median error {fine} at 5000 draws (exact {exact})"
    );
    assert!(fine <= coarse + 1e-12, "{coarse} -> {fine}");
}

/// `Y/X = θ + ε` has second moment `σ_θ² + σ_ε²`.
#[test]
fn generator_moments() {
    let g = GeneratorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut sum = 0.0;
    let mut count = 0usize;
    while count < 100_000 {
        let s = gen_two_layer(&g, &mut rng).unwrap();
        for (cx, cy) in s.x.iter().zip(&s.y) {
            for (&x, &y) in cx.iter().zip(cy) {
                if x.abs() > 1e-3 {
                    sum += (y / x).powi(2);
                    count += 1;
                }
            }
        }
    }
    let expected = g.sigma_theta.powi(2) + g.sigma_eps.powi(2);
    let m = sum / count as f64;
    assert!((m - expected).abs() <= 0.1 * expected, "{m} vs {expected}");
}
