use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use softquant::geometry::DistanceSpec;
use softquant::measures::{center_of_measure, center_of_points, sample, SourceSpec};
use softquant::objective::{
    kl_weights, mean_weighted_cost_on, soft_objective_on, tessellation_probabilities,
    voronoi_weights_on, Divergence,
};
use softquant::oracle::{
    closed_form_value, north_west_corner, optimal_plan, plan_objective, DiscreteInstance,
};
use softquant::sgd::{self, QuantizerState, RunConfig};
use softquant::softmin::{
    conditional_smooth_min, smin_gradient, smin_hessian, smooth_min, softmin, Regularization,
    WeightedValues,
};

fn probability(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Values with strictly positive weights that sum to one.
fn weighted_values(max_len: usize) -> impl Strategy<Value = WeightedValues> {
    (1..=max_len)
        .prop_flat_map(|k| {
            (
                prop::collection::vec(-10.0..10.0f64, k),
                prop::collection::vec(0.01..1.0f64, k),
            )
        })
        .prop_map(|(v, w)| WeightedValues::new(v, probability(w)).unwrap())
}

fn reg() -> impl Strategy<Value = Regularization> {
    (0.05..20.0f64).prop_map(|l| Regularization::new(l).unwrap())
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, d)
}

fn state(m: usize, d: usize) -> impl Strategy<Value = QuantizerState> {
    (
        prop::collection::vec(point(d), m),
        prop::collection::vec(0.01..1.0f64, m),
    )
        .prop_map(|(locs, w)| QuantizerState::new(locs, probability(w)).unwrap())
}

fn weighted_mean(wv: &WeightedValues) -> f64 {
    wv.values()
        .iter()
        .zip(wv.weights())
        .map(|(x, p)| x * p)
        .sum()
}

fn hard_min(wv: &WeightedValues) -> f64 {
    wv.values().iter().copied().fold(f64::INFINITY, f64::min)
}

proptest! {
    #[test]
    fn smooth_min_lies_between_min_and_mean(wv in weighted_values(8), reg in reg()) {
        let s = smooth_min(&wv, reg);
        prop_assert!(s <= weighted_mean(&wv) + 1e-12);
        prop_assert!(hard_min(&wv) <= s + 1e-12);
    }

    #[test]
    fn small_lambda_decreases_to_the_minimum(wv in weighted_values(8)) {
        let mut prev = f64::INFINITY;
        for k in 0..=8 {
            let s = smooth_min(&wv, Regularization::new(10f64.powi(-k)).unwrap());
            prop_assert!(s <= prev + 1e-12);
            prev = s;
        }
        prop_assert!((prev - hard_min(&wv)).abs() < 1e-6);
    }

    #[test]
    fn translation_equivariance(wv in weighted_values(8), reg in reg(), c in -10.0..10.0f64) {
        let shifted = WeightedValues::new(
            wv.values().iter().map(|x| x + c).collect(),
            wv.weights().to_vec(),
        ).unwrap();
        prop_assert!((smooth_min(&shifted, reg) - smooth_min(&wv, reg) - c).abs() <= 1e-12 * 20.0);
    }

    #[test]
    fn positive_homogeneity(wv in weighted_values(8), reg in reg(), gamma in 0.1..10.0f64) {
        let scaled = WeightedValues::new(
            wv.values().iter().map(|x| gamma * x).collect(),
            wv.weights().to_vec(),
        ).unwrap();
        let lhs = smooth_min(&scaled, Regularization::new(gamma * reg.lambda()).unwrap());
        let rhs = gamma * smooth_min(&wv, reg);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0) * 10.0);
    }

    #[test]
    fn nesting_over_partitions(
        (wv, blocks, n_blocks) in weighted_values(8).prop_flat_map(|wv| {
            let k = wv.len();
            (1..=k).prop_flat_map(move |nb| {
                let wv = wv.clone();
                prop::collection::vec(0..nb, k).prop_map(move |mut b| {
                    // every block gets at least one member
                    for (i, slot) in b.iter_mut().enumerate().take(nb) {
                        *slot = i;
                    }
                    (wv.clone(), b, nb)
                })
            })
        }),
        reg in reg(),
    ) {
        let outer = conditional_smooth_min(&wv, &blocks, n_blocks, reg).unwrap();
        prop_assert!((smooth_min(&outer, reg) - smooth_min(&wv, reg)).abs() <= 1e-12 * 20.0);
    }

    #[test]
    fn gradient_matches_central_differences(wv in weighted_values(6), reg in reg()) {
        let g = smin_gradient(&wv, reg).unwrap();
        for j in 0..wv.len() {
            let h = 1e-6 * wv.values()[j].abs().max(1.0);
            let at = |dx: f64| {
                let mut v = wv.values().to_vec();
                v[j] += dx;
                smooth_min(&WeightedValues::new(v, wv.weights().to_vec()).unwrap(), reg)
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1e-2), "{fd} vs {}", g[j]);
        }
    }

    #[test]
    fn hessian_matches_differences_and_is_bounded(wv in weighted_values(6), reg in reg()) {
        let k = wv.len();
        let hess = smin_hessian(&wv, reg).unwrap();
        let h = 1e-6;
        for j in 0..k {
            let grad_at = |dx: f64| {
                let mut v = wv.values().to_vec();
                v[j] += dx;
                smin_gradient(&WeightedValues::new(v, wv.weights().to_vec()).unwrap(), reg).unwrap()
            };
            let (gp, gm) = (grad_at(h), grad_at(-h));
            for i in 0..k {
                prop_assert!((hess[(i, j)] - (gp[i] - gm[i]) / (2.0 * h)).abs() <= 1e-5);
            }
        }
        let scaled: DMatrix<f64> = -reg.lambda() * hess;
        for e in scaled.symmetric_eigen().eigenvalues.iter() {
            prop_assert!((-1e-10..=1.0 + 1e-10).contains(e), "eigenvalue {e}");
        }
    }

    #[test]
    fn softmin_is_normalized(wv in weighted_values(8), lambda in 1e-4..50.0f64) {
        let sigma = softmin(&wv, Regularization::new(lambda).unwrap()).unwrap();
        let total: f64 = sigma.iter().zip(wv.weights()).map(|(s, p)| s * p).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn distance_gradient_matches_differences(
        d in 1usize..=3,
        p in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0]),
        r in prop::sample::select(vec![1.0, 2.0, 3.0]),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
            (0..d).map(|_| rand::Rng::random_range(rng, lo..hi)).collect::<Vec<f64>>()
        };
        let spec = DistanceSpec::new(p, draw(&mut rng, 0.5, 2.0), r).unwrap();
        let y = draw(&mut rng, -2.0, 2.0);
        let xi = draw(&mut rng, -2.0, 2.0);
        prop_assume!(spec.dist(&y, &xi).unwrap() >= 0.1);
        prop_assume!(p > 1.0 || y.iter().zip(&xi).all(|(a, b)| (a - b).abs() > 1e-3));
        let g = spec.dist_power_grad(&y, &xi).unwrap();
        for l in 0..d {
            let h = 1e-7;
            let (mut a, mut b) = (y.clone(), y.clone());
            a[l] += h;
            b[l] -= h;
            let fd = (spec.dist_power(&a, &xi).unwrap() - spec.dist_power(&b, &xi).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[l]).abs() <= 1e-5 * g[l].abs().max(1.0), "{fd} vs {}", g[l]);
        }
    }

    #[test]
    fn distance_is_translation_invariant_and_homogeneous(
        a in point(3), b in point(3), t in point(3), s in -4.0..4.0f64,
        p in 1.0..4.0f64,
    ) {
        let spec = DistanceSpec::new(p, vec![1.0, 0.5, 2.0], 2.0).unwrap();
        let base = spec.dist(&a, &b).unwrap();
        let shift = |x: &[f64]| x.iter().zip(&t).map(|(u, v)| u + v).collect::<Vec<_>>();
        let scale = |x: &[f64]| x.iter().map(|u| s * u).collect::<Vec<_>>();
        prop_assert!((spec.dist(&shift(&a), &shift(&b)).unwrap() - base).abs() <= 1e-12 * base.max(1.0) * 10.0);
        prop_assert!((spec.dist(&scale(&a), &scale(&b)).unwrap() - s.abs() * base).abs() <= 1e-12 * base.max(1.0) * 10.0);
    }

    #[test]
    fn soft_objective_bounds_and_monotonicity(
        st in state(4, 2),
        pts in prop::collection::vec(point(2), 1..40),
        l1 in 0.01..5.0f64,
        l2 in 0.01..5.0f64,
    ) {
        let dspec = DistanceSpec::euclidean(2, 2.0).unwrap();
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        let f = |l: f64| soft_objective_on(&pts, &st, &dspec, l).unwrap().value;
        let upper = mean_weighted_cost_on(&pts, &st, &dspec).unwrap();
        prop_assert!(f(hi) <= upper + 1e-12);
        prop_assert!(f(lo) <= f(hi) + 1e-12);
        prop_assert!((f(1e-6) - f(0.0)).abs() <= 1e-4);
    }

    #[test]
    fn hard_tessellation_is_voronoi(st in state(5, 2), pts in prop::collection::vec(point(2), 1..40)) {
        let dspec = DistanceSpec::euclidean(2, 2.0).unwrap();
        let rows = tessellation_probabilities(&pts, &st, &dspec, 0.0).unwrap();
        let cells = voronoi_weights_on(&pts, &st, &dspec).unwrap();
        for (j, c) in cells.iter().enumerate() {
            let share = rows.iter().map(|r| r[j]).sum::<f64>() / pts.len() as f64;
            prop_assert_eq!(share, *c);
        }
        for row in rows {
            prop_assert!(row.iter().all(|&v| v == 0.0 || v == 1.0));
            prop_assert_eq!(row.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn gibbs_inequality(a in prop::collection::vec(0.01..1.0f64, 1..8), b in prop::collection::vec(0.01..1.0f64, 8)) {
        let q = probability(a.clone());
        let p = probability(b[..a.len()].to_vec());
        let d = kl_weights(&q, &p).unwrap();
        prop_assert!(matches!(d, Divergence::Finite(v) if v >= -1e-12));
        prop_assert!(kl_weights(&q, &q).unwrap().to_f64().abs() <= 1e-12);
    }

    #[test]
    fn weights_stay_on_the_simplex(seed in any::<u64>(), lambda in 0.0..5.0f64, batch in 1usize..4) {
        let mut cfg = RunConfig::new(SourceSpec::Exponential { rate: 1.0 }, 5, lambda).unwrap();
        cfg.batch_size = batch;
        cfg.seed = seed;
        let mut st = QuantizerState::uniform(sample(&cfg.source, 5, seed).unwrap()).unwrap();
        for chunk in sample(&cfg.source, 50 * batch, seed ^ 1).unwrap().chunks(batch) {
            st = sgd::step(&st, chunk, &cfg).unwrap();
            prop_assert!((st.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            prop_assert!(st.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn hard_step_is_the_classical_update(st in state(4, 2), xi in point(2)) {
        let cfg = RunConfig::new(
            SourceSpec::UniformBox { lo: vec![-3.0, -3.0], hi: vec![3.0, 3.0] },
            4,
            0.0,
        ).unwrap();
        let next = sgd::step(&st, std::slice::from_ref(&xi), &cfg).unwrap();
        let costs: Vec<f64> = st.locations().iter()
            .map(|y| y.iter().zip(&xi).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        let nearest = (0..4).fold(0, |best, j| if costs[j] < costs[best] { j } else { best });
        let alpha = cfg.lr.at(st.iteration());
        for j in 0..4 {
            let y = &st.locations()[j];
            let expected: Vec<f64> = if j == nearest {
                y.iter().zip(&xi).map(|(a, b)| a - alpha * 2.0 * (a - b)).collect()
            } else {
                y.clone()
            };
            for (u, v) in next.locations()[j].iter().zip(&expected) {
                prop_assert!((u - v).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_equals_plan_objective(seed in any::<u64>(), lambda in 0.05..5.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = DiscreteInstance::random(&mut rng, 3, 4, lambda).unwrap();
        let plan = optimal_plan(&inst);
        prop_assert!((plan_objective(&plan, &inst).unwrap() - closed_form_value(&inst)).abs() <= 1e-10);
        let nw = north_west_corner(inst.p(), inst.q()).unwrap();
        prop_assert!(plan_objective(&nw, &inst).unwrap() >= closed_form_value(&inst) - 1e-12);
    }
}

#[test]
fn sampling_and_runs_are_deterministic() {
    let spec = SourceSpec::MvNormal {
        mean: vec![1.0, -1.0],
        cov: vec![vec![3.0, 1.0], vec![1.0, 3.0]],
    };
    assert_eq!(
        sample(&spec, 100, 9).unwrap(),
        sample(&spec, 100, 9).unwrap()
    );
    assert_ne!(
        sample(&spec, 100, 9).unwrap(),
        sample(&spec, 100, 10).unwrap()
    );
    let mut cfg = RunConfig::new(spec, 6, 0.5).unwrap();
    cfg.iterations = 2_000;
    cfg.snapshot_every = 500;
    cfg.seed = 4;
    assert_eq!(sgd::run(&cfg).unwrap(), sgd::run(&cfg).unwrap());
}

#[test]
fn center_is_the_mean_for_squared_euclidean() {
    let spec = SourceSpec::Gamma {
        shape: 2.0,
        scale: 2.0,
    };
    let dspec = DistanceSpec::euclidean(1, 2.0).unwrap();
    let pts = sample(&spec, 5_000, 3).unwrap();
    let mean = pts.iter().map(|x| x[0]).sum::<f64>() / pts.len() as f64;
    let c = center_of_measure(&spec, &dspec, 5_000, 3).unwrap();
    assert!((c[0] - mean).abs() <= 1e-10);
    let generic = center_of_points(
        &pts,
        &DistanceSpec::new(1.0, vec![1.0], 2.0).unwrap(),
        spec.scale(),
    )
    .unwrap();
    assert!(
        (generic[0] - mean).abs() <= 1e-3 * spec.scale(),
        "{} vs {mean}",
        generic[0]
    );
}
