use hartl_core::classical::{
    global_beta, kmm_weights, tradaboost, update_weights, BoostConfig, ClassicalError, Classifier, KmmProblem,
    StumpLearner, WeakLearner,
};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn gaussian_rows(n: usize, d: usize, mean: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(mean, 1.0).unwrap();
    Array2::from_shape_simple_fn((n, d), || dist.sample(&mut rng))
}

/// Quadratic objective written out from scratch.
fn kmm_objective(k: &Array2<f64>, kappa: &Array1<f64>, beta: &[f64]) -> f64 {
    let m = beta.len();
    let mut quad = 0.0;
    for i in 0..m {
        for j in 0..m {
            quad += beta[i] * k[[i, j]] * beta[j];
        }
    }
    0.5 * quad - (0..m).map(|i| kappa[i] * beta[i]).sum::<f64>()
}

#[test]
fn kmm_beats_every_feasible_grid_point() {
    let xs = Array2::from_shape_vec((3, 1), vec![-1.0, 0.0, 2.0]).unwrap();
    let xt = Array2::from_shape_vec((4, 1), vec![1.5, 2.0, 2.5, 0.2]).unwrap();
    let (b, eps) = (2.0, 0.3);
    let p = KmmProblem::new(xs.view(), xt.view(), 1.0, b, Some(eps)).unwrap();
    let (beta, _) = p.solve().unwrap();
    let ours = kmm_objective(&p.k, &p.kappa, &beta);
    assert!((ours - p.objective(&beta)).abs() < 1e-12);

    let feasible = |v: &[f64]| {
        let s: f64 = v.iter().sum();
        v.iter().all(|x| (0.0..=b).contains(x)) && (s - 3.0).abs() <= 3.0 * eps + 1e-12
    };
    let search = |lo: [f64; 3], hi: [f64; 3], step: f64| {
        let mut best = (f64::INFINITY, [0.0; 3]);
        let n: Vec<usize> = (0..3).map(|d| ((hi[d] - lo[d]) / step).round() as usize).collect();
        for i in 0..=n[0] {
            for j in 0..=n[1] {
                for l in 0..=n[2] {
                    let v = [lo[0] + i as f64 * step, lo[1] + j as f64 * step, lo[2] + l as f64 * step];
                    if feasible(&v) {
                        let f = kmm_objective(&p.k, &p.kappa, &v);
                        if f < best.0 {
                            best = (f, v);
                        }
                    }
                }
            }
        }
        best
    };
    let (coarse, at) = search([0.0; 3], [b; 3], 0.01);
    let lo = at.map(|v| (v - 0.02).max(0.0));
    let hi = at.map(|v| (v + 0.02).min(b));
    let (fine, _) = search(lo, hi, 0.001);
    assert!(fine <= coarse);
    assert!(ours <= fine + 1e-9, "solver {ours} worse than grid {fine}");
    assert!(p.is_feasible(&beta));
}

#[test]
fn identical_samples_give_unit_weights() {
    let x = gaussian_rows(40, 2, 0.0, 3);
    let sol = kmm_weights(x.view(), x.view(), None, 10.0, None).unwrap();
    for b in &sol.beta {
        assert!((b - 1.0).abs() < 1e-4, "{b}");
    }
}

#[test]
fn weights_lean_toward_the_target() {
    let xs = gaussian_rows(200, 1, 0.0, 10);
    let xt = gaussian_rows(200, 1, 0.5, 11);
    let sol = kmm_weights(xs.view(), xt.view(), None, 10.0, None).unwrap();
    let mean_where = |keep: fn(f64) -> bool| {
        let picked: Vec<f64> = xs.column(0).iter().zip(&sol.beta).filter(|(x, _)| keep(**x)).map(|(_, b)| *b).collect();
        picked.iter().sum::<f64>() / picked.len() as f64
    };
    let (right, left) = (mean_where(|x| x > 1.0), mean_where(|x| x < -1.0));
    assert!(right > left, "{right} <= {left}");
}

#[test]
fn impossible_band_is_rejected() {
    let x = gaussian_rows(10, 1, 0.0, 1);
    match kmm_weights(x.view(), x.view(), Some(1.0), 0.5, Some(0.1)) {
        Err(ClassicalError::Infeasible { .. }) => {}
        other => panic!("unexpected {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kmm_solution_is_feasible_and_improves_on_uniform(
        seed in 0u64..10_000,
        m in 2usize..25,
        shift in -1.5f64..1.5,
        b in 1.5f64..10.0,
    ) {
        let xs = gaussian_rows(m, 2, 0.0, seed);
        let xt = gaussian_rows(m + 3, 2, shift, seed + 1);
        let p = KmmProblem::new(xs.view(), xt.view(), 1.0, b, None).unwrap();
        let (beta, _) = p.solve().unwrap();
        prop_assert!(p.is_feasible(&beta));
        let uniform = vec![1.0; m];
        prop_assert!(p.objective(&beta) <= p.objective(&uniform) + 1e-9);
    }
}

#[test]
fn single_round_update_matches_hand_computation() {
    let mut w = vec![1.0, 1.0, 1.0, 1.0];
    update_weights(&mut w, 2, &[true, false, true, false], 0.5, 0.25);
    assert_eq!(w, vec![0.5, 1.0, 4.0, 1.0]);

    let mut w = vec![0.2, 0.4, 0.3, 0.1, 0.6];
    update_weights(&mut w, 3, &[false, true, true, true, false], 0.8, 0.5);
    assert_eq!(w, vec![0.2, 0.4 * 0.8, 0.3 * 0.8, 0.1 / 0.5, 0.6]);
}

#[test]
fn single_source_instance_gives_unit_global_beta() {
    for rounds in [1, 5, 20, 1000] {
        assert_eq!(global_beta(1, rounds), 1.0);
    }
    let n: f64 = 100.0;
    assert!((global_beta(100, 20) - 1.0 / (1.0 + (2.0 * n.ln() / 20.0).sqrt())).abs() < 1e-15);
}

proptest! {
    #[test]
    fn update_moves_weights_in_the_right_direction(
        w in prop::collection::vec(0.01f64..10.0, 2..30),
        split in 0usize..30,
        beta in 0.05f64..0.99,
        beta_t in 0.01f64..0.99,
        seed in any::<u64>(),
    ) {
        let n_source = split.min(w.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mistakes: Vec<bool> = (0..w.len()).map(|_| rng.random()).collect();
        let mut next = w.clone();
        update_weights(&mut next, n_source, &mistakes, beta, beta_t);
        for i in 0..w.len() {
            match (i < n_source, mistakes[i]) {
                (_, false) => prop_assert_eq!(next[i], w[i]),
                (true, true) => prop_assert!(next[i] < w[i]),
                (false, true) => prop_assert!(next[i] > w[i]),
            }
        }
    }
}

/// Labels flip where `x[0]` crosses `threshold`; `x[0]` is uniform on `span`.
fn shifted_concept(n: usize, span: (f64, f64), threshold: f64, seed: u64) -> (Array2<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, 2), |(_, j)| if j == 0 { rng.random_range(span.0..span.1) } else { rng.random_range(-3.0..3.0) });
    let y = x.column(0).iter().map(|&v| v > threshold).collect();
    (x, y)
}

fn hits<C: Classifier>(c: &C, x: &Array2<f64>, y: &[bool]) -> f64 {
    x.rows().into_iter().zip(y).filter(|(r, y)| c.predict(*r) == **y).count() as f64 / y.len() as f64
}

#[test]
fn boosting_on_few_target_labels_beats_source_only() {
    let (xs, ys) = shifted_concept(1000, (-3.0, 3.0), 0.0, 1);
    let (xt, yt) = shifted_concept(50, (-1.0, 1.0), 0.15, 2);
    let (xe, ye) = shifted_concept(2000, (-1.0, 1.0), 0.15, 3);
    let model = tradaboost((xs.view(), &ys), (xt.view(), &yt), &BoostConfig { rounds: 20 }, &StumpLearner).unwrap();
    let source_only = StumpLearner.fit(xs.view(), &ys, &vec![1.0 / 1000.0; 1000]);
    let (boosted, plain) = (model.accuracy(xe.view(), &ye), hits(&source_only, &xe, &ye));
    assert!(boosted >= plain + 0.03, "boosted {boosted}, source-only {plain}");
}
