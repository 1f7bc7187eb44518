use dogan_core::data::{mode_coverage, sample_real, GaussianMixtureConfig, Prng};
use dogan_core::do_loop::run_do_finite;
use dogan_core::meta_game::{
    expected_utility, exploitability, prune, solve_zero_sum, MixedStrategy, PayoffMatrix,
};
use dogan_core::neural::{d_loss, ewc_penalty, Activation, Arch, EwcState, Mlp};
use ndarray::Array2;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn matrix(max: usize) -> impl Strategy<Value = PayoffMatrix<f64>> {
    (1..=max, 1..=max).prop_flat_map(|(m, n)| {
        proptest::collection::vec(-10.0f64..10.0, m * n).prop_map(move |v| {
            PayoffMatrix::new(Array2::from_shape_vec((m, n), v).unwrap()).unwrap()
        })
    })
}

fn probabilities(len: usize) -> impl Strategy<Value = MixedStrategy<f64>> {
    proptest::collection::vec(0.01f64..1.0, len)
        .prop_map(|w| MixedStrategy::normalized(w).unwrap())
}

proptest! {
    #[test]
    fn lp_solution_is_a_valid_equilibrium(u in matrix(8)) {
        let sol = solve_zero_sum(&u).unwrap();
        for sigma in [&sol.sigma_g, &sol.sigma_d] {
            prop_assert!(sigma.probs().iter().all(|&p| p >= 0.0));
            prop_assert!((sigma.probs().sum() - 1.0).abs() <= 1e-9);
        }
        prop_assert_eq!((sol.sigma_g.len(), sol.sigma_d.len()), u.dim());
        prop_assert!(exploitability(&u, &sol.sigma_g, &sol.sigma_d).unwrap() <= 1e-6);
        prop_assert!((sol.value - expected_utility(&u, &sol.sigma_g, &sol.sigma_d).unwrap()).abs() <= 1e-8);
        prop_assert!((sol.row_value(&u) - sol.col_value(&u)).abs() <= 1e-8);
    }

    #[test]
    fn prune_then_augment_restores_the_matrix(
        u in matrix(6).prop_filter("at least 3x3", |u| u.rows() >= 3 && u.cols() >= 3),
        seed in any::<u64>(),
    ) {
        let (m, n) = u.dim();
        let mut rng = Prng::seed_from_u64(seed);
        let weights = |len: usize, rng: &mut Prng| {
            let mut w: Vec<f64> = (1..=len).map(|k| k as f64).collect();
            w.shuffle(rng);
            MixedStrategy::normalized(w).unwrap()
        };
        let (sg, sd) = (weights(m, &mut rng), weights(n, &mut rng));
        let cap = m.min(n) - 1;
        let pruned = prune(&u, &sg, &sd, cap).unwrap();
        let dropped_rows: Vec<usize> = (0..m).filter(|i| !pruned.kept_rows.contains(i)).collect();
        let dropped_cols: Vec<usize> = (0..n).filter(|j| !pruned.kept_cols.contains(j)).collect();
        prop_assume!(dropped_rows.len() == dropped_cols.len());

        let (mut rows, mut cols) = (pruned.kept_rows.clone(), pruned.kept_cols.clone());
        let mut rebuilt = pruned.matrix.clone();
        for (&i, &j) in dropped_rows.iter().zip(&dropped_cols) {
            let new_row: Vec<f64> = cols.iter().map(|&c| u.get(i, c)).collect();
            let new_col: Vec<f64> = rows.iter().map(|&r| u.get(r, j)).collect();
            rebuilt = rebuilt.augment(&new_row, &new_col, u.get(i, j)).unwrap();
            rows.push(i);
            cols.push(j);
        }
        prop_assert_eq!(rebuilt, u.select(&rows, &cols).unwrap());
    }

    #[test]
    fn double_oracle_matches_the_full_game(u in matrix(12), eps in 1e-9f64..1e-6, seed in any::<u64>()) {
        let lp = solve_zero_sum(&u).unwrap().value;
        let run = run_do_finite(&u, eps, seed).unwrap();
        prop_assert!((run.solution.value - lp).abs() <= eps.max(1e-9));
        prop_assert!(run.rows.len() <= u.rows() && run.cols.len() <= u.cols());
    }

    #[test]
    fn discriminator_loss_is_nonnegative(seed in any::<u64>(), batch in 1usize..16) {
        let mut rng = Prng::seed_from_u64(seed);
        let d = Mlp::<f64>::new(Arch::discriminator(2), &mut rng).unwrap();
        let real = Array2::from_shape_fn((batch, 2), |(i, j)| ((i * 7 + j * 3) as f64).sin() * 4.0);
        let fake = Array2::from_shape_fn((batch, 2), |(i, j)| ((i * 5 + j) as f64).cos() * 40.0);
        prop_assert!(d_loss(&d, real.view(), fake.view()).unwrap().loss >= 0.0);
    }

    #[test]
    fn ewc_penalty_ignores_joint_permutations(
        values in proptest::collection::vec((0.0f64..2.0, -1.0f64..1.0, -1.0f64..1.0), 1..30),
        lambda in 0.0f64..100.0,
        weight in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let penalty = |v: &[(f64, f64, f64)]| {
            let ewc = EwcState::new(
                v.iter().map(|x| x.0).collect(),
                v.iter().map(|x| x.2).collect(),
                lambda,
                weight,
            )
            .unwrap();
            ewc_penalty(&v.iter().map(|x| x.1).collect::<Vec<_>>(), &ewc).unwrap().0
        };
        let mut shuffled = values.clone();
        shuffled.shuffle(&mut Prng::seed_from_u64(seed));
        let (a, b) = (penalty(&values), penalty(&shuffled));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn coverage_is_permutation_invariant_and_monotone(seed in any::<u64>(), n in 50usize..400, extra in 1usize..200) {
        let cfg = GaussianMixtureConfig { seed, ..Default::default() };
        let all = sample_real::<f64>(&cfg, n + extra).unwrap();
        let head = all.slice(ndarray::s![..n, ..]);
        let base = mode_coverage(head, &cfg, 3.0, 10).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut Prng::seed_from_u64(seed ^ 1));
        let permuted = head.select(ndarray::Axis(0), &order);
        prop_assert_eq!(&mode_coverage(permuted.view(), &cfg, 3.0, 10).unwrap(), &base);
        let more = mode_coverage(all.view(), &cfg, 3.0, 10).unwrap();
        prop_assert!(more.modes_recovered >= base.modes_recovered);
        prop_assert!(base.modes_recovered <= cfg.modes);
        prop_assert!(base.per_mode_counts.iter().sum::<usize>() <= n);
    }

    #[test]
    fn mixed_strategy_sampling_respects_support(weights in probabilities(5), seed in any::<u64>()) {
        let mut probs = weights.to_vec();
        probs[2] = 0.0;
        let sigma = MixedStrategy::normalized(probs).unwrap();
        let mut rng = Prng::seed_from_u64(seed);
        prop_assert!((0..500).all(|_| sigma.sample(&mut rng) != 2));
    }
}

#[test]
fn real_data_passes_its_own_coverage_metric() {
    for modes in [7, 8, 9] {
        let cfg = GaussianMixtureConfig { modes, seed: modes as u64, ..Default::default() };
        let xs = sample_real::<f64>(&cfg, 5120).unwrap();
        let report = mode_coverage(xs.view(), &cfg, 3.0, 20).unwrap();
        assert_eq!(report.modes_recovered, modes);
        assert!(report.high_quality_fraction >= 0.95);
    }
}

#[test]
fn sampling_frequencies_match_the_mixture() {
    let sigma = MixedStrategy::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let mut rng = Prng::seed_from_u64(8);
    let draws = 10_000;
    let mut counts = [0usize; 4];
    for _ in 0..draws {
        counts[sigma.sample(&mut rng)] += 1;
    }
    for (k, &c) in counts.iter().enumerate() {
        let p = sigma.get(k);
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((c as f64 / draws as f64 - p).abs() <= 3.0 * se, "component {k}: {c}");
    }
}

#[test]
fn small_nets_are_bitwise_deterministic() {
    let arch = Arch::new(vec![2, 8, 3], Activation::Tanh, Activation::Identity).unwrap();
    let make = || Mlp::<f64>::new(arch.clone(), &mut Prng::seed_from_u64(4)).unwrap();
    let x = Array2::from_shape_fn((5, 2), |(i, j)| i as f64 - j as f64);
    assert_eq!(make().forward(x.view()).unwrap(), make().forward(x.view()).unwrap());
}
