mod common;

use common::*;
use linkstop::causal::{
    build_subclasses, estimate_effect, estimate_effect_regression, fit_propensity, log_likelihood, marginal_effect,
    ols_last_coefficient, SubclassConfig, Subclassification,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn subclassification(j: usize) -> Subclassification {
    Subclassification::from_boundaries((1..j).map(|b| b as f64).collect())
}

#[test]
fn dim_matches_oracle_on_random_micro_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..300 {
        let j = rng.random_range(1..=3);
        let n = rng.random_range(4 * j..=50);
        let units = random_units(&mut rng, n, j, 2, 2);
        let est = estimate_effect(&units, &subclassification(j)).unwrap();
        let (tau, var) = dim_oracle(&units, j).unwrap();
        assert!(close(est.tau_hat, tau, 1e-12), "{} vs {tau}", est.tau_hat);
        assert!(close(est.var_hat, var, 1e-12));
    }
}

#[test]
fn regression_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..300 {
        let j = rng.random_range(1..=3);
        let n = rng.random_range(12 * j..=50);
        let units = random_units(&mut rng, n, j, 2, 3);
        let Some((tau, var)) = regression_oracle(&units, j) else {
            continue;
        };
        let est = estimate_effect_regression(&units, &subclassification(j)).unwrap();
        assert!(close(est.tau_hat, tau, 1e-8));
        assert!(close(est.var_hat, var, 1e-8));
    }
}

#[test]
fn ols_drops_an_aliased_covariate() {
    // Second covariate is twice the first: the fit must equal the fit
    // without it.
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let n = 30;
    let rows: Vec<(f64, f64, f64)> = (0..n)
        .map(|i| {
            let x: f64 = rng.random_range(-1.0..1.0);
            let w = (i % 2) as f64;
            (x, w, 1.0 + 2.0 * x + 3.0 * w + rng.random_range(-0.5..0.5))
        })
        .collect();
    let full = DMatrix::from_fn(n, 4, |i, c| [1.0, rows[i].0, 2.0 * rows[i].0, rows[i].1][c]);
    let y = DVector::from_iterator(n, rows.iter().map(|r| r.2));
    let fit = ols_last_coefficient(&full, &y).unwrap();
    assert_eq!(fit.retained, vec![0, 1, 3]);
    let x: Vec<Vec<f64>> = rows.iter().map(|r| vec![1.0, r.0, r.1]).collect();
    let (beta, var) = ols_oracle(&x, &y.iter().copied().collect::<Vec<_>>()).unwrap();
    assert!(close(fit.coefficients[2], beta[2], 1e-10));
    assert!(close(fit.last_coef_var, var, 1e-10));
}

fn random_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    let beta: Vec<f64> = (0..=p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let w = x
        .iter()
        .map(|r| {
            let eta = beta[0] + r.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
            rng.random_bool(1.0 / (1.0 + (-eta).exp()))
        })
        .collect();
    (x, w)
}

#[test]
fn irls_matches_newton() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for _ in 0..40 {
        let p = rng.random_range(1..=4);
        let (x, w) = random_design(&mut rng, 300, p);
        let fit = fit_propensity(&x, &w).unwrap();
        let newton = newton_logistic(&x, &w);
        for (a, b) in fit.coefficients.iter().zip(&newton) {
            assert!((a - b).abs() < 1e-6, "{:?} vs {newton:?}", fit.coefficients);
        }
        assert!(fit.gradient_norm < 1e-6);
    }
}

#[test]
fn log_likelihood_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let (x, w) = random_design(&mut rng, 200, 3);
    let beta = [0.3, -0.4, 0.2, 0.7];
    let g = logistic_gradient(&x, &w, &beta);
    for k in 0..beta.len() {
        let h = 1e-5;
        let mut up = beta;
        let mut down = beta;
        up[k] += h;
        down[k] -= h;
        let fd = (log_likelihood(&x, &w, &up) - log_likelihood(&x, &w, &down)) / (2.0 * h);
        assert!((fd - g[k]).abs() <= 1e-4 * g[k].abs().max(1.0));
    }
}

#[test]
fn subclasses_have_near_equal_counts_and_frozen_boundaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let (x, w) = random_design(&mut rng, 1000, 2);
    let fit = fit_propensity(&x, &w).unwrap();
    let ids: Vec<u64> = (1..=1000).collect();
    let sub = build_subclasses(&ids, &fit.scores, &w, &SubclassConfig::default()).unwrap();
    assert_eq!(sub.num_classes(), 5);
    let mut counts = [0usize; 5];
    for (id, s) in ids.iter().zip(&fit.scores) {
        let c = sub.class_of(*id).unwrap();
        assert_eq!(c, sub.classify(*s));
        counts[c] += 1;
    }
    assert!(counts.iter().all(|&c| (199..=201).contains(&c)), "{counts:?}");
}

#[test]
fn noiseless_linear_outcome_gives_exact_regression_effect() {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut units = random_units(&mut rng, 60, 2, 2, 5);
    for u in &mut units {
        u.outcome = 5.0 + 5.0 * u.covariates[0] + 3.0 * u.covariates[1] + if u.treated { 50.0 } else { 0.0 };
    }
    let est = estimate_effect_regression(&units, &subclassification(2)).unwrap();
    assert!((est.tau_hat - 50.0).abs() < 1e-9);
    assert!(est.var_hat < 1e-18);
}

#[test]
fn marginal_equals_single_class_estimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut units = random_units(&mut rng, 40, 3, 1, 2);
    let m = marginal_effect(&units).unwrap();
    for u in &mut units {
        u.subclass = 0;
    }
    assert_eq!(m, estimate_effect(&units, &Subclassification::single()).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn swapping_same_cell_outcomes_is_bitwise_invariant(seed in any::<u64>(), pick in any::<(u16, u16)>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let units = random_units(&mut rng, 40, 3, 1, 3);
        let sub = subclassification(3);
        let i = pick.0 as usize % units.len();
        let peers: Vec<usize> = (0..units.len())
            .filter(|&k| k != i && units[k].subclass == units[i].subclass && units[k].treated == units[i].treated)
            .collect();
        let k = peers[pick.1 as usize % peers.len()];
        let mut swapped = units.clone();
        let (a, b) = (swapped[i].outcome, swapped[k].outcome);
        swapped[i].outcome = b;
        swapped[k].outcome = a;
        let before = estimate_effect(&units, &sub).unwrap();
        let after = estimate_effect(&swapped, &sub).unwrap();
        prop_assert_eq!(before.tau_hat.to_bits(), after.tau_hat.to_bits());
        prop_assert_eq!(before.var_hat.to_bits(), after.var_hat.to_bits());
    }

    #[test]
    fn adding_a_constant_to_treated_outcomes_shifts_tau(seed in any::<u64>(), shift in -20.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let units = random_units(&mut rng, 30, 2, 1, 2);
        let mut moved = units.clone();
        for u in moved.iter_mut().filter(|u| u.treated) {
            u.outcome += shift;
        }
        let sub = subclassification(2);
        let a = estimate_effect(&units, &sub).unwrap();
        let b = estimate_effect(&moved, &sub).unwrap();
        prop_assert!((b.tau_hat - a.tau_hat - shift).abs() < 1e-9);
        prop_assert!((b.var_hat - a.var_hat).abs() < 1e-9 * (1.0 + a.var_hat));
    }

    #[test]
    fn estimated_variance_is_positive_with_noise(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut units = random_units(&mut rng, 24, 2, 0, 3);
        for u in &mut units {
            u.outcome += noise.sample(&mut rng);
        }
        let est = estimate_effect(&units, &subclassification(2)).unwrap();
        prop_assert!(est.var_hat > 0.0);
    }
}
