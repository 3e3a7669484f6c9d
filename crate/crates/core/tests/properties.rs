use bmidas::forecast::{crps, crps_naive};
use bmidas::inference::{compute_metrics, select_credible_interval};
use bmidas::rng::RngHandle;
use bmidas::tune::{sa_update, SaConfig, SaState};
use bmidas::almon_basis;
use nalgebra::DMatrix;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tail_restrictions_hold(
        lag_window in 3usize..60,
        degree in 2usize..5,
        theta in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let basis = almon_basis(degree, lag_window, 2).unwrap();
        let th = &theta[..basis.n_free()];
        let last = (lag_window - 1) as f64;
        let scale: f64 = (0..lag_window).map(|c| basis.weight(th, c as f64).abs()).fold(1.0, f64::max);
        prop_assert!(basis.weight(th, last).abs() <= 1e-10 * scale);
        prop_assert!(basis.weight_slope(th, last).abs() <= 1e-10 * scale);
        let b1 = almon_basis(degree, lag_window, 1).unwrap();
        prop_assert!(b1.weight(&theta[..b1.n_free()], last).abs() <= 1e-10 * scale.max(1.0) * (lag_window as f64).powi(degree as i32));
    }

    /// The transformed regressors reproduce the lag-weighted sum exactly.
    #[test]
    fn transform_is_linear_in_lags(
        lag_window in 3usize..30,
        r in 0usize..3,
        seed in 0u64..1000,
    ) {
        let basis = almon_basis(3, lag_window, r).unwrap();
        let mut rng = RngHandle::new(seed, 0);
        let lags: Vec<f64> = (0..lag_window).map(|_| bmidas::rng::standard_normal(&mut rng)).collect();
        let theta: Vec<f64> = (0..basis.n_free()).map(|_| bmidas::rng::standard_normal(&mut rng)).collect();
        let z = basis.transform(&lags);
        let lhs: f64 = z.iter().zip(&theta).map(|(a, b)| a * b).sum();
        let rhs: f64 = (0..lag_window).map(|c| basis.weight(&theta, c as f64) * lags[c]).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs.abs()) * (lag_window as f64).powi(3));
    }

    /// MSE over all draws equals VAR + BIAS^2, and the active/inactive split
    /// recombines with weights K_A / K.
    #[test]
    fn mse_decomposition(
        reps in 1usize..5,
        k in 2usize..6,
        draws in 2usize..20,
        seed in 0u64..10_000,
    ) {
        let mut rng = RngHandle::new(seed, 1);
        let truth: Vec<f64> = (0..k).map(|j| if j % 2 == 0 { 0.0 } else { 1.0 + j as f64 }).collect();
        let mats: Vec<DMatrix<f64>> = (0..reps)
            .map(|_| DMatrix::from_fn(draws, k, |_, j| truth[j] + 2.0 * bmidas::rng::standard_normal(&mut rng) + 0.3))
            .collect();
        let sel = vec![vec![true; k]; reps];
        let m = compute_metrics(&mats, &truth, &sel).unwrap();
        // Direct definition: mean squared deviation of every draw from the truth.
        let direct: f64 = mats
            .iter()
            .map(|mat| mat.iter().enumerate().map(|(i, v)| (v - truth[i / draws]).powi(2)).sum::<f64>())
            .sum::<f64>()
            / (reps * k * draws) as f64;
        prop_assert!((m.var + m.bias2 - direct).abs() <= 1e-10 * direct.max(1.0));
        prop_assert!((m.mse - direct).abs() <= 1e-10 * direct.max(1.0));
        let ka = truth.iter().filter(|b| **b != 0.0).count() as f64;
        let w = ka / k as f64;
        prop_assert!((w * m.mse_active + (1.0 - w) * m.mse_inactive - m.mse).abs() <= 1e-10 * m.mse.max(1.0));
    }

    #[test]
    fn crps_estimators_agree(
        draws in prop::collection::vec(-50.0f64..50.0, 2..500),
        y in -60.0f64..60.0,
    ) {
        let fast = crps(&draws, y).unwrap();
        let slow = crps_naive(&draws, y);
        prop_assert!((fast - slow).abs() <= 1e-12 * (1.0f64).max(slow.abs()));
        prop_assert!(fast >= 0.0);
    }

    /// Whatever tau^2 the sampler feeds in, omega stays inside the active
    /// compact set and kappa counts the rejections.
    #[test]
    fn sa_iterates_stay_bounded(
        log_tau2 in prop::collection::vec(-30.0f64..30.0, 1..200),
        sizes in prop::collection::vec(1usize..6, 3),
        q in 0.55f64..0.95,
        seed in 0u64..1000,
    ) {
        let cfg = SaConfig { q, ..SaConfig::default() };
        let mut rng = RngHandle::new(seed, 0);
        let mut sa = SaState::new(3, &cfg);
        let mut rejections = 0;
        for (i, lt) in log_tau2.iter().enumerate() {
            let tau2 = [lt.exp(), (-lt).exp(), (lt / 2.0).exp()];
            let out = sa_update(&sa, &tau2, &sizes, &cfg, &mut rng).unwrap();
            if out.restarted {
                rejections += 1;
                prop_assert_eq!(out.state.nu, 0);
            } else {
                prop_assert_eq!(out.state.nu, sa.nu + 1);
            }
            prop_assert!(out.state.contains(&cfg), "step {}: {:?}", i, out.state);
            prop_assert_eq!(out.state.kappa, rejections);
            prop_assert_eq!(out.state.sigma_count, i as u64 + 1);
            sa = out.state;
        }
    }

    /// Permuting predictors permutes the credible-interval report.
    #[test]
    fn selection_is_permutation_equivariant(
        seed in 0u64..1000,
        shifts in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let mut rng = RngHandle::new(seed, 2);
        let m = DMatrix::from_fn(200, 4, |_, j| shifts[j] + bmidas::rng::standard_normal(&mut rng));
        let perm = [2usize, 0, 3, 1];
        let pm = DMatrix::from_fn(200, 4, |i, j| m[(i, perm[j])]);
        let a = select_credible_interval(&m, 0.95).unwrap();
        let b = select_credible_interval(&pm, 0.95).unwrap();
        for j in 0..4 {
            prop_assert_eq!(b.included[j], a.included[perm[j]]);
            prop_assert_eq!(b.median[j], a.median[perm[j]]);
        }
    }
}
