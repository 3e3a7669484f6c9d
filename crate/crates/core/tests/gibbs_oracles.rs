mod common;

use bmidas::gibbs::Sampler;
use bmidas::prior::{log_multi_laplace_density, log_slab_density, log_tau2_prior_density};
use bmidas::rng::standard_normal;
use bmidas::sim::{generate_dataset, DgpConfig, NoiseSpec, PredictorProcess};
use bmidas::{
    almon_basis, build_design, run_chain, ChainState, DesignMatrix, GroupLayout, Hyperparams, Model, RngHandle, SaConfig,
    Schedule,
};
use common::ks_test;
use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

fn random_design(n: usize, groups: &[usize], seed: u64, signal: &[f64]) -> DesignMatrix {
    let mut rng = RngHandle::new(seed, 0);
    let p: usize = groups.iter().sum();
    let raw = DMatrix::from_fn(n, p, |_, _| standard_normal(&mut rng));
    let y: Vec<f64> = (0..n)
        .map(|i| (0..p).map(|j| raw[(i, j)] * signal.get(j).copied().unwrap_or(0.0)).sum::<f64>() + standard_normal(&mut rng))
        .collect();
    let mut blocks = Vec::new();
    let mut start = 0;
    for &g in groups {
        blocks.push((start, g));
        start += g;
    }
    DesignMatrix::from_raw(raw, &y, (0..n).collect(), GroupLayout::new(blocks.clone()).unwrap(), blocks, 0).unwrap()
}

/// Empirical conditional of theta_1 on a 2-group, g = 1, T = 10 toy against
/// the analytic N(A^-1 C, sigma^2 A^-1) computed directly from Z and y.
#[test]
fn theta_conditional_matches_analytic_normal() {
    let design = random_design(10, &[1, 1], 21, &[0.8, -0.4]);
    let mut sampler = Sampler::new(&design);
    let hp = Hyperparams::default();
    let mut state = ChainState::initial(&design, &hp, &SaConfig::default());
    state.theta = vec![0.0, 0.37];
    state.tau2 = vec![0.6, 1.0];
    state.sigma2 = 0.8;

    let z = &design.z;
    let z1 = z.column(0);
    let resid = &design.y - z.column(1) * 0.37;
    let a = z1.dot(&z1) + 1.0 / 0.6;
    let c = z1.dot(&resid);
    let mean = c / a;
    let sd = (0.8 / a).sqrt();

    let mut rng = RngHandle::new(22, 0);
    let mut draws: Vec<f64> = (0..100_000)
        .map(|_| {
            sampler.draw_group(&mut state, 0, &mut rng).unwrap();
            state.theta[0]
        })
        .collect();
    assert_eq!(state.theta[1], 0.37);
    let normal = Normal::new(mean, sd).unwrap();
    let p = ks_test(&mut draws, |x| normal.cdf(x));
    assert!(p > 0.01, "KS p = {p}");
}

#[test]
fn theta_conditional_multivariate_moments() {
    let design = random_design(40, &[3, 2], 31, &[0.5, 0.0, -0.3, 1.0, 0.2]);
    let mut sampler = Sampler::new(&design);
    let mut state = ChainState::initial(&design, &Hyperparams::default(), &SaConfig::default());
    state.theta = vec![0.0, 0.0, 0.0, 0.9, 0.1];
    state.tau2 = vec![0.3, 2.0];
    state.sigma2 = 1.3;

    let z = &design.z;
    let zj = z.columns(0, 3).into_owned();
    let other = z.columns(3, 2).into_owned();
    let rest = nalgebra::DVector::from_vec(vec![0.9, 0.1]);
    let a = zj.transpose() * &zj + DMatrix::identity(3, 3) / 0.3;
    let c = zj.transpose() * (&design.y - other * rest);
    let ainv = a.try_inverse().unwrap();
    let mean = &ainv * c;
    let cov = ainv * 1.3;

    let mut rng = RngHandle::new(32, 0);
    let n = 400_000;
    let mut sum = [0.0; 3];
    let mut cross = [[0.0; 3]; 3];
    for _ in 0..n {
        sampler.draw_group(&mut state, 0, &mut rng).unwrap();
        for i in 0..3 {
            sum[i] += state.theta[i];
            for k in 0..3 {
                cross[i][k] += (state.theta[i] - mean[i]) * (state.theta[k] - mean[k]);
            }
        }
    }
    for i in 0..3 {
        let se = (cov[(i, i)] / n as f64).sqrt();
        assert!((sum[i] / n as f64 - mean[i]).abs() < 5.0 * se, "mean {i}");
        for k in 0..3 {
            let scale = (cov[(i, i)] * cov[(k, k)]).sqrt();
            assert!((cross[i][k] / n as f64 - cov[(i, k)]).abs() < 0.02 * scale, "cov {i},{k}");
        }
    }
}

/// Trapezoid rule on [a, b]; exponentially accurate for smooth integrands
/// that decay at both ends.
fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h)).sum();
    h * (inner + 0.5 * (f(a) + f(b)))
}

/// Integrating tau^2 out of the normal slab times its Gamma prior gives the
/// Multi-Laplace density, pointwise to 1e-6 relative.
#[test]
fn marginal_prior_is_multi_laplace() {
    for &g in &[1usize, 2, 4] {
        for &(sigma, lambda) in &[(1.0, 1.0), (0.7, 2.5), (2.0, 0.4)] {
            for &r in &[0.0, 0.05, 0.3, 1.0, 2.5, 6.0] {
                let theta: Vec<f64> = (0..g).map(|i| r * (1.0 + i as f64) / (g as f64).sqrt() / 2.0).collect();
                let target = log_multi_laplace_density(&theta, sigma, lambda).exp();
                // Integrate over u = log tau^2.
                let f = |u: f64| {
                    let t = u.exp();
                    (log_slab_density(&theta, sigma * sigma, t) + log_tau2_prior_density(t, g, lambda * lambda) + u).exp()
                };
                let value = trapezoid(f, -90.0, 60.0, 30_000);
                let rel = (value - target).abs() / target;
                assert!(rel < 1e-6, "g={g} sigma={sigma} lambda={lambda} r={r}: rel {rel:e}");
            }
        }
    }
}

/// With pi0 fixed at zero the spike branch never fires, so the
/// spike-and-slab chain reproduces the group-lasso chain draw for draw.
#[test]
fn spike_and_slab_reduces_to_group_lasso() {
    let design = random_design(80, &[2, 2, 2], 41, &[1.0, 0.5]);
    let schedule = Schedule::new(1500, 500, 2).unwrap();
    let sa = SaConfig::default();
    let agl = run_chain(Model::Agl, &design, &Hyperparams::default(), schedule, &sa, &mut RngHandle::new(5, 0)).unwrap();
    let hp_ss = Hyperparams {
        pi0_fixed: Some(0.0),
        ..Hyperparams::default()
    };
    let ss = run_chain(Model::AglSs, &design, &hp_ss, schedule, &sa, &mut RngHandle::new(5, 0)).unwrap();
    assert_eq!(agl.len(), ss.len());
    for (a, b) in agl.draws.iter().zip(&ss.draws) {
        assert_eq!(a.theta, b.theta);
        assert_eq!(a.tau2, b.tau2);
        assert_eq!(a.sigma2, b.sigma2);
        assert_eq!(a.lambda2, b.lambda2);
        assert!(b.gamma.as_ref().unwrap().iter().all(|g| *g));
    }
    assert_eq!(agl.restarts, ss.restarts);
}

#[test]
fn pi0_one_zeroes_everything() {
    let design = random_design(50, &[2, 2], 42, &[1.0]);
    let hp = Hyperparams {
        pi0_fixed: Some(1.0),
        ..Hyperparams::default()
    };
    let draws = run_chain(Model::AglSs, &design, &hp, Schedule::new(300, 100, 1).unwrap(), &SaConfig::default(), &mut RngHandle::new(1, 0)).unwrap();
    for d in &draws.draws {
        assert!(d.theta.iter().all(|v| v.to_bits() == 0));
    }
}

#[test]
fn exact_zeros_follow_gamma() {
    let design = random_design(60, &[3, 3, 3, 3], 43, &[0.6, 0.0, 0.4]);
    let draws = run_chain(Model::AglSs, &design, &Hyperparams::default(), Schedule::new(3000, 500, 1).unwrap(), &SaConfig::default(), &mut RngHandle::new(2, 0)).unwrap();
    let mut zeros = 0;
    for d in &draws.draws {
        let gamma = d.gamma.as_ref().unwrap();
        for (j, &(start, size)) in draws.meta.groups.blocks().iter().enumerate() {
            let block = &d.theta[start..start + size];
            if gamma[j] {
                assert!(block.iter().any(|v| *v != 0.0));
            } else {
                assert!(block.iter().all(|v| v.to_bits() == 0));
                zeros += 1;
            }
        }
    }
    assert!(zeros > 0, "null groups should visit the spike");
}

#[test]
fn lasso_mode_uses_singleton_groups() {
    let design = random_design(100, &[4, 4], 44, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0]).with_singleton_groups();
    assert_eq!(design.meta.groups.n_groups(), 8);
    let draws = run_chain(Model::Agl, &design, &Hyperparams::default(), Schedule::new(4000, 1000, 1).unwrap(), &SaConfig::default(), &mut RngHandle::new(3, 0)).unwrap();
    assert_eq!(draws.draws[0].lambda2.len(), 8);
    let mean = draws.theta_mean();
    assert!(mean[0] > 0.5 && mean[7] < -0.5, "{mean:?}");
    for m in &mean[1..7] {
        assert!(m.abs() < 0.3, "{mean:?}");
    }
}

/// On pure-noise data the spike-and-slab sampler keeps every group's
/// inclusion frequency below 0.2 in a majority of seeds.
#[test]
fn null_data_is_sparse() {
    let mut cfg = DgpConfig::simulation(1, 10, 0.5).unwrap();
    cfg.beta_true = vec![0.0; 10];
    cfg.noise = NoiseSpec::FixedSd(1.0);
    cfg.process = PredictorProcess::Ar1;
    let basis = almon_basis(3, cfg.lag_window, 2).unwrap();
    let mut passes = 0;
    let seeds = 5;
    for seed in 0..seeds {
        let mut rng = RngHandle::new(100 + seed, 0);
        let data = generate_dataset(&cfg, &mut rng).unwrap();
        let design = build_design(&data.training_panel(), &basis, None).unwrap();
        assert_eq!(design.n_rows(), 200);
        let draws = run_chain(Model::AglSs, &design, &Hyperparams::default(), Schedule::new(6000, 2000, 2).unwrap(), &SaConfig::default(), &mut rng).unwrap();
        let incl = draws.inclusion_frequency();
        if incl.iter().all(|p| *p < 0.2) {
            passes += 1;
        }
    }
    assert!(2 * passes > seeds, "only {passes} of {seeds} seeds were sparse");
}

#[test]
fn numerical_errors_carry_the_iteration() {
    let design = random_design(30, &[2], 45, &[1.0]);
    let mut state = ChainState::initial(&design, &Hyperparams::default(), &SaConfig::default());
    state.tau2 = vec![0.0];
    let err = bmidas::run_chain_from(Model::Agl, &design, &Hyperparams::default(), Schedule::new(10, 1, 1).unwrap(), &SaConfig::default(), state, &mut RngHandle::new(1, 0)).unwrap_err();
    match err {
        bmidas::Error::Numerical { iteration, .. } => assert_eq!(iteration, 1),
        other => panic!("unexpected error {other}"),
    }
}
