//! Empirical-Bayes tuning of the group penalties.
//!
//! The penalties are tracked through `omega = log(lambda) = 0.5 log(lambda^2)`
//! and updated once per Gibbs sweep by a Robbins–Monro step on the gradient
//! of the log prior of `tau^2`:
//!
//! ```text
//! omega_j <- omega_j + a(s) [ (g_j + 1) - exp(2 omega_j) tau_j^2 ]
//! ```
//!
//! `exp(2 omega_j)` is the squared penalty `lambda_j^2`, the rate (times two)
//! of the Gamma prior on `tau_j^2`. Steps that leave the active compact set
//! or move too far trigger a restart on a larger set.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaConfig {
    /// Step exponent: `a(s) = 1 / s^q`.
    pub q: f64,
    /// Initial increment bound `e(1)`; the bound decays toward 1.
    pub e_bar: f64,
    pub alpha_e: f64,
    /// Floor of the compact sets: omega never drops below `-c_bound`.
    pub c_bound: f64,
    pub omega_init: f64,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            q: 0.8,
            e_bar: 3.0,
            alpha_e: 0.1,
            c_bound: 5.0,
            omega_init: 0.0,
        }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.5 && self.q < 1.0) {
            return Err(Error::Config(format!("step exponent q must lie in (0.5, 1), got {}", self.q)));
        }
        if !(self.c_bound > 0.0) {
            return Err(Error::Config("c_bound must be positive".into()));
        }
        if !(self.e_bar >= 1.0) || !(self.alpha_e > 0.0) {
            return Err(Error::Config("e_bar must be >= 1 and alpha_e positive".into()));
        }
        if !(self.omega_init > -self.c_bound.min(1.0) - 1e-12 && self.omega_init <= 1.0) {
            return Err(Error::Config("omega_init must lie in the initial compact set".into()));
        }
        Ok(())
    }

    /// Robbins–Monro step size `1 / index^q`.
    pub fn step_size(&self, index: u64) -> f64 {
        (index as f64).powf(-self.q)
    }

    /// Increment bound `e = e_bar + (1 - e_bar)(1 - index^-alpha_e)`; unbounded at index 0.
    pub fn increment_bound(&self, index: u64) -> f64 {
        if index == 0 {
            return f64::INFINITY;
        }
        self.e_bar + (1.0 - self.e_bar) * (1.0 - (index as f64).powf(-self.alpha_e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaState {
    pub omega: Vec<f64>,
    /// Active truncation set index; equals the number of restarts so far.
    pub kappa: u64,
    /// Iterations since the last restart.
    pub nu: u64,
    /// Index into the step-size sequence.
    pub sigma_count: u64,
}

impl SaState {
    pub fn new(n_groups: usize, cfg: &SaConfig) -> Self {
        Self {
            omega: vec![cfg.omega_init; n_groups],
            kappa: 0,
            nu: 0,
            sigma_count: 0,
        }
    }

    /// Bounds `[max(-kappa - 1, -c), kappa + 1]` of the active compact set.
    pub fn bounds(&self, cfg: &SaConfig) -> (f64, f64) {
        active_bounds(self.kappa, cfg)
    }

    pub fn contains(&self, cfg: &SaConfig) -> bool {
        let (lo, hi) = self.bounds(cfg);
        self.omega.iter().all(|w| *w >= lo && *w <= hi)
    }

    /// Squared penalties implied by the current iterate.
    pub fn lambda2(&self) -> Vec<f64> {
        lambda_of_omega(&self.omega)
    }
}

fn active_bounds(kappa: u64, cfg: &SaConfig) -> (f64, f64) {
    let k = kappa as f64;
    ((-k - 1.0).max(-cfg.c_bound), k + 1.0)
}

/// Penalty vector `exp(2 omega)`, i.e. the squared group penalties `lambda_j^2`.
pub fn lambda_of_omega(omega: &[f64]) -> Vec<f64> {
    omega.iter().map(|w| (2.0 * w).exp()).collect()
}

/// `H(omega, tau2) = (g + 1) - exp(2 omega) tau2`, component-wise.
pub fn sa_gradient(omega: &[f64], tau2: &[f64], group_sizes: &[usize]) -> Vec<f64> {
    omega
        .iter()
        .zip(tau2)
        .zip(group_sizes)
        .map(|((w, t), g)| (*g as f64 + 1.0) - (2.0 * w).exp() * t)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaOutcome {
    pub state: SaState,
    /// The candidate was rejected; the chain parameters must be re-drawn
    /// from their priors given the new `omega`.
    pub restarted: bool,
}

/// One stochastic-approximation step with truncation on random boundaries.
pub fn sa_update<R: Rng + ?Sized>(
    sa: &SaState,
    tau2_new: &[f64],
    group_sizes: &[usize],
    cfg: &SaConfig,
    rng: &mut R,
) -> Result<SaOutcome> {
    let n = sa.omega.len();
    if tau2_new.len() != n || group_sizes.len() != n {
        return Err(Error::Shape("tau2 and group sizes must match omega".into()));
    }
    let step = cfg.step_size(sa.sigma_count + 1);
    let bound = cfg.increment_bound(sa.sigma_count);
    let grad = sa_gradient(&sa.omega, tau2_new, group_sizes);
    let candidate: Vec<f64> = sa
        .omega
        .iter()
        .zip(&grad)
        .map(|(w, h)| w + step * h)
        .collect();

    let (lo, hi) = sa.bounds(cfg);
    let inside = candidate.iter().all(|w| *w >= lo && *w <= hi);
    let small = candidate
        .iter()
        .zip(&sa.omega)
        .all(|(c, w)| (c - w).abs() <= bound);

    if inside && small {
        return Ok(SaOutcome {
            state: SaState {
                omega: candidate,
                kappa: sa.kappa,
                nu: sa.nu + 1,
                sigma_count: sa.sigma_count + 1,
            },
            restarted: false,
        });
    }

    // Re-draw only the offending components, each uniformly between its
    // previous value and the boundary it overran (or moved toward).
    let omega = sa
        .omega
        .iter()
        .zip(&candidate)
        .map(|(&prev, &cand)| {
            let target = if cand >= hi {
                Some(hi)
            } else if cand < lo {
                Some(lo)
            } else if (cand - prev).abs() > bound {
                Some(if cand > prev { hi } else { lo })
            } else {
                None
            };
            match target {
                Some(edge) => {
                    let (a, b) = if prev <= edge { (prev, edge) } else { (edge, prev) };
                    a + (b - a) * rng.random::<f64>()
                }
                None => prev,
            }
        })
        .collect();

    Ok(SaOutcome {
        state: SaState {
            omega,
            kappa: sa.kappa + 1,
            nu: 0,
            sigma_count: sa.sigma_count + 1,
        },
        restarted: true,
    })
}

/// Per-group ratio of the across-iteration sd of omega over the last
/// `frac` of a trace to its sd over the first `frac`.
pub fn omega_dispersion_ratio(trace: &[Vec<f64>], frac: f64) -> Result<Vec<f64>> {
    if !(frac > 0.0 && frac <= 0.5) {
        return Err(Error::Domain(format!("window fraction must lie in (0, 0.5], got {frac}")));
    }
    let n = trace.len();
    let w = ((n as f64) * frac).floor() as usize;
    if w < 2 {
        return Err(Error::InsufficientData(format!("omega trace of length {n} is too short")));
    }
    let groups = trace[0].len();
    let sd = |rows: &[Vec<f64>], j: usize| {
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64;
        (rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (rows.len() - 1) as f64).sqrt()
    };
    Ok((0..groups)
        .map(|j| {
            let early = sd(&trace[..w], j);
            let late = sd(&trace[n - w..], j);
            if early > 0.0 {
                late / early
            } else if late > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .collect())
}

/// Stabilization check: late-chain omega dispersion below 10% of the early
/// dispersion for every group.
pub fn omega_stabilized(trace: &[Vec<f64>]) -> Result<bool> {
    Ok(omega_dispersion_ratio(trace, 0.1)?.iter().all(|r| *r < 0.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngHandle;

    #[test]
    fn fixed_point_has_zero_increment() {
        let cfg = SaConfig::default();
        let sa = SaState {
            omega: vec![0.3, -0.2],
            kappa: 0,
            nu: 0,
            sigma_count: 4,
        };
        let sizes = [2, 3];
        let tau2: Vec<f64> = sa
            .omega
            .iter()
            .zip(&sizes)
            .map(|(w, g)| (*g as f64 + 1.0) * (-2.0 * w).exp())
            .collect();
        let out = sa_update(&sa, &tau2, &sizes, &cfg, &mut RngHandle::new(0, 0)).unwrap();
        assert!(!out.restarted);
        for (a, b) in out.state.omega.iter().zip(&sa.omega) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(out.state.nu, 1);
        assert_eq!(out.state.sigma_count, 5);
    }

    #[test]
    fn first_step_overshoot_restarts() {
        // g = 2, omega = 0, tau2 = 1, a(1) = 1: candidate 0 + (3 - 1) = 2, outside [-1, 1].
        let cfg = SaConfig::default();
        let sa = SaState::new(1, &cfg);
        let grad = sa_gradient(&sa.omega, &[1.0], &[2]);
        assert_eq!(grad, vec![2.0]);
        let out = sa_update(&sa, &[1.0], &[2], &cfg, &mut RngHandle::new(0, 0)).unwrap();
        assert!(out.restarted);
        assert_eq!(out.state.kappa, 1);
        assert_eq!(out.state.nu, 0);
        assert_eq!(out.state.sigma_count, 1);
        // Redrawn between the previous value 0 and the upper edge 1.
        assert!(out.state.omega[0] >= 0.0 && out.state.omega[0] <= 1.0);
    }

    #[test]
    fn increment_bound_decreases_toward_one() {
        let cfg = SaConfig::default();
        let e1 = cfg.increment_bound(1);
        let e10 = cfg.increment_bound(10);
        let e1000 = cfg.increment_bound(1000);
        assert!((e1 - 3.0).abs() < 1e-15);
        assert!(e1 >= e10 && e10 >= e1000 && e1000 >= 1.0);
        assert!(cfg.increment_bound(0).is_infinite());
    }

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_of_omega(&[0.0]), vec![1.0]);
        assert!((lambda_of_omega(&[0.5 * 4f64.ln()])[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_identity() {
        // At H = 0 the squared penalty times tau^2 equals g + 1.
        let g = 3usize;
        let omega: f64 = 0.37;
        let tau2 = (g as f64 + 1.0) * (-2.0 * omega).exp();
        let lambda2 = lambda_of_omega(&[omega])[0];
        assert!((lambda2 * tau2 - (g as f64 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn lower_floor_is_c_bound() {
        let cfg = SaConfig::default();
        let sa = SaState {
            omega: vec![0.0],
            kappa: 10,
            nu: 0,
            sigma_count: 0,
        };
        assert_eq!(sa.bounds(&cfg), (-5.0, 11.0));
    }

    #[test]
    fn config_validation() {
        assert!(SaConfig::default().validate().is_ok());
        let bad = SaConfig {
            q: 0.4,
            ..SaConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn dispersion_ratio_detects_settling() {
        let trace: Vec<Vec<f64>> = (0..1000)
            .map(|s| vec![(s as f64).sin() / (1.0 + s as f64 / 10.0), (s as f64).sin()])
            .collect();
        let r = omega_dispersion_ratio(&trace, 0.1).unwrap();
        assert!(r[0] < 0.1);
        assert!((r[1] - 1.0).abs() < 0.1);
        assert!(!omega_stabilized(&trace).unwrap());
        assert!(omega_dispersion_ratio(&trace[..10], 0.1).is_err());
    }
}
