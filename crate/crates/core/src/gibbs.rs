//! Block Gibbs samplers for the adaptive group lasso (AGL) and its
//! spike-and-slab variant (AGL-SS).
//!
//! A sweep updates, in this fixed order: every coefficient group, the
//! unpenalized block, every `tau_j^2`, `sigma^2`, the penalties, and
//! finally `pi0` (spike-and-slab only). The conditionals work on the Gram
//! matrix `Z'Z` and `Z'y`, so a sweep costs `O(g~^2)` regardless of `T`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::midas::{DesignMatrix, DesignMeta};
use crate::prior::{default_beta_prior, tau2_prior};
use crate::rng::{sample_beta, sample_gamma, sample_inv_gamma, sample_inv_gaussian, standard_normal};
use crate::tune::{lambda_of_omega, sa_update, SaConfig, SaState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Agl,
    AglSs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningMode {
    /// `lambda_j^2` drawn from its Gamma(a2, b2)-prior conditional.
    FullBayes,
    /// Empirical Bayes via stochastic approximation.
    StochasticApproximation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    /// Beta prior on `pi0`; `None` derives `c` from the number of groups.
    pub c: Option<f64>,
    pub d: f64,
    /// Hold `pi0` at a fixed value instead of sampling it.
    pub pi0_fixed: Option<f64>,
    pub tuning: TuningMode,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            a1: 1.01,
            b1: 0.01,
            a2: 1.0,
            b2: 1.0,
            c: None,
            d: 1.0,
            pi0_fixed: None,
            tuning: TuningMode::StochasticApproximation,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a1 > 1.0) || !(self.b1 > 0.0) {
            return Err(Error::Config("sigma^2 prior needs a1 > 1 and b1 > 0".into()));
        }
        if !(self.a2 > 0.0) || !(self.b2 > 0.0) || !(self.d > 0.0) {
            return Err(Error::Config("a2, b2 and d must be positive".into()));
        }
        if let Some(c) = self.c {
            if !(c > 0.0) {
                return Err(Error::Config("c must be positive".into()));
            }
        }
        if let Some(p) = self.pi0_fixed {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config("fixed pi0 must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    /// Resolved `(c, d)` for `n_groups` groups.
    pub fn beta_prior(&self, n_groups: usize) -> (f64, f64) {
        let (c, _) = default_beta_prior(n_groups);
        (self.c.unwrap_or(c), self.d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl Schedule {
    pub fn new(iterations: usize, burn_in: usize, thin: usize) -> Result<Self> {
        let s = Self {
            iterations,
            burn_in,
            thin,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in || self.thin == 0 {
            return Err(Error::Config(format!(
                "schedule needs iterations > burn_in and thin >= 1 (got S={}, burn={}, thin={})",
                self.iterations, self.burn_in, self.thin
            )));
        }
        Ok(())
    }

    pub fn n_stored(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    fn keeps(&self, iteration: usize) -> bool {
        iteration > self.burn_in && (iteration - self.burn_in) % self.thin == 0
    }
}

/// One Gibbs iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub theta: Vec<f64>,
    pub tau2: Vec<f64>,
    pub sigma2: f64,
    /// Squared penalties `lambda_j^2`.
    pub lambda2: Vec<f64>,
    pub pi0: f64,
    pub gamma: Vec<bool>,
    pub sa: SaState,
}

impl ChainState {
    /// `theta = 0`, `tau^2 = 1`, `sigma^2 = var(y)`, `omega = omega_init`, `pi0 = 0.5`.
    pub fn initial(design: &DesignMatrix, hp: &Hyperparams, sa_cfg: &SaConfig) -> Self {
        let n_groups = design.meta.groups.n_groups();
        let n = design.y.len() as f64;
        let sigma2 = design.y.iter().map(|v| v * v).sum::<f64>() / (n - 1.0);
        let sa = SaState::new(n_groups, sa_cfg);
        Self {
            theta: vec![0.0; design.meta.n_coef()],
            tau2: vec![1.0; n_groups],
            sigma2: if sigma2 > 0.0 { sigma2 } else { 1.0 },
            lambda2: lambda_of_omega(&sa.omega),
            pi0: hp.pi0_fixed.unwrap_or(0.5),
            gamma: vec![false; n_groups],
            sa,
        }
    }
}

/// Thinned post-burn-in snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredDraw {
    pub theta: Vec<f64>,
    pub tau2: Vec<f64>,
    pub sigma2: f64,
    pub lambda2: Vec<f64>,
    pub pi0: Option<f64>,
    pub gamma: Option<Vec<bool>>,
}

#[derive(Clone, Debug)]
pub struct PosteriorDraws {
    pub model: Model,
    pub schedule: Schedule,
    pub draws: Vec<StoredDraw>,
    pub meta: DesignMeta,
    /// `(iteration, omega)` every `thin` iterations, burn-in included.
    pub omega_trace: Vec<(usize, Vec<f64>)>,
    /// Stochastic-approximation restarts over the whole run.
    pub restarts: u64,
    pub n_obs: usize,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn n_groups(&self) -> usize {
        self.meta.groups.n_groups()
    }

    /// Posterior mean of each coefficient.
    pub fn theta_mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut out = vec![0.0; self.meta.n_coef()];
        for d in &self.draws {
            for (o, v) in out.iter_mut().zip(&d.theta) {
                *o += v / n;
            }
        }
        out
    }

    /// Fraction of draws in which each group is non-zero.
    pub fn inclusion_frequency(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.meta
            .groups
            .blocks()
            .iter()
            .map(|&(start, size)| {
                self.draws
                    .iter()
                    .filter(|d| d.theta[start..start + size].iter().any(|v| *v != 0.0))
                    .count() as f64
                    / n
            })
            .collect()
    }
}

/// Posterior probability that group `j` is exactly zero.
///
/// `log_det_a` is `log |A_j|` and `quad` is `C_j' A_j^{-1} C_j`. Evaluated in
/// log space; the exponent `quad / (2 sigma^2)` routinely exceeds the `f64` range.
pub fn spike_probability(pi0: f64, tau2: f64, group_size: usize, log_det_a: f64, quad: f64, sigma2: f64) -> f64 {
    if pi0 <= 0.0 {
        return 0.0;
    }
    if pi0 >= 1.0 {
        return 1.0;
    }
    let log_spike = pi0.ln();
    let log_slab = (1.0 - pi0).ln() - 0.5 * group_size as f64 * tau2.ln() - 0.5 * log_det_a + quad / (2.0 * sigma2);
    // 1 / (1 + exp(log_slab - log_spike)), stable for either sign.
    let diff = log_slab - log_spike;
    if diff > 0.0 {
        let e = (-diff).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + diff.exp())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SweepReport {
    pub restarted: bool,
}

/// Precomputed sufficient statistics plus scratch space for one design.
pub struct Sampler<'a> {
    design: &'a DesignMatrix,
    gram: Vec<f64>,
    zty: Vec<f64>,
    yty: f64,
    n_coef: usize,
    sizes: Vec<usize>,
    unpenalized: Option<(usize, usize)>,
    scratch_a: Vec<f64>,
    scratch_c: Vec<f64>,
    scratch_w: Vec<f64>,
}

/// Factorization summary of `A` needed by the spike probability.
struct BlockSolve {
    log_det: f64,
    quad: f64,
}

impl<'a> Sampler<'a> {
    pub fn new(design: &'a DesignMatrix) -> Self {
        let z = &design.z;
        let p = z.ncols();
        let gram_m = z.transpose() * z;
        let mut gram = vec![0.0; p * p];
        for r in 0..p {
            for c in 0..p {
                gram[r * p + c] = gram_m[(r, c)];
            }
        }
        let zty: Vec<f64> = (z.transpose() * &design.y).iter().copied().collect();
        let yty = design.y.dot(&design.y);
        let width = design.meta.groups.width();
        let unpenalized = (p > width).then_some((width, p - width));
        let max_block = design
            .meta
            .groups
            .sizes()
            .into_iter()
            .chain(unpenalized.map(|u| u.1))
            .max()
            .unwrap_or(1);
        Self {
            design,
            gram,
            zty,
            yty,
            n_coef: p,
            sizes: design.meta.groups.sizes(),
            unpenalized,
            scratch_a: vec![0.0; max_block * max_block],
            scratch_c: vec![0.0; max_block],
            scratch_w: vec![0.0; max_block],
        }
    }

    pub fn design(&self) -> &DesignMatrix {
        self.design
    }

    /// Residual sum of squares `||y - Z theta||^2` from the Gram form.
    pub fn rss(&self, theta: &[f64]) -> f64 {
        let p = self.n_coef;
        let mut quad = 0.0;
        let mut cross = 0.0;
        for r in 0..p {
            if theta[r] == 0.0 {
                continue;
            }
            let row = &self.gram[r * p..(r + 1) * p];
            quad += theta[r] * row.iter().zip(theta).map(|(g, t)| g * t).sum::<f64>();
            cross += theta[r] * self.zty[r];
        }
        (self.yty - 2.0 * cross + quad).max(0.0)
    }

    /// Fill `C = Z_b'(y - Z_{-b} theta_{-b})` and `A = Z_b'Z_b + ridge I` for block `b`,
    /// then Cholesky-factor `A` in place and solve for the summary terms.
    fn prepare_block(&mut self, start: usize, size: usize, ridge: f64, theta: &[f64]) -> Result<BlockSolve> {
        let p = self.n_coef;
        for i in 0..size {
            let r = start + i;
            let row = &self.gram[r * p..(r + 1) * p];
            let full: f64 = row.iter().zip(theta).map(|(g, t)| g * t).sum();
            let own: f64 = (0..size).map(|k| row[start + k] * theta[start + k]).sum();
            self.scratch_c[i] = self.zty[r] - (full - own);
            for k in 0..size {
                self.scratch_a[i * size + k] = row[start + k] + if i == k { ridge } else { 0.0 };
            }
        }
        cholesky_in_place(&mut self.scratch_a[..size * size], size)?;
        let l = &self.scratch_a[..size * size];
        // w = L^{-1} C.
        for i in 0..size {
            let s: f64 = (0..i).map(|k| l[i * size + k] * self.scratch_w[k]).sum();
            self.scratch_w[i] = (self.scratch_c[i] - s) / l[i * size + i];
        }
        let log_det = 2.0 * (0..size).map(|i| l[i * size + i].ln()).sum::<f64>();
        let quad = self.scratch_w[..size].iter().map(|v| v * v).sum();
        Ok(BlockSolve { log_det, quad })
    }

    /// Draw `N(A^{-1} C, sigma^2 A^{-1})` into `theta[start..start+size]` using the
    /// factor left by `prepare_block`.
    fn draw_block<R: Rng + ?Sized>(&mut self, start: usize, size: usize, sigma: f64, theta: &mut [f64], rng: &mut R) {
        let l = &self.scratch_a[..size * size];
        // Solve L' x = w + sigma z: mean A^{-1}C plus noise with covariance sigma^2 A^{-1}.
        for i in 0..size {
            self.scratch_w[i] += sigma * standard_normal(rng);
        }
        for i in (0..size).rev() {
            let s: f64 = (i + 1..size).map(|k| l[k * size + i] * theta[start + k]).sum();
            theta[start + i] = (self.scratch_w[i] - s) / l[i * size + i];
        }
    }

    /// Draw group `j` from its normal conditional given the rest of `state`.
    pub fn draw_group<R: Rng + ?Sized>(&mut self, state: &mut ChainState, j: usize, rng: &mut R) -> Result<()> {
        let (start, size) = *self
            .design
            .meta
            .groups
            .blocks()
            .get(j)
            .ok_or_else(|| Error::Shape(format!("no group {j}")))?;
        self.prepare_block(start, size, 1.0 / state.tau2[j], &state.theta)?;
        self.draw_block(start, size, state.sigma2.sqrt(), &mut state.theta, rng);
        Ok(())
    }

    /// One sweep of the chosen model.
    pub fn sweep<R: Rng + ?Sized>(
        &mut self,
        state: &mut ChainState,
        model: Model,
        hp: &Hyperparams,
        sa_cfg: &SaConfig,
        rng: &mut R,
    ) -> Result<SweepReport> {
        let sigma = state.sigma2.sqrt();
        let blocks = self.design.meta.groups.blocks().to_vec();

        for (j, &(start, size)) in blocks.iter().enumerate() {
            let solve = self.prepare_block(start, size, 1.0 / state.tau2[j], &state.theta)?;
            match model {
                Model::Agl => {
                    self.draw_block(start, size, sigma, &mut state.theta, rng);
                    state.gamma[j] = true;
                }
                Model::AglSs => {
                    let pi1 = spike_probability(state.pi0, state.tau2[j], size, solve.log_det, solve.quad, state.sigma2);
                    let spike = if pi1 <= 0.0 {
                        false
                    } else if pi1 >= 1.0 {
                        true
                    } else {
                        rng.random::<f64>() < pi1
                    };
                    if spike {
                        state.theta[start..start + size].fill(0.0);
                        state.gamma[j] = false;
                    } else {
                        self.draw_block(start, size, sigma, &mut state.theta, rng);
                        state.gamma[j] = true;
                    }
                }
            }
        }

        if let Some((start, size)) = self.unpenalized {
            self.prepare_block(start, size, 0.0, &state.theta)?;
            self.draw_block(start, size, sigma, &mut state.theta, rng);
        }

        for (j, &(start, size)) in blocks.iter().enumerate() {
            let norm = state.theta[start..start + size].iter().map(|v| v * v).sum::<f64>().sqrt();
            let lambda2 = state.lambda2[j];
            state.tau2[j] = if norm > 0.0 {
                let inv = sample_inv_gaussian(lambda2.sqrt() * sigma / norm, lambda2, rng)?;
                1.0 / inv
            } else {
                let (shape, rate) = tau2_prior(size, lambda2);
                sample_gamma(shape, rate, rng)?
            };
            if !(state.tau2[j] > 0.0 && state.tau2[j].is_finite()) {
                return Err(Error::numerical(format!("tau2[{j}] = {} is not positive and finite", state.tau2[j])));
            }
        }

        let penalized_width: usize = match model {
            Model::Agl => self.sizes.iter().sum(),
            Model::AglSs => self
                .sizes
                .iter()
                .zip(&state.gamma)
                .filter(|(_, g)| **g)
                .map(|(s, _)| *s)
                .sum(),
        };
        let shrink: f64 = blocks
            .iter()
            .zip(&state.tau2)
            .map(|(&(start, size), t)| state.theta[start..start + size].iter().map(|v| v * v).sum::<f64>() / t)
            .sum();
        let n = self.design.y.len() as f64;
        let shape = (n + penalized_width as f64 - 1.0) / 2.0 + hp.a1;
        let rate = 0.5 * self.rss(&state.theta) + 0.5 * shrink + hp.b1;
        state.sigma2 = sample_inv_gamma(shape, rate, rng)?;
        if !(state.sigma2 > 0.0 && state.sigma2.is_finite()) {
            return Err(Error::numerical(format!("sigma2 = {} is not positive and finite", state.sigma2)));
        }

        let mut report = SweepReport::default();
        match hp.tuning {
            TuningMode::FullBayes => {
                for (j, size) in self.sizes.iter().enumerate() {
                    let shape = (*size as f64 + 1.0) / 2.0 + hp.a2;
                    let rate = state.tau2[j] / 2.0 + hp.b2;
                    state.lambda2[j] = sample_gamma(shape, rate, rng)?;
                    state.sa.omega[j] = 0.5 * state.lambda2[j].ln();
                }
            }
            TuningMode::StochasticApproximation => {
                let outcome = sa_update(&state.sa, &state.tau2, &self.sizes, sa_cfg, rng)?;
                state.sa = outcome.state;
                state.lambda2 = lambda_of_omega(&state.sa.omega);
                if outcome.restarted {
                    self.redraw_from_prior(state, model, hp, rng)?;
                    report.restarted = true;
                }
            }
        }

        if model == Model::AglSs && hp.pi0_fixed.is_none() && !report.restarted {
            let (c, d) = hp.beta_prior(self.sizes.len());
            let active = state.gamma.iter().filter(|g| **g).count() as f64;
            let inactive = state.gamma.len() as f64 - active;
            state.pi0 = sample_beta(inactive + c, active + d, rng)?;
        }
        Ok(report)
    }

    /// Reset the chain parameters after a stochastic-approximation restart:
    /// `tau^2`, `sigma^2` and `pi0` from their priors, coefficients to zero.
    fn redraw_from_prior<R: Rng + ?Sized>(&self, state: &mut ChainState, model: Model, hp: &Hyperparams, rng: &mut R) -> Result<()> {
        for (j, size) in self.sizes.iter().enumerate() {
            let (shape, rate) = tau2_prior(*size, state.lambda2[j]);
            state.tau2[j] = sample_gamma(shape, rate, rng)?;
        }
        state.sigma2 = sample_inv_gamma(hp.a1, hp.b1, rng)?;
        if model == Model::AglSs {
            state.pi0 = match hp.pi0_fixed {
                Some(p) => p,
                None => {
                    let (c, d) = hp.beta_prior(self.sizes.len());
                    sample_beta(c, d, rng)?
                }
            };
        }
        state.theta.fill(0.0);
        state.gamma.fill(false);
        Ok(())
    }
}

/// In-place lower Cholesky factor of a row-major `n x n` matrix.
fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<()> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::numerical("block precision matrix is not positive definite"));
        }
        let ljj = d.sqrt();
        a[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / ljj;
        }
        for k in j + 1..n {
            a[j * n + k] = 0.0;
        }
    }
    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if (hi / lo).powi(2) > 1e14 {
        return Err(Error::numerical(format!(
            "block precision matrix is ill-conditioned (diagonal ratio {:.3e})",
            hi / lo
        )));
    }
    Ok(())
}

/// One AGL sweep.
pub fn gibbs_sweep_agl<R: Rng + ?Sized>(
    sampler: &mut Sampler<'_>,
    state: &mut ChainState,
    hp: &Hyperparams,
    sa_cfg: &SaConfig,
    rng: &mut R,
) -> Result<SweepReport> {
    sampler.sweep(state, Model::Agl, hp, sa_cfg, rng)
}

/// One AGL-SS sweep.
pub fn gibbs_sweep_agl_ss<R: Rng + ?Sized>(
    sampler: &mut Sampler<'_>,
    state: &mut ChainState,
    hp: &Hyperparams,
    sa_cfg: &SaConfig,
    rng: &mut R,
) -> Result<SweepReport> {
    sampler.sweep(state, Model::AglSs, hp, sa_cfg, rng)
}

/// Run a full chain and keep the thinned post-burn-in draws.
pub fn run_chain<R: Rng + ?Sized>(
    model: Model,
    design: &DesignMatrix,
    hp: &Hyperparams,
    schedule: Schedule,
    sa_cfg: &SaConfig,
    rng: &mut R,
) -> Result<PosteriorDraws> {
    let state = ChainState::initial(design, hp, sa_cfg);
    run_chain_from(model, design, hp, schedule, sa_cfg, state, rng)
}

/// [`run_chain`] from a caller-supplied initial state.
pub fn run_chain_from<R: Rng + ?Sized>(
    model: Model,
    design: &DesignMatrix,
    hp: &Hyperparams,
    schedule: Schedule,
    sa_cfg: &SaConfig,
    mut state: ChainState,
    rng: &mut R,
) -> Result<PosteriorDraws> {
    schedule.validate()?;
    hp.validate()?;
    if hp.tuning == TuningMode::StochasticApproximation {
        sa_cfg.validate()?;
    }
    let n_groups = design.meta.groups.n_groups();
    if state.theta.len() != design.meta.n_coef()
        || state.tau2.len() != n_groups
        || state.lambda2.len() != n_groups
        || state.gamma.len() != n_groups
        || state.sa.omega.len() != n_groups
    {
        return Err(Error::Shape("initial state does not match the design".into()));
    }
    let mut sampler = Sampler::new(design);
    let mut draws = Vec::with_capacity(schedule.n_stored());
    let mut omega_trace = Vec::with_capacity(schedule.iterations / schedule.thin + 1);
    let mut restarts = 0;

    for iteration in 1..=schedule.iterations {
        let report = sampler
            .sweep(&mut state, model, hp, sa_cfg, rng)
            .map_err(|e| e.at_iteration(iteration))?;
        if report.restarted {
            restarts += 1;
        }
        if iteration % schedule.thin == 0 {
            omega_trace.push((iteration, state.sa.omega.clone()));
        }
        if schedule.keeps(iteration) {
            draws.push(StoredDraw {
                theta: state.theta.clone(),
                tau2: state.tau2.clone(),
                sigma2: state.sigma2,
                lambda2: state.lambda2.clone(),
                pi0: (model == Model::AglSs).then_some(state.pi0),
                gamma: (model == Model::AglSs).then(|| state.gamma.clone()),
            });
        }
    }
    log::debug!("chain finished: {} draws, {restarts} restarts", draws.len());

    Ok(PosteriorDraws {
        model,
        schedule,
        draws,
        meta: design.meta.clone(),
        omega_trace,
        restarts,
        n_obs: design.n_rows(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midas::{DesignMatrix, GroupLayout};
    use crate::rng::RngHandle;
    use nalgebra::DMatrix;

    fn toy_design(z: &[f64], y: &[f64]) -> DesignMatrix {
        let n = y.len();
        let raw = DMatrix::from_column_slice(n, 1, z);
        let mut d = DesignMatrix::from_raw(raw, y, (0..n).collect(), GroupLayout::uniform(1, 1), vec![(0, 1)], 0).unwrap();
        // Use the raw column as given so Z'Z is under the test's control.
        d.z = DMatrix::from_column_slice(n, 1, z);
        d.y = nalgebra::DVector::from_column_slice(y);
        d
    }

    #[test]
    fn schedule_counts() {
        assert_eq!(Schedule::new(1000, 500, 5).unwrap().n_stored(), 100);
        assert!(Schedule::new(10, 10, 1).is_err());
        assert!(Schedule::new(10, 2, 0).is_err());
    }

    #[test]
    fn spike_probability_limits() {
        assert_eq!(spike_probability(0.0, 1.0, 2, 0.3, 5.0, 1.0), 0.0);
        assert_eq!(spike_probability(1.0, 1.0, 2, 0.3, 5.0, 1.0), 1.0);
        // C = 0, tau2 = 1, |A| = 1, pi0 = 1/2 -> exactly one half.
        assert_eq!(spike_probability(0.5, 1.0, 3, 0.0, 0.0, 2.0), 0.5);
    }

    #[test]
    fn spike_probability_no_overflow() {
        let p = spike_probability(0.5, 1.0, 2, 1.0, 1e6, 1e-3);
        assert!(p >= 0.0 && p < 1e-300);
        let q = spike_probability(0.5, 1e300, 2, 1.0, 0.0, 1.0);
        assert!(q > 0.999999);
    }

    #[test]
    fn conditional_mean_ridge_limits() {
        // Z'Z = 1 (single row z = 1), Z'y = y.
        let design = toy_design(&[1.0, 0.0], &[2.5, 0.0]);
        let mut sampler = Sampler::new(&design);
        let theta = [0.0];
        let solve = sampler.prepare_block(0, 1, 0.0, &theta).unwrap();
        // w = L^{-1} C with L = 1: mean = C = Z'y.
        assert!((sampler.scratch_w[0] - 2.5).abs() < 1e-15);
        assert!(solve.log_det.abs() < 1e-15);
        // tau2 = 1 -> A = 2: mean Z'y / 2, variance sigma^2 / 2.
        let solve = sampler.prepare_block(0, 1, 1.0, &theta).unwrap();
        let l = sampler.scratch_a[0];
        let mean = sampler.scratch_w[0] / l;
        assert!((mean - 1.25).abs() < 1e-12);
        assert!((solve.log_det - 2f64.ln()).abs() < 1e-12);
        assert!((1.0 / (l * l) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = vec![1.0, 2.0, 2.0, 1.0];
        assert!(cholesky_in_place(&mut a, 2).is_err());
        let mut b = vec![4.0, 2.0, 2.0, 3.0];
        cholesky_in_place(&mut b, 2).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-15);
        assert!((b[2] - 1.0).abs() < 1e-15);
        assert!((b[3] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ss_draws_have_exact_zeros() {
        let mut rng = RngHandle::new(3, 0);
        let n = 60;
        let z: Vec<f64> = (0..n * 4).map(|_| standard_normal(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|i| 2.0 * z[i] + standard_normal(&mut rng)).collect();
        let raw = DMatrix::from_column_slice(n, 4, &z);
        let design = DesignMatrix::from_raw(raw, &y, (0..n).collect(), GroupLayout::uniform(2, 2), vec![(0, 2), (2, 2)], 0).unwrap();
        let draws = run_chain(
            Model::AglSs,
            &design,
            &Hyperparams::default(),
            Schedule::new(600, 100, 1).unwrap(),
            &SaConfig::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(draws.len(), 500);
        for d in &draws.draws {
            let gamma = d.gamma.as_ref().unwrap();
            for (j, &(start, size)) in draws.meta.groups.blocks().iter().enumerate() {
                let zero = d.theta[start..start + size].iter().all(|v| v.to_bits() == 0);
                assert_eq!(!gamma[j], zero);
            }
            assert!(d.pi0.unwrap() > 0.0 && d.pi0.unwrap() < 1.0);
        }
    }
}
