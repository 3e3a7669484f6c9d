//! Simulated mixed-frequency data and the Monte Carlo replication harness.
//!
//! High-frequency predictors follow `x_t = mu + rho x_{t-1/m} + eps_t` with
//! `Cov(eps_k, eps_k') = sigma_eps^|k-k'|`. The response is
//! `y_t = alpha + sum_k beta_k sum_c w(c) x_{k, t-c/m} + sigma e_t`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_panel, FitSpec};
use crate::forecast::{ForecastRecord, ModelScores, ScoreTable};
use crate::inference::{compute_metrics, Confusion, MetricsReport};
use crate::midas::{recover_slopes, MixedFreqPanel};
use crate::rng::{standard_normal, RngHandle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    FastDecay,
    SlowDecay,
    NearFlat,
}

impl WeightScheme {
    /// Exponential Almon parameters `(a1, a2)`.
    pub fn params(self) -> (f64, f64) {
        match self {
            WeightScheme::FastDecay => (-0.6, 0.0),
            WeightScheme::SlowDecay => (-0.12, 0.0),
            WeightScheme::NearFlat => (-0.008, 0.0),
        }
    }

    /// Weight scheme of the numbered simulation designs 1 to 3.
    pub fn for_dgp(dgp: usize) -> Result<Self> {
        match dgp {
            1 => Ok(WeightScheme::FastDecay),
            2 => Ok(WeightScheme::SlowDecay),
            3 => Ok(WeightScheme::NearFlat),
            other => Err(Error::Config(format!("unknown DGP {other} (expected 1, 2 or 3)"))),
        }
    }
}

/// Normalized exponential Almon weights `w_c ∝ exp(a1 c + a2 c^2)`, `c = 0..C`.
pub fn weight_scheme(kind: WeightScheme, lag_window: usize) -> Result<Vec<f64>> {
    if lag_window < 2 {
        return Err(Error::Config("weight schemes need a lag window of at least 2".into()));
    }
    let (a1, a2) = kind.params();
    let raw: Vec<f64> = (0..lag_window)
        .map(|c| {
            let c = c as f64;
            (a1 * c + a2 * c * c).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum NoiseSpec {
    /// `sigma^2 = ratio * var(signal)`, recomputed for every dataset.
    NoiseToSignal(f64),
    FixedSd(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorProcess {
    /// Cross-correlated high-frequency AR(1).
    Ar1,
    /// Independent standard normal draws.
    IidNormal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n_predictors: usize,
    pub m: usize,
    pub lag_window: usize,
    /// In-sample low-frequency periods.
    pub t_obs: usize,
    /// Extra periods generated after the sample, for out-of-sample scoring.
    pub holdout: usize,
    pub weight_scheme: WeightScheme,
    pub process: PredictorProcess,
    pub rho: f64,
    pub mu: f64,
    pub sigma_eps: f64,
    pub beta_true: Vec<f64>,
    pub alpha: f64,
    pub noise: NoiseSpec,
    /// High-frequency periods simulated and discarded before the sample.
    pub hf_burn_in: usize,
}

/// Slopes of the simulation designs; predictors beyond ten are inactive.
pub const BASE_BETA: [f64; 10] = [0.0, 0.3, 0.5, 0.0, 0.3, 0.5, 0.0, 0.0, 0.8, 0.0];

impl DgpConfig {
    /// Simulation design `dgp` (1 fast, 2 slow, 3 near-flat weights) with
    /// `m = 3`, `C = 24`, `T = 200` and one held-out period.
    pub fn simulation(dgp: usize, n_predictors: usize, sigma_eps: f64) -> Result<Self> {
        let mut beta_true = vec![0.0; n_predictors];
        for (b, v) in beta_true.iter_mut().zip(BASE_BETA) {
            *b = v;
        }
        let cfg = Self {
            n_predictors,
            m: 3,
            lag_window: 24,
            t_obs: 200,
            holdout: 1,
            weight_scheme: WeightScheme::for_dgp(dgp)?,
            process: PredictorProcess::Ar1,
            rho: 0.9,
            mu: 0.1,
            sigma_eps,
            beta_true,
            alpha: 0.5,
            noise: NoiseSpec::NoiseToSignal(0.2),
            hf_burn_in: 200,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Four i.i.d. standard normal predictors, only the second active with
    /// unit slope, unit noise, fast-decaying weights over 12 lags, `T = 500`.
    pub fn illustration() -> Self {
        Self {
            n_predictors: 4,
            m: 3,
            lag_window: 12,
            t_obs: 500,
            holdout: 0,
            weight_scheme: WeightScheme::FastDecay,
            process: PredictorProcess::IidNormal,
            rho: 0.0,
            mu: 0.0,
            sigma_eps: 0.5,
            beta_true: vec![0.0, 1.0, 0.0, 0.0],
            alpha: 0.0,
            noise: NoiseSpec::FixedSd(1.0),
            hf_burn_in: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_predictors == 0 || self.beta_true.len() != self.n_predictors {
            return Err(Error::Config("beta_true must have one entry per predictor".into()));
        }
        if self.m == 0 || self.t_obs < 2 {
            return Err(Error::Config("need m >= 1 and at least two in-sample periods".into()));
        }
        if self.lag_window < 2 {
            return Err(Error::Config("lag window must be at least 2".into()));
        }
        if self.process == PredictorProcess::Ar1 {
            if !(self.rho.abs() < 1.0) {
                return Err(Error::Config(format!("|rho| must be below 1, got {}", self.rho)));
            }
            if !(self.sigma_eps > 0.0 && self.sigma_eps < 1.0) {
                return Err(Error::Config(format!("sigma_eps must lie in (0, 1), got {}", self.sigma_eps)));
            }
        }
        match self.noise {
            NoiseSpec::NoiseToSignal(r) if !(r > 0.0) => Err(Error::Config("noise-to-signal ratio must be positive".into())),
            NoiseSpec::FixedSd(s) if !(s >= 0.0) => Err(Error::Config("noise sd must be non-negative".into())),
            _ => Ok(()),
        }
    }

    /// High-frequency observations before the first low-frequency period,
    /// so that period 0 already has a full lag window.
    pub fn head(&self) -> usize {
        self.lag_window.saturating_sub(self.m)
    }
}

#[derive(Clone, Debug)]
pub struct SimulatedDataset {
    /// Panel with responses for all `t_obs + holdout` periods.
    pub panel: MixedFreqPanel,
    pub beta_true: Vec<f64>,
    pub sigma_used: f64,
    pub weights_used: Vec<f64>,
    /// Systematic component `alpha + sum_k beta_k x~_k` per period.
    pub signal: Vec<f64>,
    pub t_obs: usize,
}

impl SimulatedDataset {
    /// The panel restricted to the in-sample responses.
    pub fn training_panel(&self) -> MixedFreqPanel {
        self.panel.with_response_len(self.t_obs)
    }

    /// Realized `sigma^2 / var(signal)`.
    pub fn noise_to_signal(&self) -> f64 {
        self.sigma_used.powi(2) / sample_variance(&self.signal)
    }
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Toeplitz innovation covariance `sigma_eps^|k-k'|`.
pub fn innovation_covariance(k: usize, sigma_eps: f64) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| sigma_eps.powi((i as i32 - j as i32).abs()))
}

fn simulate_predictors<R: Rng + ?Sized>(cfg: &DgpConfig, len: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let k = cfg.n_predictors;
    match cfg.process {
        PredictorProcess::IidNormal => Ok((0..k).map(|_| (0..len).map(|_| standard_normal(rng)).collect()).collect()),
        PredictorProcess::Ar1 => {
            let chol = innovation_covariance(k, cfg.sigma_eps)
                .cholesky()
                .ok_or_else(|| Error::numerical("innovation covariance is not positive definite"))?;
            let l = chol.l();
            let mut x = vec![Vec::with_capacity(len); k];
            let mut state = DVector::from_element(k, cfg.mu / (1.0 - cfg.rho));
            for step in 0..cfg.hf_burn_in + len {
                let z = DVector::from_fn(k, |_, _| standard_normal(rng));
                let eps = &l * z;
                state = state.map(|v| cfg.mu + cfg.rho * v) + eps;
                if step >= cfg.hf_burn_in {
                    for (series, v) in x.iter_mut().zip(state.iter()) {
                        series.push(*v);
                    }
                }
            }
            Ok(x)
        }
    }
}

/// Simulate one dataset.
///
/// With a noise-to-signal target and all slopes zero the signal is constant
/// and [`Error::DegenerateSignal`] is returned.
pub fn generate_dataset<R: Rng + ?Sized>(cfg: &DgpConfig, rng: &mut R) -> Result<SimulatedDataset> {
    cfg.validate()?;
    let weights = weight_scheme(cfg.weight_scheme, cfg.lag_window)?;
    let head = cfg.head();
    let n_periods = cfg.t_obs + cfg.holdout;
    let len = head + n_periods * cfg.m;
    let x = simulate_predictors(cfg, len, rng)?;

    let signal: Vec<f64> = (0..n_periods)
        .map(|t| {
            let lag0 = head + (t + 1) * cfg.m - 1;
            cfg.alpha
                + x.iter()
                    .zip(&cfg.beta_true)
                    .filter(|(_, b)| **b != 0.0)
                    .map(|(series, b)| b * weights.iter().enumerate().map(|(c, w)| w * series[lag0 - c]).sum::<f64>())
                    .sum::<f64>()
        })
        .collect();

    let sigma = match cfg.noise {
        NoiseSpec::FixedSd(s) => s,
        NoiseSpec::NoiseToSignal(ratio) => {
            let var = sample_variance(&signal);
            if cfg.beta_true.iter().all(|b| *b == 0.0) || !(var > 0.0) {
                return Err(Error::DegenerateSignal);
            }
            (ratio * var).sqrt()
        }
    };
    let y: Vec<f64> = signal.iter().map(|s| s + sigma * standard_normal(rng)).collect();
    let panel = MixedFreqPanel::new(y, x, cfg.m, cfg.lag_window, 0, head)?;
    Ok(SimulatedDataset {
        panel,
        beta_true: cfg.beta_true.clone(),
        sigma_used: sigma,
        weights_used: weights,
        signal,
        t_obs: cfg.t_obs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub dgp: DgpConfig,
    pub fit: FitSpec,
    pub replications: usize,
    pub seed: u64,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub index: usize,
    pub included: Vec<bool>,
    pub tpr: f64,
    pub fpr: f64,
    pub mcc: f64,
    pub sigma_used: f64,
    pub restarts: u64,
    pub point: f64,
    pub realized: f64,
    pub crps: f64,
    pub log_score: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub metrics: MetricsReport,
    pub scores: ScoreTable,
    /// Average realized noise sd across successful replications.
    pub sigma_bar: f64,
    pub replications: Vec<ReplicationSummary>,
    pub failures: Vec<(usize, String)>,
}

struct ReplicationOutcome {
    summary: ReplicationSummary,
    beta_draws: DMatrix<f64>,
    record: ForecastRecord,
}

fn run_replication(cfg: &MonteCarloConfig, index: usize) -> Result<ReplicationOutcome> {
    let mut rng = RngHandle::new(cfg.seed, index as u64);
    let data = generate_dataset(&cfg.dgp, &mut rng)?;
    if cfg.dgp.holdout == 0 {
        return Err(Error::Config("Monte Carlo scoring needs at least one held-out period".into()));
    }
    let train = data.training_panel();
    let fitted = fit_panel(&train, &cfg.fit, None, &mut rng)?;
    let beta_draws = recover_slopes(&fitted.draws, &fitted.basis)?;
    let record = fitted.forecast(&data.panel, None, data.t_obs, &mut rng)?;
    let realized = record.realized.expect("held-out period has a response");
    let truth: Vec<bool> = data.beta_true.iter().map(|b| *b != 0.0).collect();
    let confusion = Confusion::new(&fitted.selection.included, &truth);
    let summary = ReplicationSummary {
        index,
        included: fitted.selection.included.clone(),
        tpr: confusion.tpr(),
        fpr: confusion.fpr(),
        mcc: confusion.mcc(),
        sigma_used: data.sigma_used,
        restarts: fitted.draws.restarts,
        point: record.point,
        realized,
        crps: crate::forecast::crps(&record.draws, realized)?,
        log_score: crate::forecast::log_score(&record.draws, realized)?,
    };
    Ok(ReplicationOutcome {
        summary,
        beta_draws,
        record,
    })
}

/// Run `replications` independent generate-fit-select-forecast pipelines.
///
/// Replication `r` draws everything from stream `r` of `seed`, so results do
/// not depend on the worker count and a longer run extends a shorter one.
pub fn run_monte_carlo(cfg: &MonteCarloConfig) -> Result<MonteCarloReport> {
    if cfg.replications == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    cfg.dgp.validate()?;
    cfg.fit.schedule.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let results: Vec<(usize, Result<ReplicationOutcome>)> = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| (r, run_replication(cfg, r)))
            .collect()
    });

    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in results {
        match res {
            Ok(o) => outcomes.push(o),
            Err(e) => {
                log::warn!("replication {r} failed: {e}");
                failures.push((r, e.to_string()));
            }
        }
    }
    if outcomes.is_empty() {
        return Err(Error::InsufficientData(format!("all {} replications failed", cfg.replications)));
    }
    let draws: Vec<DMatrix<f64>> = outcomes.iter().map(|o| o.beta_draws.clone()).collect();
    let selections: Vec<Vec<bool>> = outcomes.iter().map(|o| o.summary.included.clone()).collect();
    let metrics = compute_metrics(&draws, &cfg.dgp.beta_true, &selections)?;

    let n = outcomes.len() as f64;
    let records: Vec<ForecastRecord> = outcomes.iter().map(|o| o.record.clone()).collect();
    let points: Vec<f64> = records.iter().map(|r| r.point).collect();
    let ys: Vec<f64> = outcomes.iter().map(|o| o.summary.realized).collect();
    let scores = ScoreTable {
        models: vec![ModelScores {
            model: cfg.fit.model.name().to_string(),
            n: outcomes.len(),
            rmsfe: crate::forecast::rmsfe(&points, &ys)?,
            avg_log_score: outcomes.iter().map(|o| o.summary.log_score).sum::<f64>() / n,
            avg_crps: outcomes.iter().map(|o| o.summary.crps).sum::<f64>() / n,
        }],
        dmw: Vec::new(),
    };
    Ok(MonteCarloReport {
        metrics,
        scores,
        sigma_bar: outcomes.iter().map(|o| o.summary.sigma_used).sum::<f64>() / n,
        replications: outcomes.into_iter().map(|o| o.summary).collect(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for kind in [WeightScheme::FastDecay, WeightScheme::SlowDecay, WeightScheme::NearFlat] {
            for c in [2, 12, 24] {
                let w = weight_scheme(kind, c).unwrap();
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(w.iter().all(|v| *v > 0.0));
            }
        }
        assert!(weight_scheme(WeightScheme::FastDecay, 1).is_err());
    }

    #[test]
    fn fast_decay_tail_mass() {
        let w = weight_scheme(WeightScheme::FastDecay, 24).unwrap();
        assert!(w[8..].iter().sum::<f64>() < 0.02);
    }

    #[test]
    fn near_flat_spread() {
        let w = weight_scheme(WeightScheme::NearFlat, 24).unwrap();
        let max = w.iter().copied().fold(f64::MIN, f64::max);
        let min = w.iter().copied().fold(f64::MAX, f64::min);
        assert!(max - min < 0.25 * max);
        assert!(w[23] / w[0] > 0.8);
    }

    #[test]
    fn zero_beta_is_degenerate() {
        let mut cfg = DgpConfig::simulation(1, 10, 0.5).unwrap();
        cfg.beta_true = vec![0.0; 10];
        let err = generate_dataset(&cfg, &mut RngHandle::new(1, 0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateSignal));
    }

    #[test]
    fn noise_to_signal_is_exact() {
        let cfg = DgpConfig::simulation(1, 30, 0.5).unwrap();
        let d = generate_dataset(&cfg, &mut RngHandle::new(4, 0)).unwrap();
        assert!((d.noise_to_signal() - 0.2).abs() < 1e-12);
        assert_eq!(d.panel.y().len(), 201);
        assert_eq!(d.training_panel().y().len(), 200);
        assert_eq!(d.panel.first_usable(), 0);
    }

    #[test]
    fn large_k_extends_beta_with_zeros() {
        let cfg = DgpConfig::simulation(2, 50, 0.95).unwrap();
        assert_eq!(&cfg.beta_true[..10], &BASE_BETA);
        assert!(cfg.beta_true[10..].iter().all(|b| *b == 0.0));
    }
}
