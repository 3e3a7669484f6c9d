//! Bayesian MIDAS regressions with adaptive group-lasso shrinkage.
//!
//! The crate covers the Almon lag design ([`midas`]), Gibbs samplers for
//! the adaptive group lasso and its spike-and-slab variant ([`gibbs`]),
//! stochastic-approximation tuning of the penalties ([`tune`]), posterior
//! selection and metrics ([`inference`]), predictive scoring
//! ([`forecast`]) and the simulation harness ([`sim`]).

pub mod error;
pub mod fit;
pub mod forecast;
pub mod gibbs;
pub mod inference;
pub mod midas;
pub mod prior;
pub mod rng;
pub mod sim;
pub mod tune;

pub use error::{Error, Result};
pub use fit::{fit_panel, FitModel, FitSpec, Fitted};
pub use forecast::{crps, dmw_test, log_score, predictive_draws, DmwResult, ForecastRecord, LossKind, ScoreTable};
pub use gibbs::{run_chain, run_chain_from, ChainState, Hyperparams, Model, PosteriorDraws, Schedule, StoredDraw, TuningMode};
pub use inference::{compute_metrics, select_credible_interval, select_posterior_median, MetricsReport, SelectionCriterion, SelectionReport};
pub use midas::{almon_basis, build_design, AlmonBasis, DesignMatrix, DesignMeta, GroupLayout, MixedFreqPanel, RestrictionKind};
pub use rng::RngHandle;
pub use sim::{generate_dataset, run_monte_carlo, DgpConfig, MonteCarloConfig, MonteCarloReport, NoiseSpec, SimulatedDataset, WeightScheme};
pub use tune::{lambda_of_omega, omega_stabilized, sa_update, SaConfig, SaState};
