//! Run configuration. Values resolve as defaults, then the TOML config file,
//! then command-line flags; the resolved result is written to every output
//! directory as `manifest.toml` and can be replayed with `bmidas run`.

use std::path::{Path, PathBuf};

use bmidas::{DgpConfig, FitModel, FitSpec, Hyperparams, SaConfig, Schedule, WeightScheme};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::ingest::{Alignment, DateConvention, IngestSpec};

pub const OUT_ENV: &str = "BMIDAS_OUT";
pub const DEFAULT_OUT: &str = "bmidas-out";
pub const MANIFEST: &str = "manifest.toml";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Simulate,
    #[default]
    Fit,
    Forecast,
    Evaluate,
    Montecarlo,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::Fit => "fit",
            CommandKind::Forecast => "forecast",
            CommandKind::Evaluate => "evaluate",
            CommandKind::Montecarlo => "montecarlo",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawsFormat {
    #[default]
    Csv,
    Binary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandKind,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    pub hyper: Hyperparams,
    pub sa: SaConfig,
    pub simulate: SimulateConfig,
    pub forecast: ForecastConfig,
    pub evaluate: EvaluateConfig,
    pub montecarlo: MonteCarloSection,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: CommandKind::Fit,
            seed: 1,
            out_dir: None,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            schedule: ScheduleConfig::default(),
            hyper: Hyperparams::default(),
            sa: SaConfig::default(),
            simulate: SimulateConfig::default(),
            forecast: ForecastConfig::default(),
            evaluate: EvaluateConfig::default(),
            montecarlo: MonteCarloSection::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub low_freq: Option<PathBuf>,
    pub high_freq: Option<PathBuf>,
    pub date_column: String,
    pub date_format: String,
    /// Response column; defaults to the first non-date column.
    pub target: Option<String>,
    /// Predictor columns; empty means every non-date column.
    pub predictors: Vec<String>,
    /// Low-frequency columns entering the design without a penalty.
    pub unpenalized: Vec<String>,
    pub convention: DateConvention,
}

impl Default for DataConfig {
    fn default() -> Self {
        let spec = IngestSpec::default();
        Self {
            low_freq: None,
            high_freq: None,
            date_column: spec.date_column,
            date_format: spec.date_format,
            target: spec.target,
            predictors: spec.predictors,
            unpenalized: spec.unpenalized,
            convention: spec.convention,
        }
    }
}

impl DataConfig {
    pub fn ingest_spec(&self) -> IngestSpec {
        IngestSpec {
            date_column: self.date_column.clone(),
            date_format: self.date_format.clone(),
            target: self.target.clone(),
            predictors: self.predictors.clone(),
            unpenalized: self.unpenalized.clone(),
            convention: self.convention,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub model: FitModel,
    /// Almon polynomial degree `p`.
    pub degree: usize,
    /// Endpoint restrictions `r` (0, 1 or 2).
    pub restrictions: usize,
    /// Lag window `C` in high-frequency periods.
    pub lag_window: usize,
    /// Frequency ratio `m`.
    pub m: usize,
    /// Forecast horizon in high-frequency steps (`h = steps / m`).
    pub horizon_steps: usize,
    /// Credible level for interval selection and reported bands.
    pub level: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            model: FitModel::AglSs,
            degree: 3,
            restrictions: 2,
            lag_window: 24,
            m: 3,
            horizon_steps: 0,
            level: 0.95,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            burn_in: 10_000,
            thin: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Use the four-predictor illustration design instead of a numbered DGP.
    pub illustration: bool,
    pub dgp: usize,
    pub n_predictors: usize,
    pub sigma_eps: f64,
    pub t_obs: Option<usize>,
    pub holdout: Option<usize>,
    /// Calendar month of the first high-frequency observation.
    pub start: String,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            illustration: false,
            dgp: 1,
            n_predictors: 30,
            sigma_eps: 0.5,
            t_obs: None,
            holdout: None,
            start: "1960-01-01".into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    /// Number of response periods in the first estimation window; defaults
    /// to half the sample.
    pub first_origin: Option<usize>,
    /// Also forecast the periods past the last response.
    pub out_of_sample: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRun {
    pub name: String,
    pub dir: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub runs: Vec<EvalRun>,
    pub benchmark: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSection {
    pub replications: usize,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        Self {
            replications: 50,
            workers: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub draws_format: DrawsFormat,
    /// Write per-date predictive draws from `forecast`.
    pub predictive_draws: bool,
    pub omega_trace: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            draws_format: DrawsFormat::Csv,
            predictive_draws: true,
            omega_trace: true,
        }
    }
}

impl RunConfig {
    /// Parse a TOML config; relative data paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(inner) = p {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        };
        rebase(&mut cfg.data.low_freq);
        rebase(&mut cfg.data.high_freq);
        rebase(&mut cfg.out_dir);
        for run in &mut cfg.evaluate.runs {
            if run.dir.is_relative() {
                run.dir = base.join(&run.dir);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| CliError::Config(format!("cannot serialize manifest: {e}")))
    }

    /// Output directory: explicit setting, then `$BMIDAS_OUT`, then `bmidas-out`.
    pub fn resolve_out_dir(&mut self) -> PathBuf {
        if self.out_dir.is_none() {
            let dir = std::env::var_os(OUT_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            self.out_dir = Some(dir);
        }
        self.out_dir.clone().expect("set above")
    }

    pub fn alignment(&self) -> Alignment {
        Alignment {
            m: self.model.m,
            lag_window: self.model.lag_window,
            horizon_steps: self.model.horizon_steps,
        }
    }

    pub fn schedule(&self) -> Result<Schedule> {
        let s = self.schedule;
        Ok(Schedule::new(s.iterations, s.burn_in, s.thin)?)
    }

    pub fn fit_spec(&self) -> Result<FitSpec> {
        let mut spec = FitSpec::new(self.model.model, self.model.degree, self.model.restrictions, self.schedule()?);
        spec.hyper = self.hyper.clone();
        spec.sa = self.sa.clone();
        spec.level = self.model.level;
        Ok(spec)
    }

    /// Data-generating process for `simulate` and `montecarlo`. The model
    /// section supplies `m` and `C`.
    pub fn dgp(&self) -> Result<DgpConfig> {
        let s = &self.simulate;
        let mut dgp = if s.illustration {
            DgpConfig::illustration()
        } else {
            let mut d = DgpConfig::simulation(s.dgp, s.n_predictors, s.sigma_eps)?;
            d.m = self.model.m;
            d.lag_window = self.model.lag_window;
            d.weight_scheme = WeightScheme::for_dgp(s.dgp)?;
            d
        };
        if let Some(t) = s.t_obs {
            dgp.t_obs = t;
        }
        if let Some(h) = s.holdout {
            dgp.holdout = h;
        }
        dgp.validate()?;
        Ok(dgp)
    }

    pub fn start_date(&self) -> Result<chrono::NaiveDate> {
        chrono::NaiveDate::parse_from_str(&self.simulate.start, "%Y-%m-%d")
            .map_err(|e| CliError::Config(format!("simulate.start {:?}: {e}", self.simulate.start)))
    }

    /// Checks that do not depend on input files.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if m.m == 0 || m.lag_window == 0 {
            return Err(CliError::Config("model.m and model.lag_window must be positive".into()));
        }
        if !(m.level > 0.0 && m.level < 1.0) {
            return Err(CliError::Config(format!("model.level must lie in (0, 1), got {}", m.level)));
        }
        self.schedule()?;
        self.hyper.validate()?;
        self.sa.validate()?;
        bmidas::almon_basis(m.degree, m.lag_window, m.restrictions)?;
        match self.command {
            CommandKind::Fit | CommandKind::Forecast => {
                if self.data.low_freq.is_none() || self.data.high_freq.is_none() {
                    return Err(CliError::Config("data.low_freq and data.high_freq are required".into()));
                }
            }
            CommandKind::Simulate | CommandKind::Montecarlo => {
                self.dgp()?;
                self.start_date()?;
                if self.command == CommandKind::Montecarlo && self.montecarlo.replications == 0 {
                    return Err(CliError::Config("montecarlo.replications must be positive".into()));
                }
            }
            CommandKind::Evaluate => {
                if self.evaluate.runs.is_empty() {
                    return Err(CliError::Config("evaluate needs at least one run".into()));
                }
                if let Some(b) = &self.evaluate.benchmark {
                    if !self.evaluate.runs.iter().any(|r| &r.name == b) {
                        return Err(CliError::Config(format!("benchmark {b:?} is not among the runs")));
                    }
                }
            }
        }
        Ok(())
    }
}
