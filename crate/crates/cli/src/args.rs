use std::path::PathBuf;

use bmidas::FitModel;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{CommandKind, DrawsFormat, EvalRun, RunConfig};
use crate::error::{CliError, Result};
use crate::ingest::DateConvention;

#[derive(Debug, Parser)]
#[command(name = "bmidas", version, about = "Bayesian MIDAS group-lasso regressions: fit, forecast, evaluate and simulate")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory [default: config value, then $BMIDAS_OUT, then ./bmidas-out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a simulated mixed-frequency dataset.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Fit a model and report variable selection.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[arg(long, value_enum)]
        draws_format: Option<FormatArg>,
    },
    /// Expanding-window forecasts with predictive densities and scores.
    Forecast {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        schedule: ScheduleArgs,
        /// Response periods in the first estimation window.
        #[arg(long)]
        first_origin: Option<usize>,
        /// Also forecast periods past the last response.
        #[arg(long)]
        out_of_sample: bool,
        /// Skip the per-date predictive draws file.
        #[arg(long)]
        no_predictive: bool,
    },
    /// Score forecast runs against each other.
    Evaluate {
        /// A forecast run as NAME=DIR; repeat for each model.
        #[arg(long = "run", value_parser = parse_run)]
        runs: Vec<EvalRun>,
        /// Model that relative scores are computed against.
        #[arg(long)]
        benchmark: Option<String>,
        /// Forecast horizon in high-frequency steps.
        #[arg(short = 'H', long)]
        horizon_steps: Option<usize>,
        #[arg(short = 'm', long)]
        m: Option<usize>,
    },
    /// Monte Carlo replications of a simulation design.
    Montecarlo {
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        schedule: ScheduleArgs,
        /// Number of replications.
        #[arg(long = "R", alias = "replications")]
        replications: Option<usize>,
        /// Worker threads (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Execute the command recorded in a config or manifest file.
    Run,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelArg {
    Agl,
    #[value(name = "agl_ss", alias = "agl-ss")]
    AglSs,
    Al,
}

impl From<ModelArg> for FitModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Agl => FitModel::Agl,
            ModelArg::AglSs => FitModel::AglSs,
            ModelArg::Al => FitModel::Al,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Csv,
    Binary,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ConventionArg {
    PeriodEnd,
    PeriodStart,
}

#[derive(Debug, Default, Args)]
pub struct DataArgs {
    /// Low-frequency CSV (date column plus response).
    #[arg(long)]
    pub low_freq: Option<PathBuf>,
    /// High-frequency CSV (date column plus predictors).
    #[arg(long)]
    pub high_freq: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub date_column: Option<String>,
    #[arg(long)]
    pub date_format: Option<String>,
    #[arg(long, value_enum)]
    pub convention: Option<ConventionArg>,
    /// Low-frequency column kept outside the penalty; repeatable.
    #[arg(long)]
    pub unpenalized: Vec<String>,
}

#[derive(Debug, Default, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Almon polynomial degree p.
    #[arg(short = 'p', long)]
    pub degree: Option<usize>,
    /// Endpoint restrictions r.
    #[arg(short = 'r', long)]
    pub restrictions: Option<usize>,
    /// Lag window C in high-frequency periods.
    #[arg(short = 'C', long = "lag-window")]
    pub lag_window: Option<usize>,
    /// Frequency ratio m.
    #[arg(short = 'm', long)]
    pub m: Option<usize>,
    /// Horizon in high-frequency steps.
    #[arg(short = 'H', long)]
    pub horizon_steps: Option<usize>,
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct ScheduleArgs {
    /// Total Gibbs iterations S.
    #[arg(short = 'S', long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
}

#[derive(Debug, Default, Args)]
pub struct SimArgs {
    /// Simulation design 1, 2 or 3.
    #[arg(long)]
    pub dgp: Option<usize>,
    /// Number of predictors.
    #[arg(long = "K", alias = "n-predictors")]
    pub n_predictors: Option<usize>,
    /// Cross-predictor innovation correlation.
    #[arg(long)]
    pub sigma_eps: Option<f64>,
    /// In-sample low-frequency periods.
    #[arg(long = "T", alias = "t-obs")]
    pub t_obs: Option<usize>,
    #[arg(long)]
    pub holdout: Option<usize>,
    /// Use the four-predictor illustration design.
    #[arg(long)]
    pub illustration: bool,
}

fn parse_run(s: &str) -> std::result::Result<EvalRun, String> {
    let (name, dir) = s.split_once('=').ok_or_else(|| format!("expected NAME=DIR, got {s:?}"))?;
    if name.is_empty() || dir.is_empty() {
        return Err(format!("expected NAME=DIR, got {s:?}"));
    }
    Ok(EvalRun {
        name: name.to_string(),
        dir: PathBuf::from(dir),
    })
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl DataArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let d = &mut cfg.data;
        if self.low_freq.is_some() {
            d.low_freq = self.low_freq;
        }
        if self.high_freq.is_some() {
            d.high_freq = self.high_freq;
        }
        if self.target.is_some() {
            d.target = self.target;
        }
        set(&mut d.date_column, self.date_column);
        set(&mut d.date_format, self.date_format);
        set(
            &mut d.convention,
            self.convention.map(|c| match c {
                ConventionArg::PeriodEnd => DateConvention::PeriodEnd,
                ConventionArg::PeriodStart => DateConvention::PeriodStart,
            }),
        );
        if !self.unpenalized.is_empty() {
            d.unpenalized = self.unpenalized;
        }
    }
}

impl ModelArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let m = &mut cfg.model;
        set(&mut m.model, self.model.map(FitModel::from));
        set(&mut m.degree, self.degree);
        set(&mut m.restrictions, self.restrictions);
        set(&mut m.lag_window, self.lag_window);
        set(&mut m.m, self.m);
        set(&mut m.horizon_steps, self.horizon_steps);
        set(&mut m.level, self.level);
    }
}

impl ScheduleArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let s = &mut cfg.schedule;
        set(&mut s.iterations, self.iterations);
        set(&mut s.burn_in, self.burn_in);
        set(&mut s.thin, self.thin);
    }
}

impl SimArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let s = &mut cfg.simulate;
        set(&mut s.dgp, self.dgp);
        set(&mut s.n_predictors, self.n_predictors);
        set(&mut s.sigma_eps, self.sigma_eps);
        if self.t_obs.is_some() {
            s.t_obs = self.t_obs;
        }
        if self.holdout.is_some() {
            s.holdout = self.holdout;
        }
        if self.illustration {
            s.illustration = true;
            // The illustration design fixes its own lag structure.
            let d = bmidas::DgpConfig::illustration();
            cfg.model.m = d.m;
            cfg.model.lag_window = d.lag_window;
        }
    }
}

impl Cli {
    /// Resolve defaults, the config file and flags into one configuration.
    pub fn resolve(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if self.out.is_some() {
            cfg.out_dir = self.out;
        }
        match self.command {
            Command::Simulate { sim, model } => {
                cfg.command = CommandKind::Simulate;
                sim.apply(&mut cfg);
                model.apply(&mut cfg);
            }
            Command::Fit {
                data,
                model,
                schedule,
                draws_format,
            } => {
                cfg.command = CommandKind::Fit;
                data.apply(&mut cfg);
                model.apply(&mut cfg);
                schedule.apply(&mut cfg);
                set(
                    &mut cfg.output.draws_format,
                    draws_format.map(|f| match f {
                        FormatArg::Csv => DrawsFormat::Csv,
                        FormatArg::Binary => DrawsFormat::Binary,
                    }),
                );
            }
            Command::Forecast {
                data,
                model,
                schedule,
                first_origin,
                out_of_sample,
                no_predictive,
            } => {
                cfg.command = CommandKind::Forecast;
                data.apply(&mut cfg);
                model.apply(&mut cfg);
                schedule.apply(&mut cfg);
                if first_origin.is_some() {
                    cfg.forecast.first_origin = first_origin;
                }
                if out_of_sample {
                    cfg.forecast.out_of_sample = true;
                }
                if no_predictive {
                    cfg.output.predictive_draws = false;
                }
            }
            Command::Evaluate {
                runs,
                benchmark,
                horizon_steps,
                m,
            } => {
                cfg.command = CommandKind::Evaluate;
                if !runs.is_empty() {
                    cfg.evaluate.runs = runs;
                }
                if benchmark.is_some() {
                    cfg.evaluate.benchmark = benchmark;
                }
                set(&mut cfg.model.horizon_steps, horizon_steps);
                set(&mut cfg.model.m, m);
            }
            Command::Montecarlo {
                sim,
                model,
                schedule,
                replications,
                workers,
            } => {
                cfg.command = CommandKind::Montecarlo;
                sim.apply(&mut cfg);
                model.apply(&mut cfg);
                schedule.apply(&mut cfg);
                set(&mut cfg.montecarlo.replications, replications);
                set(&mut cfg.montecarlo.workers, workers);
            }
            Command::Run => {
                if self.config.is_none() {
                    return Err(CliError::Config("`run` needs --config".into()));
                }
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(args: &[&str]) -> RunConfig {
        Cli::try_parse_from(std::iter::once("bmidas").chain(args.iter().copied()))
            .unwrap()
            .resolve()
            .unwrap()
    }

    #[test]
    fn simulate_flags() {
        let cfg = resolve(&["simulate", "--dgp", "2", "--K", "12", "--sigma-eps", "0.95"]);
        assert_eq!(cfg.command, CommandKind::Simulate);
        assert_eq!(cfg.simulate.dgp, 2);
        assert_eq!(cfg.simulate.n_predictors, 12);
        assert_eq!(cfg.simulate.sigma_eps, 0.95);
    }

    #[test]
    fn model_flags_and_aliases() {
        let cfg = resolve(&["fit", "--model", "agl-ss", "-p", "2", "-r", "1", "-C", "9", "-S", "500", "--burn-in", "100"]);
        assert_eq!(cfg.model.model, FitModel::AglSs);
        assert_eq!((cfg.model.degree, cfg.model.restrictions, cfg.model.lag_window), (2, 1, 9));
        assert_eq!((cfg.schedule.iterations, cfg.schedule.burn_in), (500, 100));
    }

    #[test]
    fn evaluate_runs_parse() {
        let cfg = resolve(&["evaluate", "--run", "a=dir/a", "--run", "b=dir/b", "--benchmark", "a"]);
        assert_eq!(cfg.evaluate.runs.len(), 2);
        assert_eq!(cfg.evaluate.runs[1].dir, PathBuf::from("dir/b"));
        assert!(Cli::try_parse_from(["bmidas", "evaluate", "--run", "nodir"]).is_err());
    }

    #[test]
    fn montecarlo_replication_flag() {
        let cfg = resolve(&["montecarlo", "--R", "7", "--workers", "2"]);
        assert_eq!(cfg.montecarlo.replications, 7);
        assert_eq!(cfg.montecarlo.workers, 2);
    }
}
