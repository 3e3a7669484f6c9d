use std::path::{Path, PathBuf};

use bmidas::inference::quantile_sorted;
use bmidas::{
    fit_panel, generate_dataset, run_monte_carlo, ForecastRecord, MonteCarloConfig, RngHandle, ScoreTable,
};
use serde::Serialize;

use crate::config::{CommandKind, DrawsFormat, RunConfig, MANIFEST};
use crate::error::{CliError, Result};
use crate::ingest::{ingest_csv, DatedPanel};
use crate::output::{self, ForecastRow};

/// Validate, write the manifest and execute the configured command.
/// Returns the output directory.
pub fn run(mut cfg: RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let out = cfg.resolve_out_dir();
    absolutize(&mut cfg)?;
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    output::write_text(&out.join(MANIFEST), &cfg.to_toml()?)?;
    log::info!("{} -> {}", cfg.command.name(), out.display());
    match cfg.command {
        CommandKind::Simulate => simulate(&cfg, &out)?,
        CommandKind::Fit => fit(&cfg, &out)?,
        CommandKind::Forecast => forecast(&cfg, &out)?,
        CommandKind::Evaluate => evaluate(&cfg, &out)?,
        CommandKind::Montecarlo => montecarlo(&cfg, &out)?,
    }
    Ok(out)
}

/// Make every path in the manifest independent of the working directory.
fn absolutize(cfg: &mut RunConfig) -> Result<()> {
    let abs = |p: &Path| std::path::absolute(p).map_err(|e| CliError::io(p, e));
    for slot in [&mut cfg.data.low_freq, &mut cfg.data.high_freq, &mut cfg.out_dir] {
        if let Some(p) = slot {
            *p = abs(p)?;
        }
    }
    for run in &mut cfg.evaluate.runs {
        run.dir = abs(&run.dir)?;
    }
    Ok(())
}

fn load_panel(cfg: &RunConfig) -> Result<DatedPanel> {
    let low = cfg.data.low_freq.as_ref().expect("validated");
    let high = cfg.data.high_freq.as_ref().expect("validated");
    Ok(ingest_csv(low, high, &cfg.data.ingest_spec(), cfg.alignment())?)
}

#[derive(Serialize)]
struct TruthRow {
    predictor: String,
    beta: f64,
}

#[derive(Serialize)]
struct WeightRow {
    lag: usize,
    weight: f64,
}

#[derive(Serialize)]
struct DatasetSummary {
    t_obs: usize,
    holdout: usize,
    n_predictors: usize,
    m: usize,
    lag_window: usize,
    head: usize,
    sigma_used: f64,
    noise_to_signal: f64,
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let dgp = cfg.dgp()?;
    let data = generate_dataset(&dgp, &mut RngHandle::new(cfg.seed, 0))?;
    let names: Vec<String> = (1..=dgp.n_predictors).map(|k| format!("x{k}")).collect();
    let dated = DatedPanel::monthly(data.panel.clone(), cfg.start_date()?, "y", names.clone())?;
    dated.write_csv(&out.join("low_freq.csv"), &out.join("high_freq.csv"), &cfg.data.ingest_spec())?;
    let truth: Vec<TruthRow> = names
        .iter()
        .zip(&data.beta_true)
        .map(|(n, b)| TruthRow {
            predictor: n.clone(),
            beta: *b,
        })
        .collect();
    output::write_rows(&out.join("truth.csv"), &truth)?;
    let weights: Vec<WeightRow> = data
        .weights_used
        .iter()
        .enumerate()
        .map(|(lag, w)| WeightRow { lag, weight: *w })
        .collect();
    output::write_rows(&out.join("weights.csv"), &weights)?;
    let summary = DatasetSummary {
        t_obs: data.t_obs,
        holdout: dgp.holdout,
        n_predictors: dgp.n_predictors,
        m: dgp.m,
        lag_window: dgp.lag_window,
        head: dgp.head(),
        sigma_used: data.sigma_used,
        noise_to_signal: data.noise_to_signal(),
    };
    let text = toml::to_string(&summary).map_err(|e| CliError::Config(e.to_string()))?;
    output::write_text(&out.join("dataset.toml"), &text)?;
    println!(
        "simulated {} periods (+{} held out) of {} predictors, noise sd {:.4}",
        data.t_obs, dgp.holdout, dgp.n_predictors, data.sigma_used
    );
    Ok(())
}

fn fit(cfg: &RunConfig, out: &Path) -> Result<()> {
    let dated = load_panel(cfg)?;
    let spec = cfg.fit_spec()?;
    let unpenalized = dated.unpenalized_columns();
    let fitted = fit_panel(&dated.panel, &spec, unpenalized.as_deref(), &mut RngHandle::new(cfg.seed, 0))?;

    let table = output::draw_table(&fitted.draws);
    match cfg.output.draws_format {
        DrawsFormat::Csv => output::write_table_csv(&out.join("draws.csv"), &table)?,
        DrawsFormat::Binary => output::write_table_binary(&out.join("draws.bin"), &table)?,
    }
    if cfg.output.omega_trace && !fitted.draws.omega_trace.is_empty() {
        output::write_omega_trace(&out.join("omega_trace.csv"), &fitted.draws)?;
    }
    output::write_selection(&out.join("selection.csv"), &dated.predictors, &fitted.selection)?;

    let chosen: Vec<&str> = fitted
        .selection
        .included_indices()
        .into_iter()
        .map(|k| dated.predictors[k].as_str())
        .collect();
    println!(
        "{}: {} observations, {} draws, {} restarts; selected [{}]",
        spec.model.name(),
        fitted.draws.n_obs,
        fitted.draws.len(),
        fitted.draws.restarts,
        chosen.join(", ")
    );
    Ok(())
}

fn forecast_row(rec: &ForecastRecord, date: String, origin: usize, level: f64) -> Result<ForecastRow> {
    let mut sorted = rec.draws.clone();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(ForecastRow {
        target: rec.target,
        date,
        origin,
        horizon: rec.horizon,
        point: rec.point,
        lower: quantile_sorted(&sorted, tail),
        upper: quantile_sorted(&sorted, 1.0 - tail),
        realized: rec.realized,
        crps: rec.crps().transpose()?,
        log_score: rec.log_score().transpose()?,
    })
}

fn forecast(cfg: &RunConfig, out: &Path) -> Result<()> {
    let dated = load_panel(cfg)?;
    let panel = &dated.panel;
    let spec = cfg.fit_spec()?;
    let unpenalized = dated.unpenalized_columns();
    let n_obs = panel.y().len();
    let first_usable = panel.first_usable();
    let min_rows = spec.degree + 2;
    let first_origin = cfg.forecast.first_origin.unwrap_or((first_usable + n_obs).div_ceil(2));
    if first_origin < first_usable + min_rows || first_origin >= n_obs {
        return Err(CliError::Config(format!(
            "first_origin must lie in [{}, {}), got {first_origin}",
            first_usable + min_rows,
            n_obs
        )));
    }

    let mut records = Vec::new();
    let mut rows = Vec::new();
    let date_of = |t: usize| dated.period_date(t).map(|d| d.to_string()).unwrap_or_default();
    for origin in first_origin..n_obs {
        let train = panel.with_response_len(origin);
        let mut rng = RngHandle::new(cfg.seed, origin as u64);
        let fitted = fit_panel(&train, &spec, unpenalized.as_deref(), &mut rng)?;
        let rec = fitted.forecast(panel, unpenalized.as_deref(), origin, &mut rng)?;
        log::info!("origin {origin}: forecast {:.4}, realized {:?}", rec.point, rec.realized);
        rows.push(forecast_row(&rec, date_of(origin), origin, cfg.model.level)?);
        records.push((date_of(origin), rec));
    }
    if cfg.forecast.out_of_sample && panel.n_periods() > n_obs {
        if unpenalized.is_some() {
            return Err(CliError::Config("out-of-sample targets need unpenalized covariates past the sample".into()));
        }
        let mut rng = RngHandle::new(cfg.seed, n_obs as u64);
        let fitted = fit_panel(panel, &spec, None, &mut rng)?;
        for t in n_obs..panel.n_periods() {
            let rec = fitted.forecast(panel, None, t, &mut rng)?;
            rows.push(forecast_row(&rec, date_of(t), n_obs, cfg.model.level)?);
            records.push((date_of(t), rec));
        }
    }

    output::write_rows(&out.join("forecasts.csv"), &rows)?;
    if cfg.output.predictive_draws {
        output::write_predictive(&out.join("predictive_draws.csv"), &records)?;
    }
    let scored: Vec<ForecastRecord> = records.iter().map(|(_, r)| r.clone()).filter(|r| r.realized.is_some()).collect();
    let table = ScoreTable::from_records(&[(spec.model.name().to_string(), scored)], None)?;
    output::write_scores(&out.join("scores.csv"), &table.models)?;
    let s = &table.models[0];
    println!(
        "{} forecasts: RMSFE {:.4}, average CRPS {:.4}, average log score {:.4}",
        s.n, s.rmsfe, s.avg_crps, s.avg_log_score
    );
    Ok(())
}

fn evaluate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let mut models = Vec::new();
    for run in &cfg.evaluate.runs {
        let path = run.dir.join("predictive_draws.csv");
        let records: Vec<ForecastRecord> = output::read_predictive(&path)?
            .into_iter()
            .map(|(_, r)| r)
            .filter(|r| r.realized.is_some())
            .collect();
        models.push((run.name.clone(), records));
    }
    let h = cfg.model.horizon_steps.div_ceil(cfg.model.m).max(1);
    let table = ScoreTable::from_records(&models, (models.len() > 1).then_some(h))?;
    output::write_scores(&out.join("scores.csv"), &table.models)?;
    if !table.dmw.is_empty() {
        output::write_dmw(&out.join("dmw.csv"), &table.dmw)?;
    }
    if let Some(b) = &cfg.evaluate.benchmark {
        output::write_relative(&out.join("relative.csv"), &table.relative_to(b)?)?;
    }
    for s in &table.models {
        println!(
            "{}: n {}, RMSFE {:.4}, CRPS {:.4}, log score {:.4}",
            s.model, s.n, s.rmsfe, s.avg_crps, s.avg_log_score
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct MetricsRow {
    model: String,
    design: String,
    n_predictors: usize,
    sigma_eps: f64,
    replications: usize,
    failures: usize,
    sigma_bar: f64,
    mse: f64,
    var: f64,
    bias2: f64,
    mse_active: f64,
    mse_inactive: f64,
    tpr: f64,
    fpr: f64,
    mcc: f64,
    rmsfe: f64,
    avg_crps: f64,
    avg_log_score: f64,
}

#[derive(Serialize)]
struct ReplicationRow {
    index: usize,
    selected: String,
    tpr: f64,
    fpr: f64,
    mcc: f64,
    sigma_used: f64,
    restarts: u64,
    point: f64,
    realized: f64,
    crps: f64,
    log_score: f64,
}

#[derive(Serialize)]
struct FailureRow<'a> {
    index: usize,
    error: &'a str,
}

fn montecarlo(cfg: &RunConfig, out: &Path) -> Result<()> {
    let workers = match cfg.montecarlo.workers {
        0 => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        w => w,
    };
    let mc = MonteCarloConfig {
        dgp: cfg.dgp()?,
        fit: cfg.fit_spec()?,
        replications: cfg.montecarlo.replications,
        seed: cfg.seed,
        workers,
    };
    let report = run_monte_carlo(&mc)?;
    let m = &report.metrics;
    let s = &report.scores.models[0];
    let design = if cfg.simulate.illustration {
        "illustration".to_string()
    } else {
        format!("dgp{}", cfg.simulate.dgp)
    };
    let row = MetricsRow {
        model: cfg.model.model.name().to_string(),
        design,
        n_predictors: mc.dgp.n_predictors,
        sigma_eps: mc.dgp.sigma_eps,
        replications: m.replications,
        failures: report.failures.len(),
        sigma_bar: report.sigma_bar,
        mse: m.mse,
        var: m.var,
        bias2: m.bias2,
        mse_active: m.mse_active,
        mse_inactive: m.mse_inactive,
        tpr: m.tpr,
        fpr: m.fpr,
        mcc: m.mcc,
        rmsfe: s.rmsfe,
        avg_crps: s.avg_crps,
        avg_log_score: s.avg_log_score,
    };
    output::write_rows(&out.join("metrics.csv"), &[row])?;
    let reps: Vec<ReplicationRow> = report
        .replications
        .iter()
        .map(|r| ReplicationRow {
            index: r.index,
            selected: r
                .included
                .iter()
                .enumerate()
                .filter(|(_, v)| **v)
                .map(|(k, _)| format!("x{}", k + 1))
                .collect::<Vec<_>>()
                .join(";"),
            tpr: r.tpr,
            fpr: r.fpr,
            mcc: r.mcc,
            sigma_used: r.sigma_used,
            restarts: r.restarts,
            point: r.point,
            realized: r.realized,
            crps: r.crps,
            log_score: r.log_score,
        })
        .collect();
    output::write_rows(&out.join("replications.csv"), &reps)?;
    if !report.failures.is_empty() {
        let rows: Vec<FailureRow> = report
            .failures
            .iter()
            .map(|(index, error)| FailureRow { index: *index, error })
            .collect();
        output::write_rows(&out.join("failures.csv"), &rows)?;
    }
    println!(
        "{} replications ({} failed): TPR {:.3}, FPR {:.3}, MCC {:.3}, MSE {:.4}",
        m.replications,
        report.failures.len(),
        m.tpr,
        m.fpr,
        m.mcc,
        m.mse
    );
    Ok(())
}
