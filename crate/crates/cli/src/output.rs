//! Artifact writers. Floats are written in shortest round-trip form, so
//! identical runs produce byte-identical files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use bmidas::forecast::{DmwEntry, ModelScores, RelativeScores};
use bmidas::{ForecastRecord, Model, PosteriorDraws, SelectionReport};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

const BINARY_MAGIC: &[u8; 8] = b"BMIDASD1";

/// Column names and rows of a draws table.
pub struct DrawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// One row per stored draw. `theta_*` are standardized-scale coefficients,
/// `lambda_j` is the group penalty `exp(omega_j)`, and `gamma_j` is 0/1.
pub fn draw_table(draws: &PosteriorDraws) -> DrawTable {
    let meta = &draws.meta;
    let blocks = meta.groups.blocks();
    let mut columns = Vec::new();
    for (j, &(_, size)) in blocks.iter().enumerate() {
        columns.extend((1..=size).map(|i| format!("theta_g{}_{i}", j + 1)));
    }
    columns.extend((1..=meta.unpenalized_cols.len()).map(|i| format!("theta_u_{i}")));
    columns.extend((1..=blocks.len()).map(|j| format!("tau2_{j}")));
    columns.push("sigma2".into());
    columns.extend((1..=blocks.len()).map(|j| format!("lambda_{j}")));
    let ss = draws.model == Model::AglSs;
    if ss {
        columns.push("pi0".into());
        columns.extend((1..=blocks.len()).map(|j| format!("gamma_{j}")));
    }

    let rows = draws
        .draws
        .iter()
        .map(|d| {
            let mut row = Vec::with_capacity(columns.len());
            for &(start, size) in blocks {
                row.extend_from_slice(&d.theta[start..start + size]);
            }
            row.extend(meta.unpenalized_cols.iter().map(|&c| d.theta[c]));
            row.extend_from_slice(&d.tau2);
            row.push(d.sigma2);
            row.extend(d.lambda2.iter().map(|l| l.sqrt()));
            if ss {
                row.push(d.pi0.unwrap_or(f64::NAN));
                row.extend(d.gamma.iter().flatten().map(|g| if *g { 1.0 } else { 0.0 }));
            }
            row
        })
        .collect();
    DrawTable { columns, rows }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_table_csv(path: &Path, table: &DrawTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(&table.columns).map_err(|e| CliError::csv(path, e))?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Compact little-endian layout: magic, row and column counts (u64), then
/// each column name as a u64 length and UTF-8 bytes, then the values row by
/// row as f64.
pub fn write_table_binary(path: &Path, table: &DrawTable) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    w.write_all(BINARY_MAGIC).map_err(io)?;
    w.write_all(&(table.rows.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(table.columns.len() as u64).to_le_bytes()).map_err(io)?;
    for name in &table.columns {
        w.write_all(&(name.len() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(name.as_bytes()).map_err(io)?;
    }
    for row in &table.rows {
        for v in row {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_table_binary(path: &Path) -> Result<DrawTable> {
    let mut r = BufReader::new(File::open(path).map_err(|e| CliError::io(path, e))?);
    let io = |e| CliError::io(path, e);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != BINARY_MAGIC {
        return Err(CliError::Config(format!("{} is not a binary draws file", path.display())));
    }
    let mut word = [0u8; 8];
    let mut next_u64 = |r: &mut BufReader<File>| -> Result<u64> {
        r.read_exact(&mut word).map_err(io)?;
        Ok(u64::from_le_bytes(word))
    };
    let n_rows = next_u64(&mut r)? as usize;
    let n_cols = next_u64(&mut r)? as usize;
    let mut columns = Vec::with_capacity(n_cols);
    for _ in 0..n_cols {
        let len = next_u64(&mut r)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf).map_err(io)?;
        columns.push(String::from_utf8(buf).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?);
    }
    let mut rows = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let row = (0..n_cols)
            .map(|_| next_u64(&mut r).map(f64::from_bits))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(DrawTable { columns, rows })
}

pub fn write_omega_trace(path: &Path, draws: &PosteriorDraws) -> Result<()> {
    let mut w = csv_writer(path)?;
    let groups = draws.n_groups();
    let mut header = vec!["iteration".to_string()];
    header.extend((1..=groups).map(|j| format!("omega_{j}")));
    w.write_record(&header).map_err(|e| CliError::csv(path, e))?;
    for (iteration, omega) in &draws.omega_trace {
        let row = std::iter::once(iteration.to_string()).chain(omega.iter().map(|v| v.to_string()));
        w.write_record(row).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_selection(path: &Path, names: &[String], report: &SelectionReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["predictor", "included", "mean", "median", "lower", "upper", "inclusion_prob"])
        .map_err(|e| CliError::csv(path, e))?;
    for (k, name) in names.iter().enumerate() {
        let (lo, hi) = match &report.interval {
            Some(iv) => (Some(iv[k].0), Some(iv[k].1)),
            None => (None, None),
        };
        w.write_record([
            name.clone(),
            u8::from(report.included[k]).to_string(),
            report.mean[k].to_string(),
            report.median[k].to_string(),
            fmt_opt(lo),
            fmt_opt(hi),
            fmt_opt(report.inclusion_prob.as_ref().map(|p| p[k])),
        ])
        .map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// One row of `forecasts.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub target: usize,
    pub date: String,
    pub origin: usize,
    pub horizon: f64,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub realized: Option<f64>,
    pub crps: Option<f64>,
    pub log_score: Option<f64>,
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| CliError::csv(path, e))).collect()
}

/// Wide predictive-draws file: `target,date,horizon,realized,draw_1..draw_S`.
pub fn write_predictive(path: &Path, records: &[(String, ForecastRecord)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let s = records.iter().map(|(_, r)| r.draws.len()).max().unwrap_or(0);
    let mut header: Vec<String> = ["target", "date", "horizon", "realized"].iter().map(|h| h.to_string()).collect();
    header.extend((1..=s).map(|i| format!("draw_{i}")));
    w.write_record(&header).map_err(|e| CliError::csv(path, e))?;
    for (date, r) in records {
        if r.draws.len() != s {
            return Err(CliError::Config("predictive draw counts differ across targets".into()));
        }
        let mut row = vec![r.target.to_string(), date.clone(), r.horizon.to_string(), fmt_opt(r.realized)];
        row.extend(r.draws.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_predictive(path: &Path) -> Result<Vec<(String, ForecastRecord)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    let bad = |what: &str| CliError::Config(format!("{}: malformed {what}", path.display()));
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::csv(path, e))?;
        if rec.len() < 6 {
            return Err(bad("row"));
        }
        let target: usize = rec[0].parse().map_err(|_| bad("target"))?;
        let horizon: f64 = rec[2].parse().map_err(|_| bad("horizon"))?;
        let realized = if rec[3].is_empty() {
            None
        } else {
            Some(rec[3].parse::<f64>().map_err(|_| bad("realized"))?)
        };
        let draws = rec.iter().skip(4).map(|v| v.parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad("draw"))?;
        out.push((rec[1].to_string(), ForecastRecord::new(target, horizon, draws, realized)));
    }
    Ok(out)
}

pub fn write_scores(path: &Path, scores: &[ModelScores]) -> Result<()> {
    write_rows(path, scores)
}

#[derive(Serialize)]
struct DmwRow<'a> {
    model_a: &'a str,
    model_b: &'a str,
    loss: &'static str,
    statistic: f64,
    p_value: f64,
    mean_differential: f64,
    degenerate: bool,
}

pub fn write_dmw(path: &Path, entries: &[DmwEntry]) -> Result<()> {
    let rows: Vec<DmwRow> = entries
        .iter()
        .map(|e| DmwRow {
            model_a: &e.model_a,
            model_b: &e.model_b,
            loss: e.loss.name(),
            statistic: e.result.statistic,
            p_value: e.result.p_value,
            mean_differential: e.result.mean_differential,
            degenerate: e.result.degenerate,
        })
        .collect();
    write_rows(path, &rows)
}

pub fn write_relative(path: &Path, rel: &[RelativeScores]) -> Result<()> {
    write_rows(path, rel)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
