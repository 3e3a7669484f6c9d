//! CSV ingestion of a low-frequency response and high-frequency predictors.
//!
//! Both files carry a date column. Each low-frequency date labels one period;
//! under [`DateConvention::PeriodEnd`] period `t` holds the high-frequency
//! observations dated in `(d_{t-1}, d_t]`, under [`DateConvention::PeriodStart`]
//! those in `[d_t, d_{t+1})`. The last high-frequency observation of a period
//! is its lag 0. Observations before the first period form the lag history;
//! complete periods after the last response become forecast targets.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use bmidas::MixedFreqPanel;
use chrono::{Datelike, Months, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const MISSING_TOKENS: [&str; 6] = ["", "NA", "NaN", "nan", "null", "."];
const RATIO_TOLERANCE: f64 = 0.15;
const MAX_LISTED: usize = 20;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: missing column {column:?}")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: line {line}: cannot parse date {value:?} with format {format:?}")]
    BadDate {
        path: PathBuf,
        line: u64,
        value: String,
        format: String,
    },

    #[error("{path}: line {line}, column {column:?}: cannot parse {value:?} as a number")]
    BadNumber {
        path: PathBuf,
        line: u64,
        column: String,
        value: String,
    },

    #[error("missing values (no imputation is performed): {}", list_cells(.0))]
    MissingValues(Vec<String>),

    #[error("{path}: duplicate dates {}", .dates.join(", "))]
    DuplicateDates { path: PathBuf, dates: Vec<String> },

    #[error("frequency mismatch: {0}")]
    Frequency(String),

    #[error("{0}")]
    Insufficient(String),

    #[error(transparent)]
    Panel(#[from] bmidas::Error),
}

impl IngestError {
    pub fn is_io(&self) -> bool {
        match self {
            IngestError::Io { .. } => true,
            IngestError::Csv { source, .. } => source.is_io_error(),
            _ => false,
        }
    }
}

fn list_cells(cells: &[String]) -> String {
    let mut out = cells.iter().take(MAX_LISTED).cloned().collect::<Vec<_>>().join(", ");
    if cells.len() > MAX_LISTED {
        out.push_str(&format!(" and {} more", cells.len() - MAX_LISTED));
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DateConvention {
    #[default]
    PeriodEnd,
    PeriodStart,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IngestSpec {
    pub date_column: String,
    pub date_format: String,
    /// Response column of the low-frequency file; defaults to the first
    /// non-date column.
    pub target: Option<String>,
    /// Predictor columns of the high-frequency file; empty means all.
    pub predictors: Vec<String>,
    /// Low-frequency columns entering the design without a penalty.
    pub unpenalized: Vec<String>,
    pub convention: DateConvention,
}

impl Default for IngestSpec {
    fn default() -> Self {
        Self {
            date_column: "date".into(),
            date_format: "%Y-%m-%d".into(),
            target: None,
            predictors: Vec::new(),
            unpenalized: Vec::new(),
            convention: DateConvention::PeriodEnd,
        }
    }
}

/// Panel shape parameters that do not come from the files.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Alignment {
    pub m: usize,
    pub lag_window: usize,
    pub horizon_steps: usize,
}

/// A [`MixedFreqPanel`] together with the calendar it was read from.
#[derive(Clone, Debug, PartialEq)]
pub struct DatedPanel {
    pub panel: MixedFreqPanel,
    pub target: String,
    pub predictors: Vec<String>,
    pub low_dates: Vec<NaiveDate>,
    pub high_dates: Vec<NaiveDate>,
    pub unpenalized: Vec<(String, Vec<f64>)>,
    pub convention: DateConvention,
}

impl DatedPanel {
    /// Date labelling low-frequency period `t`, extrapolated from the
    /// high-frequency calendar past the last response.
    pub fn period_date(&self, t: usize) -> Option<NaiveDate> {
        if let Some(d) = self.low_dates.get(t) {
            return Some(*d);
        }
        if t >= self.panel.n_periods() {
            return None;
        }
        let m = self.panel.m();
        let start = self.panel.head() + t * m;
        match self.convention {
            DateConvention::PeriodEnd => self.high_dates.get(start + m - 1).copied(),
            DateConvention::PeriodStart => self.high_dates.get(start).copied(),
        }
    }

    pub fn unpenalized_columns(&self) -> Option<Vec<Vec<f64>>> {
        (!self.unpenalized.is_empty()).then(|| self.unpenalized.iter().map(|(_, v)| v.clone()).collect())
    }

    /// Attach month-end dates to a panel whose high-frequency series are
    /// monthly, starting at the month of `start`. Low-frequency periods then
    /// span `m` months each.
    pub fn monthly(
        panel: MixedFreqPanel,
        start: NaiveDate,
        target: impl Into<String>,
        predictors: Vec<String>,
    ) -> Result<Self, IngestError> {
        let n_high = panel.x()[0].len();
        let first = start.with_day(1).expect("first of month");
        let high_dates = (0..n_high)
            .map(|i| month_end(first, i as u32))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| IngestError::Insufficient("calendar overflow".into()))?;
        let m = panel.m();
        let low_dates = (0..panel.y().len()).map(|t| high_dates[panel.head() + (t + 1) * m - 1]).collect();
        Ok(Self {
            target: target.into(),
            predictors,
            low_dates,
            high_dates,
            unpenalized: Vec::new(),
            convention: DateConvention::PeriodEnd,
            panel,
        })
    }

    /// Write the panel back out in the layout [`ingest_csv`] reads.
    pub fn write_csv(&self, low: &Path, high: &Path, spec: &IngestSpec) -> Result<(), IngestError> {
        let fmt = &spec.date_format;
        let mut w = csv::Writer::from_path(low).map_err(|e| csv_err(low, e))?;
        let mut header = vec![spec.date_column.clone(), self.target.clone()];
        header.extend(self.unpenalized.iter().map(|(n, _)| n.clone()));
        w.write_record(&header).map_err(|e| csv_err(low, e))?;
        for (t, d) in self.low_dates.iter().enumerate() {
            let mut row = vec![d.format(fmt).to_string(), self.panel.y()[t].to_string()];
            row.extend(self.unpenalized.iter().map(|(_, v)| v[t].to_string()));
            w.write_record(&row).map_err(|e| csv_err(low, e))?;
        }
        w.flush().map_err(|e| io_err(low, e))?;

        let mut w = csv::Writer::from_path(high).map_err(|e| csv_err(high, e))?;
        let mut header = vec![spec.date_column.clone()];
        header.extend(self.predictors.iter().cloned());
        w.write_record(&header).map_err(|e| csv_err(high, e))?;
        for (i, d) in self.high_dates.iter().enumerate() {
            let mut row = vec![d.format(fmt).to_string()];
            row.extend(self.panel.x().iter().map(|s| s[i].to_string()));
            w.write_record(&row).map_err(|e| csv_err(high, e))?;
        }
        w.flush().map_err(|e| io_err(high, e))?;
        Ok(())
    }
}

/// Last day of the month `months` after `first`.
pub fn month_end(first: NaiveDate, months: u32) -> Option<NaiveDate> {
    first.checked_add_months(Months::new(months + 1))?.pred_opt()
}

fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, source: csv::Error) -> IngestError {
    IngestError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

struct Table {
    dates: Vec<NaiveDate>,
    columns: Vec<(String, Vec<f64>)>,
}

/// Read `columns` (all non-date columns if empty) of a dated CSV, sorted by
/// date. Missing cells are appended to `missing` rather than failing fast.
fn read_table(path: &Path, spec: &IngestSpec, columns: &[String], missing: &mut Vec<String>) -> Result<Table, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| IngestError::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
    };
    let date_idx = find(&spec.date_column)?;
    let wanted: Vec<(String, usize)> = if columns.is_empty() {
        headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != date_idx)
            .map(|(i, h)| (h.to_string(), i))
            .collect()
    } else {
        columns.iter().map(|c| find(c).map(|i| (c.clone(), i))).collect::<Result<_, _>>()?
    };

    let mut rows: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let raw_date = record.get(date_idx).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, &spec.date_format).map_err(|_| IngestError::BadDate {
            path: path.to_path_buf(),
            line,
            value: raw_date.to_string(),
            format: spec.date_format.clone(),
        })?;
        let mut values = Vec::with_capacity(wanted.len());
        for (name, idx) in &wanted {
            let cell = record.get(*idx).unwrap_or("");
            if MISSING_TOKENS.contains(&cell) {
                missing.push(format!("{}:{line}:{name}", path.display()));
                values.push(f64::NAN);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| IngestError::BadNumber {
                path: path.to_path_buf(),
                line,
                column: name.clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                missing.push(format!("{}:{line}:{name}", path.display()));
            }
            values.push(v);
        }
        rows.push((date, values));
    }
    rows.sort_by_key(|(d, _)| *d);
    let dupes: BTreeSet<String> = rows
        .windows(2)
        .filter(|w| w[0].0 == w[1].0)
        .map(|w| w[0].0.format(&spec.date_format).to_string())
        .collect();
    if !dupes.is_empty() {
        return Err(IngestError::DuplicateDates {
            path: path.to_path_buf(),
            dates: dupes.into_iter().collect(),
        });
    }
    let dates = rows.iter().map(|(d, _)| *d).collect();
    let columns = wanted
        .iter()
        .enumerate()
        .map(|(j, (name, _))| (name.clone(), rows.iter().map(|(_, v)| v[j]).collect()))
        .collect();
    Ok(Table { dates, columns })
}

fn mean_spacing_days(dates: &[NaiveDate]) -> f64 {
    (dates[dates.len() - 1] - dates[0]).num_days() as f64 / (dates.len() - 1) as f64
}

/// Number of high-frequency observations before the first period and the
/// count of complete periods past the last response.
fn assign_periods(low: &[NaiveDate], high: &[NaiveDate], m: usize, convention: DateConvention) -> Result<(usize, usize), IngestError> {
    let count_in = |lo: Option<NaiveDate>, hi: Option<NaiveDate>, lo_closed: bool, hi_closed: bool| {
        high.iter()
            .filter(|d| {
                lo.is_none_or(|l| if lo_closed { **d >= l } else { **d > l })
                    && hi.is_none_or(|h| if hi_closed { **d <= h } else { **d < h })
            })
            .count()
    };
    let period_error = |t: usize, n: usize| {
        IngestError::Frequency(format!(
            "low-frequency period {} ({}) holds {n} high-frequency observations, expected m = {m}",
            t + 1,
            low[t]
        ))
    };
    let n = low.len();
    let (before, after) = match convention {
        DateConvention::PeriodEnd => {
            let upto_first = count_in(None, Some(low[0]), false, true);
            if upto_first < m {
                return Err(period_error(0, upto_first));
            }
            for t in 1..n {
                let c = count_in(Some(low[t - 1]), Some(low[t]), false, true);
                if c != m {
                    return Err(period_error(t, c));
                }
            }
            (upto_first - m, count_in(Some(low[n - 1]), None, false, false))
        }
        DateConvention::PeriodStart => {
            let before = count_in(None, Some(low[0]), false, false);
            for t in 0..n - 1 {
                let c = count_in(Some(low[t]), Some(low[t + 1]), true, false);
                if c != m {
                    return Err(period_error(t, c));
                }
            }
            let last = count_in(Some(low[n - 1]), None, true, false);
            if last < m {
                return Err(period_error(n - 1, last));
            }
            (before, last - m)
        }
    };
    Ok((before, after / m))
}

/// Read and align a low-frequency response file and a high-frequency
/// predictor file.
pub fn ingest_csv(low_path: &Path, high_path: &Path, spec: &IngestSpec, align: Alignment) -> Result<DatedPanel, IngestError> {
    if align.m == 0 {
        return Err(IngestError::Frequency("frequency ratio m must be positive".into()));
    }
    let mut missing = Vec::new();
    let low_cols: Vec<String> = {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(low_path)
            .map_err(|e| csv_err(low_path, e))?;
        let headers = reader.headers().map_err(|e| csv_err(low_path, e))?;
        let target = match &spec.target {
            Some(t) => t.clone(),
            None => headers
                .iter()
                .find(|h| *h != spec.date_column)
                .ok_or_else(|| IngestError::MissingColumn {
                    path: low_path.to_path_buf(),
                    column: "<target>".into(),
                })?
                .to_string(),
        };
        std::iter::once(target).chain(spec.unpenalized.iter().cloned()).collect()
    };
    let low = read_table(low_path, spec, &low_cols, &mut missing)?;
    let high = read_table(high_path, spec, &spec.predictors, &mut missing)?;
    if !missing.is_empty() {
        return Err(IngestError::MissingValues(missing));
    }
    if low.dates.len() < 2 || high.dates.len() < 2 {
        return Err(IngestError::Insufficient("each file needs at least two dated rows".into()));
    }
    if high.columns.is_empty() {
        return Err(IngestError::Insufficient(format!("{} has no predictor columns", high_path.display())));
    }

    let ratio = mean_spacing_days(&low.dates) / mean_spacing_days(&high.dates);
    if (ratio - align.m as f64).abs() > RATIO_TOLERANCE {
        return Err(IngestError::Frequency(format!(
            "average spacing ratio of low- to high-frequency dates is {ratio:.3}, declared m = {}",
            align.m
        )));
    }
    let (before, extra_periods) = assign_periods(&low.dates, &high.dates, align.m, spec.convention)?;
    let used = before + (low.dates.len() + extra_periods) * align.m;
    if used < high.dates.len() {
        log::warn!(
            "dropping {} trailing high-frequency observations that do not fill a period",
            high.dates.len() - used
        );
    }

    let mut low_columns = low.columns.into_iter();
    let (target, y) = low_columns.next().expect("target column");
    let predictors: Vec<String> = high.columns.iter().map(|(n, _)| n.clone()).collect();
    let x: Vec<Vec<f64>> = high.columns.into_iter().map(|(_, mut v)| {
        v.truncate(used);
        v
    }).collect();
    let panel = MixedFreqPanel::new(y, x, align.m, align.lag_window, align.horizon_steps, before)?;
    let mut high_dates = high.dates;
    high_dates.truncate(used);
    Ok(DatedPanel {
        panel,
        target,
        predictors,
        low_dates: low.dates,
        high_dates,
        unpenalized: low_columns.collect(),
        convention: spec.convention,
    })
}
