//! Posterior summaries: predictor selection and simulation metrics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{Model, PosteriorDraws};
use crate::midas::{recover_slopes, AlmonBasis};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SelectionCriterion {
    CredibleInterval { level: f64 },
    PosteriorMedian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub criterion: SelectionCriterion,
    pub included: Vec<bool>,
    /// Coordinatewise posterior median of each slope.
    pub median: Vec<f64>,
    pub mean: Vec<f64>,
    /// Equal-tailed interval bounds (credible-interval criterion only).
    pub interval: Option<Vec<(f64, f64)>>,
    /// Share of draws with a non-zero coefficient block (spike-and-slab only).
    pub inclusion_prob: Option<Vec<f64>>,
}

impl SelectionReport {
    pub fn included_indices(&self) -> Vec<usize> {
        self.included
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.then_some(i))
            .collect()
    }
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_column(m: &DMatrix<f64>, k: usize) -> Vec<f64> {
    let mut col: Vec<f64> = m.column(k).iter().copied().collect();
    col.sort_by(f64::total_cmp);
    col
}

fn column_mean(m: &DMatrix<f64>, k: usize) -> f64 {
    m.column(k).sum() / m.nrows() as f64
}

/// Include predictor `k` iff zero lies outside its equal-tailed credible interval.
pub fn select_credible_interval(beta_draws: &DMatrix<f64>, level: f64) -> Result<SelectionReport> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("credible level must lie in (0, 1), got {level}")));
    }
    if beta_draws.nrows() < 2 {
        return Err(Error::InsufficientData("credible intervals need at least two draws".into()));
    }
    let k = beta_draws.ncols();
    let mut included = Vec::with_capacity(k);
    let mut median = Vec::with_capacity(k);
    let mut interval = Vec::with_capacity(k);
    for j in 0..k {
        let col = sorted_column(beta_draws, j);
        let lo = quantile_sorted(&col, (1.0 - level) / 2.0);
        let hi = quantile_sorted(&col, (1.0 + level) / 2.0);
        included.push(!(lo <= 0.0 && 0.0 <= hi));
        median.push(quantile_sorted(&col, 0.5));
        interval.push((lo, hi));
    }
    Ok(SelectionReport {
        criterion: SelectionCriterion::CredibleInterval { level },
        included,
        median,
        mean: (0..k).map(|j| column_mean(beta_draws, j)).collect(),
        interval: Some(interval),
        inclusion_prob: None,
    })
}

/// Exclude predictor `k` iff its coefficient block is exactly zero in more
/// than half of the draws; the point estimate is the coordinatewise median.
///
/// `theta_draws` is draws x coefficients; `predictor_blocks` gives each
/// predictor's `(start, size)` column block; `beta_draws` is draws x K.
pub fn select_posterior_median(
    theta_draws: &DMatrix<f64>,
    predictor_blocks: &[(usize, usize)],
    beta_draws: &DMatrix<f64>,
) -> Result<SelectionReport> {
    let n = theta_draws.nrows();
    if n == 0 || beta_draws.nrows() != n || beta_draws.ncols() != predictor_blocks.len() {
        return Err(Error::Shape("theta and slope draws disagree".into()));
    }
    let k = predictor_blocks.len();
    let mut included = Vec::with_capacity(k);
    let mut inclusion = Vec::with_capacity(k);
    let mut median = Vec::with_capacity(k);
    for (j, &(start, size)) in predictor_blocks.iter().enumerate() {
        if start + size > theta_draws.ncols() {
            return Err(Error::Shape(format!("predictor block {j} exceeds the coefficient count")));
        }
        let zeros = (0..n)
            .filter(|&s| (start..start + size).all(|c| theta_draws[(s, c)] == 0.0))
            .count();
        let zero_share = zeros as f64 / n as f64;
        included.push(zero_share <= 0.5);
        inclusion.push(1.0 - zero_share);
        median.push(quantile_sorted(&sorted_column(beta_draws, j), 0.5));
    }
    Ok(SelectionReport {
        criterion: SelectionCriterion::PosteriorMedian,
        included,
        median,
        mean: (0..k).map(|j| column_mean(beta_draws, j)).collect(),
        interval: None,
        inclusion_prob: Some(inclusion),
    })
}

/// Draws x coefficients matrix of `theta`.
pub fn theta_matrix(draws: &PosteriorDraws) -> DMatrix<f64> {
    let p = draws.meta.n_coef();
    DMatrix::from_fn(draws.len(), p, |i, j| draws.draws[i].theta[j])
}

/// Apply `criterion` to a fitted chain, adding spike-and-slab inclusion
/// frequencies when the chain has them.
pub fn select(draws: &PosteriorDraws, basis: &AlmonBasis, criterion: SelectionCriterion) -> Result<SelectionReport> {
    let beta = recover_slopes(draws, basis)?;
    let theta = theta_matrix(draws);
    let median = select_posterior_median(&theta, &draws.meta.predictor_blocks, &beta)?;
    match criterion {
        SelectionCriterion::PosteriorMedian => Ok(median),
        SelectionCriterion::CredibleInterval { level } => {
            let mut report = select_credible_interval(&beta, level)?;
            if draws.model == Model::AglSs {
                report.inclusion_prob = median.inclusion_prob;
            }
            Ok(report)
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub var: f64,
    pub bias2: f64,
    pub mse_active: f64,
    pub mse_inactive: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub mcc: f64,
    pub replications: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn new(selected: &[bool], truth: &[bool]) -> Self {
        let mut c = Self::default();
        for (s, t) in selected.iter().zip(truth) {
            match (s, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    /// Zero when there are no true positives to find.
    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Zero when there are no true negatives.
    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }

    /// Matthews correlation; zero if any marginal count is zero.
    pub fn mcc(&self) -> f64 {
        let (tp, fp, tn, fn_) = (self.tp as f64, self.fp as f64, self.tn as f64, self.fn_ as f64);
        let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if den == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fn_) / den.sqrt()
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Simulation metrics over replications.
///
/// `beta_draws[r]` is the draws x K slope matrix of replication `r`;
/// `selections[r]` its inclusion vector. VAR averages squared deviations of
/// each draw from its replication's posterior mean; BIAS^2 averages squared
/// deviations of those means from the truth. TPR, FPR and MCC are computed
/// per replication and averaged.
pub fn compute_metrics(beta_draws: &[DMatrix<f64>], beta_true: &[f64], selections: &[Vec<bool>]) -> Result<MetricsReport> {
    let r = beta_draws.len();
    let k = beta_true.len();
    if r == 0 {
        return Err(Error::InsufficientData("no replications".into()));
    }
    if selections.len() != r {
        return Err(Error::Shape("one selection vector per replication is required".into()));
    }
    if beta_draws.iter().any(|m| m.ncols() != k || m.nrows() == 0) || selections.iter().any(|s| s.len() != k) {
        return Err(Error::Shape(format!("every replication must carry draws and selections for {k} predictors")));
    }
    let truth: Vec<bool> = beta_true.iter().map(|b| *b != 0.0).collect();
    // Per predictor: summed (over replications) variance and squared bias.
    let mut var_k = vec![0.0; k];
    let mut bias_k = vec![0.0; k];
    for m in beta_draws {
        let s = m.nrows() as f64;
        for j in 0..k {
            let mean = column_mean(m, j);
            var_k[j] += m.column(j).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / s;
            bias_k[j] += (mean - beta_true[j]).powi(2);
        }
    }
    let rf = r as f64;
    let avg = |idx: &[usize], v: &[f64]| -> f64 {
        if idx.is_empty() {
            0.0
        } else {
            idx.iter().map(|&j| v[j]).sum::<f64>() / (rf * idx.len() as f64)
        }
    };
    let all: Vec<usize> = (0..k).collect();
    let active: Vec<usize> = all.iter().copied().filter(|&j| truth[j]).collect();
    let inactive: Vec<usize> = all.iter().copied().filter(|&j| !truth[j]).collect();
    let var = avg(&all, &var_k);
    let bias2 = avg(&all, &bias_k);
    let mse_active = avg(&active, &var_k) + avg(&active, &bias_k);
    let mse_inactive = avg(&inactive, &var_k) + avg(&inactive, &bias_k);

    let (mut tpr, mut fpr, mut mcc) = (0.0, 0.0, 0.0);
    for sel in selections {
        let c = Confusion::new(sel, &truth);
        tpr += c.tpr() / rf;
        fpr += c.fpr() / rf;
        mcc += c.mcc() / rf;
    }
    Ok(MetricsReport {
        mse: var + bias2,
        var,
        bias2,
        mse_active,
        mse_inactive,
        tpr,
        fpr,
        mcc,
        replications: r,
    })
}
