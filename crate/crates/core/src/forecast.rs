//! Posterior predictive draws and forecast scoring.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::gibbs::PosteriorDraws;
use crate::rng::standard_normal;

/// One predictive draw per stored posterior draw:
/// `z_new' theta^(s) + sigma^(s) eps + y_mean`.
///
/// `z_new` must be standardized with the fit-time statistics
/// (see [`crate::midas::design_row`]).
pub fn predictive_draws<R: Rng + ?Sized>(draws: &PosteriorDraws, z_new: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if z_new.len() != draws.meta.n_coef() {
        return Err(Error::Shape(format!(
            "regressor row has {} entries, fit has {} coefficients",
            z_new.len(),
            draws.meta.n_coef()
        )));
    }
    if draws.is_empty() {
        return Err(Error::InsufficientData("no posterior draws".into()));
    }
    let y_mean = draws.meta.y_mean;
    Ok(draws
        .draws
        .iter()
        .map(|d| {
            let fit: f64 = z_new.iter().zip(&d.theta).map(|(z, t)| z * t).sum();
            fit + d.sigma2.sqrt() * standard_normal(rng) + y_mean
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    /// Low-frequency period being forecast.
    pub target: usize,
    pub horizon: f64,
    pub draws: Vec<f64>,
    pub point: f64,
    pub realized: Option<f64>,
}

impl ForecastRecord {
    pub fn new(target: usize, horizon: f64, draws: Vec<f64>, realized: Option<f64>) -> Self {
        let point = draws.iter().sum::<f64>() / draws.len() as f64;
        Self {
            target,
            horizon,
            draws,
            point,
            realized,
        }
    }

    pub fn error(&self) -> Option<f64> {
        self.realized.map(|y| y - self.point)
    }

    pub fn crps(&self) -> Option<Result<f64>> {
        self.realized.map(|y| crps(&self.draws, y))
    }

    pub fn log_score(&self) -> Option<Result<f64>> {
        self.realized.map(|y| log_score(&self.draws, y))
    }
}

/// Sample CRPS `(1/S) sum |X_s - y| - (1/(2 S^2)) sum_s sum_t |X_s - X_t|`,
/// with the pairwise term evaluated on the sorted draws in `O(S log S)`.
pub fn crps(draws: &[f64], realized: f64) -> Result<f64> {
    if draws.len() < 2 {
        return Err(Error::InsufficientData("CRPS needs at least two draws".into()));
    }
    if !realized.is_finite() || draws.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("CRPS inputs must be finite".into()));
    }
    let s = draws.len() as f64;
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let abs_term: f64 = sorted.iter().map(|x| (x - realized).abs()).sum::<f64>() / s;
    // sum_{s,t} |X_s - X_t| = 2 sum_i x_(i) (2i - S + 1), 0-based ranks.
    let pair: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| x * (2.0 * i as f64 - s + 1.0))
        .sum::<f64>();
    Ok((abs_term - pair / (s * s)).max(0.0))
}

/// The `O(S^2)` double-sum definition of the sample CRPS.
pub fn crps_naive(draws: &[f64], realized: f64) -> f64 {
    let s = draws.len() as f64;
    let abs_term: f64 = draws.iter().map(|x| (x - realized).abs()).sum::<f64>() / s;
    let mut pair = 0.0;
    for a in draws {
        for b in draws {
            pair += (a - b).abs();
        }
    }
    abs_term - pair / (2.0 * s * s)
}

/// Log predictive density at `realized` from a Gaussian kernel density
/// estimate with Silverman bandwidth `1.06 sd S^(-1/5)`.
///
/// Constant draws have zero bandwidth: the score is `+inf` when `realized`
/// equals the constant and `-inf` otherwise, and a warning is logged.
pub fn log_score(draws: &[f64], realized: f64) -> Result<f64> {
    const MIN_DRAWS: usize = 30;
    if draws.len() < MIN_DRAWS {
        return Err(Error::InsufficientData(format!("log score needs at least {MIN_DRAWS} draws")));
    }
    let s = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / s;
    let sd = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s - 1.0)).sqrt();
    let bw = 1.06 * sd * s.powf(-0.2);
    if !(bw > 0.0) {
        log::warn!("log score: predictive draws are constant; returning an infinite sentinel");
        return Ok(if draws[0] == realized { f64::INFINITY } else { f64::NEG_INFINITY });
    }
    let exps: Vec<f64> = draws.iter().map(|x| -0.5 * ((realized - x) / bw).powi(2)).collect();
    let max = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + exps.iter().map(|e| (e - max).exp()).sum::<f64>().ln();
    Ok(lse - s.ln() - bw.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln())
}

/// Root mean squared forecast error.
pub fn rmsfe(points: &[f64], realized: &[f64]) -> Result<f64> {
    if points.len() != realized.len() || points.is_empty() {
        return Err(Error::Shape("point forecasts and realizations must be non-empty and aligned".into()));
    }
    let n = points.len() as f64;
    Ok((points.iter().zip(realized).map(|(p, y)| (y - p).powi(2)).sum::<f64>() / n).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmwResult {
    pub statistic: f64,
    pub p_value: f64,
    pub mean_differential: f64,
    /// The loss differential is constant and non-zero, so the variance is zero.
    pub degenerate: bool,
}

/// Diebold–Mariano–West test of equal predictive accuracy with the
/// Harvey–Leybourne–Newbold small-sample correction.
///
/// `d_t = loss_a_t - loss_b_t`. The long-run variance uses Bartlett weights
/// over `horizon_steps - 1` lags when `horizon_steps > 1`. The p-value is
/// one-sided, `P(t_{n-1} > stat)`: small values favour model `b`.
pub fn dmw_test(loss_a: &[f64], loss_b: &[f64], horizon_steps: usize) -> Result<DmwResult> {
    let n = loss_a.len();
    if n != loss_b.len() {
        return Err(Error::Shape("loss sequences differ in length".into()));
    }
    if n < 8 {
        return Err(Error::InsufficientData(format!("DMW test needs at least 8 losses, got {n}")));
    }
    let h = horizon_steps.max(1);
    let d: Vec<f64> = loss_a.iter().zip(loss_b).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let autocov = |lag: usize| -> f64 { (lag..n).map(|t| (d[t] - mean) * (d[t - lag] - mean)).sum::<f64>() / nf };
    let mut lrv = autocov(0);
    for lag in 1..h {
        lrv += 2.0 * (1.0 - lag as f64 / h as f64) * autocov(lag);
    }
    let scale = d.iter().map(|v| v.abs()).sum::<f64>() / nf;
    if !(lrv.sqrt() > 1e-10 * scale) {
        if mean.abs() <= 1e-12 * scale || scale == 0.0 {
            return Ok(DmwResult {
                statistic: 0.0,
                p_value: 0.5,
                mean_differential: 0.0,
                degenerate: false,
            });
        }
        return Ok(DmwResult {
            statistic: mean.signum() * f64::INFINITY,
            p_value: 1.0,
            mean_differential: mean,
            degenerate: true,
        });
    }
    let hf = h as f64;
    let correction = ((nf + 1.0 - 2.0 * hf + hf * (hf - 1.0) / nf) / nf).sqrt();
    let statistic = correction * mean / (lrv / nf).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 1.0).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(DmwResult {
        statistic,
        p_value: 1.0 - t.cdf(statistic),
        mean_differential: mean,
        degenerate: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    SquaredError,
    Crps,
    /// Negative log score, so that smaller is better like the other losses.
    NegLogScore,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::SquaredError, LossKind::Crps, LossKind::NegLogScore];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::SquaredError => "squared_error",
            LossKind::Crps => "crps",
            LossKind::NegLogScore => "neg_log_score",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub model: String,
    pub n: usize,
    pub rmsfe: f64,
    pub avg_log_score: f64,
    pub avg_crps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmwEntry {
    pub model_a: String,
    pub model_b: String,
    pub loss: LossKind,
    pub result: DmwResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeScores {
    pub model: String,
    pub rmsfe_ratio: f64,
    pub crps_ratio: f64,
    pub log_score_diff: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub models: Vec<ModelScores>,
    pub dmw: Vec<DmwEntry>,
}

/// Per-record losses of one model, only for records with a realization.
pub fn losses(records: &[ForecastRecord], kind: LossKind) -> Result<Vec<f64>> {
    records
        .iter()
        .filter_map(|r| r.realized.map(|y| (r, y)))
        .map(|(r, y)| match kind {
            LossKind::SquaredError => Ok((y - r.point).powi(2)),
            LossKind::Crps => crps(&r.draws, y),
            LossKind::NegLogScore => log_score(&r.draws, y).map(|v| -v),
        })
        .collect()
}

impl ScoreTable {
    /// Score each model's records; when `dmw_horizon_steps` is given, run the
    /// DMW test for every ordered pair and loss with enough common dates.
    pub fn from_records(models: &[(String, Vec<ForecastRecord>)], dmw_horizon_steps: Option<usize>) -> Result<Self> {
        let mut table = ScoreTable::default();
        for (name, recs) in models {
            let scored: Vec<&ForecastRecord> = recs.iter().filter(|r| r.realized.is_some()).collect();
            if scored.is_empty() {
                return Err(Error::InsufficientData(format!("model {name} has no realized targets")));
            }
            let points: Vec<f64> = scored.iter().map(|r| r.point).collect();
            let ys: Vec<f64> = scored.iter().map(|r| r.realized.unwrap()).collect();
            let n = scored.len() as f64;
            let crps_all = losses(recs, LossKind::Crps)?;
            let ls_all = losses(recs, LossKind::NegLogScore)?;
            table.models.push(ModelScores {
                model: name.clone(),
                n: scored.len(),
                rmsfe: rmsfe(&points, &ys)?,
                avg_log_score: -ls_all.iter().sum::<f64>() / n,
                avg_crps: crps_all.iter().sum::<f64>() / n,
            });
        }
        if let Some(h) = dmw_horizon_steps {
            for (a, (name_a, recs_a)) in models.iter().enumerate() {
                for (name_b, recs_b) in models.iter().skip(a + 1) {
                    if recs_a.iter().map(|r| r.target).ne(recs_b.iter().map(|r| r.target)) {
                        return Err(Error::Shape(format!("{name_a} and {name_b} forecast different targets")));
                    }
                    for kind in LossKind::ALL {
                        let la = losses(recs_a, kind)?;
                        let lb = losses(recs_b, kind)?;
                        if la.len() < 8 {
                            continue;
                        }
                        table.dmw.push(DmwEntry {
                            model_a: name_a.clone(),
                            model_b: name_b.clone(),
                            loss: kind,
                            result: dmw_test(&la, &lb, h)?,
                        });
                    }
                }
            }
        }
        Ok(table)
    }

    /// RMSFE and CRPS ratios and log-score differentials against `benchmark`.
    pub fn relative_to(&self, benchmark: &str) -> Result<Vec<RelativeScores>> {
        let base = self
            .models
            .iter()
            .find(|m| m.model == benchmark)
            .ok_or_else(|| Error::Config(format!("unknown benchmark model {benchmark}")))?;
        Ok(self
            .models
            .iter()
            .map(|m| RelativeScores {
                model: m.model.clone(),
                rmsfe_ratio: m.rmsfe / base.rmsfe,
                crps_ratio: m.avg_crps / base.avg_crps,
                log_score_diff: m.avg_log_score - base.avg_log_score,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crps_hand_example() {
        assert!((crps(&[0.0, 2.0], 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(crps(&[3.0, 3.0, 3.0], 3.0).unwrap(), 0.0);
    }

    #[test]
    fn crps_matches_naive() {
        let d = [0.3, -1.2, 4.0, 2.2, 2.2, 0.0, -0.7];
        assert!((crps(&d, 0.5).unwrap() - crps_naive(&d, 0.5)).abs() < 1e-12);
    }

    #[test]
    fn dmw_equal_losses() {
        let a: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let r = dmw_test(&a, &a, 1).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 0.5);
    }

    #[test]
    fn dmw_constant_differential_is_degenerate() {
        let b: Vec<f64> = (0..20).map(|i| (i as f64).cos()).collect();
        let a: Vec<f64> = b.iter().map(|v| v + 1.0).collect();
        let r = dmw_test(&a, &b, 1).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn dmw_needs_eight() {
        assert!(dmw_test(&[1.0; 7], &[0.0; 7], 1).is_err());
    }

    #[test]
    fn log_score_constant_sentinel() {
        assert_eq!(log_score(&[1.0; 40], 1.0).unwrap(), f64::INFINITY);
        assert_eq!(log_score(&[1.0; 40], 2.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn record_point_is_mean() {
        let r = ForecastRecord::new(4, 0.0, vec![1.0, 2.0, 6.0], Some(2.0));
        assert!((r.point - 3.0).abs() < 1e-15);
        assert_eq!(r.error(), Some(-1.0));
    }
}
