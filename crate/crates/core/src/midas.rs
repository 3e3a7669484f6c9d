//! Almon lag bases, frequency alignment and the standardized MIDAS design.
//!
//! A predictor observed `m` times per low-frequency period enters the
//! regression through `C` high-frequency lags. The Almon parameterization
//! maps those lags to `p - r + 1` free coefficients per predictor, so each
//! predictor contributes one coefficient group to the design.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::PosteriorDraws;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestrictionKind {
    None,
    /// `B(C-1) = 0`.
    TailZero,
    /// `B(C-1) = 0` and `B'(C-1) = 0`.
    TailAndSlopeZero,
}

impl RestrictionKind {
    pub fn from_count(r: usize) -> Option<Self> {
        match r {
            0 => Some(Self::None),
            1 => Some(Self::TailZero),
            2 => Some(Self::TailAndSlopeZero),
            _ => None,
        }
    }

    pub fn count(self) -> usize {
        match self {
            Self::None => 0,
            Self::TailZero => 1,
            Self::TailAndSlopeZero => 2,
        }
    }
}

/// Restricted Almon polynomial basis.
///
/// Row `i` of `q` holds the `i`-th free basis polynomial evaluated at the
/// lags `c = 0, ..., C-1`; the same polynomial's monomial coefficients are
/// kept in `coefficients` so the weight curve can be evaluated off-grid.
#[derive(Clone, Debug, PartialEq)]
pub struct AlmonBasis {
    degree: usize,
    lag_window: usize,
    restriction: RestrictionKind,
    coefficients: DMatrix<f64>,
    q: DMatrix<f64>,
}

/// Build the `(p - r + 1) x C` Almon weighting matrix.
///
/// Restrictions are imposed at the last lag `a = C - 1`. The monomials of
/// order `r..=p` stay free and the lower `r` coefficients are eliminated, so
/// for `p = 3, r = 2` the rows are `(c - a)^2` and `(c - a)^2 (c + 2a)`.
pub fn almon_basis(degree: usize, lag_window: usize, restrictions: usize) -> Result<AlmonBasis> {
    let restriction = RestrictionKind::from_count(restrictions)
        .filter(|_| restrictions <= degree)
        .ok_or(Error::InvalidRestriction {
            p: degree,
            r: restrictions,
        })?;
    if lag_window == 0 {
        return Err(Error::Shape("lag window must be at least 1".into()));
    }
    if restrictions > 0 && lag_window < 2 {
        return Err(Error::Underdetermined {
            lag_window,
            r: restrictions,
        });
    }

    let n_mono = degree + 1;
    let n_free = degree - restrictions + 1;
    let a = (lag_window - 1) as f64;

    // Row 0: B(a) = sum theta_i a^i. Row 1: B'(a) = sum i theta_i a^(i-1).
    let constraints = DMatrix::from_fn(restrictions, n_mono, |row, i| match row {
        0 => a.powi(i as i32),
        _ if i == 0 => 0.0,
        _ => i as f64 * a.powi(i as i32 - 1),
    });

    let mut coefficients = DMatrix::zeros(n_free, n_mono);
    for f in 0..n_free {
        let free_col = restrictions + f;
        coefficients[(f, free_col)] = 1.0;
        if restrictions > 0 {
            let pivot = constraints.columns(0, restrictions).into_owned();
            let rhs = -constraints.column(free_col).into_owned();
            let solved = eliminate(pivot, rhs).ok_or(Error::Underdetermined {
                lag_window,
                r: restrictions,
            })?;
            for (i, v) in solved.iter().enumerate() {
                coefficients[(f, i)] = *v;
            }
        }
    }

    let q = DMatrix::from_fn(n_free, lag_window, |f, c| {
        eval_poly(coefficients.row(f).iter().copied(), c as f64)
    });
    if restrictions > 0 && q.iter().all(|v| *v == 0.0) {
        return Err(Error::Underdetermined {
            lag_window,
            r: restrictions,
        });
    }

    Ok(AlmonBasis {
        degree,
        lag_window,
        restriction,
        coefficients,
        q,
    })
}

/// Gaussian elimination with partial pivoting on a small square system.
fn eliminate(mut a: DMatrix<f64>, mut b: DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))?;
        if a[(pivot, col)].abs() < 1e-300 {
            return None;
        }
        a.swap_rows(col, pivot);
        b.swap_rows(col, pivot);
        for row in col + 1..n {
            let factor = a[(row, col)] / a[(col, col)];
            for k in col..n {
                a[(row, k)] -= factor * a[(col, k)];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = DVector::zeros(n);
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[(row, k)] * x[k]).sum();
        x[row] = (b[row] - tail) / a[(row, row)];
    }
    Some(x)
}

fn eval_poly(coefs: impl DoubleEndedIterator<Item = f64>, c: f64) -> f64 {
    coefs.rev().fold(0.0, |acc, v| acc * c + v)
}

impl AlmonBasis {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn lag_window(&self) -> usize {
        self.lag_window
    }

    pub fn restriction(&self) -> RestrictionKind {
        self.restriction
    }

    /// Number of free parameters per predictor, `p - r + 1`.
    pub fn n_free(&self) -> usize {
        self.q.nrows()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Monomial coefficients of each free basis polynomial (one row each).
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    /// `Q * iota_C`: the contribution of each free coefficient to the slope.
    pub fn lag_sums(&self) -> Vec<f64> {
        self.q.row_iter().map(|row| row.sum()).collect()
    }

    /// Weight curve `B(c; theta)` for free coefficients `theta`, at any real `c`.
    pub fn weight(&self, theta: &[f64], c: f64) -> f64 {
        theta
            .iter()
            .zip(self.coefficients.row_iter())
            .map(|(t, row)| t * eval_poly(row.iter().copied(), c))
            .sum()
    }

    /// Derivative `dB/dc` of the weight curve.
    pub fn weight_slope(&self, theta: &[f64], c: f64) -> f64 {
        theta
            .iter()
            .zip(self.coefficients.row_iter())
            .map(|(t, row)| {
                let deriv = row.iter().enumerate().skip(1).rev().fold(0.0, |acc, (i, v)| acc * c + i as f64 * v);
                t * deriv
            })
            .sum()
    }

    /// Free coefficients applied to a vector of `C` lags ordered newest first.
    pub fn transform(&self, lags: &[f64]) -> Vec<f64> {
        self.q
            .row_iter()
            .map(|row| row.iter().zip(lags).map(|(q, x)| q * x).sum())
            .collect()
    }
}

/// Low-frequency response aligned with a panel of high-frequency predictors.
///
/// Low-frequency period `t` covers the high-frequency observations
/// `head + t*m .. head + (t+1)*m`. With horizon `h = steps/m`, lag 0 for
/// period `t` is the observation `steps` positions before the last one in
/// the period. Periods past the end of `y` carry predictors only and serve
/// as forecast targets.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedFreqPanel {
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
    m: usize,
    lag_window: usize,
    horizon_steps: usize,
    head: usize,
}

impl MixedFreqPanel {
    pub fn new(
        y: Vec<f64>,
        x: Vec<Vec<f64>>,
        m: usize,
        lag_window: usize,
        horizon_steps: usize,
        head: usize,
    ) -> Result<Self> {
        if m == 0 || lag_window == 0 {
            return Err(Error::Config("frequency ratio and lag window must be positive".into()));
        }
        if x.is_empty() {
            return Err(Error::Shape("panel needs at least one predictor".into()));
        }
        let len = x[0].len();
        if x.iter().any(|s| s.len() != len) {
            return Err(Error::Shape("predictor series have unequal lengths".into()));
        }
        if len < head || (len - head) % m != 0 {
            return Err(Error::Shape(format!(
                "{len} high-frequency observations minus head {head} is not a multiple of m = {m}"
            )));
        }
        let n_periods = (len - head) / m;
        if y.len() > n_periods {
            return Err(Error::Shape(format!(
                "{} responses but only {n_periods} low-frequency periods of predictors",
                y.len()
            )));
        }
        if y.iter().chain(x.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Shape("panel contains non-finite values".into()));
        }
        Ok(Self {
            y,
            x,
            m,
            lag_window,
            horizon_steps,
            head,
        })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn lag_window(&self) -> usize {
        self.lag_window
    }

    pub fn horizon_steps(&self) -> usize {
        self.horizon_steps
    }

    /// Horizon in low-frequency units.
    pub fn horizon(&self) -> f64 {
        self.horizon_steps as f64 / self.m as f64
    }

    pub fn head(&self) -> usize {
        self.head
    }

    pub fn n_predictors(&self) -> usize {
        self.x.len()
    }

    pub fn n_periods(&self) -> usize {
        (self.x[0].len() - self.head) / self.m
    }

    /// Same panel with the response truncated to the first `n` periods.
    pub fn with_response_len(&self, n: usize) -> Self {
        let mut out = self.clone();
        out.y.truncate(n);
        out
    }

    pub fn with_horizon_steps(&self, steps: usize) -> Self {
        let mut out = self.clone();
        out.horizon_steps = steps;
        out
    }

    fn lag0_index(&self, t: usize) -> Option<usize> {
        (self.head + (t + 1) * self.m).checked_sub(1 + self.horizon_steps)
    }

    /// Whether period `t` has a full window of `C` lags available.
    pub fn is_usable(&self, t: usize) -> bool {
        t < self.n_periods()
            && self
                .lag0_index(t)
                .is_some_and(|i| i + 1 >= self.lag_window)
    }

    /// First period with a full lag window.
    pub fn first_usable(&self) -> usize {
        (0..self.n_periods())
            .find(|&t| self.is_usable(t))
            .unwrap_or(self.n_periods())
    }

    /// The `C` high-frequency lags of predictor `k` for period `t`, newest first.
    pub fn lags(&self, k: usize, t: usize) -> Option<Vec<f64>> {
        if !self.is_usable(t) {
            return None;
        }
        let lag0 = self.lag0_index(t)?;
        Some((0..self.lag_window).map(|c| self.x[k][lag0 - c]).collect())
    }

    /// Untransformed regressor row `z_t` (all predictors, before standardization).
    pub fn raw_row(&self, basis: &AlmonBasis, t: usize) -> Option<Vec<f64>> {
        let mut row = Vec::with_capacity(self.n_predictors() * basis.n_free());
        for k in 0..self.n_predictors() {
            row.extend(basis.transform(&self.lags(k, t)?));
        }
        Some(row)
    }
}

/// Coefficient grouping: `(start, size)` blocks over the penalized columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupLayout {
    blocks: Vec<(usize, usize)>,
}

impl GroupLayout {
    pub fn new(blocks: Vec<(usize, usize)>) -> Result<Self> {
        let mut next = 0;
        for &(start, size) in &blocks {
            if start != next || size == 0 {
                return Err(Error::Shape("groups must be contiguous, ordered and non-empty".into()));
            }
            next += size;
        }
        Ok(Self { blocks })
    }

    /// `n_groups` equal blocks of `size` columns.
    pub fn uniform(n_groups: usize, size: usize) -> Self {
        Self {
            blocks: (0..n_groups).map(|j| (j * size, size)).collect(),
        }
    }

    /// One column per group, the adaptive-lasso configuration.
    pub fn singletons(n: usize) -> Self {
        Self::uniform(n, 1)
    }

    pub fn blocks(&self) -> &[(usize, usize)] {
        &self.blocks
    }

    pub fn n_groups(&self) -> usize {
        self.blocks.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.1).collect()
    }

    /// Total penalized width `g~`.
    pub fn width(&self) -> usize {
        self.blocks.iter().map(|b| b.1).sum()
    }
}

/// Everything needed to map standardized coefficients back to the data scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignMeta {
    pub groups: GroupLayout,
    /// Column block of each predictor (independent of the penalty grouping).
    pub predictor_blocks: Vec<(usize, usize)>,
    pub col_means: Vec<f64>,
    pub col_sds: Vec<f64>,
    pub y_mean: f64,
    pub unpenalized_cols: Vec<usize>,
}

impl DesignMeta {
    pub fn n_coef(&self) -> usize {
        self.col_means.len()
    }

    pub fn n_predictors(&self) -> usize {
        self.predictor_blocks.len()
    }

    /// Apply the fit-time centering and scaling to a raw regressor row.
    pub fn standardize_row(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.n_coef() {
            return Err(Error::Shape(format!(
                "row has {} entries, design has {} columns",
                raw.len(),
                self.n_coef()
            )));
        }
        Ok(raw
            .iter()
            .zip(self.col_means.iter().zip(&self.col_sds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }
}

/// Standardized regressors `Z` (T x (g~ + unpenalized)) and centered response.
#[derive(Clone, Debug)]
pub struct DesignMatrix {
    pub z: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Low-frequency period index of each row.
    pub periods: Vec<usize>,
    pub meta: DesignMeta,
}

impl DesignMatrix {
    /// Standardize raw regressors and center the response.
    ///
    /// The trailing `n_unpenalized` columns are excluded from the grouping.
    pub fn from_raw(
        raw: DMatrix<f64>,
        y: &[f64],
        periods: Vec<usize>,
        groups: GroupLayout,
        predictor_blocks: Vec<(usize, usize)>,
        n_unpenalized: usize,
    ) -> Result<Self> {
        let (n, p) = raw.shape();
        if y.len() != n || periods.len() != n {
            return Err(Error::Shape("response and regressors disagree on row count".into()));
        }
        if groups.width() + n_unpenalized != p {
            return Err(Error::Shape(format!(
                "groups cover {} columns plus {n_unpenalized} unpenalized, design has {p}",
                groups.width()
            )));
        }
        if n < 2 {
            return Err(Error::InsufficientData("need at least two usable rows".into()));
        }
        let (col_means, col_sds) = column_moments(&raw);
        if let Some(j) = col_sds.iter().position(|s| !(*s > 0.0)) {
            return Err(Error::Shape(format!("column {j} has zero variance")));
        }
        let mut z = raw;
        for (j, mut col) in z.column_iter_mut().enumerate() {
            col.apply(|v| *v = (*v - col_means[j]) / col_sds[j]);
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let width = groups.width();
        Ok(Self {
            z,
            y: yc,
            periods,
            meta: DesignMeta {
                groups,
                predictor_blocks,
                col_means,
                col_sds,
                y_mean,
                unpenalized_cols: (width..p).collect(),
            },
        })
    }

    pub fn n_rows(&self) -> usize {
        self.z.nrows()
    }

    /// Same design, regrouped so that every penalized coefficient is its own group.
    pub fn with_singleton_groups(mut self) -> Self {
        self.meta.groups = GroupLayout::singletons(self.meta.groups.width());
        self
    }
}

/// Column means and sample standard deviations (n - 1 denominator).
pub fn column_moments(m: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = m.nrows() as f64;
    let means: Vec<f64> = m.column_iter().map(|c| c.sum() / n).collect();
    let sds = m
        .column_iter()
        .zip(&means)
        .map(|(c, mu)| (c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
        .collect();
    (means, sds)
}

/// Raw (untransformed-scale) regressors for every usable period with a response.
pub fn raw_regressors(panel: &MixedFreqPanel, basis: &AlmonBasis) -> Result<(DMatrix<f64>, Vec<usize>)> {
    if basis.lag_window() != panel.lag_window() {
        return Err(Error::Shape(format!(
            "basis lag window {} differs from panel lag window {}",
            basis.lag_window(),
            panel.lag_window()
        )));
    }
    let first = panel.first_usable();
    if first >= panel.y().len() {
        return Err(Error::Alignment {
            first_usable: first,
            available: panel.y().len(),
        });
    }
    let periods: Vec<usize> = (first..panel.y().len()).collect();
    let width = panel.n_predictors() * basis.n_free();
    let mut raw = DMatrix::zeros(periods.len(), width);
    for (i, &t) in periods.iter().enumerate() {
        let row = panel.raw_row(basis, t).expect("usable period");
        raw.row_mut(i).copy_from_slice(&row);
    }
    Ok((raw, periods))
}

/// Build the standardized design.
///
/// `unpenalized` holds extra covariates indexed by low-frequency period
/// (each at least as long as the response). They are standardized like the
/// MIDAS columns but left outside every penalty group.
pub fn build_design(
    panel: &MixedFreqPanel,
    basis: &AlmonBasis,
    unpenalized: Option<&[Vec<f64>]>,
) -> Result<DesignMatrix> {
    let (raw, periods) = raw_regressors(panel, basis)?;
    let extra = unpenalized.unwrap_or(&[]);
    for (i, cov) in extra.iter().enumerate() {
        if cov.len() < panel.y().len() {
            return Err(Error::Shape(format!(
                "unpenalized covariate {i} has {} periods, response has {}",
                cov.len(),
                panel.y().len()
            )));
        }
    }
    let width = raw.ncols();
    let raw = if extra.is_empty() {
        raw
    } else {
        let mut full = raw.resize_horizontally(width + extra.len(), 0.0);
        for (i, &t) in periods.iter().enumerate() {
            for (j, cov) in extra.iter().enumerate() {
                full[(i, width + j)] = cov[t];
            }
        }
        full
    };
    let n_free = basis.n_free();
    let k = panel.n_predictors();
    let y: Vec<f64> = periods.iter().map(|&t| panel.y()[t]).collect();
    DesignMatrix::from_raw(
        raw,
        &y,
        periods,
        GroupLayout::uniform(k, n_free),
        (0..k).map(|j| (j * n_free, n_free)).collect(),
        extra.len(),
    )
}

/// Standardized regressor row for period `t` (which may lie beyond the response).
pub fn design_row(
    panel: &MixedFreqPanel,
    basis: &AlmonBasis,
    meta: &DesignMeta,
    unpenalized: Option<&[Vec<f64>]>,
    t: usize,
) -> Result<Vec<f64>> {
    let mut raw = panel.raw_row(basis, t).ok_or(Error::Alignment {
        first_usable: panel.first_usable(),
        available: panel.n_periods(),
    })?;
    for cov in unpenalized.unwrap_or(&[]) {
        raw.push(*cov.get(t).ok_or_else(|| Error::Shape(format!("unpenalized covariate missing period {t}")))?);
    }
    meta.standardize_row(&raw)
}

/// Slope `beta_k = theta_k' Q iota_C` of each predictor on the data scale.
pub fn slopes_from_theta(theta: &[f64], meta: &DesignMeta, basis: &AlmonBasis) -> Vec<f64> {
    let sums = basis.lag_sums();
    meta.predictor_blocks
        .iter()
        .map(|&(start, size)| {
            (0..size)
                .map(|i| theta[start + i] / meta.col_sds[start + i] * sums[i])
                .sum()
        })
        .collect()
}

/// Per-draw slopes on the original scale: a draws x K matrix.
pub fn recover_slopes(draws: &PosteriorDraws, basis: &AlmonBasis) -> Result<DMatrix<f64>> {
    let meta = &draws.meta;
    if meta.predictor_blocks.iter().any(|b| b.1 != basis.n_free()) {
        return Err(Error::Shape("draws were not produced with this basis".into()));
    }
    let k = meta.n_predictors();
    let mut out = DMatrix::zeros(draws.len(), k);
    for (i, d) in draws.draws.iter().enumerate() {
        let b = slopes_from_theta(&d.theta, meta, basis);
        out.row_mut(i).copy_from_slice(&b);
    }
    Ok(out)
}
