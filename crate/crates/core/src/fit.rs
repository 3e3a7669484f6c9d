//! End-to-end fitting of a mixed-frequency panel: design, chain, selection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{predictive_draws, ForecastRecord};
use crate::gibbs::{run_chain, Hyperparams, Model, PosteriorDraws, Schedule};
use crate::inference::{select, SelectionCriterion, SelectionReport};
use crate::midas::{almon_basis, build_design, design_row, AlmonBasis, DesignMatrix, MixedFreqPanel};
use crate::tune::SaConfig;

/// Model variants exposed to users. `Al` is the adaptive lasso: the AGL
/// sampler with one coefficient per group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Agl,
    AglSs,
    Al,
}

impl FitModel {
    pub fn sampler_model(self) -> Model {
        match self {
            FitModel::AglSs => Model::AglSs,
            FitModel::Agl | FitModel::Al => Model::Agl,
        }
    }

    /// Posterior median for spike-and-slab, credible intervals otherwise.
    pub fn default_criterion(self, level: f64) -> SelectionCriterion {
        match self {
            FitModel::AglSs => SelectionCriterion::PosteriorMedian,
            FitModel::Agl | FitModel::Al => SelectionCriterion::CredibleInterval { level },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FitModel::Agl => "agl",
            FitModel::AglSs => "agl_ss",
            FitModel::Al => "al",
        }
    }
}

impl std::str::FromStr for FitModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "agl" => Ok(FitModel::Agl),
            "agl_ss" | "agl-ss" => Ok(FitModel::AglSs),
            "al" => Ok(FitModel::Al),
            other => Err(Error::Config(format!("unknown model {other:?} (expected agl, agl_ss or al)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub model: FitModel,
    /// Almon polynomial degree `p`.
    pub degree: usize,
    /// Endpoint restrictions `r`.
    pub restrictions: usize,
    pub hyper: Hyperparams,
    pub schedule: Schedule,
    pub sa: SaConfig,
    pub level: f64,
}

impl FitSpec {
    pub fn new(model: FitModel, degree: usize, restrictions: usize, schedule: Schedule) -> Self {
        Self {
            model,
            degree,
            restrictions,
            hyper: Hyperparams::default(),
            schedule,
            sa: SaConfig::default(),
            level: 0.95,
        }
    }

    pub fn criterion(&self) -> SelectionCriterion {
        self.model.default_criterion(self.level)
    }
}

#[derive(Clone, Debug)]
pub struct Fitted {
    pub basis: AlmonBasis,
    pub draws: PosteriorDraws,
    pub selection: SelectionReport,
}

impl Fitted {
    /// Predictive draws for low-frequency period `t` of `panel`.
    pub fn forecast<R: Rng + ?Sized>(
        &self,
        panel: &MixedFreqPanel,
        unpenalized: Option<&[Vec<f64>]>,
        t: usize,
        rng: &mut R,
    ) -> Result<ForecastRecord> {
        let z = design_row(panel, &self.basis, &self.draws.meta, unpenalized, t)?;
        let draws = predictive_draws(&self.draws, &z, rng)?;
        Ok(ForecastRecord::new(t, panel.horizon(), draws, panel.y().get(t).copied()))
    }
}

/// Standardized design for `spec`, regrouped to singletons for the lasso.
pub fn design_for(panel: &MixedFreqPanel, spec: &FitSpec, unpenalized: Option<&[Vec<f64>]>) -> Result<(AlmonBasis, DesignMatrix)> {
    let basis = almon_basis(spec.degree, panel.lag_window(), spec.restrictions)?;
    let design = build_design(panel, &basis, unpenalized)?;
    let design = if spec.model == FitModel::Al {
        design.with_singleton_groups()
    } else {
        design
    };
    Ok((basis, design))
}

pub fn fit_panel<R: Rng + ?Sized>(
    panel: &MixedFreqPanel,
    spec: &FitSpec,
    unpenalized: Option<&[Vec<f64>]>,
    rng: &mut R,
) -> Result<Fitted> {
    let (basis, design) = design_for(panel, spec, unpenalized)?;
    let draws = run_chain(spec.model.sampler_model(), &design, &spec.hyper, spec.schedule, &spec.sa, rng)?;
    let selection = select(&draws, &basis, spec.criterion())?;
    Ok(Fitted {
        basis,
        draws,
        selection,
    })
}
