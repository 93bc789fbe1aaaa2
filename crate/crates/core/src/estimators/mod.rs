//! Point estimators of an arm mean (and the treatment contrast) from fitted
//! propensity-score and outcome-regression models.

mod arm;
mod causal;
mod pipeline;
mod regression;
mod weighting;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use bitflags::bitflags;
use thiserror::Error;

use crate::models::ModelError;
use crate::numerics::{LinalgError, Matrix};

pub use arm::Arm;
pub use causal::{ace_combined, ace_control_variates};
pub use pipeline::{estimate_with, fit_models, FittedModels, OutcomeModel, PropensityModel};
pub use regression::{
    build_control_variates, reg_estimate, Basis, ControlVariateRows, RegEstimate, RegVariant,
};
pub use weighting::{
    aipw, aipw_fix, ipw, or_estimate, quantile_cuts, strat_estimate, stratum_of, wls_estimate,
    AipwFix, IpwVersion, StratEstimate,
};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("fitted propensity is zero for observed unit {0}")]
    ZeroPropensityOnTreated(usize),
    #[error("unit {0} is in the arm but its outcome is missing")]
    MissingOutcome(usize),
    #[error("no unit has an observed outcome")]
    NoObservedOutcomes,
    #[error("input vectors have inconsistent lengths")]
    LengthMismatch,
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("strata count must be at least 1")]
    InvalidStrata,
    #[error("basis one_h_m1 needs an augmentation function h")]
    MissingAugmentation,
    #[error("the score block needs the propensity-model design")]
    MissingScoreDesign,
    #[error("{0} needs a fitted outcome regression")]
    MissingOutcomeModel(&'static str),
    #[error("{0} needs a fitted propensity score")]
    MissingPropensityModel(&'static str),
    #[error("unknown {what} `{value}`")]
    UnknownName { what: &'static str, value: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Data(#[from] crate::datagen::DataError),
}

bitflags! {
    /// Conditions worth reporting about one evaluation. None of them stops
    /// a simulation run.
    #[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
    pub struct Flags: u16 {
        const PS_UNCONVERGED = 1;
        const PS_FALLBACK = 1 << 1;
        const OR_FALLBACK = 1 << 2;
        const GRAM_FALLBACK = 1 << 3;
        const EMPTY_STRATUM = 1 << 4;
        /// Evaluation failed; the estimate is NaN.
        const FAILED = 1 << 5;
    }
}

impl Flags {
    pub fn describe(self) -> String {
        if self.is_empty() {
            return "none".to_string();
        }
        let names: Vec<&str> = self.iter_names().map(|(n, _)| n).collect();
        names.join("|").to_lowercase()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Family {
    Or,
    IpwRaw,
    IpwRatio,
    AipwH,
    AipwFix,
    Wls,
    RegTilde,
    RegHat,
    RegTildeM,
    RegHatM,
    Strat,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::Or,
        Family::IpwRaw,
        Family::IpwRatio,
        Family::AipwH,
        Family::AipwFix,
        Family::Wls,
        Family::RegTilde,
        Family::RegHat,
        Family::RegTildeM,
        Family::RegHatM,
        Family::Strat,
    ];

    /// Label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            Family::Or => "OLS",
            Family::IpwRaw => "IPW",
            Family::IpwRatio => "IPW_ratio",
            Family::AipwH => "AIPW_h",
            Family::AipwFix => "AIPW_fix",
            Family::Wls => "WLS",
            Family::RegTilde => "REG_tilde",
            Family::RegHat => "REG_hat",
            Family::RegTildeM => "REG_tilde_m",
            Family::RegHatM => "REG_hat_m",
            Family::Strat => "strat",
        }
    }

    /// Name accepted on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            Family::Or => "or",
            Family::IpwRaw => "ipw",
            Family::IpwRatio => "ipw-ratio",
            Family::AipwH => "aipw-h",
            Family::AipwFix => "aipw-fix",
            Family::Wls => "wls",
            Family::RegTilde => "reg-tilde",
            Family::RegHat => "reg-hat",
            Family::RegTildeM => "reg-tilde-m",
            Family::RegHatM => "reg-hat-m",
            Family::Strat => "strat",
        }
    }

    pub fn needs_outcome_model(self) -> bool {
        matches!(
            self,
            Family::Or
                | Family::AipwFix
                | Family::Wls
                | Family::RegTilde
                | Family::RegHat
                | Family::RegTildeM
                | Family::RegHatM
        )
    }

    pub fn needs_propensity_model(self) -> bool {
        self != Family::Or
    }

    /// The "(m)" variants drop the propensity score from the control
    /// variates; the other regression estimators always carry it.
    pub fn include_ps_score(self) -> bool {
        matches!(self, Family::RegTilde | Family::RegHat)
    }

    pub fn reg_variant(self) -> Option<RegVariant> {
        match self {
            Family::RegTilde | Family::RegTildeM => Some(RegVariant::Tilde),
            Family::RegHat | Family::RegHatM => Some(RegVariant::Hat),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Family {
    type Err = EstimatorError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.cli_name() == s || f.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| EstimatorError::UnknownName {
                what: "estimator",
                value: s.to_string(),
            })
    }
}

/// A known function of the observed covariates, for the augmented family.
#[derive(Clone)]
pub struct HFunction(Arc<dyn Fn(&[f64; 4]) -> f64 + Send + Sync>);

impl HFunction {
    pub fn new(f: impl Fn(&[f64; 4]) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64; 4]) -> f64 {
        (self.0)(x)
    }
}

impl fmt::Debug for HFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("HFunction(..)")
    }
}

#[derive(Clone, Debug)]
pub struct EstimatorSpec {
    pub family: Family,
    pub basis: Basis,
    pub strata: usize,
    pub h: Option<HFunction>,
}

impl EstimatorSpec {
    /// Defaults match the table preset: basis `(1, m̂)`, five strata.
    pub fn new(family: Family) -> Self {
        Self {
            family,
            basis: Basis::OneAndM1,
            strata: 5,
            h: None,
        }
    }

    pub fn with_basis(mut self, basis: Basis) -> Self {
        self.basis = basis;
        self
    }

    pub fn with_strata(mut self, strata: usize) -> Self {
        self.strata = strata;
        self
    }

    pub fn with_h(mut self, h: HFunction) -> Self {
        self.h = Some(h);
        self
    }

    pub fn include_ps_score(&self) -> bool {
        self.family.include_ps_score()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub flags: Flags,
}

/// Observed sample plus fitted propensities, shared by both arms.
#[derive(Clone, Copy, Debug)]
pub struct SampleView<'a> {
    pub treatment: &'a [bool],
    /// Outcomes of units in the arm(s) being estimated; untreated entries
    /// are never read by the treated-arm estimators.
    pub outcomes: &'a [Option<f64>],
    pub propensity: &'a [f64],
    pub ps_design: Option<&'a Matrix>,
    pub or_design: Option<&'a Matrix>,
}

impl<'a> SampleView<'a> {
    pub fn treated_arm(&self) -> Arm<'a> {
        let arm = Arm::treated(self.treatment, self.outcomes, self.propensity);
        match self.ps_design {
            Some(d) => arm.with_score_design(d),
            None => arm,
        }
    }

    pub fn control_arm(&self) -> Arm<'a> {
        let arm = Arm::control(self.treatment, self.outcomes, self.propensity);
        match self.ps_design {
            Some(d) => arm.with_score_design(d),
            None => arm,
        }
    }
}

/// Evaluates `spec` on one arm. `fitted` holds `m̂(Xᵢ)` for every unit and
/// `h` the augmentation values `h(Xᵢ)`.
pub fn evaluate_arm(
    spec: &EstimatorSpec,
    arm: &Arm<'_>,
    fitted: Option<&[f64]>,
    or_design: Option<&Matrix>,
    h: Option<&[f64]>,
) -> Result<Estimate, EstimatorError> {
    let label = spec.family.label();
    let need_fitted = || fitted.ok_or(EstimatorError::MissingOutcomeModel(label));
    let mut flags = Flags::empty();
    let value = match spec.family {
        Family::Or => or_estimate(need_fitted()?)?,
        Family::IpwRaw => ipw(arm, IpwVersion::Raw)?,
        Family::IpwRatio => ipw(arm, IpwVersion::Ratio)?,
        Family::AipwH => aipw(arm, h.ok_or(EstimatorError::MissingAugmentation)?)?,
        Family::AipwFix => aipw_fix(arm, need_fitted()?)?.value,
        Family::Wls => {
            let design = or_design.ok_or(EstimatorError::MissingOutcomeModel(label))?;
            let (value, fit) = wls_estimate(arm, design)?;
            if fit.rank_deficient() {
                flags |= Flags::OR_FALLBACK;
            }
            value
        }
        Family::RegTilde | Family::RegHat | Family::RegTildeM | Family::RegHatM => {
            let cv = build_control_variates(
                arm,
                need_fitted()?,
                spec.basis,
                h,
                spec.include_ps_score(),
            )?;
            let reg = reg_estimate(&cv, spec.family.reg_variant().expect("regression family"))?;
            if reg.fallback.engaged() {
                flags |= Flags::GRAM_FALLBACK;
            }
            reg.value
        }
        Family::Strat => {
            let s = strat_estimate(arm, spec.strata)?;
            if s.strata_without_arm_units > 0 {
                flags |= Flags::EMPTY_STRATUM;
            }
            s.value
        }
    };
    Ok(Estimate { value, flags })
}

/// Estimator of the treated-arm mean `μ₁`.
pub fn mu1_estimate(
    view: &SampleView<'_>,
    fitted1: Option<&[f64]>,
    spec: &EstimatorSpec,
    h: Option<&[f64]>,
) -> Result<Estimate, EstimatorError> {
    evaluate_arm(spec, &view.treated_arm(), fitted1, view.or_design, h)
}

/// Mirror of [`mu1_estimate`] for `μ₀`: `T`, `π̂` and `m̂₁` are replaced
/// by `1 − T`, `1 − π̂` and `m̂₀`. `view.outcomes` must carry the control
/// units' outcomes.
pub fn mu0_estimate(
    view: &SampleView<'_>,
    fitted0: Option<&[f64]>,
    spec: &EstimatorSpec,
    h: Option<&[f64]>,
) -> Result<Estimate, EstimatorError> {
    evaluate_arm(spec, &view.control_arm(), fitted0, view.or_design, h)
}
