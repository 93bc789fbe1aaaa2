use crate::datagen::{design_matrix, Dataset, DesignSpec};
use crate::models::{fit_logistic, fit_outcome_model, LinearFit, LogisticFit};
use crate::numerics::Matrix;

use super::{mu1_estimate, Estimate, EstimatorError, EstimatorSpec, Flags, SampleView};

/// Logistic propensity model fitted on all units.
#[derive(Clone, Debug)]
pub struct PropensityModel {
    pub design: Matrix,
    pub fit: LogisticFit,
    /// `π̂(Xᵢ)` for every unit, after the floor.
    pub propensity: Vec<f64>,
}

impl PropensityModel {
    pub fn fit(dataset: &Dataset, spec: DesignSpec, pi_floor: f64) -> Result<Self, EstimatorError> {
        let design = design_matrix(dataset, spec)?;
        let fit = fit_logistic(&design, dataset.treatment())?.with_design(spec);
        let propensity = fit.propensities(&design, pi_floor);
        Ok(Self {
            design,
            fit,
            propensity,
        })
    }

    pub fn flags(&self) -> Flags {
        let mut f = Flags::empty();
        if !self.fit.converged() {
            f |= Flags::PS_UNCONVERGED;
        }
        if self.fit.fallback {
            f |= Flags::PS_FALLBACK;
        }
        f
    }
}

/// Linear outcome regression fitted by OLS on the treated units.
#[derive(Clone, Debug)]
pub struct OutcomeModel {
    pub design: Matrix,
    pub fit: LinearFit,
    /// `m̂₁(Xᵢ)` for every unit.
    pub fitted: Vec<f64>,
}

impl OutcomeModel {
    pub fn fit(dataset: &Dataset, spec: DesignSpec) -> Result<Self, EstimatorError> {
        let design = design_matrix(dataset, spec)?;
        let fit = fit_outcome_model(&design, dataset.observed_outcomes(), None)?.with_design(spec);
        let fitted = fit.fitted(&design);
        Ok(Self {
            design,
            fit,
            fitted,
        })
    }

    pub fn flags(&self) -> Flags {
        if self.fit.rank_deficient() {
            Flags::OR_FALLBACK
        } else {
            Flags::empty()
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct FittedModels {
    pub ps: Option<PropensityModel>,
    pub outcome: Option<OutcomeModel>,
}

pub fn fit_models(
    dataset: &Dataset,
    ps_spec: Option<DesignSpec>,
    or_spec: Option<DesignSpec>,
    pi_floor: f64,
) -> Result<FittedModels, EstimatorError> {
    Ok(FittedModels {
        ps: ps_spec
            .map(|s| PropensityModel::fit(dataset, s, pi_floor))
            .transpose()?,
        outcome: or_spec.map(|s| OutcomeModel::fit(dataset, s)).transpose()?,
    })
}

impl FittedModels {
    pub fn estimate_mu1(
        &self,
        dataset: &Dataset,
        spec: &EstimatorSpec,
    ) -> Result<Estimate, EstimatorError> {
        estimate_with(dataset, self.ps.as_ref(), self.outcome.as_ref(), spec)
    }
}

/// Evaluates `spec` for `μ₁` on `dataset` with already fitted models. Model
/// diagnostics are merged into the returned flags.
pub fn estimate_with(
    dataset: &Dataset,
    ps: Option<&PropensityModel>,
    outcome: Option<&OutcomeModel>,
    spec: &EstimatorSpec,
) -> Result<Estimate, EstimatorError> {
    let family = spec.family;
    let label = family.label();
    if family.needs_propensity_model() && ps.is_none() {
        return Err(EstimatorError::MissingPropensityModel(label));
    }
    if family.needs_outcome_model() && outcome.is_none() {
        return Err(EstimatorError::MissingOutcomeModel(label));
    }
    if spec.strata == 0 {
        return Err(EstimatorError::InvalidStrata);
    }
    // The outcome-regression mean never reads the propensity.
    let unit;
    let propensity = match ps {
        Some(p) => p.propensity.as_slice(),
        None => {
            unit = vec![1.0; dataset.len()];
            unit.as_slice()
        }
    };
    let h_values: Option<Vec<f64>> = spec
        .h
        .as_ref()
        .map(|h| dataset.covariates().iter().map(|x| h.eval(x)).collect());
    let view = SampleView {
        treatment: dataset.treatment(),
        outcomes: dataset.observed_outcomes(),
        propensity,
        ps_design: ps.map(|p| &p.design),
        or_design: outcome.map(|o| &o.design),
    };
    let mut est = mu1_estimate(
        &view,
        outcome.map(|o| o.fitted.as_slice()),
        spec,
        h_values.as_deref(),
    )?;
    if family.needs_propensity_model() {
        est.flags |= ps.map_or(Flags::empty(), PropensityModel::flags);
    }
    if family.needs_outcome_model() {
        est.flags |= outcome.map_or(Flags::empty(), OutcomeModel::flags);
    }
    Ok(est)
}
