//! Outcome-regression, inverse-weighting, augmented and stratification
//! estimators of an arm mean.

use crate::models::{fit_linear, LinearFit};
use crate::numerics::Matrix;

use super::{Arm, EstimatorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IpwVersion {
    /// `(1/n) Σ aᵢyᵢ/pᵢ`
    Raw,
    /// `Σ aᵢyᵢ/pᵢ / Σ aᵢ/pᵢ`
    Ratio,
}

/// Mean of the fitted outcome regression over all units.
pub fn or_estimate(fitted: &[f64]) -> Result<f64, EstimatorError> {
    if fitted.is_empty() {
        return Err(EstimatorError::EmptyInput);
    }
    Ok(fitted.iter().sum::<f64>() / fitted.len() as f64)
}

pub fn ipw(arm: &Arm<'_>, version: IpwVersion) -> Result<f64, EstimatorError> {
    arm.validate()?;
    let n = arm.len() as f64;
    let mut weighted = 0.0;
    let mut total_weight = 0.0;
    for i in 0..arm.len() {
        if arm.indicator()[i] {
            let y = arm.outcome(i)?;
            let p = arm.propensity()[i];
            weighted += y / p;
            total_weight += 1.0 / p;
        }
    }
    Ok(match version {
        IpwVersion::Raw => weighted / n,
        IpwVersion::Ratio => {
            if total_weight == 0.0 {
                return Err(EstimatorError::NoObservedOutcomes);
            }
            weighted / total_weight
        }
    })
}

fn check_len(values: &[f64], arm: &Arm<'_>) -> Result<(), EstimatorError> {
    if values.len() != arm.len() {
        return Err(EstimatorError::LengthMismatch);
    }
    if !values.iter().all(|v| v.is_finite()) {
        return Err(EstimatorError::NonFinite("augmentation function"));
    }
    Ok(())
}

/// `(1/n) Σ aᵢyᵢ/pᵢ − (1/n) Σ (aᵢ/pᵢ − 1) h(Xᵢ)` for known values `h(Xᵢ)`.
pub fn aipw(arm: &Arm<'_>, h: &[f64]) -> Result<f64, EstimatorError> {
    arm.validate()?;
    check_len(h, arm)?;
    let n = arm.len() as f64;
    let mut ipw_sum = 0.0;
    let mut aug_sum = 0.0;
    for (i, &hi) in h.iter().enumerate() {
        if arm.indicator()[i] {
            ipw_sum += arm.outcome(i)? / arm.propensity()[i];
        }
        aug_sum += (arm.weight(i) - 1.0) * hi;
    }
    Ok(ipw_sum / n - aug_sum / n)
}

/// Both algebraic forms of the fixed-coefficient augmented estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AipwFix {
    /// `(1/n)Σ aᵢyᵢ/pᵢ − (1/n)Σ (aᵢ/pᵢ − 1) m̂(Xᵢ)`
    pub value: f64,
    /// `(1/n)Σ m̂(Xᵢ) + (1/n)Σ (aᵢ/pᵢ)(yᵢ − m̂(Xᵢ))`
    pub residual_form: f64,
    /// Magnitude of the summands, for judging agreement of the two forms.
    pub scale: f64,
}

impl AipwFix {
    /// Relative disagreement of the two forms, measured against the size
    /// of the terms being summed.
    pub fn discrepancy(&self) -> f64 {
        (self.value - self.residual_form).abs() / self.scale.max(f64::MIN_POSITIVE)
    }
}

pub fn aipw_fix(arm: &Arm<'_>, fitted: &[f64]) -> Result<AipwFix, EstimatorError> {
    arm.validate()?;
    check_len(fitted, arm)?;
    let n = arm.len() as f64;
    let (mut ipw_sum, mut aug_sum, mut m_sum, mut resid_sum, mut scale) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &m) in fitted.iter().enumerate() {
        let w = arm.weight(i);
        if arm.indicator()[i] {
            let y = arm.outcome(i)?;
            ipw_sum += y * w;
            resid_sum += w * (y - m);
            scale += (y * w).abs();
        }
        aug_sum += (w - 1.0) * m;
        m_sum += m;
        scale += ((w - 1.0) * m).abs();
    }
    let out = AipwFix {
        value: ipw_sum / n - aug_sum / n,
        residual_form: m_sum / n + resid_sum / n,
        scale: scale / n,
    };
    debug_assert!(
        out.discrepancy() < 1e-10,
        "forms disagree: {} vs {}",
        out.value,
        out.residual_form
    );
    Ok(out)
}

/// Weighted regression estimate: fit the outcome model on the arm's units
/// with weights `1/pᵢ`, then average its predictions over all units.
pub fn wls_estimate(arm: &Arm<'_>, or_design: &Matrix) -> Result<(f64, LinearFit), EstimatorError> {
    arm.validate()?;
    if or_design.nrows() != arm.len() {
        return Err(EstimatorError::LengthMismatch);
    }
    let rows = or_design.select_rows(arm.indicator());
    let mut y = Vec::with_capacity(rows.nrows());
    let mut w = Vec::with_capacity(rows.nrows());
    for i in 0..arm.len() {
        if arm.indicator()[i] {
            y.push(arm.outcome(i)?);
            w.push(arm.weight(i));
        }
    }
    if y.is_empty() {
        return Err(EstimatorError::NoObservedOutcomes);
    }
    let fit = fit_linear(&rows, &y, &w)?;
    let value = or_estimate(&fit.fitted(or_design))?;
    Ok((value, fit))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StratEstimate {
    pub value: f64,
    /// Stratum index (0-based) of every unit.
    pub assignment: Vec<usize>,
    /// Non-empty strata that contain no unit of the arm; their terms
    /// contribute nothing.
    pub strata_without_arm_units: usize,
}

/// Upper cut points of `s` quantile bins: the order statistics at ranks
/// `⌈j·n/s⌉`, `j = 1..s`.
pub fn quantile_cuts(values: &[f64], strata: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    (1..=strata)
        .map(|j| {
            let rank = (j * n).div_ceil(strata);
            sorted[rank.max(1) - 1]
        })
        .collect()
}

/// Index of the bin `(c_{j−1}, c_j]` containing `value`; ties land in the
/// lower bin.
pub fn stratum_of(cuts: &[f64], value: f64) -> usize {
    cuts.partition_point(|&c| c < value).min(cuts.len() - 1)
}

/// Inverse weighting by the within-stratum observed fraction, with strata
/// the `s` quantile bins of the fitted propensity.
pub fn strat_estimate(arm: &Arm<'_>, strata: usize) -> Result<StratEstimate, EstimatorError> {
    if strata == 0 {
        return Err(EstimatorError::InvalidStrata);
    }
    arm.validate()?;
    let p = arm.propensity();
    let cuts = quantile_cuts(p, strata);
    let assignment: Vec<usize> = p.iter().map(|&v| stratum_of(&cuts, v)).collect();
    let mut size = vec![0usize; strata];
    let mut observed = vec![0usize; strata];
    for (&j, &a) in assignment.iter().zip(arm.indicator()) {
        size[j] += 1;
        if a {
            observed[j] += 1;
        }
    }
    let mut sum = 0.0;
    for (i, &j) in assignment.iter().enumerate() {
        if arm.indicator()[i] {
            let frac = observed[j] as f64 / size[j] as f64;
            sum += arm.outcome(i)? / frac;
        }
    }
    let strata_without_arm_units = size
        .iter()
        .zip(&observed)
        .filter(|(&s, &o)| s > 0 && o == 0)
        .count();
    Ok(StratEstimate {
        value: sum / arm.len() as f64,
        assignment,
        strata_without_arm_units,
    })
}
