use crate::numerics::Matrix;

use super::EstimatorError;

/// One arm of the missing-data problem: which units have their outcome
/// observed in this arm, and the fitted probability of that.
///
/// The treated arm uses `(T, π̂)`; the control arm substitutes `(1 − T,
/// 1 − π̂)`. The propensity-score control variates of both arms come from
/// the same logistic design; `score_sign` carries `∂(1 − π̂)/∂γ = −∂π̂/∂γ`.
#[derive(Clone, Debug)]
pub struct Arm<'a> {
    indicator: Vec<bool>,
    outcomes: &'a [Option<f64>],
    propensity: Vec<f64>,
    score_design: Option<&'a Matrix>,
    score_sign: f64,
}

impl<'a> Arm<'a> {
    pub fn treated(treatment: &[bool], outcomes: &'a [Option<f64>], pi: &[f64]) -> Self {
        Self {
            indicator: treatment.to_vec(),
            outcomes,
            propensity: pi.to_vec(),
            score_design: None,
            score_sign: 1.0,
        }
    }

    pub fn control(treatment: &[bool], outcomes: &'a [Option<f64>], pi: &[f64]) -> Self {
        Self {
            indicator: treatment.iter().map(|t| !t).collect(),
            outcomes,
            propensity: pi.iter().map(|p| 1.0 - p).collect(),
            score_design: None,
            score_sign: -1.0,
        }
    }

    /// Attaches the propensity-model design, enabling the score block of
    /// the control variates.
    pub fn with_score_design(mut self, design: &'a Matrix) -> Self {
        self.score_design = Some(design);
        self
    }

    pub fn len(&self) -> usize {
        self.indicator.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indicator.is_empty()
    }

    pub fn indicator(&self) -> &[bool] {
        &self.indicator
    }

    pub fn propensity(&self) -> &[f64] {
        &self.propensity
    }

    pub fn score_design(&self) -> Option<&'a Matrix> {
        self.score_design
    }

    pub fn score_sign(&self) -> f64 {
        self.score_sign
    }

    pub fn observed_count(&self) -> usize {
        self.indicator.iter().filter(|&&a| a).count()
    }

    /// Outcome of unit `i`; only meaningful (and only read) for units in
    /// this arm.
    pub(crate) fn outcome(&self, i: usize) -> Result<f64, EstimatorError> {
        debug_assert!(self.indicator[i]);
        self.outcomes[i].ok_or(EstimatorError::MissingOutcome(i))
    }

    /// Checks lengths and positivity of the propensity on observed units.
    pub(crate) fn validate(&self) -> Result<(), EstimatorError> {
        let n = self.len();
        if n == 0 {
            return Err(EstimatorError::EmptyInput);
        }
        if self.outcomes.len() != n || self.propensity.len() != n {
            return Err(EstimatorError::LengthMismatch);
        }
        if let Some(d) = self.score_design {
            if d.nrows() != n {
                return Err(EstimatorError::LengthMismatch);
            }
        }
        for (i, (&a, &p)) in self.indicator.iter().zip(&self.propensity).enumerate() {
            if !p.is_finite() {
                return Err(EstimatorError::NonFinite("propensity"));
            }
            if a && !(p > 0.0) {
                return Err(EstimatorError::ZeroPropensityOnTreated(i));
            }
        }
        Ok(())
    }

    /// `aᵢ/pᵢ` (zero off the arm).
    pub(crate) fn weight(&self, i: usize) -> f64 {
        if self.indicator[i] {
            1.0 / self.propensity[i]
        } else {
            0.0
        }
    }
}
