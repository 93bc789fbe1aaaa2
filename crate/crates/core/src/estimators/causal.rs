//! Contrast `μ₁ − μ₀` with one shared set of control variates.
//!
//! With `w = T/π̂ − (1 − T)/(1 − π̂)` and
//! `g = (π̂, 1 − π̂, π̂·m̂₀, (1 − π̂)·m̂₁)`, the variates are `ξ̂ = w·g` plus
//! the propensity score block `(T − π̂)·x`. The partner `ζ̂` keeps only the
//! outcome-indicator part of each weight:
//!
//! ```text
//! ζ̂ = (−(1−T)/(1−π̂),  T/π̂,  −(1−T)·m̂₀/(1−π̂),  T·m̂₁/π̂)  ⊕  T·x
//! ```
//!
//! so `ζ̂ − ξ̂ = (−1, 1, −m̂₀, m̂₁) ⊕ π̂·x` depends on `X` only, and under an
//! exact outcome fit `η̂ = ζ̂₃ + ζ̂₄` unit by unit.

use crate::numerics::Matrix;

use super::regression::{reg_estimate, ControlVariateRows, RegEstimate, RegVariant};
use super::{EstimatorError, SampleView};

/// Builds `η̂`, `ξ̂`, `ζ̂` for the contrast. `view.outcomes` must carry the
/// outcome of every unit under the arm it received.
pub fn ace_control_variates(
    view: &SampleView<'_>,
    fitted1: &[f64],
    fitted0: &[f64],
    include_ps_score: bool,
) -> Result<ControlVariateRows, EstimatorError> {
    let n = view.treatment.len();
    if n == 0 {
        return Err(EstimatorError::EmptyInput);
    }
    if view.outcomes.len() != n
        || view.propensity.len() != n
        || fitted1.len() != n
        || fitted0.len() != n
    {
        return Err(EstimatorError::LengthMismatch);
    }
    let score = if include_ps_score {
        let d = view.ps_design.ok_or(EstimatorError::MissingScoreDesign)?;
        if d.nrows() != n {
            return Err(EstimatorError::LengthMismatch);
        }
        Some(d)
    } else {
        None
    };
    let score_dim = score.map_or(0, Matrix::ncols);
    let dim = 4 + score_dim;

    let mut eta = Vec::with_capacity(n);
    let mut xi = Vec::with_capacity(n * dim);
    let mut zeta = Vec::with_capacity(n * dim);
    for i in 0..n {
        let t = view.treatment[i];
        let p = view.propensity[i];
        if !(p > 0.0 && p < 1.0) {
            return Err(EstimatorError::ZeroPropensityOnTreated(i));
        }
        let y = view.outcomes[i].ok_or(EstimatorError::MissingOutcome(i))?;
        let (m1, m0) = (fitted1[i], fitted0[i]);
        let g = [p, 1.0 - p, p * m0, (1.0 - p) * m1];
        let (w, z) = if t {
            eta.push(y / p);
            (1.0 / p, [0.0, 1.0 / p, 0.0, m1 / p])
        } else {
            let q = 1.0 - p;
            eta.push(-y / q);
            (-1.0 / q, [-1.0 / q, 0.0, -m0 / q, 0.0])
        };
        for k in 0..4 {
            xi.push(w * g[k]);
            zeta.push(z[k]);
        }
        if let Some(d) = score {
            let resid = if t { 1.0 - p } else { -p };
            let ind = if t { 1.0 } else { 0.0 };
            for &x in d.row(i) {
                xi.push(resid * x);
                zeta.push(ind * x);
            }
        }
    }
    Ok(ControlVariateRows {
        eta,
        xi: Matrix::from_row_major(n, dim, xi).expect("row-major layout"),
        zeta: Matrix::from_row_major(n, dim, zeta).expect("row-major layout"),
        basis_block: 0..4,
        m_column: 3,
        score_block: 4..dim,
    })
}

/// Doubly robust regression estimate of `μ₁ − μ₀` using the combined
/// control variates and the `β̃` coefficient.
pub fn ace_combined(
    view: &SampleView<'_>,
    fitted1: &[f64],
    fitted0: &[f64],
    include_ps_score: bool,
) -> Result<RegEstimate, EstimatorError> {
    let cv = ace_control_variates(view, fitted1, fitted0, include_ps_score)?;
    reg_estimate(&cv, RegVariant::Tilde)
}
