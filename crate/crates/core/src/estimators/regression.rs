//! Control-variate regression estimators.
//!
//! With `η̂ = a·y/p`, basis `g` (built from the fitted outcome regression),
//! and the propensity score block, the control variates are
//!
//! ```text
//! ξ̂ = (a/p − 1)·g      ⊕  (a − p)·x     (score block)
//! ζ̂ = (a/p)·g          ⊕  a·x
//! ```
//!
//! The classical coefficient is the least-squares slope of `η̂` on `ξ̂` with
//! an intercept, `β̂ = Ĉov(ξ̂)⁻¹ Ĉov(ξ̂, η̂)`; the doubly robust one is
//! `β̃ = Ẽ(ξ̂ζ̂ᵀ)⁻¹ Ẽ(ξ̂η̂)`. Leaving out the centring in `β̂` lets the
//! control variates absorb part of the mean of `η̂`, a downward bias of order
//! `Ẽ(η̂)·dim/n` (about −4 at `n = 200` in the ks design). When the outcome regression fits the
//! observed outcomes exactly, `η̂` equals the `m̂` column of `ζ̂` unit by
//! unit, so `β̃` is the corresponding unit vector and the estimate collapses
//! to the outcome-regression mean.

use std::ops::Range;

use crate::numerics::{solve_general, solve_spd, Fallback, Matrix};

use super::{Arm, EstimatorError};

/// Which functions of `X` multiply the weight residual.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// `m̂`
    M1Only,
    /// `(1, m̂)`
    OneAndM1,
    /// `(1, h, m̂)`
    OneHM1,
}

impl Basis {
    pub fn name(self) -> &'static str {
        match self {
            Basis::M1Only => "m1_only",
            Basis::OneAndM1 => "one_and_m1",
            Basis::OneHM1 => "one_h_m1",
        }
    }
}

impl std::str::FromStr for Basis {
    type Err = EstimatorError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "m1_only" | "m1-only" => Ok(Basis::M1Only),
            "one_and_m1" | "one-and-m1" => Ok(Basis::OneAndM1),
            "one_h_m1" | "one-h-m1" => Ok(Basis::OneHM1),
            other => Err(EstimatorError::UnknownName {
                what: "basis",
                value: other.to_string(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegVariant {
    /// `β̃`, doubly robust.
    Tilde,
    /// `β̂`, classical least squares with an intercept.
    Hat,
}

/// Per-unit `η̂`, `ξ̂`, `ζ̂`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlVariateRows {
    pub eta: Vec<f64>,
    pub xi: Matrix,
    pub zeta: Matrix,
    /// Columns built from the basis `g`.
    pub basis_block: Range<usize>,
    /// Column holding the `m̂` term.
    pub m_column: usize,
    /// Columns of the propensity score block (empty when excluded).
    pub score_block: Range<usize>,
}

impl ControlVariateRows {
    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.xi.ncols()
    }

    /// `ζ̂ᵢ − ξ̂ᵢ`, the basis vector with the score block `p·x`.
    pub fn basis_row(&self, i: usize) -> Vec<f64> {
        self.zeta
            .row(i)
            .iter()
            .zip(self.xi.row(i))
            .map(|(z, x)| z - x)
            .collect()
    }
}

/// Builds the control variates for `arm` from fitted values `m̂(Xᵢ)`.
/// `h` is required for [`Basis::OneHM1`]. The score block needs the arm's
/// propensity-model design.
pub fn build_control_variates(
    arm: &Arm<'_>,
    fitted: &[f64],
    basis: Basis,
    h: Option<&[f64]>,
    include_ps_score: bool,
) -> Result<ControlVariateRows, EstimatorError> {
    arm.validate()?;
    let n = arm.len();
    if fitted.len() != n || h.is_some_and(|h| h.len() != n) {
        return Err(EstimatorError::LengthMismatch);
    }
    let h = match (basis, h) {
        (Basis::OneHM1, None) => return Err(EstimatorError::MissingAugmentation),
        (Basis::OneHM1, Some(h)) => Some(h),
        _ => None,
    };
    let score = if include_ps_score {
        Some(arm.score_design().ok_or(EstimatorError::MissingScoreDesign)?)
    } else {
        None
    };
    let basis_dim = match basis {
        Basis::M1Only => 1,
        Basis::OneAndM1 => 2,
        Basis::OneHM1 => 3,
    };
    let score_dim = score.map_or(0, Matrix::ncols);
    let dim = basis_dim + score_dim;
    let sign = arm.score_sign();

    let mut eta = Vec::with_capacity(n);
    let mut xi = Vec::with_capacity(n * dim);
    let mut zeta = Vec::with_capacity(n * dim);
    let mut g = Vec::with_capacity(basis_dim);
    for i in 0..n {
        let a = arm.indicator()[i];
        let p = arm.propensity()[i];
        let m = fitted[i];
        g.clear();
        if basis != Basis::M1Only {
            g.push(1.0);
        }
        if let Some(h) = h {
            g.push(h[i]);
        }
        g.push(m);
        if a {
            eta.push(arm.outcome(i)? / p);
            for &gk in &g {
                let z = gk / p;
                xi.push(z - gk);
                zeta.push(z);
            }
        } else {
            eta.push(0.0);
            for &gk in &g {
                xi.push(-gk);
                zeta.push(0.0);
            }
        }
        if let Some(design) = score {
            let resid = if a { 1.0 - p } else { -p };
            let ind = if a { 1.0 } else { 0.0 };
            for &x in design.row(i) {
                xi.push(sign * resid * x);
                zeta.push(sign * ind * x);
            }
        }
    }
    Ok(ControlVariateRows {
        eta,
        xi: Matrix::from_row_major(n, dim, xi).expect("row-major layout"),
        zeta: Matrix::from_row_major(n, dim, zeta).expect("row-major layout"),
        basis_block: 0..basis_dim,
        m_column: basis_dim - 1,
        score_block: basis_dim..dim,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegEstimate {
    /// `Ẽ(η̂) − Σ_{k ∈ basis} βₖ Ẽ(ξ̂ₖ)`.
    pub value: f64,
    /// `Ẽ(η̂) − βᵀẼ(ξ̂)`, including the score block.
    pub full_correction: f64,
    pub beta: Vec<f64>,
    pub fallback: Fallback,
}

/// Sample moments `Ẽ(η̂)`, `Ẽ(ξ̂)`, the cross moment and the Gram matrix the
/// variant solves with (central moments for [`RegVariant::Hat`]).
fn moments(cv: &ControlVariateRows, variant: RegVariant) -> (f64, Vec<f64>, Vec<f64>, Matrix) {
    let n = cv.len() as f64;
    let d = cv.dim();
    let mut eta_mean = 0.0;
    let mut xi_mean = vec![0.0; d];
    let mut cross = vec![0.0; d];
    let mut gram = Matrix::zeros(d, d);
    let partner = match variant {
        RegVariant::Tilde => &cv.zeta,
        RegVariant::Hat => &cv.xi,
    };
    for i in 0..cv.len() {
        let xi = cv.xi.row(i);
        let other = partner.row(i);
        let eta = cv.eta[i];
        eta_mean += eta;
        for a in 0..d {
            xi_mean[a] += xi[a];
            cross[a] += xi[a] * eta;
            for b in 0..d {
                gram[(a, b)] += xi[a] * other[b];
            }
        }
    }
    eta_mean /= n;
    xi_mean.iter_mut().for_each(|v| *v /= n);
    cross.iter_mut().for_each(|v| *v /= n);
    let mut gram = Matrix::from_row_major(d, d, gram.as_slice().iter().map(|v| v / n).collect())
        .expect("square");
    if variant == RegVariant::Hat {
        for a in 0..d {
            cross[a] -= xi_mean[a] * eta_mean;
            for b in 0..d {
                gram[(a, b)] -= xi_mean[a] * xi_mean[b];
            }
        }
    }
    (eta_mean, xi_mean, cross, gram)
}

/// Regression estimate with coefficient `β̃` ([`RegVariant::Tilde`]) or
/// `β̂` ([`RegVariant::Hat`]).
pub fn reg_estimate(cv: &ControlVariateRows, variant: RegVariant) -> Result<RegEstimate, EstimatorError> {
    if cv.is_empty() {
        return Err(EstimatorError::EmptyInput);
    }
    let (eta_mean, xi_mean, cross, gram) = moments(cv, variant);
    let sol = match variant {
        RegVariant::Tilde => solve_general(&gram, &cross)?,
        RegVariant::Hat => solve_spd(&gram, &cross, 0.0)?,
    };
    let beta = sol.x;
    let basis_correction: f64 = cv
        .basis_block
        .clone()
        .map(|k| beta[k] * xi_mean[k])
        .sum();
    let score_correction: f64 = cv
        .score_block
        .clone()
        .map(|k| beta[k] * xi_mean[k])
        .sum();
    Ok(RegEstimate {
        value: eta_mean - basis_correction,
        full_correction: eta_mean - basis_correction - score_correction,
        beta,
        fallback: sol.fallback,
    })
}
