//! Working models: logistic propensity score (IRLS) and linear outcome
//! regression (OLS / WLS).

use serde::Serialize;
use thiserror::Error;

use crate::datagen::DesignSpec;
use crate::numerics::{dot, expit, softplus, solve_spd, Fallback, LinalgError, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("design has {rows} rows but {len} responses")]
    LengthMismatch { rows: usize, len: usize },
    #[error("no rows to fit")]
    EmptyInput,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

const MAX_ITERATIONS: usize = 100;
const SCORE_TOL: f64 = 1e-8;
const LOGLIK_REL_TOL: f64 = 1e-12;
const MAX_STALLS: usize = 5;
/// Relative rounding level of the log-likelihood sum.
const LOGLIK_NOISE: f64 = 1e-13;
const MAX_HALVINGS: usize = 50;
const SEPARATION_RESID: f64 = 1e-6;
const SEPARATION_ETA: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    /// Iteration cap reached, or the likelihood stalled short of the score
    /// tolerance; the last iterate is returned.
    MaxIterations,
    /// Every unit is fitted to within 1e-6 of its label, or some linear
    /// predictor ended beyond ±30: the classes are completely or
    /// quasi-completely separated and the MLE does not exist.
    Separation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub status: FitStatus,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// Whether any Newton system needed the singular-matrix fallback.
    pub fallback: bool,
    pub design: Option<DesignSpec>,
}

impl LogisticFit {
    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }

    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        dot(&self.coefficients, row)
    }

    pub fn predict_pi(&self, row: &[f64]) -> f64 {
        expit(self.linear_predictor(row))
    }

    /// Fitted propensities for every row, floored at `pi_floor`.
    pub fn propensities(&self, design: &Matrix, pi_floor: f64) -> Vec<f64> {
        design
            .rows()
            .map(|r| self.predict_pi(r).max(pi_floor))
            .collect()
    }

    pub fn with_design(mut self, spec: DesignSpec) -> Self {
        self.design = Some(spec);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("fit serializes")
    }
}

fn log_likelihood(design: &Matrix, t: &[bool], gamma: &[f64]) -> f64 {
    design
        .rows()
        .zip(t)
        .map(|(r, &ti)| {
            let eta = dot(r, gamma);
            let yi = if ti { eta } else { 0.0 };
            yi - softplus(eta)
        })
        .sum()
}

/// Logistic maximum likelihood by Newton–Raphson (IRLS) with step-halving.
///
/// Converged when `max |Σ (tᵢ − π̂ᵢ) xᵢ| < 1e-8·n` or when no step along the
/// Newton direction increases the log-likelihood. Gives up after 100
/// iterations, or after several consecutive steps that change the
/// log-likelihood by less than 1e-12 relative without meeting the score
/// test. The log-likelihood never decreases across accepted steps beyond
/// its rounding level.
pub fn fit_logistic(design: &Matrix, t: &[bool]) -> Result<LogisticFit, ModelError> {
    irls(design, t, MAX_ITERATIONS)
}

fn score_norm(design: &Matrix, t: &[bool], gamma: &[f64]) -> f64 {
    let resid: Vec<f64> = design
        .rows()
        .zip(t)
        .map(|(r, &ti)| f64::from(u8::from(ti)) - expit(dot(r, gamma)))
        .collect();
    design
        .weighted_cross(&vec![1.0; t.len()], &resid)
        .iter()
        .fold(0.0, |m, g| m.max(g.abs()))
}

fn irls(design: &Matrix, t: &[bool], max_iterations: usize) -> Result<LogisticFit, ModelError> {
    let n = design.nrows();
    let p = design.ncols();
    if t.len() != n {
        return Err(ModelError::LengthMismatch { rows: n, len: t.len() });
    }
    if n == 0 {
        return Err(ModelError::EmptyInput);
    }
    if !design.is_finite() {
        return Err(ModelError::NonFinite("design"));
    }

    let mut gamma = vec![0.0; p];
    let mut ll = log_likelihood(design, t, &gamma);
    let mut status = FitStatus::MaxIterations;
    let mut fallback = false;
    let mut iterations = 0;
    let mut weights = vec![0.0; n];
    let mut resid = vec![0.0; n];
    let score_tol = SCORE_TOL * n as f64;
    let mut stalled = 0;

    while iterations < max_iterations {
        for ((r, &ti), (w, e)) in design
            .rows()
            .zip(t)
            .zip(weights.iter_mut().zip(resid.iter_mut()))
        {
            let pi = expit(dot(r, &gamma));
            *w = pi * (1.0 - pi);
            *e = f64::from(u8::from(ti)) - pi;
        }
        if resid.iter().all(|e| e.abs() < SEPARATION_RESID) {
            status = FitStatus::Separation;
            break;
        }
        let score = design.weighted_cross(&vec![1.0; n], &resid);
        if score.iter().all(|g| g.abs() < score_tol) {
            status = FitStatus::Converged;
            // One more Newton step is nearly free and takes the score to
            // rounding level, so score control variates average to ~0.
            let hessian = design.weighted_gram(&weights);
            if let Ok(step) = solve_spd(&hessian, &score, 0.0) {
                let cand: Vec<f64> = gamma.iter().zip(&step.x).map(|(g, d)| g + d).collect();
                let norm = score.iter().fold(0.0, |m: f64, g| m.max(g.abs()));
                if score_norm(design, t, &cand) < norm {
                    ll = log_likelihood(design, t, &cand);
                    gamma = cand;
                }
            }
            break;
        }
        iterations += 1;
        let hessian = design.weighted_gram(&weights);
        let step = solve_spd(&hessian, &score, 0.0)?;
        fallback |= step.fallback.engaged();

        // Near the maximum the log-likelihood stops resolving improvements;
        // a step whose loss is within rounding is then judged by the score.
        let noise = LOGLIK_NOISE * (ll.abs() + n as f64);
        let current_norm = score.iter().fold(0.0, |m: f64, g| m.max(g.abs()));
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<f64> = gamma
                .iter()
                .zip(&step.x)
                .map(|(g, d)| g + scale * d)
                .collect();
            let cand_ll = log_likelihood(design, t, &cand);
            if cand_ll > ll
                || (cand_ll >= ll - noise && score_norm(design, t, &cand) < current_norm)
            {
                accepted = Some((cand, cand_ll));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, cand_ll)) = accepted else {
            // No ascent along the Newton direction: numerically at the maximum.
            status = FitStatus::Converged;
            break;
        };
        let change = (cand_ll - ll).abs() / ll.abs().max(f64::MIN_POSITIVE);
        gamma = cand;
        ll = cand_ll;
        // A flat likelihood alone is not convergence: with large covariates
        // the score can still be well above tolerance. Keep stepping; the
        // score test at the top of the loop decides.
        if change < LOGLIK_REL_TOL {
            stalled += 1;
            if stalled > MAX_STALLS {
                break;
            }
        } else {
            stalled = 0;
        }
    }

    if status != FitStatus::Separation
        && design.rows().any(|r| dot(r, &gamma).abs() > SEPARATION_ETA)
    {
        status = FitStatus::Separation;
    }
    Ok(LogisticFit {
        coefficients: gamma,
        status,
        iterations,
        log_likelihood: ll,
        fallback,
        design: None,
    })
}

/// `(T/π̂ − 1) · (∂π̂/∂γ) / (1 − π̂)`, which for the canonical logistic link
/// is `(T − π̂)·x`.
pub fn score_variate(fit: &LogisticFit, row: &[f64], treated: bool) -> Vec<f64> {
    let resid = f64::from(u8::from(treated)) - fit.predict_pi(row);
    row.iter().map(|x| resid * x).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
    /// False for ordinary least squares (unit weights).
    pub weighted: bool,
    pub fallback: Fallback,
    pub design: Option<DesignSpec>,
}

impl LinearFit {
    pub fn predict_m(&self, row: &[f64]) -> f64 {
        dot(&self.coefficients, row)
    }

    pub fn fitted(&self, design: &Matrix) -> Vec<f64> {
        design.rows().map(|r| self.predict_m(r)).collect()
    }

    pub fn rank_deficient(&self) -> bool {
        self.fallback.engaged()
    }

    pub fn with_design(mut self, spec: DesignSpec) -> Self {
        self.design = Some(spec);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("fit serializes")
    }
}

/// Minimizes `Σ wᵢ (yᵢ − xᵢᵀα)²` over the given rows. A rank-deficient
/// design is solved through the numerics fallback and flagged on the fit.
pub fn fit_linear(design: &Matrix, y: &[f64], weights: &[f64]) -> Result<LinearFit, ModelError> {
    let n = design.nrows();
    if y.len() != n || weights.len() != n {
        return Err(ModelError::LengthMismatch {
            rows: n,
            len: y.len().min(weights.len()),
        });
    }
    if n == 0 {
        return Err(ModelError::EmptyInput);
    }
    if !y.iter().chain(weights).all(|v| v.is_finite()) {
        return Err(ModelError::NonFinite("response or weights"));
    }
    let gram = design.weighted_gram(weights);
    let rhs = design.weighted_cross(weights, y);
    let sol = solve_spd(&gram, &rhs, 0.0)?;
    let weighted = weights.iter().any(|&w| w != 1.0);
    Ok(LinearFit {
        coefficients: sol.x,
        weighted,
        fallback: sol.fallback,
        design: None,
    })
}

/// Fits the outcome model on the units whose outcome is observed.
/// `weights`, when given, is indexed over all units.
pub fn fit_outcome_model(
    design: &Matrix,
    outcomes: &[Option<f64>],
    weights: Option<&[f64]>,
) -> Result<LinearFit, ModelError> {
    if outcomes.len() != design.nrows() {
        return Err(ModelError::LengthMismatch {
            rows: design.nrows(),
            len: outcomes.len(),
        });
    }
    let keep: Vec<bool> = outcomes.iter().map(Option::is_some).collect();
    let rows = design.select_rows(&keep);
    let y: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let w: Vec<f64> = match weights {
        Some(w) => w
            .iter()
            .zip(&keep)
            .filter_map(|(&wi, &k)| k.then_some(wi))
            .collect(),
        None => vec![1.0; y.len()],
    };
    fit_linear(&rows, &y, &w)
}
