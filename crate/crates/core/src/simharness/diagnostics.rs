//! How far the misspecified working models are from the correct ones on a
//! single dataset.

use serde::Serialize;

use crate::datagen::{generate, Dataset, DesignSpec, Scenario, ScenarioKind};
use crate::estimators::{EstimatorError, OutcomeModel, PropensityModel};
use crate::numerics::RngStream;

use super::metrics::{correlation, median, quantile_sorted};
use super::{stream_id, Execution, HarnessError};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationDiagnostics {
    pub replication: usize,
    /// R² of the misspecified outcome regression on the treated units.
    pub r_squared: f64,
    /// Correlation over all units of `m̂₁` under the two outcome designs.
    pub fitted_correlation: f64,
    /// Correlation over all units of the two propensity linear predictors.
    pub ps_linear_correlation: f64,
    /// Quartiles and maximum of `|m̂₁(correct) − m̂₁(misspecified)|`.
    pub abs_diff_q1: f64,
    pub abs_diff_q2: f64,
    pub abs_diff_q3: f64,
    pub abs_diff_max: f64,
}

/// Per-unit fitted quantities under both designs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnitDiagnostics {
    pub unit: usize,
    pub t: u8,
    pub y: Option<f64>,
    pub fitted_correct: f64,
    pub fitted_misspecified: f64,
    pub ps_linear_correct: f64,
    pub ps_linear_misspecified: f64,
    pub pi_correct: f64,
    pub pi_misspecified: f64,
}

fn fits(
    data: &Dataset,
) -> Result<(OutcomeModel, OutcomeModel, PropensityModel, PropensityModel), EstimatorError> {
    Ok((
        OutcomeModel::fit(data, DesignSpec::Correct)?,
        OutcomeModel::fit(data, DesignSpec::Misspecified)?,
        PropensityModel::fit(data, DesignSpec::Correct, 0.0)?,
        PropensityModel::fit(data, DesignSpec::Misspecified, 0.0)?,
    ))
}

fn linear_predictors(ps: &PropensityModel) -> Vec<f64> {
    ps.design.rows().map(|r| ps.fit.linear_predictor(r)).collect()
}

pub fn unit_diagnostics(data: &Dataset) -> Result<Vec<UnitDiagnostics>, EstimatorError> {
    let (orc, ori, psc, psi) = fits(data)?;
    let (lc, li) = (linear_predictors(&psc), linear_predictors(&psi));
    Ok((0..data.len())
        .map(|i| UnitDiagnostics {
            unit: i,
            t: u8::from(data.treatment()[i]),
            y: data.observed_outcomes()[i],
            fitted_correct: orc.fitted[i],
            fitted_misspecified: ori.fitted[i],
            ps_linear_correct: lc[i],
            ps_linear_misspecified: li[i],
            pi_correct: psc.propensity[i],
            pi_misspecified: psi.propensity[i],
        })
        .collect())
}

fn replication_diagnostics(data: &Dataset, replication: usize) -> Result<ReplicationDiagnostics, EstimatorError> {
    let (orc, ori, psc, psi) = fits(data)?;
    let observed: Vec<(f64, f64)> = data
        .observed_outcomes()
        .iter()
        .zip(&ori.fitted)
        .filter_map(|(y, &m)| y.map(|y| (y, m)))
        .collect();
    let ybar = observed.iter().map(|p| p.0).sum::<f64>() / observed.len() as f64;
    let sst: f64 = observed.iter().map(|(y, _)| (y - ybar).powi(2)).sum();
    let ssr: f64 = observed.iter().map(|(y, m)| (y - m).powi(2)).sum();
    let mut diffs: Vec<f64> = orc
        .fitted
        .iter()
        .zip(&ori.fitted)
        .map(|(a, b)| (a - b).abs())
        .collect();
    diffs.sort_by(f64::total_cmp);
    Ok(ReplicationDiagnostics {
        replication,
        r_squared: 1.0 - ssr / sst,
        fitted_correlation: correlation(&orc.fitted, &ori.fitted),
        ps_linear_correlation: correlation(&linear_predictors(&psc), &linear_predictors(&psi)),
        abs_diff_q1: quantile_sorted(&diffs, 0.25),
        abs_diff_q2: quantile_sorted(&diffs, 0.5),
        abs_diff_q3: quantile_sorted(&diffs, 0.75),
        abs_diff_max: *diffs.last().unwrap_or(&f64::NAN),
    })
}

/// Diagnostics of `replications` datasets drawn on the same streams as the
/// simulation cells. Replications whose fits fail are skipped.
pub fn diagnose(
    scenario: ScenarioKind,
    n: usize,
    replications: usize,
    seed: u64,
    execution: Execution,
) -> Result<Vec<ReplicationDiagnostics>, HarnessError> {
    let law = Scenario::from_kind(scenario);
    let rows = execution.map(replications, |r| {
        let data = generate(&law, n, &RngStream::new(seed, stream_id(n, r)));
        replication_diagnostics(&data, r).ok()
    })?;
    Ok(rows.into_iter().flatten().collect())
}

/// Medians over replications.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticSummary {
    pub replications: usize,
    pub r_squared: f64,
    pub fitted_correlation: f64,
    pub ps_linear_correlation: f64,
    pub abs_diff_q1: f64,
    pub abs_diff_q2: f64,
    pub abs_diff_q3: f64,
    pub abs_diff_max: f64,
}

pub fn summarize_diagnostics(rows: &[ReplicationDiagnostics]) -> DiagnosticSummary {
    let med = |f: fn(&ReplicationDiagnostics) -> f64| {
        let mut v: Vec<f64> = rows.iter().map(f).collect();
        median(&mut v)
    };
    DiagnosticSummary {
        replications: rows.len(),
        r_squared: med(|r| r.r_squared),
        fitted_correlation: med(|r| r.fitted_correlation),
        ps_linear_correlation: med(|r| r.ps_linear_correlation),
        abs_diff_q1: med(|r| r.abs_diff_q1),
        abs_diff_q2: med(|r| r.abs_diff_q2),
        abs_diff_q3: med(|r| r.abs_diff_q3),
        abs_diff_max: med(|r| r.abs_diff_max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagnostics_are_sane() {
        let rows = diagnose(ScenarioKind::Alt, 500, 4, 2, Execution::Sequential).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert!(r.r_squared > 0.8 && r.r_squared <= 1.0);
            assert!(r.fitted_correlation > 0.9);
            assert!(r.abs_diff_q1 <= r.abs_diff_q2 && r.abs_diff_q2 <= r.abs_diff_q3);
            assert!(r.abs_diff_q3 <= r.abs_diff_max);
        }
        let s = summarize_diagnostics(&rows);
        assert_eq!(s.replications, 4);
    }

    #[test]
    fn unit_rows_cover_the_dataset() {
        let data = generate(&Scenario::ks(), 80, &RngStream::new(1, 0));
        let units = unit_diagnostics(&data).unwrap();
        assert_eq!(units.len(), 80);
        assert!(units.iter().all(|u| u.pi_correct > 0.0 && u.pi_correct < 1.0));
    }
}
