//! Monte Carlo study: replicate datasets, fit the working models once per
//! replication, evaluate a grid of estimators on the shared fits, and
//! summarize each grid cell.
//!
//! Replication `r` of sample size `n` draws from stream [`stream_id`]`(n, r)`
//! of the master seed. Replications run in parallel under
//! [`Execution::Parallel`]; their results are gathered in replication order
//! before any reduction, so output does not depend on the worker count.

mod diagnostics;
mod metrics;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{generate, DesignSpec, Scenario, ScenarioKind};
use crate::estimators::{
    estimate_with, EstimatorSpec, Family, Flags, OutcomeModel, PropensityModel,
};
use crate::numerics::RngStream;

pub use diagnostics::{
    diagnose, summarize_diagnostics, unit_diagnostics, DiagnosticSummary, ReplicationDiagnostics,
    UnitDiagnostics,
};
pub use metrics::{correlation, median, metrics, quantile_sorted, Metrics};

pub const DEFAULT_REPLICATIONS: usize = 1000;
pub const TABLE_SAMPLE_SIZES: [usize; 2] = [200, 1000];
/// Share of flagged replications above which a cell is reported unreliable.
pub const UNRELIABLE_SHARE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no estimates to summarize")]
    NoEstimates,
    #[error("invalid cell: {0}")]
    InvalidCell(String),
    #[error("replications must be at least 1")]
    NoReplications,
    #[error("worker pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Stream of replication `r` at sample size `n`. Distinct sample sizes use
/// disjoint streams, so their cells are independent.
pub fn stream_id(n: usize, replication: usize) -> u64 {
    ((n as u64) << 32) | replication as u64
}

/// How replications are scheduled. Both variants give identical results.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon pool with this many threads (0 = rayon default). Without the
    /// `parallel` feature this runs sequentially.
    Parallel { workers: usize },
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Parallel { workers: 0 }
    }
}

impl Execution {
    fn map<T, F>(&self, count: usize, f: F) -> Result<Vec<T>, HarnessError>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match *self {
            Execution::Sequential => Ok((0..count).map(f).collect()),
            #[cfg(feature = "parallel")]
            Execution::Parallel { workers } => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
                Ok(pool.install(|| crate::parallel::map_ordered(count, f)))
            }
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel { .. } => Ok((0..count).map(f).collect()),
        }
    }
}

/// One estimator with the designs of the models it is evaluated on.
#[derive(Clone, Debug)]
pub struct CellDef {
    pub ps_spec: Option<DesignSpec>,
    pub or_spec: Option<DesignSpec>,
    pub estimator: EstimatorSpec,
}

impl CellDef {
    pub fn new(
        estimator: EstimatorSpec,
        ps_spec: Option<DesignSpec>,
        or_spec: Option<DesignSpec>,
    ) -> Self {
        Self {
            ps_spec,
            or_spec,
            estimator,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let f = self.estimator.family;
        if f.needs_outcome_model() && self.or_spec.is_none() {
            return Err(HarnessError::InvalidCell(format!(
                "{f} needs an outcome-regression design"
            )));
        }
        if f.needs_propensity_model() && self.ps_spec.is_none() {
            return Err(HarnessError::InvalidCell(format!(
                "{f} needs a propensity-score design"
            )));
        }
        if f == Family::AipwH && self.estimator.h.is_none() {
            return Err(HarnessError::InvalidCell("AIPW_h needs a function h".into()));
        }
        if self.estimator.strata == 0 {
            return Err(HarnessError::InvalidCell("strata must be at least 1".into()));
        }
        Ok(())
    }
}

/// A single cell of the study.
#[derive(Clone, Debug)]
pub struct CellSpec {
    pub scenario: ScenarioKind,
    pub n: usize,
    pub cell: CellDef,
    pub replications: usize,
    pub master_seed: u64,
    pub pi_floor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub scenario: ScenarioKind,
    pub n: usize,
    pub ps_spec: Option<DesignSpec>,
    pub or_spec: Option<DesignSpec>,
    pub estimator: Family,
    pub metrics: Metrics,
    /// Replications with any flag raised.
    pub flagged: usize,
    /// Replications whose evaluation failed; excluded from the metrics.
    pub failed: usize,
    pub replications: usize,
    pub seed: u64,
    /// Per-replication estimates and flags, when requested.
    pub draws: Option<Vec<(f64, Flags)>>,
}

impl CellResult {
    pub fn unreliable(&self) -> bool {
        self.flagged as f64 > UNRELIABLE_SHARE * self.replications as f64
    }

    pub fn to_row(&self) -> ResultRow {
        ResultRow {
            scenario: self.scenario.to_string(),
            n: self.n,
            ps_spec: spec_label(self.ps_spec).to_string(),
            or_spec: spec_label(self.or_spec).to_string(),
            estimator: self.estimator.label().to_string(),
            bias: self.metrics.bias,
            pct_bias: self.metrics.pct_bias,
            rmse: self.metrics.rmse,
            mae: self.metrics.mae,
            flagged: self.flagged,
            r: self.replications,
            seed: self.seed,
        }
    }
}

pub fn spec_label(spec: Option<DesignSpec>) -> &'static str {
    match spec {
        Some(DesignSpec::Correct) => "correct",
        Some(DesignSpec::Misspecified) => "misspecified",
        None => "none",
    }
}

/// One line of the results CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub n: usize,
    pub ps_spec: String,
    pub or_spec: String,
    pub estimator: String,
    pub bias: f64,
    pub pct_bias: f64,
    pub rmse: f64,
    pub mae: f64,
    pub flagged: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub seed: u64,
}

struct ReplicationOutcome {
    values: Vec<(f64, Flags)>,
}

fn fit_slot<T>(
    wanted: bool,
    fit: impl FnOnce() -> Result<T, crate::estimators::EstimatorError>,
) -> Option<Result<T, ()>> {
    wanted.then(|| fit().map_err(|_| ()))
}

fn design_index(spec: DesignSpec) -> usize {
    match spec {
        DesignSpec::Correct => 0,
        DesignSpec::Misspecified => 1,
    }
}

fn run_replication(
    scenario: &Scenario,
    n: usize,
    cells: &[CellDef],
    seed: u64,
    r: usize,
    pi_floor: f64,
) -> ReplicationOutcome {
    let data = generate(scenario, n, &RngStream::new(seed, stream_id(n, r)));
    let mut want_ps = [false; 2];
    let mut want_or = [false; 2];
    for c in cells {
        if let (Some(s), true) = (c.ps_spec, c.estimator.family.needs_propensity_model()) {
            want_ps[design_index(s)] = true;
        }
        if let (Some(s), true) = (c.or_spec, c.estimator.family.needs_outcome_model()) {
            want_or[design_index(s)] = true;
        }
    }
    let specs = [DesignSpec::Correct, DesignSpec::Misspecified];
    let ps: Vec<Option<Result<PropensityModel, ()>>> = specs
        .iter()
        .map(|&s| fit_slot(want_ps[design_index(s)], || PropensityModel::fit(&data, s, pi_floor)))
        .collect();
    let or: Vec<Option<Result<OutcomeModel, ()>>> = specs
        .iter()
        .map(|&s| fit_slot(want_or[design_index(s)], || OutcomeModel::fit(&data, s)))
        .collect();

    let failed = (f64::NAN, Flags::FAILED);
    let values = cells
        .iter()
        .map(|c| {
            let family = c.estimator.family;
            let ps_model = match c.ps_spec {
                Some(s) if family.needs_propensity_model() => {
                    match ps[design_index(s)].as_ref().expect("fitted above") {
                        Ok(m) => Some(m),
                        Err(()) => return failed,
                    }
                }
                _ => None,
            };
            let or_model = match c.or_spec {
                Some(s) if family.needs_outcome_model() => {
                    match or[design_index(s)].as_ref().expect("fitted above") {
                        Ok(m) => Some(m),
                        Err(()) => return failed,
                    }
                }
                _ => None,
            };
            match estimate_with(&data, ps_model, or_model, &c.estimator) {
                Ok(e) if e.value.is_finite() => (e.value, e.flags),
                Ok(e) => (f64::NAN, e.flags | Flags::FAILED),
                Err(_) => failed,
            }
        })
        .collect();
    ReplicationOutcome { values }
}

/// Options shared by every cell of a run.
#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub replications: usize,
    pub master_seed: u64,
    pub pi_floor: f64,
    pub execution: Execution,
    pub keep_draws: bool,
}

impl RunOptions {
    pub fn new(master_seed: u64) -> Self {
        Self {
            replications: DEFAULT_REPLICATIONS,
            master_seed,
            pi_floor: 0.0,
            execution: Execution::default(),
            keep_draws: false,
        }
    }
}

/// Runs several cells at one sample size on shared replications: each
/// replication generates one dataset and fits each needed model once.
pub fn run_cells(
    scenario: ScenarioKind,
    n: usize,
    cells: &[CellDef],
    opts: &RunOptions,
) -> Result<Vec<CellResult>, HarnessError> {
    if opts.replications == 0 {
        return Err(HarnessError::NoReplications);
    }
    for c in cells {
        c.validate()?;
    }
    let law = Scenario::from_kind(scenario);
    let reps = opts.execution.map(opts.replications, |r| {
        run_replication(&law, n, cells, opts.master_seed, r, opts.pi_floor)
    })?;
    let truth = law.true_mu1();
    cells
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let draws: Vec<(f64, Flags)> = reps.iter().map(|rep| rep.values[k]).collect();
            let finite: Vec<f64> = draws
                .iter()
                .filter(|(_, f)| !f.contains(Flags::FAILED))
                .map(|&(v, _)| v)
                .collect();
            let flagged = draws.iter().filter(|(_, f)| !f.is_empty()).count();
            let failed = draws.len() - finite.len();
            let metrics = metrics(&finite, truth).unwrap_or(Metrics {
                mean: f64::NAN,
                bias: f64::NAN,
                sd: f64::NAN,
                pct_bias: f64::NAN,
                rmse: f64::NAN,
                mae: f64::NAN,
                zero_sd: false,
            });
            Ok(CellResult {
                scenario,
                n,
                ps_spec: c.estimator.family.needs_propensity_model().then_some(c.ps_spec).flatten(),
                or_spec: c.estimator.family.needs_outcome_model().then_some(c.or_spec).flatten(),
                estimator: c.estimator.family,
                metrics,
                flagged,
                failed,
                replications: opts.replications,
                seed: opts.master_seed,
                draws: opts.keep_draws.then_some(draws),
            })
        })
        .collect()
}

pub fn run_cell(spec: &CellSpec, execution: Execution, keep_draws: bool) -> Result<CellResult, HarnessError> {
    let opts = RunOptions {
        replications: spec.replications,
        master_seed: spec.master_seed,
        pi_floor: spec.pi_floor,
        execution,
        keep_draws,
    };
    let mut out = run_cells(spec.scenario, spec.n, std::slice::from_ref(&spec.cell), &opts)?;
    Ok(out.remove(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Grid of the first results table, ks design.
    Table1,
    /// Same grid on the alt design.
    Table2,
}

impl Preset {
    pub fn scenario(self) -> ScenarioKind {
        match self {
            Preset::Table1 => ScenarioKind::Ks,
            Preset::Table2 => ScenarioKind::Alt,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Table1 => "table1",
            Preset::Table2 => "table2",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table1" => Ok(Preset::Table1),
            "table2" => Ok(Preset::Table2),
            other => Err(HarnessError::InvalidCell(format!("unknown preset `{other}`"))),
        }
    }
}

/// Cells of one sample-size block of the results tables, in row order.
pub fn table_grid() -> Vec<CellDef> {
    use DesignSpec::{Correct, Misspecified};
    let specs = [Correct, Misspecified];
    let mut cells = Vec::with_capacity(30);
    for family in [Family::IpwRaw, Family::Strat] {
        for ps in specs {
            cells.push(CellDef::new(EstimatorSpec::new(family), Some(ps), None));
        }
    }
    for or in specs {
        cells.push(CellDef::new(EstimatorSpec::new(Family::Or), None, Some(or)));
    }
    let dr = [
        Family::AipwFix,
        Family::Wls,
        Family::RegTilde,
        Family::RegHat,
        Family::RegTildeM,
        Family::RegHatM,
    ];
    for ps in specs {
        for family in dr {
            for or in specs {
                cells.push(CellDef::new(EstimatorSpec::new(family), Some(ps), Some(or)));
            }
        }
    }
    cells
}

/// The full table: both sample sizes, 60 cells.
pub fn run_table(preset: Preset, opts: &RunOptions) -> Result<Vec<CellResult>, HarnessError> {
    let grid = table_grid();
    let mut out = Vec::with_capacity(2 * grid.len());
    for n in TABLE_SAMPLE_SIZES {
        out.extend(run_cells(preset.scenario(), n, &grid, opts)?);
    }
    Ok(out)
}

/// Writes results as CSV. Header comments carry the seed and run metadata;
/// unreliable cells are listed in trailing comments.
pub fn write_results_csv<W: Write>(
    results: &[CellResult],
    mut out: W,
    header_comments: &[String],
) -> Result<(), HarnessError> {
    for c in header_comments {
        writeln!(out, "# {c}")?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        for r in results {
            w.serialize(r.to_row())?;
        }
        w.flush()?;
    }
    for r in results.iter().filter(|r| r.unreliable()) {
        writeln!(
            out,
            "# unreliable: {} n={} ps={} or={} {} flagged={}/{}",
            r.scenario,
            r.n,
            spec_label(r.ps_spec),
            spec_label(r.or_spec),
            r.estimator.label(),
            r.flagged,
            r.replications
        )?;
    }
    Ok(())
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<ResultRow>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    rdr.deserialize()
        .map(|row| row.map_err(HarnessError::from))
        .collect()
}

/// Per-replication estimates of every cell that kept them.
pub fn write_draws_csv<W: Write>(results: &[CellResult], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario",
        "n",
        "ps_spec",
        "or_spec",
        "estimator",
        "replication",
        "estimate",
        "flags",
    ])?;
    for r in results {
        let Some(draws) = &r.draws else { continue };
        for (i, (v, f)) in draws.iter().enumerate() {
            w.write_record([
                r.scenario.to_string(),
                r.n.to_string(),
                spec_label(r.ps_spec).to_string(),
                spec_label(r.or_spec).to_string(),
                r.estimator.label().to_string(),
                i.to_string(),
                v.to_string(),
                f.describe(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
