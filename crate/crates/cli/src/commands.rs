use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use drmean::datagen::{self, generate, read_csv, Scenario};
use drmean::estimators::{estimate_with, fit_models, EstimatorError, Flags};
use drmean::numerics::RngStream;
use drmean::oracles::{influence_mean, strat_limit, variance_bound, OracleValue};
use drmean::simharness::{
    self, diagnose, run_cells, run_table, spec_label, stream_id, summarize_diagnostics,
    unit_diagnostics, CellDef, CellResult, HarnessError, RunOptions,
};

use crate::config::{
    DiagnoseConfig, EstimateConfig, GenerateConfig, OracleConfig, OracleQuantity, RunConfig,
    SimulateConfig, SimulateTarget,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {source}")]
    Data {
        path: String,
        source: datagen::DataError,
    },
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("{path}: {source}")]
    Harness { path: String, source: HarnessError },
    #[error("{0} estimator(s) failed")]
    EstimatesFailed(usize),
}

fn display(path: Option<&Path>) -> String {
    path.map_or_else(|| "<stdout>".to_string(), |p| p.display().to_string())
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, RunError> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) => File::create(p)
            .map(|f| Box::new(BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|source| RunError::Io {
                path: p.display().to_string(),
                source,
            }),
    }
}

fn io_err(path: Option<&Path>) -> impl Fn(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: display(path),
        source,
    }
}

fn harness_err(path: Option<&Path>) -> impl Fn(HarnessError) -> RunError + '_ {
    move |source| RunError::Harness {
        path: display(path),
        source,
    }
}

pub fn run(config: RunConfig) -> Result<(), RunError> {
    match config {
        RunConfig::Generate(c) => run_generate(&c),
        RunConfig::Estimate(c) => run_estimate(&c),
        RunConfig::Simulate(c) => run_simulate(&c),
        RunConfig::Oracle(c) => run_oracle(&c),
        RunConfig::Diagnose(c) => run_diagnose(&c),
    }
}

fn run_generate(c: &GenerateConfig) -> Result<(), RunError> {
    let data = generate(&Scenario::from_kind(c.scenario), c.n, &RngStream::new(c.seed, 0));
    let out_path = c.output.as_deref();
    let mut out = open_output(out_path)?;
    let comments = vec![
        format!("seed={}", c.seed),
        format!("scenario={} n={} stream=0", c.scenario, c.n),
    ];
    datagen::write_csv(&data, &mut out, c.with_latent, &comments).map_err(|source| {
        RunError::Data {
            path: display(out_path),
            source,
        }
    })?;
    out.flush().map_err(io_err(out_path))
}

fn run_estimate(c: &EstimateConfig) -> Result<(), RunError> {
    let input = File::open(&c.input).map_err(|source| RunError::Io {
        path: c.input.display().to_string(),
        source,
    })?;
    let data = read_csv(io::BufReader::new(input)).map_err(|source| RunError::Data {
        path: c.input.display().to_string(),
        source,
    })?;
    let need_ps = c.estimators.iter().any(|e| e.family.needs_propensity_model());
    let need_or = c.estimators.iter().any(|e| e.family.needs_outcome_model());
    let models = fit_models(
        &data,
        c.ps_design.filter(|_| need_ps),
        c.or_design.filter(|_| need_or),
        c.pi_floor,
    )?;

    let out_path = c.output.as_deref();
    let mut out = open_output(out_path)?;
    let wr = io_err(out_path);
    writeln!(out, "# seed=none").map_err(&wr)?;
    writeln!(out, "# input={} n={}", c.input.display(), data.len()).map_err(&wr)?;
    writeln!(out, "estimator,ps_spec,or_spec,estimate,flags").map_err(&wr)?;
    let mut failures = 0;
    for spec in &c.estimators {
        let f = spec.family;
        let ps = models.ps.as_ref().filter(|_| f.needs_propensity_model());
        let or = models.outcome.as_ref().filter(|_| f.needs_outcome_model());
        let (value, flags) = match estimate_with(&data, ps, or, spec) {
            Ok(e) => (e.value, e.flags),
            Err(e) => {
                eprintln!("{}: {e}", f.label());
                failures += 1;
                (f64::NAN, Flags::FAILED)
            }
        };
        writeln!(
            out,
            "{},{},{},{},{}",
            f.label(),
            spec_label(ps.and(c.ps_design)),
            spec_label(or.and(c.or_design)),
            value,
            flags.describe()
        )
        .map_err(&wr)?;
    }
    out.flush().map_err(&wr)?;
    if failures > 0 {
        return Err(RunError::EstimatesFailed(failures));
    }
    Ok(())
}

fn run_simulate(c: &SimulateConfig) -> Result<(), RunError> {
    let opts = RunOptions {
        replications: c.replications,
        master_seed: c.seed,
        pi_floor: c.pi_floor,
        execution: c.execution,
        keep_draws: c.keep_draws.is_some(),
    };
    let out_path = c.output.as_deref();
    let (results, describe): (Vec<CellResult>, String) = match &c.target {
        SimulateTarget::Preset(p) => {
            eprintln!("simulating {p}: 60 cells, {} replications", c.replications);
            (
                run_table(*p, &opts).map_err(harness_err(out_path))?,
                format!("preset={p} scenario={}", p.scenario()),
            )
        }
        SimulateTarget::Custom {
            scenario,
            n,
            estimators,
            ps_design,
            or_design,
        } => {
            let cells: Vec<CellDef> = estimators
                .iter()
                .map(|e| CellDef::new(e.clone(), *ps_design, *or_design))
                .collect();
            (
                run_cells(*scenario, *n, &cells, &opts).map_err(harness_err(out_path))?,
                format!("scenario={scenario} n={n}"),
            )
        }
    };
    let comments = vec![
        format!("seed={}", c.seed),
        format!(
            "{describe} replications={} pi_floor={} truth=210",
            c.replications, c.pi_floor
        ),
        "replication r at sample size n draws from stream (n << 32) | r; fits are shared across the cells of a replication".to_string(),
    ];
    let mut out = open_output(out_path)?;
    simharness::write_results_csv(&results, &mut out, &comments).map_err(harness_err(out_path))?;
    out.flush().map_err(io_err(out_path))?;

    if let Some(path) = &c.keep_draws {
        write_draws(&results, path)?;
    }
    let flagged = results.iter().filter(|r| r.flagged > 0).count();
    let unreliable = results.iter().filter(|r| r.unreliable()).count();
    eprintln!(
        "cells={} flagged_cells={} unreliable_cells={}",
        results.len(),
        flagged,
        unreliable
    );
    Ok(())
}

fn write_draws(results: &[CellResult], path: &Path) -> Result<(), RunError> {
    let p = Some(path);
    let out = open_output(p)?;
    simharness::write_draws_csv(results, out).map_err(harness_err(p))
}

fn oracle_row(c: &OracleConfig, o: &OracleValue) -> String {
    let strat = c.quantity == OracleQuantity::StratLimit;
    let coefs = o
        .pstar_coefficients
        .as_ref()
        .map(|g| g.iter().map(f64::to_string).collect::<Vec<_>>().join(" "))
        .unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{}",
        c.quantity.name(),
        c.scenario,
        if strat { c.strata.to_string() } else { String::new() },
        if strat { c.ps_design.to_string() } else { String::new() },
        o.value,
        o.mc_standard_error,
        o.draws,
        o.seed,
        coefs
    )
}

fn run_oracle(c: &OracleConfig) -> Result<(), RunError> {
    let law = Scenario::from_kind(c.scenario);
    let value = match c.quantity {
        OracleQuantity::VarianceBound => variance_bound(&law, c.draws, c.seed),
        OracleQuantity::InfluenceMean => influence_mean(&law, c.draws, c.seed),
        OracleQuantity::StratLimit => strat_limit(&law, c.strata, c.ps_design, c.draws, c.seed),
    };
    let out_path = c.output.as_deref();
    let mut out = open_output(out_path)?;
    let wr = io_err(out_path);
    writeln!(out, "# seed={}", c.seed).map_err(&wr)?;
    writeln!(
        out,
        "quantity,scenario,strata,ps_design,value,mc_se,draws,seed,pstar_coefficients"
    )
    .map_err(&wr)?;
    writeln!(out, "{}", oracle_row(c, &value)).map_err(&wr)?;
    out.flush().map_err(&wr)
}

fn run_diagnose(c: &DiagnoseConfig) -> Result<(), RunError> {
    let out_path = c.output.as_deref();
    let mut out = open_output(out_path)?;
    let wr = io_err(out_path);
    writeln!(out, "# seed={}", c.seed).map_err(&wr)?;
    if c.units {
        let law = Scenario::from_kind(c.scenario);
        let data = generate(&law, c.n, &RngStream::new(c.seed, stream_id(c.n, 0)));
        writeln!(out, "# scenario={} n={} replication=0", c.scenario, c.n).map_err(&wr)?;
        let rows = unit_diagnostics(&data)?;
        let mut w = csv::Writer::from_writer(&mut out);
        for r in &rows {
            w.serialize(r)
                .map_err(|e| harness_err(out_path)(HarnessError::Csv(e)))?;
        }
        w.flush().map_err(&wr)?;
    } else {
        let rows = diagnose(c.scenario, c.n, c.replications, c.seed, c.execution)
            .map_err(harness_err(out_path))?;
        writeln!(
            out,
            "# scenario={} n={} replications={}",
            c.scenario, c.n, c.replications
        )
        .map_err(&wr)?;
        {
            let mut w = csv::Writer::from_writer(&mut out);
            for r in &rows {
                w.serialize(r)
                    .map_err(|e| harness_err(out_path)(HarnessError::Csv(e)))?;
            }
            w.flush().map_err(&wr)?;
        }
        let s = summarize_diagnostics(&rows);
        writeln!(
            out,
            "# median over {} datasets: r_squared={} fitted_correlation={} ps_linear_correlation={} abs_diff_quartiles={} {} {} abs_diff_max={}",
            s.replications,
            s.r_squared,
            s.fitted_correlation,
            s.ps_linear_correlation,
            s.abs_diff_q1,
            s.abs_diff_q2,
            s.abs_diff_q3,
            s.abs_diff_max
        )
        .map_err(&wr)?;
    }
    out.flush().map_err(&wr)
}
