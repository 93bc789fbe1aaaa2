//! Command-line flags, the optional config file, and their validation.
//!
//! The config file is TOML with one table per subcommand, using the flag
//! names with `_` in place of `-`:
//!
//! ```toml
//! [simulate]
//! preset = "table1"
//! seed = 42
//! replications = 1000
//! workers = 8
//!
//! [generate]
//! scenario = "alt"
//! n = 200
//! seed = 7
//! with_latent = true
//!
//! [estimate]
//! estimator = ["wls", "reg-tilde"]
//! ps_design = "correct"
//! or_design = "misspecified"
//! ```
//!
//! A flag given on the command line overrides the file value. Keys that do
//! not name a flag of their subcommand are rejected, as are unknown tables.

use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

use drmean::datagen::{DesignSpec, ScenarioKind};
use drmean::estimators::{Basis, EstimatorSpec, Family};
use drmean::simharness::{Execution, Preset, DEFAULT_REPLICATIONS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("`{0}` needs a seed (--seed or `seed` in the config file)")]
    MissingSeed(&'static str),
    #[error("invalid estimator option `{key}`: {message}")]
    InvalidEstimatorOption { key: &'static str, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
    #[error("missing required `{0}`")]
    Missing(&'static str),
    #[error("config file {path}: {message}")]
    File { path: PathBuf, message: String },
}

#[derive(Debug, Parser)]
#[command(
    name = "drmean",
    version,
    about = "Estimators of a mean with missing outcomes, simulation designs and a Monte Carlo study"
)]
pub struct Cli {
    /// TOML config file with one table per subcommand; flags override it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw one dataset from a simulation design and write it as CSV
    Generate(GenerateArgs),
    /// Fit the working models on a dataset CSV and print point estimates
    Estimate(EstimateArgs),
    /// Run Monte Carlo cells (or a full results-table preset)
    Simulate(SimulateArgs),
    /// Compute a ground-truth quantity by Monte Carlo
    Oracle(OracleArgs),
    /// Compare correct and misspecified working-model fits
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateArgs {
    /// Design: ks or alt
    #[arg(long)]
    pub scenario: Option<String>,
    /// Number of units
    #[arg(long)]
    pub n: Option<usize>,
    /// Master seed (required)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the latent covariates z1..z4
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub with_latent: Option<bool>,
    /// Output path (default: stdout)
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateArgs {
    /// Dataset CSV (t,y,x1..x4[,z1..z4])
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Comma-separated estimators: or, ipw, ipw-ratio, aipw-fix, wls,
    /// reg-tilde, reg-hat, reg-tilde-m, reg-hat-m, strat
    #[arg(long, value_delimiter = ',')]
    pub estimator: Option<Vec<String>>,
    /// Propensity design: correct or misspecified
    #[arg(long)]
    pub ps_design: Option<String>,
    /// Outcome-regression design: correct or misspecified
    #[arg(long)]
    pub or_design: Option<String>,
    /// Control-variate basis of the regression estimators: m1_only or one_and_m1
    #[arg(long)]
    pub basis: Option<String>,
    /// Number of propensity strata
    #[arg(long)]
    pub strata: Option<usize>,
    /// Lower bound applied to fitted propensities (default 0)
    #[arg(long)]
    pub pi_floor: Option<f64>,
    /// Output path (default: stdout)
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    /// Full results-table grid: table1 (ks) or table2 (alt)
    #[arg(long)]
    pub preset: Option<String>,
    /// Design for a custom run: ks or alt
    #[arg(long)]
    pub scenario: Option<String>,
    /// Sample size for a custom run
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated estimators for a custom run
    #[arg(long, value_delimiter = ',')]
    pub estimator: Option<Vec<String>>,
    /// Propensity design for a custom run
    #[arg(long)]
    pub ps_design: Option<String>,
    /// Outcome-regression design for a custom run
    #[arg(long)]
    pub or_design: Option<String>,
    /// Control-variate basis for a custom run
    #[arg(long)]
    pub basis: Option<String>,
    /// Number of propensity strata for a custom run
    #[arg(long)]
    pub strata: Option<usize>,
    /// Monte Carlo replications per cell (default 1000)
    #[arg(long)]
    pub replications: Option<usize>,
    /// Master seed (required)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores); output does not depend on it
    #[arg(long)]
    pub workers: Option<usize>,
    /// Also write every per-replication estimate to this CSV
    #[arg(long, value_name = "PATH")]
    pub keep_draws: Option<PathBuf>,
    /// Lower bound applied to fitted propensities (default 0)
    #[arg(long)]
    pub pi_floor: Option<f64>,
    /// Output path (default: stdout)
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleArgs {
    /// variance-bound, strat-limit or influence-mean
    #[arg(long)]
    pub quantity: Option<String>,
    /// Design: ks or alt
    #[arg(long)]
    pub scenario: Option<String>,
    /// Number of strata (strat-limit)
    #[arg(long)]
    pub strata: Option<usize>,
    /// Propensity design whose limit defines the strata (strat-limit)
    #[arg(long)]
    pub ps_design: Option<String>,
    /// Monte Carlo draws
    #[arg(long)]
    pub draws: Option<usize>,
    /// Master seed (default 1)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path (default: stdout)
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseArgs {
    /// Design: ks or alt
    #[arg(long)]
    pub scenario: Option<String>,
    /// Sample size of each dataset
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of datasets (default 200)
    #[arg(long)]
    pub replications: Option<usize>,
    /// Master seed (required)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Emit per-unit fitted values of the first dataset instead of summaries
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub units: Option<bool>,
    /// Output path (default: stdout)
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

macro_rules! overlay {
    ($t:ty { $($f:ident),* $(,)? }) => {
        impl $t {
            /// Fields set on `self` win over `file`.
            fn overlay(self, file: Self) -> Self {
                Self { $($f: self.$f.or(file.$f)),* }
            }
        }
    };
}

overlay!(GenerateArgs { scenario, n, seed, with_latent, output });
overlay!(EstimateArgs { input, estimator, ps_design, or_design, basis, strata, pi_floor, output });
overlay!(SimulateArgs {
    preset, scenario, n, estimator, ps_design, or_design, basis, strata, replications, seed,
    workers, keep_draws, pi_floor, output,
});
overlay!(OracleArgs { quantity, scenario, strata, ps_design, draws, seed, output });
overlay!(DiagnoseArgs { scenario, n, replications, seed, workers, units, output });

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Estimate(_) => "estimate",
            Command::Simulate(_) => "simulate",
            Command::Oracle(_) => "oracle",
            Command::Diagnose(_) => "diagnose",
        }
    }
}

/// Config-file keys accepted for `subcommand`: the ids of its flags.
pub fn known_keys(subcommand: &str) -> Vec<String> {
    let cmd = Cli::command();
    cmd.find_subcommand(subcommand)
        .map(|s| {
            s.get_arguments()
                .filter(|a| !a.is_global_set() && a.get_id() != "help" && a.get_id() != "config")
                .map(|a| a.get_id().to_string())
                .collect()
        })
        .unwrap_or_default()
}

fn read_table(path: &Path) -> Result<toml::Table, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.parse::<toml::Table>().map_err(|e| ConfigError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Checks every table and key of the file, then deserializes the section
/// of `subcommand`.
fn file_section<T: for<'de> Deserialize<'de> + Default>(
    table: &toml::Table,
    subcommand: &str,
    path: &Path,
) -> Result<T, ConfigError> {
    for (section, value) in table {
        let keys = known_keys(section);
        if keys.is_empty() {
            return Err(ConfigError::UnknownKey(section.clone()));
        }
        let Some(inner) = value.as_table() else {
            return Err(ConfigError::UnknownKey(section.clone()));
        };
        if let Some(k) = inner.keys().find(|k| !keys.contains(k)) {
            return Err(ConfigError::UnknownKey(format!("{section}.{k}")));
        }
    }
    match table.get(subcommand) {
        None => Ok(T::default()),
        Some(v) => v.clone().try_into().map_err(|e: toml::de::Error| ConfigError::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        }),
    }
}

#[derive(Clone, Debug)]
pub struct GenerateConfig {
    pub scenario: ScenarioKind,
    pub n: usize,
    pub seed: u64,
    pub with_latent: bool,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct EstimateConfig {
    pub input: PathBuf,
    pub estimators: Vec<EstimatorSpec>,
    pub ps_design: Option<DesignSpec>,
    pub or_design: Option<DesignSpec>,
    pub pi_floor: f64,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub enum SimulateTarget {
    Preset(Preset),
    Custom {
        scenario: ScenarioKind,
        n: usize,
        estimators: Vec<EstimatorSpec>,
        ps_design: Option<DesignSpec>,
        or_design: Option<DesignSpec>,
    },
}

#[derive(Clone, Debug)]
pub struct SimulateConfig {
    pub target: SimulateTarget,
    pub replications: usize,
    pub seed: u64,
    pub execution: Execution,
    pub keep_draws: Option<PathBuf>,
    pub pi_floor: f64,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleQuantity {
    VarianceBound,
    StratLimit,
    InfluenceMean,
}

impl OracleQuantity {
    pub fn name(self) -> &'static str {
        match self {
            OracleQuantity::VarianceBound => "variance-bound",
            OracleQuantity::StratLimit => "strat-limit",
            OracleQuantity::InfluenceMean => "influence-mean",
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleConfig {
    pub quantity: OracleQuantity,
    pub scenario: ScenarioKind,
    pub strata: usize,
    pub ps_design: DesignSpec,
    pub draws: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct DiagnoseConfig {
    pub scenario: ScenarioKind,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub execution: Execution,
    pub units: bool,
    pub output: Option<PathBuf>,
}

/// Validated configuration of one invocation.
#[derive(Clone, Debug)]
pub enum RunConfig {
    Generate(GenerateConfig),
    Estimate(EstimateConfig),
    Simulate(SimulateConfig),
    Oracle(OracleConfig),
    Diagnose(DiagnoseConfig),
}

fn scenario(value: Option<String>, default: Option<ScenarioKind>) -> Result<ScenarioKind, ConfigError> {
    match value {
        None => default.ok_or(ConfigError::Missing("scenario")),
        Some(s) => s.parse().map_err(|_| ConfigError::Invalid {
            key: "scenario",
            message: format!("`{s}` is not ks or alt"),
        }),
    }
}

fn design(key: &'static str, value: Option<String>) -> Result<Option<DesignSpec>, ConfigError> {
    value
        .map(|s| {
            s.parse().map_err(|_| ConfigError::Invalid {
                key,
                message: format!("`{s}` is not correct or misspecified"),
            })
        })
        .transpose()
}

fn positive(key: &'static str, v: usize) -> Result<usize, ConfigError> {
    if v == 0 {
        Err(ConfigError::Invalid {
            key,
            message: "must be at least 1".into(),
        })
    } else {
        Ok(v)
    }
}

fn pi_floor(v: Option<f64>) -> Result<f64, ConfigError> {
    let v = v.unwrap_or(0.0);
    if (0.0..0.5).contains(&v) {
        Ok(v)
    } else {
        Err(ConfigError::Invalid {
            key: "pi_floor",
            message: format!("{v} is outside [0, 0.5)"),
        })
    }
}

fn execution(workers: Option<usize>) -> Execution {
    Execution::Parallel {
        workers: workers.unwrap_or(0),
    }
}

fn estimator_specs(
    names: Option<Vec<String>>,
    basis: Option<String>,
    strata: Option<usize>,
) -> Result<Vec<EstimatorSpec>, ConfigError> {
    let names = names.ok_or(ConfigError::Missing("estimator"))?;
    if names.is_empty() {
        return Err(ConfigError::Missing("estimator"));
    }
    let basis = match basis {
        None => Basis::OneAndM1,
        Some(b) => match b.parse::<Basis>() {
            Ok(Basis::OneHM1) => {
                return Err(ConfigError::InvalidEstimatorOption {
                    key: "basis",
                    message: "one_h_m1 needs a function h, which is only available from the library".into(),
                })
            }
            Ok(b) => b,
            Err(e) => {
                return Err(ConfigError::InvalidEstimatorOption {
                    key: "basis",
                    message: e.to_string(),
                })
            }
        },
    };
    let strata = strata.unwrap_or(5);
    if strata == 0 {
        return Err(ConfigError::InvalidEstimatorOption {
            key: "strata",
            message: "must be at least 1".into(),
        });
    }
    names
        .iter()
        .map(|name| {
            let family: Family = name.trim().parse().map_err(|e: drmean::estimators::EstimatorError| {
                ConfigError::InvalidEstimatorOption {
                    key: "estimator",
                    message: e.to_string(),
                }
            })?;
            if family == Family::AipwH {
                return Err(ConfigError::InvalidEstimatorOption {
                    key: "estimator",
                    message: "aipw-h needs a function h, which is only available from the library".into(),
                });
            }
            Ok(EstimatorSpec::new(family).with_basis(basis).with_strata(strata))
        })
        .collect()
}

fn check_models(
    estimators: &[EstimatorSpec],
    ps: Option<DesignSpec>,
    or: Option<DesignSpec>,
) -> Result<(), ConfigError> {
    for e in estimators {
        if e.family.needs_propensity_model() && ps.is_none() {
            return Err(ConfigError::InvalidEstimatorOption {
                key: "ps_design",
                message: format!("{} needs a propensity design", e.family.cli_name()),
            });
        }
        if e.family.needs_outcome_model() && or.is_none() {
            return Err(ConfigError::InvalidEstimatorOption {
                key: "or_design",
                message: format!("{} needs an outcome-regression design", e.family.cli_name()),
            });
        }
    }
    Ok(())
}

/// Merges the config file (if any) under the flags and validates.
pub fn parse_config(cli: Cli) -> Result<RunConfig, ConfigError> {
    let table = cli.config.as_deref().map(read_table).transpose()?;
    let path = cli.config.clone().unwrap_or_default();
    let name = cli.command.name();
    macro_rules! merged {
        ($args:expr, $ty:ty) => {
            match &table {
                Some(t) => $args.overlay(file_section::<$ty>(t, name, &path)?),
                None => $args,
            }
        };
    }
    Ok(match cli.command {
        Command::Generate(a) => {
            let a = merged!(a, GenerateArgs);
            RunConfig::Generate(GenerateConfig {
                scenario: scenario(a.scenario, None)?,
                n: positive("n", a.n.ok_or(ConfigError::Missing("n"))?)?,
                seed: a.seed.ok_or(ConfigError::MissingSeed("generate"))?,
                with_latent: a.with_latent.unwrap_or(false),
                output: a.output,
            })
        }
        Command::Estimate(a) => {
            let a = merged!(a, EstimateArgs);
            let estimators = estimator_specs(a.estimator, a.basis, a.strata)?;
            let ps_design = design("ps_design", a.ps_design)?;
            let or_design = design("or_design", a.or_design)?;
            check_models(&estimators, ps_design, or_design)?;
            RunConfig::Estimate(EstimateConfig {
                input: a.input.ok_or(ConfigError::Missing("input"))?,
                estimators,
                ps_design,
                or_design,
                pi_floor: pi_floor(a.pi_floor)?,
                output: a.output,
            })
        }
        Command::Simulate(a) => {
            let a = merged!(a, SimulateArgs);
            let seed = a.seed.ok_or(ConfigError::MissingSeed("simulate"))?;
            let target = match a.preset {
                Some(p) => {
                    let preset: Preset = p.parse().map_err(|_| ConfigError::Invalid {
                        key: "preset",
                        message: format!("`{p}` is not table1 or table2"),
                    })?;
                    let custom = [
                        ("scenario", a.scenario.is_some()),
                        ("n", a.n.is_some()),
                        ("estimator", a.estimator.is_some()),
                        ("ps_design", a.ps_design.is_some()),
                        ("or_design", a.or_design.is_some()),
                        ("basis", a.basis.is_some()),
                        ("strata", a.strata.is_some()),
                    ];
                    if let Some((key, _)) = custom.iter().find(|(_, set)| *set) {
                        return Err(ConfigError::Invalid {
                            key,
                            message: "cannot be combined with a preset".into(),
                        });
                    }
                    SimulateTarget::Preset(preset)
                }
                None => {
                    let estimators = estimator_specs(a.estimator, a.basis, a.strata)?;
                    let ps_design = design("ps_design", a.ps_design)?;
                    let or_design = design("or_design", a.or_design)?;
                    check_models(&estimators, ps_design, or_design)?;
                    SimulateTarget::Custom {
                        scenario: scenario(a.scenario, None)?,
                        n: positive("n", a.n.ok_or(ConfigError::Missing("n"))?)?,
                        estimators,
                        ps_design,
                        or_design,
                    }
                }
            };
            RunConfig::Simulate(SimulateConfig {
                target,
                replications: positive(
                    "replications",
                    a.replications.unwrap_or(DEFAULT_REPLICATIONS),
                )?,
                seed,
                execution: execution(a.workers),
                keep_draws: a.keep_draws,
                pi_floor: pi_floor(a.pi_floor)?,
                output: a.output,
            })
        }
        Command::Oracle(a) => {
            let a = merged!(a, OracleArgs);
            let quantity = match a.quantity.as_deref() {
                Some("variance-bound") => OracleQuantity::VarianceBound,
                Some("strat-limit") => OracleQuantity::StratLimit,
                Some("influence-mean") => OracleQuantity::InfluenceMean,
                Some(other) => {
                    return Err(ConfigError::Invalid {
                        key: "quantity",
                        message: format!("`{other}` is not variance-bound, strat-limit or influence-mean"),
                    })
                }
                None => return Err(ConfigError::Missing("quantity")),
            };
            let strata = a.strata.unwrap_or(5);
            if strata == 0 {
                return Err(ConfigError::InvalidEstimatorOption {
                    key: "strata",
                    message: "must be at least 1".into(),
                });
            }
            let min_draws = match quantity {
                OracleQuantity::StratLimit => 100_000,
                _ => 10_000,
            };
            let draws = a.draws.unwrap_or(1_000_000);
            if draws < min_draws {
                return Err(ConfigError::Invalid {
                    key: "draws",
                    message: format!("at least {min_draws} needed for {}", quantity.name()),
                });
            }
            RunConfig::Oracle(OracleConfig {
                quantity,
                scenario: scenario(a.scenario, Some(ScenarioKind::Ks))?,
                strata,
                ps_design: design("ps_design", a.ps_design)?.unwrap_or(DesignSpec::Correct),
                draws,
                seed: a.seed.unwrap_or(1),
                output: a.output,
            })
        }
        Command::Diagnose(a) => {
            let a = merged!(a, DiagnoseArgs);
            RunConfig::Diagnose(DiagnoseConfig {
                scenario: scenario(a.scenario, Some(ScenarioKind::Alt))?,
                n: positive("n", a.n.unwrap_or(1000))?,
                replications: positive("replications", a.replications.unwrap_or(200))?,
                seed: a.seed.ok_or(ConfigError::MissingSeed("diagnose"))?,
                execution: execution(a.workers),
                units: a.units.unwrap_or(false),
                output: a.output,
            })
        }
    })
}
