//! Simulation designs and the dataset container.
//!
//! Two designs share one latent law: `Z ~ N(0, I₄)`, `ε ~ N(0, 1)`,
//! `Y = 210 + 27.4 Z₁ + 13.7 (Z₂ + Z₃ + Z₄) + ε` and
//! `P(T = 1 | Z) = expit(−Z₁ + 0.5 Z₂ − 0.25 Z₃ − 0.1 Z₄)`. They differ only
//! in the fourth observed covariate: `(Z₂ + Z₄ + 20)²` for [`ScenarioKind::Ks`]
//! and `(Z₃ + Z₄ + 20)²` for [`ScenarioKind::Alt`].
//!
//! A generated [`Dataset`] keeps the complete outcome vector, but only behind
//! [`Dataset::oracle_outcomes`]; estimators read [`Dataset::observed_outcomes`],
//! which is `None` wherever `T = 0`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{expit, substream, Matrix, RngStream};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("design `correct` needs the latent covariates z1..z4, which this dataset does not carry")]
    MissingLatent,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("unknown {what} `{value}`")]
    Unknown { what: &'static str, value: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Ks,
    Alt,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::Ks => "ks",
            ScenarioKind::Alt => "alt",
        })
    }
}

impl FromStr for ScenarioKind {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ks" => Ok(ScenarioKind::Ks),
            "alt" => Ok(ScenarioKind::Alt),
            other => Err(DataError::Unknown {
                what: "scenario",
                value: other.to_string(),
            }),
        }
    }
}

/// Law of the treatment indicator given the latent covariates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PropensityLaw {
    Logistic { intercept: f64, slopes: [f64; 4] },
    /// Degenerate law used by oracle checks.
    Constant(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub outcome_intercept: f64,
    pub outcome_slopes: [f64; 4],
    pub propensity: PropensityLaw,
    pub noise_sd: f64,
}

impl Scenario {
    pub fn ks() -> Self {
        Self {
            kind: ScenarioKind::Ks,
            outcome_intercept: 210.0,
            outcome_slopes: [27.4, 13.7, 13.7, 13.7],
            propensity: PropensityLaw::Logistic {
                intercept: 0.0,
                slopes: [-1.0, 0.5, -0.25, -0.1],
            },
            noise_sd: 1.0,
        }
    }

    pub fn alt() -> Self {
        Self {
            kind: ScenarioKind::Alt,
            ..Self::ks()
        }
    }

    pub fn from_kind(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::Ks => Self::ks(),
            ScenarioKind::Alt => Self::alt(),
        }
    }

    /// `m₁(Z) = E(Y | Z)`; the outcome law does not depend on `T`.
    pub fn mean_outcome(&self, z: &[f64; 4]) -> f64 {
        self.outcome_intercept
            + self
                .outcome_slopes
                .iter()
                .zip(z)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }

    pub fn propensity_linear(&self, z: &[f64; 4]) -> f64 {
        match self.propensity {
            PropensityLaw::Logistic { intercept, slopes } => {
                intercept + slopes.iter().zip(z).map(|(b, v)| b * v).sum::<f64>()
            }
            PropensityLaw::Constant(p) => (p / (1.0 - p)).ln(),
        }
    }

    pub fn propensity(&self, z: &[f64; 4]) -> f64 {
        match self.propensity {
            PropensityLaw::Logistic { .. } => expit(self.propensity_linear(z)),
            PropensityLaw::Constant(p) => p,
        }
    }

    /// Observed covariates `X = f(Z)`.
    pub fn covariates(&self, z: &[f64; 4]) -> [f64; 4] {
        let [z1, z2, z3, z4] = *z;
        let x4_base = match self.kind {
            ScenarioKind::Ks => z2 + z4 + 20.0,
            ScenarioKind::Alt => z3 + z4 + 20.0,
        };
        [
            (z1 / 2.0).exp(),
            z2 / (1.0 + z1.exp()) + 10.0,
            (z1 * z3 / 25.0 + 0.6).powi(3),
            x4_base * x4_base,
        ]
    }

    /// Population mean of the outcome: the intercept, since `E(Z) = 0`.
    pub fn true_mu1(&self) -> f64 {
        self.outcome_intercept
    }
}

/// Which covariate design a working model uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignSpec {
    /// Columns `(1, Z₁..Z₄)`.
    Correct,
    /// Columns `(1, X₁..X₄)`.
    Misspecified,
}

impl fmt::Display for DesignSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DesignSpec::Correct => "correct",
            DesignSpec::Misspecified => "misspecified",
        })
    }
}

impl FromStr for DesignSpec {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "correct" => Ok(DesignSpec::Correct),
            "misspecified" | "incorrect" => Ok(DesignSpec::Misspecified),
            other => Err(DataError::Unknown {
                what: "design",
                value: other.to_string(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    treatment: Vec<bool>,
    observed: Vec<Option<f64>>,
    covariates: Vec<[f64; 4]>,
    latent: Option<Vec<[f64; 4]>>,
    oracle_outcomes: Option<Vec<f64>>,
}

impl Dataset {
    /// Dataset from observed quantities only. `outcomes[i]` is discarded
    /// where `treatment[i]` is false.
    pub fn from_observed(
        treatment: Vec<bool>,
        outcomes: Vec<Option<f64>>,
        covariates: Vec<[f64; 4]>,
        latent: Option<Vec<[f64; 4]>>,
    ) -> Self {
        let observed = treatment
            .iter()
            .zip(outcomes)
            .map(|(&t, y)| if t { y } else { None })
            .collect();
        Self {
            treatment,
            observed,
            covariates,
            latent,
            oracle_outcomes: None,
        }
    }

    pub fn len(&self) -> usize {
        self.treatment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treatment.is_empty()
    }

    pub fn treatment(&self) -> &[bool] {
        &self.treatment
    }

    /// Outcomes as seen by estimators: `None` for untreated units.
    pub fn observed_outcomes(&self) -> &[Option<f64>] {
        &self.observed
    }

    pub fn covariates(&self) -> &[[f64; 4]] {
        &self.covariates
    }

    pub fn latent(&self) -> Option<&[[f64; 4]]> {
        self.latent.as_deref()
    }

    /// Complete outcomes, including those of untreated units. Only present
    /// on generated data; reserved for ground-truth computations.
    pub fn oracle_outcomes(&self) -> Option<&[f64]> {
        self.oracle_outcomes.as_deref()
    }

    /// Outcome of each unit under the arm it received. For the generated
    /// designs the outcome law does not depend on treatment, so this is the
    /// complete outcome vector; it is the input to the control-arm and
    /// contrast estimators.
    pub fn received_outcomes(&self) -> Option<Vec<Option<f64>>> {
        self.oracle_outcomes
            .as_ref()
            .map(|ys| ys.iter().map(|&y| Some(y)).collect())
    }

    pub fn treated_count(&self) -> usize {
        self.treatment.iter().filter(|&&t| t).count()
    }
}

/// Draws `n` units. Latent normals, outcome noise and assignment uniforms
/// come from separate sub-streams of `rng`, so the two designs share every
/// draw under a common stream.
pub fn generate(scenario: &Scenario, n: usize, rng: &RngStream) -> Dataset {
    let mut latent_rng = rng.substream(substream::LATENT);
    let mut noise_rng = rng.substream(substream::NOISE);
    let mut assign_rng = rng.substream(substream::ASSIGNMENT);

    let mut treatment = Vec::with_capacity(n);
    let mut observed = Vec::with_capacity(n);
    let mut covariates = Vec::with_capacity(n);
    let mut latent = Vec::with_capacity(n);
    let mut full = Vec::with_capacity(n);
    for _ in 0..n {
        let z = [
            latent_rng.std_normal(),
            latent_rng.std_normal(),
            latent_rng.std_normal(),
            latent_rng.std_normal(),
        ];
        let y = scenario.mean_outcome(&z) + scenario.noise_sd * noise_rng.std_normal();
        let t = assign_rng.uniform() < scenario.propensity(&z);
        treatment.push(t);
        observed.push(t.then_some(y));
        covariates.push(scenario.covariates(&z));
        latent.push(z);
        full.push(y);
    }
    Dataset {
        treatment,
        observed,
        covariates,
        latent: Some(latent),
        oracle_outcomes: Some(full),
    }
}

pub fn true_mu1(scenario: &Scenario) -> f64 {
    scenario.true_mu1()
}

/// Design matrix with an intercept column followed by `Z₁..Z₄` (correct) or
/// `X₁..X₄` (misspecified). Both working models use the same convention.
pub fn design_matrix(dataset: &Dataset, spec: DesignSpec) -> Result<Matrix, DataError> {
    let cols: &[[f64; 4]] = match spec {
        DesignSpec::Correct => dataset.latent().ok_or(DataError::MissingLatent)?,
        DesignSpec::Misspecified => dataset.covariates(),
    };
    let mut data = Vec::with_capacity(cols.len() * 5);
    for row in cols {
        data.push(1.0);
        data.extend_from_slice(row);
    }
    Ok(Matrix::from_row_major(cols.len(), 5, data).expect("five columns per row"))
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the dataset CSV (`t,y,x1,x2,x3,x4[,z1,z2,z3,z4]`). `y` is empty
/// for untreated units. Latent columns require `with_latent` and a dataset
/// that carries them.
pub fn write_csv<W: Write>(
    dataset: &Dataset,
    mut out: W,
    with_latent: bool,
    comments: &[String],
) -> Result<(), DataError> {
    let latent = if with_latent {
        Some(dataset.latent().ok_or(DataError::MissingLatent)?)
    } else {
        None
    };
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    out.write_all(b"t,y,x1,x2,x3,x4")?;
    if latent.is_some() {
        out.write_all(b",z1,z2,z3,z4")?;
    }
    out.write_all(b"\n")?;
    for i in 0..dataset.len() {
        let mut line = String::with_capacity(160);
        line.push(if dataset.treatment[i] { '1' } else { '0' });
        line.push(',');
        if let Some(y) = dataset.observed[i] {
            line.push_str(&fmt_float(y));
        }
        for v in &dataset.covariates[i] {
            line.push(',');
            line.push_str(&fmt_float(*v));
        }
        if let Some(z) = latent {
            for v in &z[i] {
                line.push(',');
                line.push_str(&fmt_float(*v));
            }
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Reads a dataset CSV. Lines starting with `#` are comments.
pub fn read_csv<R: Read>(input: R) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |name: &'static str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(DataError::MissingColumn(name))
    };
    let t_col = col("t")?;
    let y_col = col("y")?;
    let x_cols = [col("x1")?, col("x2")?, col("x3")?, col("x4")?];
    let z_cols = match (col("z1"), col("z2"), col("z3"), col("z4")) {
        (Ok(a), Ok(b), Ok(c), Ok(d)) => Some([a, b, c, d]),
        _ => None,
    };

    let mut treatment = Vec::new();
    let mut outcomes = Vec::new();
    let mut covariates = Vec::new();
    let mut latent = z_cols.map(|_| Vec::new());
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = idx + 1;
        let field = |c: usize| record.get(c).unwrap_or("");
        let num = |c: usize| -> Result<f64, DataError> {
            let s = field(c);
            let v: f64 = s.parse().map_err(|_| DataError::BadRow {
                row,
                message: format!("`{s}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(DataError::BadRow {
                    row,
                    message: format!("non-finite value `{s}`"),
                });
            }
            Ok(v)
        };
        let t = match field(t_col) {
            "1" => true,
            "0" => false,
            other => {
                return Err(DataError::BadRow {
                    row,
                    message: format!("t must be 0 or 1, got `{other}`"),
                })
            }
        };
        let y = if field(y_col).is_empty() {
            None
        } else {
            Some(num(y_col)?)
        };
        if t && y.is_none() {
            return Err(DataError::BadRow {
                row,
                message: "treated unit without an outcome".into(),
            });
        }
        treatment.push(t);
        outcomes.push(y);
        covariates.push([num(x_cols[0])?, num(x_cols[1])?, num(x_cols[2])?, num(x_cols[3])?]);
        if let (Some(zc), Some(l)) = (z_cols, latent.as_mut()) {
            l.push([num(zc[0])?, num(zc[1])?, num(zc[2])?, num(zc[3])?]);
        }
    }
    Ok(Dataset::from_observed(treatment, outcomes, covariates, latent))
}
