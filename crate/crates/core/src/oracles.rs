//! Ground-truth quantities that need the data-generating law: the efficient
//! influence function, the semiparametric variance bound `E(τ₁²)`, and the
//! probability limit of the stratification estimator.
//!
//! Monte Carlo draws are split into [`BATCHES`] blocks, block `b` drawing
//! from stream `(seed, b)`. Blocks may run in parallel; their partial sums
//! are combined in block order.

use serde::Serialize;

use crate::datagen::{design_matrix, generate, Dataset, DesignSpec, Scenario};
use crate::estimators::{quantile_cuts, stratum_of};
use crate::models::{fit_logistic, FitStatus};
use crate::numerics::{dot, expit, pairwise_sum, RngStream};
use crate::parallel::map_ordered;

pub const BATCHES: usize = 64;

/// Size of the sample whose logistic fit stands in for the probability
/// limit `π*` of a misspecified propensity model.
pub const PSTAR_FIT_DRAWS: usize = 1_000_000;

/// Stream of the `π*` fitting sample, outside the range used by batches.
pub const PSTAR_STREAM: u64 = u64::MAX;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleValue {
    pub value: f64,
    pub mc_standard_error: f64,
    pub draws: usize,
    pub seed: u64,
    /// Coefficients of `π*` when it was estimated.
    pub pstar_coefficients: Option<Vec<f64>>,
}

/// `τ₁ = m₁(Z) − μ₁ + (T/π(Z))·(Y − m₁(Z))` under the true law.
pub fn efficient_influence(scenario: &Scenario, z: &[f64; 4], t: bool, y: f64) -> f64 {
    let pi = scenario.propensity(z);
    assert!(pi > 0.0 && pi <= 1.0, "true propensity {pi} outside (0, 1]");
    let m = scenario.mean_outcome(z);
    let mu = scenario.true_mu1();
    let w = if t { 1.0 / pi } else { 0.0 };
    let tau = m - mu + w * (y - m);
    let other = w * y - mu - (w - 1.0) * m;
    debug_assert!(
        (tau - other).abs() <= 1e-12 * (1.0 + tau.abs().max(other.abs())),
        "{tau} vs {other}"
    );
    tau
}

fn batch_sizes(draws: usize) -> impl Fn(usize) -> usize {
    move |b| draws / BATCHES + usize::from(b < draws % BATCHES)
}

#[derive(Clone, Copy, Default)]
struct Moments {
    count: usize,
    sum: f64,
    sum_sq: f64,
}

fn mean_with_se(parts: &[Moments]) -> (f64, f64, usize) {
    let count: usize = parts.iter().map(|m| m.count).sum();
    let sums: Vec<f64> = parts.iter().map(|m| m.sum).collect();
    let mean = pairwise_sum(&sums) / count as f64;
    let sq: Vec<f64> = parts.iter().map(|m| m.sum_sq).collect();
    let n = count as f64;
    let var = ((pairwise_sum(&sq) - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt(), count)
}

/// Monte Carlo mean of `f(dataset, i)` over `draws` units.
fn mc_mean<F>(scenario: &Scenario, draws: usize, seed: u64, f: F) -> OracleValue
where
    F: Fn(&Dataset, usize) -> f64 + Sync + Send,
{
    let size = batch_sizes(draws);
    let parts = map_ordered(BATCHES, |b| {
        let data = generate(scenario, size(b), &RngStream::new(seed, b as u64));
        let mut m = Moments {
            count: data.len(),
            ..Moments::default()
        };
        for i in 0..data.len() {
            let v = f(&data, i);
            m.sum += v;
            m.sum_sq += v * v;
        }
        m
    });
    let (value, se, count) = mean_with_se(&parts);
    OracleValue {
        value,
        mc_standard_error: se,
        draws: count,
        seed,
        pstar_coefficients: None,
    }
}

fn tau_of(scenario: &Scenario, data: &Dataset, i: usize) -> f64 {
    let z = &data.latent().expect("generated data carries Z")[i];
    let y = data.oracle_outcomes().expect("generated data carries Y")[i];
    efficient_influence(scenario, z, data.treatment()[i], y)
}

/// `E(τ₁²)`, the variance bound of `√n(μ̂ − μ₁)`.
pub fn variance_bound(scenario: &Scenario, draws: usize, seed: u64) -> OracleValue {
    mc_mean(scenario, draws, seed, |d, i| tau_of(scenario, d, i).powi(2))
}

/// `E(τ₁)`, zero in theory.
pub fn influence_mean(scenario: &Scenario, draws: usize, seed: u64) -> OracleValue {
    mc_mean(scenario, draws, seed, |d, i| tau_of(scenario, d, i))
}

/// `π*` coefficients for the misspecified design: the logistic fit on
/// `fit_draws` units from stream `(seed, PSTAR_STREAM)`.
pub fn pstar_coefficients(scenario: &Scenario, fit_draws: usize, seed: u64) -> Vec<f64> {
    let data = generate(scenario, fit_draws, &RngStream::new(seed, PSTAR_STREAM));
    let design = design_matrix(&data, DesignSpec::Misspecified).expect("generated data");
    let fit = fit_logistic(&design, data.treatment()).expect("finite design");
    debug_assert_eq!(fit.status, FitStatus::Converged);
    fit.coefficients
}

/// Per-stratum sums over units for the limit and its delta-method error.
#[derive(Clone, Default)]
struct StratSums {
    n: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    uu: Vec<f64>,
    vv: Vec<f64>,
    uv: Vec<f64>,
}

impl StratSums {
    fn new(s: usize) -> Self {
        let z = vec![0.0; s];
        Self {
            n: z.clone(),
            u: z.clone(),
            v: z.clone(),
            uu: z.clone(),
            vv: z.clone(),
            uv: z,
        }
    }

    fn add(&mut self, j: usize, u: f64, v: f64) {
        self.n[j] += 1.0;
        self.u[j] += u;
        self.v[j] += v;
        self.uu[j] += u * u;
        self.vv[j] += v * v;
        self.uv[j] += u * v;
    }

    fn merge(&mut self, other: &Self) {
        let fields = [
            (&mut self.n, &other.n),
            (&mut self.u, &other.u),
            (&mut self.v, &other.v),
            (&mut self.uu, &other.uu),
            (&mut self.vv, &other.vv),
            (&mut self.uv, &other.uv),
        ];
        for (a, b) in fields {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

/// Probability limit of the stratification estimator with `s` strata,
///
/// ```text
/// Σⱼ E(π·m₁ | π* ∈ Sⱼ) / E(π | π* ∈ Sⱼ) · P(π* ∈ Sⱼ)
/// ```
///
/// with `Sⱼ` the quantile bins of `π*`. `π*` is the true propensity for the
/// correct design and the large-sample logistic fit on `X` otherwise. The
/// standard error is a delta-method one that treats the bin edges as fixed.
pub fn strat_limit(
    scenario: &Scenario,
    strata: usize,
    design: DesignSpec,
    draws: usize,
    seed: u64,
) -> OracleValue {
    strat_limit_with(scenario, strata, design, draws, seed, PSTAR_FIT_DRAWS)
}

/// [`strat_limit`] with an explicit size for the `π*` fitting sample.
pub fn strat_limit_with(
    scenario: &Scenario,
    strata: usize,
    design: DesignSpec,
    draws: usize,
    seed: u64,
    pstar_draws: usize,
) -> OracleValue {
    assert!(strata >= 1, "at least one stratum");
    let gamma = match design {
        DesignSpec::Correct => None,
        DesignSpec::Misspecified => Some(pstar_coefficients(scenario, pstar_draws, seed)),
    };
    let pstar = |d: &Dataset, i: usize| -> f64 {
        match &gamma {
            None => scenario.propensity(&d.latent().expect("generated data")[i]),
            Some(g) => {
                let x = &d.covariates()[i];
                expit(g[0] + dot(&g[1..], x))
            }
        }
    };
    let size = batch_sizes(draws);

    let firsts = map_ordered(BATCHES, |b| {
        let data = generate(scenario, size(b), &RngStream::new(seed, b as u64));
        (0..data.len()).map(|i| pstar(&data, i)).collect::<Vec<f64>>()
    });
    let all: Vec<f64> = firsts.concat();
    let cuts = quantile_cuts(&all, strata);
    drop(all);

    let parts = map_ordered(BATCHES, |b| {
        let data = generate(scenario, size(b), &RngStream::new(seed, b as u64));
        let mut sums = StratSums::new(strata);
        for i in 0..data.len() {
            let z = &data.latent().expect("generated data")[i];
            let pi = scenario.propensity(z);
            let m = scenario.mean_outcome(z);
            sums.add(stratum_of(&cuts, pstar(&data, i)), pi * m, pi);
        }
        sums
    });
    let mut total = StratSums::new(strata);
    for p in &parts {
        total.merge(p);
    }

    let n: f64 = total.n.iter().sum();
    let mut value = 0.0;
    let mut second = 0.0;
    for j in 0..strata {
        if total.n[j] == 0.0 {
            continue;
        }
        let p = total.n[j] / n;
        let b = total.v[j] / n;
        let r = total.u[j] / total.v[j];
        value += p * r;
        // ψ = r + (p/b)(u − r·v) for units in stratum j
        let d = p / b;
        let c = r;
        second += (c * c * total.n[j]
            + 2.0 * c * d * (total.u[j] - r * total.v[j])
            + d * d * (total.uu[j] - 2.0 * r * total.uv[j] + r * r * total.vv[j]))
            / n;
    }
    let var = (second - value * value).max(0.0);
    OracleValue {
        value,
        mc_standard_error: (var / n).sqrt(),
        draws: n as usize,
        seed,
        pstar_coefficients: gamma,
    }
}

/// Values computed with the `oracle` subcommand at 10⁷ draws, seed 1.
pub mod frozen {
    /// `E(τ₁²)` for the ks design (the alt design shares the joint law of
    /// `(Z, T, Y)`).
    pub const VARIANCE_BOUND: f64 = 1317.395389498869;
    pub const VARIANCE_BOUND_SE: f64 = 0.5891647883570488;

    /// Stratification limit, five strata, correct propensity design.
    pub const STRAT_LIMIT_KS_CORRECT: f64 = 208.94199655668984;
    pub const STRAT_LIMIT_KS_CORRECT_SE: f64 = 0.01139297710799922;

    /// Same with `π*` from the misspecified design.
    pub const STRAT_LIMIT_KS_MISSPECIFIED: f64 = 207.15545825629945;
    pub const STRAT_LIMIT_KS_MISSPECIFIED_SE: f64 = 0.012342098581848386;

    pub const STRAT_LIMIT_ALT_CORRECT: f64 = 208.94199655668984;
    pub const STRAT_LIMIT_ALT_CORRECT_SE: f64 = 0.01139297710799922;

    pub const STRAT_LIMIT_ALT_MISSPECIFIED: f64 = 209.1031035423276;
    pub const STRAT_LIMIT_ALT_MISSPECIFIED_SE: f64 = 0.012256240927866991;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::PropensityLaw;

    #[test]
    fn influence_examples() {
        let mut sc = Scenario::ks();
        sc.propensity = PropensityLaw::Constant(1.0);
        let z = [0.3, -0.2, 1.0, 0.5];
        let y = 250.0;
        assert!((efficient_influence(&sc, &z, true, y) - (y - 210.0)).abs() < 1e-12);
        let ks = Scenario::ks();
        let m = ks.mean_outcome(&z);
        assert!((efficient_influence(&ks, &z, false, y) - (m - 210.0)).abs() < 1e-12);
    }

    #[test]
    fn toy_influence_value() {
        let sc = Scenario {
            outcome_intercept: 2.0,
            outcome_slopes: [0.0; 4],
            propensity: PropensityLaw::Constant(0.5),
            ..Scenario::ks()
        };
        assert_eq!(efficient_influence(&sc, &[0.0; 4], true, 3.0), 2.0);
    }

    #[test]
    fn bound_with_full_observation_is_outcome_variance() {
        let mut sc = Scenario::ks();
        sc.propensity = PropensityLaw::Constant(1.0);
        // var(Y) = 27.4² + 3·13.7² + 1
        let truth = 27.4f64.powi(2) + 3.0 * 13.7f64.powi(2) + 1.0;
        let o = variance_bound(&sc, 200_000, 3);
        assert!((o.value - truth).abs() < 4.0 * o.mc_standard_error, "{o:?}");
    }

    #[test]
    fn bound_with_half_observation_and_flat_mean_is_two() {
        let sc = Scenario {
            outcome_slopes: [0.0; 4],
            propensity: PropensityLaw::Constant(0.5),
            ..Scenario::ks()
        };
        let o = variance_bound(&sc, 200_000, 4);
        assert!((o.value - 2.0).abs() < 4.0 * o.mc_standard_error, "{o:?}");
        assert!(o.mc_standard_error > 0.0);
        assert_eq!(o.draws, 200_000);
    }

    #[test]
    fn influence_has_mean_zero() {
        let o = influence_mean(&Scenario::ks(), 400_000, 5);
        assert!(o.value.abs() < 3.0 * o.mc_standard_error, "{o:?}");
    }

    #[test]
    fn strat_limit_without_bias_sources() {
        let flat = Scenario {
            outcome_slopes: [0.0; 4],
            ..Scenario::ks()
        };
        let o = strat_limit(&flat, 5, DesignSpec::Correct, 100_000, 6);
        assert!((o.value - 210.0).abs() < 1e-9, "{o:?}");
        let constant_pi = Scenario {
            propensity: PropensityLaw::Constant(0.4),
            ..Scenario::ks()
        };
        let o = strat_limit(&constant_pi, 5, DesignSpec::Correct, 200_000, 7);
        assert!((o.value - 210.0).abs() < 4.0 * o.mc_standard_error, "{o:?}");
    }

    #[test]
    fn strat_limit_is_below_truth_for_ks() {
        let o = strat_limit(&Scenario::ks(), 5, DesignSpec::Correct, 200_000, 8);
        assert!(o.value < 210.0 - 0.5 && o.value > 210.0 - 2.0, "{o:?}");
        let m = strat_limit_with(&Scenario::ks(), 5, DesignSpec::Misspecified, 100_000, 8, 50_000);
        assert_eq!(m.pstar_coefficients.as_ref().map(Vec::len), Some(5));
        assert!(m.value.is_finite());
    }

    #[test]
    fn ks_bound_matches_closed_form() {
        // E(τ₁²) = var m₁(Z) + E(σ²/π), and E(1/π) = 1 + exp(var(γᵀZ)/2)
        let sc = Scenario::ks();
        let var_m: f64 = sc.outcome_slopes.iter().map(|b| b * b).sum();
        let var_eta = 1.0 + 0.25 + 0.0625 + 0.01;
        let closed = var_m + 1.0 + (var_eta / 2.0f64).exp();
        let o = variance_bound(&sc, 400_000, 10);
        assert!((o.value - closed).abs() < 4.0 * o.mc_standard_error, "{o:?} vs {closed}");
    }

    #[test]
    fn frozen_values_are_consistent() {
        let sc = Scenario::ks();
        let closed = sc.outcome_slopes.iter().map(|b| b * b).sum::<f64>() + 1.0 + (1.3225f64 / 2.0).exp();
        assert!((frozen::VARIANCE_BOUND - closed).abs() < 3.0 * frozen::VARIANCE_BOUND_SE);
        // the correct propensity design does not see X₄
        assert_eq!(frozen::STRAT_LIMIT_KS_CORRECT, frozen::STRAT_LIMIT_ALT_CORRECT);
        let live = strat_limit(&sc, 5, DesignSpec::Correct, 200_000, 1);
        let se = live.mc_standard_error.hypot(frozen::STRAT_LIMIT_KS_CORRECT_SE);
        assert!((live.value - frozen::STRAT_LIMIT_KS_CORRECT).abs() < 4.0 * se, "{live:?}");
    }

    #[test]
    fn draws_are_deterministic() {
        let a = variance_bound(&Scenario::ks(), 10_000, 9);
        let b = variance_bound(&Scenario::ks(), 10_000, 9);
        assert_eq!(a, b);
    }
}
