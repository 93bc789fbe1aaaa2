use serde::Serialize;

use super::HarnessError;

/// Accuracy summary of `R` replicated estimates against the truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub mean: f64,
    pub bias: f64,
    /// Sample standard deviation, divisor `R − 1` (zero when `R = 1`).
    pub sd: f64,
    /// `100·bias/sd`; reported as 0 when `sd = 0`.
    pub pct_bias: f64,
    pub rmse: f64,
    /// Median absolute error.
    pub mae: f64,
    pub zero_sd: bool,
}

impl Metrics {
    /// Monte Carlo standard error of the mean estimate.
    pub fn bias_se(&self, replications: usize) -> f64 {
        self.sd / (replications as f64).sqrt()
    }

    pub fn variance(&self) -> f64 {
        self.sd * self.sd
    }
}

pub fn metrics(estimates: &[f64], truth: f64) -> Result<Metrics, HarnessError> {
    if estimates.is_empty() {
        return Err(HarnessError::NoEstimates);
    }
    let r = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / r;
    let bias = mean - truth;
    let sd = if estimates.len() > 1 {
        (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
    } else {
        0.0
    };
    let zero_sd = sd == 0.0;
    let pct_bias = if zero_sd { 0.0 } else { 100.0 * bias / sd };
    let rmse = (estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / r).sqrt();
    let mut abs: Vec<f64> = estimates.iter().map(|e| (e - truth).abs()).collect();
    let mae = median(&mut abs);
    Ok(Metrics {
        mean,
        bias,
        sd,
        pct_bias,
        rmse,
        mae,
        zero_sd,
    })
}

/// Median; the midpoint of the central pair for even length. Sorts in place.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Sample quantile with linear interpolation between order statistics
/// (`x[(n−1)p]`). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}
