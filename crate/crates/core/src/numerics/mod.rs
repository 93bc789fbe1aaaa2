//! Deterministic random streams and small dense linear algebra.

mod linalg;
mod rng;

pub use linalg::{
    dot, mean, pairwise_sum, residual_norm, sample_average, solve_general, solve_spd, Fallback,
    LinalgError, Matrix, Solution,
};
pub use rng::{draw_std_normal, substream, RngStream};

/// `1 / (1 + e^{-x})`, evaluated without overflow for large |x|.
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`, evaluated without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
