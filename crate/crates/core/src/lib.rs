//! Outcome-regression, inverse-probability-weighting and doubly robust
//! estimators of a mean with outcomes missing at random, the two simulation
//! designs they are compared on, and a Monte Carlo harness.

// `!(x > 0.0)` is how NaN gets rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod estimators;
pub mod models;
pub mod numerics;
pub mod oracles;
mod parallel;
pub mod simharness;
