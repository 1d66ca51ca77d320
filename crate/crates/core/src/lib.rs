//! Simulation and analysis toolkit for biased stochastic gradient descent.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod cli;
pub mod engine;
pub mod error;
pub mod kernels;
pub mod landscapes;
pub mod oracles;
pub mod rates;
pub mod rng;
pub mod schedules;
pub mod series;
pub mod sum;

pub use error::{Error, Result};
