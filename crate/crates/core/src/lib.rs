//! Heavy-tailed perpetuities `D_n = A_n D_{n−1} + B_n`: tail models,
//! log-domain simulation, leading-order tail predictions, Monte Carlo and
//! exact-enumeration checks.

pub mod asymptotics;
pub mod chain;
pub mod cli;
pub mod config;
pub mod dist;
pub mod error;
pub mod law;
pub mod montecarlo;
pub mod oracle;
pub mod quad;
pub mod stats;
pub mod trace;

pub use error::{Error, Result};
