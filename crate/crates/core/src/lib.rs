//! Shock propagation in production networks: static Leontief benchmark,
//! overlapping-adjustment dynamics, two-mode spectral reduction and
//! finite-horizon volatility laws.

pub mod error;
pub mod linalg;
pub mod netgen;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub mod calibrate;
pub mod propagate;
pub mod riskstats;
