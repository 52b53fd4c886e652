//! Gauge-fixed oscillatory state-space models and geometric health
//! indicators for narrowband monitoring.

pub mod commands;
pub mod detector;
pub mod energy;
pub mod error;
pub mod estimator;
pub mod gauge;
pub mod harness;
pub mod io;
pub mod kalman;
pub mod lab;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod plot;
pub mod probes;
pub mod rng;

pub use error::{Error, Result};
