//! Heterogeneous response modeling for continuous credit-limit increases.
//!
//! The crate covers the whole loop of a limit-increase campaign: a
//! randomized testing design stratified by subgroup, a synthetic population
//! with a known response oracle, a family of structural outcome-regression
//! models `Y(T) = g(L) + phi(T) * h(L)` (optionally on GBDT leaf encodings),
//! and a grouped relative error metric with response-curve and partial
//! dependence outputs.
//!
//! See `examples/` for one runnable program per capability.
pub mod dataset;
pub mod design;
pub mod domain;
pub mod error;
pub mod gbdt;
pub mod pipeline;
pub mod evaluation;
pub mod response;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
