//! Experiment harness for the sampling-based k-means library.
//!
//! Provides dataset IO (CSV and a packed little-endian binary format),
//! synthetic mixture generation, seeded multi-trial experiment runs with
//! JSON reports, parameter sweeps, cost-model queries, and the acceptance
//! suite exercised by `tests/acceptance.rs`.

// Parameter validation writes `!(x > 0.0)` on purpose: the negation is true
// for NaN, so non-finite garbage is rejected along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod config;
pub mod dataset;
pub mod report;
pub mod runner;
pub mod synth;
