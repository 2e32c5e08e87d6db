//! wattledger: energy, marginal-energy, and emissions accounting from
//! power telemetry.
//!
//! The pipeline has three stages:
//!
//! 1. **Ingest** ([`telemetry`]): parse sampled power or utilization series,
//!    decode cumulative energy counters, run sampling diagnostics.
//! 2. **Estimate** ([`estimation`], [`proxy`]): integrate power to joules,
//!    subtract idle baselines for marginal energy, standardize across
//!    machines, or fall back to loadline/TDP proxies when direct power
//!    readings are unavailable. [`simtrace`] generates synthetic traces with
//!    known ground truth for validating any of these estimators.
//! 3. **Account** ([`carbon`], [`stats`], [`report`]): convert energy to
//!    gCO2eq against a carbon-intensity signal, compare repeated runs with
//!    proper uncertainty, and emit a transparency report that states what
//!    was measured and what was assumed.

pub mod carbon;
pub mod error;
pub mod estimation;
pub mod proxy;
pub mod report;
pub mod simtrace;
pub mod stats;
pub mod telemetry;
pub mod units;

pub use error::{Error, Result};
