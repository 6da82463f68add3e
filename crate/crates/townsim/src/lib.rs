//! Agent-based simulator of an epidemic with multi-dose vaccination in a
//! small, mostly isolated town whose contact structure is a scale-free
//! network, plus the statistical machinery (lagged cross-correlation, VAR
//! lag selection, Granger causality) used to relate hub infection to
//! overall infection levels.
//!
//! The library is organized around the daily simulation loop:
//!
//! * [`network`] — contact network generation and degree-distribution fits
//! * [`epidemic`] — per-agent compartment dynamics (S/E/U/R/V1..V3)
//! * [`vaccine`] — supply ramp, willingness, dose scheduling and allocation
//! * [`travel`] — movement to and from a well-mixed outside city
//! * [`scenario`] — the scenario runner, daily records and replicates
//! * [`stats`] — cross-correlation, VAR/AIC fitting and the Granger test
//! * [`config`] — flat key/value scenario configuration files
//! * [`report`] — CSV/report emission and the run manifest

pub mod config;
pub mod epidemic;
pub mod error;
pub mod network;
pub mod report;
pub mod scenario;
pub mod stats;
pub mod travel;
pub mod vaccine;

pub use error::{Error, Result};
