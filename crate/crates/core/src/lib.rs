//! Sequential detection of two interacting faults.
//!
//! Two subsystems each watch for their own fault. Subsystem 1 sees a private
//! stream X, subsystem 2 sees a private stream Y, and both see a shared
//! stream Z that leaves its nominal distribution as soon as either fault is
//! present. Each subsystem runs a posterior-odds statistic on its private
//! stream plus Z, declares when the statistic crosses an error-controlled
//! threshold, and announces the declaration to its peer with a single bit.
//! On hearing the peer declare first, a subsystem discards the shared stream
//! (now explained by the peer's fault) and falls back to its private
//! statistic alone.
//!
//! The crate is organized bottom-up:
//!
//! - [`models`]: Gaussian mean-shift observation models, geometric change
//!   priors, and trial stream sampling.
//! - [`statistics`]: the posterior-odds recursions, both the joint
//!   single-change form and the no-exchange two-change form.
//! - [`stopping`]: thresholds, stopping times, and the two-detector
//!   state machine with one-bit exchange.
//! - [`theory`]: closed-form delay constants, the error-coupling rate
//!   analysis, and the Gaussian strong-interaction condition.
//! - [`sim`]: reproducible Monte Carlo trials, aggregation with standard
//!   errors, exponent fitting, and parameter sweeps.
//!
//! Everything is deterministic given a seed: trials draw from
//! counter-indexed substreams of one master generator, so results are
//! independent of thread count and any single trial can be replayed alone.

#![forbid(unsafe_code)]

pub mod error;
pub mod models;
pub mod numerics;
pub mod sim;
pub mod statistics;
pub mod stopping;
pub mod theory;

pub use error::{Error, Result};
