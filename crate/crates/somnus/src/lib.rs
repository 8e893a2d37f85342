//! Simulation library for adversarial sleeping bandits.
//!
//! In each round an adversary reveals a set of active arms (or a confidence
//! in `[0,1]` per arm), the learner pulls one active arm and observes only
//! that arm's loss. Performance is measured by per-action regret: the
//! learner's cumulative loss minus an arm's, summed over the rounds in which
//! that arm was active.
//!
//! The crate provides:
//!
//! - [`algos`]: SB-EXP3 (binary and confidence-weighted), FTARL with
//!   Tsallis/Shannon regularizers, parameter tuning, and an anytime
//!   doubling-trick wrapper;
//! - [`experts`]: SE-EXP4 for bandits with advice from sleeping experts,
//!   virtual experts for adaptive regret, and a restart wrapper for tracking;
//! - [`envs`]: scripted adversaries: stochastic activity, the always-active
//!   vs. interval-arms lower-bound construction, piecewise-stationary
//!   switching losses, and confidence-reporting environments;
//! - [`harness`]: a deterministic episode/replicate runner with per-round
//!   inequality monitors, regret aggregation, and closed-form bound
//!   evaluation;
//! - [`oracle`]: brute-force references used by the tests (simplex grid
//!   minimizer, exact expectations over the chosen arm).

pub mod algos;
pub mod core;
pub mod envs;
mod error;
pub mod estimators;
pub mod experts;
pub mod harness;
pub mod oracle;

pub use error::{Error, Result};
