//! Bandit algorithms: SB-EXP3 (binary and confidence-weighted activity),
//! FTARL with Tsallis/Shannon regularizers, closed-form parameter tuning,
//! and the anytime two-level doubling wrapper.

mod doubling;
mod ftarl;
mod sb_exp3;
mod tuning;

pub use doubling::DoublingSbExp3;
pub use ftarl::{ftrl_objective, solve_weights, Ftarl, Regularizer};
pub use sb_exp3::SbExp3;
pub use tuning::{tune, HorizonInfo, TuneMode, TunedParams};
