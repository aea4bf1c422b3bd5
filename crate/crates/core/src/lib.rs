//! Probabilistic gradient estimation for nonconvex finite-sum and online
//! problems.
//!
//! Each iteration takes a plain step `x ← x − η g` and then refreshes the
//! gradient estimate `g`: with probability `p` it is recomputed from a fresh
//! minibatch of size `b`, otherwise the previous estimate is corrected by a
//! minibatch of `b'` gradient differences. `p = 1, b = n` is gradient descent
//! and `p = 1, b < n` is minibatch SGD.
//!
//! Crate layout:
//!
//! - [`problems`]: finite-sum oracles with declared constants (L, σ, μ, f*)
//! - [`estimator`]: the seeded estimator state machine and run loop
//! - [`theory`]: parameter plans, complexity budgets and constant estimators
//! - [`verify`]: numerical checks of the descent and variance inequalities
//! - [`harness`]: experiment configs, trace/summary artifacts and replay

pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod problems;
pub mod rng;
pub mod theory;
pub mod verify;

pub use error::{Error, Result};
pub use estimator::{
    init_state, run, select_output, step, Branch, OutputMode, PageConfig, PageState, RunOutcome,
    StepRecord, StopRule, Trace,
};
pub use problems::{Constants, Objective, Problem};
pub use theory::{Plan, Regime};
pub use verify::{CheckReport, CheckStatus};
