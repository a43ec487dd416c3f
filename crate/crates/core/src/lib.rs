//! Tabular Retrace learning over a family of exploratory and exploitative
//! policies.
//!
//! The crate is organised bottom-up:
//!
//! * [`mdp`]: finite MDPs, Bellman and transformed Bellman operators, value
//!   iteration and exact policy evaluation (the oracles).
//! * [`retrace`]: exact and sampled Retrace operators, targets and losses.
//! * [`decomposition`]: extrinsic/intrinsic value splits and their equivalence
//!   with a single value on the mixed reward.
//! * [`novelty`]: episodic and life-long novelty and the clipped intrinsic reward.
//! * [`bandit`]: the sliding-window UCB meta-controller.
//! * [`family`]: the `(beta_j, gamma_j)` schedules.
//! * [`env`]: the random-coin room and random MDPs.
//! * [`harness`]: actors, prioritized sequence replay, learner and evaluator.
//! * [`metrics`]: normalized scores and windowed returns.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandit;
pub mod decomposition;
pub mod env;
pub mod error;
pub mod family;
pub mod harness;
pub mod mdp;
pub mod metrics;
pub mod novelty;
pub mod retrace;
pub mod sequence;
pub mod verify;

pub use error::{Error, Result};
