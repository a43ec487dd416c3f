//! Environments the harness can drive, plus random MDP generators for oracles.

mod coin;
mod generator;

pub use coin::{coin_to_mdp, CoinAction, RandomCoinConfig, RandomCoinEnv};
pub use generator::{MdpGenerator, RandomMdpEnv};

use crate::error::Result;

/// What an environment hands back after a reset or a step.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Index into the tabular value tables.
    pub state: usize,
    /// Features fed to the novelty signals.
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    /// The episode is over (absorbing state reached or step limit hit).
    pub done: bool,
    /// The episode ended in an absorbing state; values must not bootstrap past it.
    pub terminal: bool,
}

pub trait Environment: Send {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn reset(&mut self) -> Observation;
    fn step(&mut self, action: usize) -> Result<StepOutcome>;
}
