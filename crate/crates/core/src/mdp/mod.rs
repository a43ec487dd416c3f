//! Finite MDPs, policies, value tables and the exact Bellman machinery used as
//! oracles by everything else.

mod operators;
mod table;
mod text;
mod transform;

pub use operators::{
    bellman_eval_step, check_discount, policy_eval_exact, transformed_bellman_eval_step,
    transformed_value_iteration, value_iteration, value_iteration_from, ValueIterationOptions,
};
pub use table::{argmax, greedy_policy, Policy, QFunction, QTable, StochasticPolicy};
pub use transform::{h_apply, h_inverse, IdentityTransform, SquashTransform, ValueTransform};

use crate::error::{Error, Result};

/// Which reward table a backup uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardSelect {
    Extrinsic,
    Intrinsic,
    /// `r^e + beta * r^i`
    Mixed(f64),
}

/// Finite MDP with sparse transition rows.
///
/// Terminal states are absorbing: every action self-loops with zero reward.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    successors: Vec<Vec<(usize, f64)>>,
    reward_extrinsic: Vec<f64>,
    reward_intrinsic: Vec<f64>,
    terminal: Vec<bool>,
}

impl TabularMdp {
    pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

    /// Builds an MDP from a dense `states x actions x states` tensor.
    pub fn from_dense(
        num_states: usize,
        num_actions: usize,
        transition: &[f64],
        reward_extrinsic: Vec<f64>,
        reward_intrinsic: Option<Vec<f64>>,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        if transition.len() != num_states * num_actions * num_states {
            return Err(Error::Dimension(format!(
                "transition tensor needs {} entries, got {}",
                num_states * num_actions * num_states,
                transition.len()
            )));
        }
        let successors = transition
            .chunks(num_states.max(1))
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p != 0.0)
                    .map(|(y, &p)| (y, p))
                    .collect()
            })
            .collect();
        Self::from_sparse(num_states, num_actions, successors, reward_extrinsic, reward_intrinsic, terminal)
    }

    /// Builds an MDP from per-`(x, a)` successor lists, indexed `x * num_actions + a`.
    pub fn from_sparse(
        num_states: usize,
        num_actions: usize,
        successors: Vec<Vec<(usize, f64)>>,
        reward_extrinsic: Vec<f64>,
        reward_intrinsic: Option<Vec<f64>>,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::Dimension("an MDP needs at least one state and one action".into()));
        }
        let pairs = num_states * num_actions;
        let reward_intrinsic = reward_intrinsic.unwrap_or_else(|| vec![0.0; pairs]);
        if successors.len() != pairs || reward_extrinsic.len() != pairs || reward_intrinsic.len() != pairs {
            return Err(Error::Dimension(format!(
                "expected {pairs} state-action rows (successors {}, r^e {}, r^i {})",
                successors.len(),
                reward_extrinsic.len(),
                reward_intrinsic.len()
            )));
        }
        if terminal.len() != num_states {
            return Err(Error::Dimension(format!(
                "terminal mask needs {num_states} entries, got {}",
                terminal.len()
            )));
        }
        let mdp = Self {
            num_states,
            num_actions,
            successors,
            reward_extrinsic,
            reward_intrinsic,
            terminal,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    fn validate(&self) -> Result<()> {
        for x in 0..self.num_states {
            for a in 0..self.num_actions {
                let idx = x * self.num_actions + a;
                let row = &self.successors[idx];
                let mut sum = 0.0;
                for &(y, p) in row {
                    if y >= self.num_states {
                        return Err(Error::OutOfRange { index: y, limit: self.num_states });
                    }
                    if !(p >= 0.0) || !p.is_finite() {
                        return Err(Error::Domain(format!("P(.|{x},{a}) has invalid entry {p}")));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > Self::PROBABILITY_TOLERANCE {
                    return Err(Error::Domain(format!("P(.|{x},{a}) sums to {sum}")));
                }
                let (re, ri) = (self.reward_extrinsic[idx], self.reward_intrinsic[idx]);
                if !re.is_finite() || !ri.is_finite() {
                    return Err(Error::Domain(format!("non-finite reward at ({x},{a})")));
                }
                if self.terminal[x] {
                    let self_loop = row.iter().all(|&(y, p)| y == x || p == 0.0);
                    if !self_loop || re != 0.0 || ri != 0.0 {
                        return Err(Error::Domain(format!(
                            "terminal state {x} must self-loop with zero reward under action {a}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn successors(&self, state: usize, action: usize) -> &[(usize, f64)] {
        &self.successors[state * self.num_actions + action]
    }

    /// Dense lookup of `P(next | state, action)`.
    pub fn transition_prob(&self, state: usize, action: usize, next: usize) -> f64 {
        self.successors(state, action)
            .iter()
            .filter(|&&(y, _)| y == next)
            .map(|&(_, p)| p)
            .sum()
    }

    #[inline]
    pub fn reward(&self, state: usize, action: usize, select: RewardSelect) -> f64 {
        let idx = state * self.num_actions + action;
        match select {
            RewardSelect::Extrinsic => self.reward_extrinsic[idx],
            RewardSelect::Intrinsic => self.reward_intrinsic[idx],
            RewardSelect::Mixed(beta) => self.reward_extrinsic[idx] + beta * self.reward_intrinsic[idx],
        }
    }

    pub fn reward_extrinsic(&self) -> &[f64] {
        &self.reward_extrinsic
    }

    pub fn reward_intrinsic(&self) -> &[f64] {
        &self.reward_intrinsic
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.terminal[state]
    }

    pub fn terminal_mask(&self) -> &[bool] {
        &self.terminal
    }

    /// Copy of this MDP with a different intrinsic reward table.
    pub fn with_intrinsic_reward(&self, reward_intrinsic: Vec<f64>) -> Result<Self> {
        Self::from_sparse(
            self.num_states,
            self.num_actions,
            self.successors.clone(),
            self.reward_extrinsic.clone(),
            Some(reward_intrinsic),
            self.terminal.clone(),
        )
    }

    pub(crate) fn check_table(&self, q: &QFunction, what: &str) -> Result<()> {
        if q.num_states() != self.num_states || q.num_actions() != self.num_actions {
            return Err(Error::Dimension(format!(
                "{what}: table is {}x{}, MDP is {}x{}",
                q.num_states(),
                q.num_actions(),
                self.num_states,
                self.num_actions
            )));
        }
        Ok(())
    }

    pub(crate) fn check_policy(&self, pi: &StochasticPolicy, what: &str) -> Result<()> {
        if pi.num_states() != self.num_states || pi.num_actions() != self.num_actions {
            return Err(Error::Dimension(format!(
                "{what}: policy is {}x{}, MDP is {}x{}",
                pi.num_states(),
                pi.num_actions(),
                self.num_states,
                self.num_actions
            )));
        }
        Ok(())
    }
}
