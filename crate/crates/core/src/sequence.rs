//! Replay schema: fixed-length sequences of transitions.

use crate::error::{Error, Result};

/// Placeholder for a recurrent core state. Tabular agents are memoryless, so
/// this carries nothing; it keeps the transition layout complete.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecurrentState;

/// One timestep `(r^e_{s-1}, r^i_{s-1}, a_{s-1}, h_{s-1}, x_s, a_s, h_s, mu_s, j_s, r^e_s, r^i_s, x_{s+1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub prev_extrinsic_reward: f64,
    pub prev_intrinsic_reward: f64,
    pub prev_action: usize,
    pub prev_recurrent: RecurrentState,
    pub observation: usize,
    pub action: usize,
    pub recurrent: RecurrentState,
    /// Probability the behavior policy gave to `action`.
    pub behavior_prob: f64,
    pub family_index: usize,
    pub extrinsic_reward: f64,
    pub intrinsic_reward: f64,
    pub next_observation: usize,
    /// `next_observation` is absorbing; no bootstrapping past this step.
    pub terminal: bool,
}

impl Transition {
    /// Minimal transition for tests and hand-built sequences.
    pub fn simple(observation: usize, action: usize, behavior_prob: f64, extrinsic_reward: f64, next_observation: usize) -> Self {
        Self {
            prev_extrinsic_reward: 0.0,
            prev_intrinsic_reward: 0.0,
            prev_action: 0,
            prev_recurrent: RecurrentState,
            observation,
            action,
            recurrent: RecurrentState,
            behavior_prob,
            family_index: 0,
            extrinsic_reward,
            intrinsic_reward: 0.0,
            next_observation,
            terminal: false,
        }
    }

    pub fn with_terminal(mut self, terminal: bool) -> Self {
        self.terminal = terminal;
        self
    }

    pub fn with_intrinsic(mut self, reward: f64) -> Self {
        self.intrinsic_reward = reward;
        self
    }

    pub fn with_family(mut self, family_index: usize) -> Self {
        self.family_index = family_index;
        self
    }
}

/// A stored sequence. Steps at or beyond `valid_len` are padding and are
/// excluded from targets, losses and priorities.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSequence {
    pub transitions: Vec<Transition>,
    pub valid_len: usize,
    pub priority: f64,
}

impl TransitionSequence {
    /// A fully valid sequence.
    pub fn new(transitions: Vec<Transition>) -> Self {
        let valid_len = transitions.len();
        Self { transitions, valid_len, priority: 0.0 }
    }

    /// Pads `valid` up to `trace_length` by repeating its last step with zero rewards.
    pub fn padded(valid: Vec<Transition>, trace_length: usize) -> Result<Self> {
        if valid.is_empty() || valid.len() > trace_length {
            return Err(Error::Schema(format!(
                "cannot pad {} transitions to trace length {trace_length}",
                valid.len()
            )));
        }
        let valid_len = valid.len();
        let mut filler = *valid.last().expect("non-empty");
        filler.extrinsic_reward = 0.0;
        filler.intrinsic_reward = 0.0;
        let mut transitions = valid;
        transitions.resize(trace_length, filler);
        Ok(Self { transitions, valid_len, priority: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn valid(&self) -> &[Transition] {
        &self.transitions[..self.valid_len]
    }

    pub fn mask(&self) -> Vec<bool> {
        (0..self.len()).map(|s| s < self.valid_len).collect()
    }

    pub fn family_index(&self) -> usize {
        self.transitions.first().map_or(0, |t| t.family_index)
    }

    /// Structural checks: positive behavior probabilities, a single family
    /// index, and consecutive steps that stay inside one episode.
    pub fn validate(&self) -> Result<()> {
        if self.valid_len == 0 || self.valid_len > self.transitions.len() {
            return Err(Error::Schema(format!(
                "valid length {} for a sequence of {}",
                self.valid_len,
                self.transitions.len()
            )));
        }
        let j = self.family_index();
        let valid = self.valid();
        for (s, t) in valid.iter().enumerate() {
            if !(t.behavior_prob > 0.0 && t.behavior_prob <= 1.0) {
                return Err(Error::DegenerateBehaviorProbability(t.behavior_prob));
            }
            if t.family_index != j {
                return Err(Error::Schema(format!("family index changes from {j} to {} at step {s}", t.family_index)));
            }
            if let Some(next) = valid.get(s + 1) {
                if t.terminal {
                    return Err(Error::Schema(format!("sequence continues past a terminal step at {s}")));
                }
                if t.next_observation != next.observation {
                    return Err(Error::Schema(format!(
                        "step {s} ends in state {} but step {} starts in {}",
                        t.next_observation,
                        s + 1,
                        next.observation
                    )));
                }
            }
        }
        Ok(())
    }
}
