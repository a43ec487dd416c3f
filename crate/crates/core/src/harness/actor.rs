//! Actors: bandit-chosen family member per episode, epsilon-greedy on the mix,
//! overlapping fixed-length sequences with initial priorities.

use super::agent::{AgentSpec, FamilyTables};
use crate::bandit::BanditState;
use crate::env::{Environment, Observation};
use crate::error::{Error, Result};
use crate::novelty::NoveltyModule;
use crate::sequence::{RecurrentState, Transition, TransitionSequence};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// `eps^(1 + alpha l / (L - 1))`; a single actor uses `eps`.
pub fn actor_epsilon(index: usize, num_actors: usize, base: f64, alpha: f64) -> Result<f64> {
    if num_actors == 0 || index >= num_actors {
        return Err(Error::OutOfRange { index, limit: num_actors });
    }
    if !(0.0..=1.0).contains(&base) {
        return Err(Error::Domain(format!("base epsilon {base} outside [0, 1]")));
    }
    if num_actors == 1 {
        return Ok(base);
    }
    Ok(base.powf(1.0 + alpha * index as f64 / (num_actors - 1) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActorConfig {
    pub index: usize,
    pub num_actors: usize,
    pub base_epsilon: f64,
    pub alpha: f64,
    /// Actor steps between table refreshes.
    pub refresh_period: u64,
    pub trace_length: usize,
    pub replay_period: usize,
}

impl ActorConfig {
    pub fn epsilon(&self) -> Result<f64> {
        actor_epsilon(self.index, self.num_actors, self.base_epsilon, self.alpha)
    }
}

/// One finished actor episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub arm: usize,
    pub extrinsic_return: f64,
    pub intrinsic_return: f64,
    pub length: usize,
}

/// What one actor step produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActorStep {
    pub sequences: Vec<TransitionSequence>,
    pub finished: Option<EpisodeSummary>,
}

pub struct Actor {
    config: ActorConfig,
    epsilon: f64,
    env: Box<dyn Environment>,
    bandit: BanditState,
    novelty: Option<NoveltyModule>,
    rng: ChaCha8Rng,
    tables: Arc<FamilyTables>,
    steps_since_refresh: u64,
    frames: u64,
    // current episode
    active: bool,
    observation: Observation,
    arm: usize,
    episode: Vec<Transition>,
    next_start: usize,
    covered_end: usize,
    extrinsic_return: f64,
    intrinsic_return: f64,
    buf: Vec<f64>,
}

impl Actor {
    pub fn new(
        config: ActorConfig,
        env: Box<dyn Environment>,
        bandit: BanditState,
        novelty: Option<NoveltyModule>,
        rng: ChaCha8Rng,
        tables: Arc<FamilyTables>,
    ) -> Result<Self> {
        if config.trace_length == 0 || config.replay_period >= config.trace_length {
            return Err(Error::Config(format!(
                "need replay_period < trace_length, got {} and {}",
                config.replay_period, config.trace_length
            )));
        }
        if tables.num_states() != env.num_states() || tables.num_actions() != env.num_actions() {
            return Err(Error::Dimension(format!(
                "tables are {}x{}, environment is {}x{}",
                tables.num_states(),
                tables.num_actions(),
                env.num_states(),
                env.num_actions()
            )));
        }
        if bandit.num_arms() != tables.num_policies() {
            return Err(Error::Dimension(format!(
                "bandit has {} arms for {} family members",
                bandit.num_arms(),
                tables.num_policies()
            )));
        }
        Ok(Self {
            epsilon: config.epsilon()?,
            config,
            env,
            bandit,
            novelty,
            rng,
            tables,
            steps_since_refresh: 0,
            frames: 0,
            active: false,
            observation: Observation { state: 0, embedding: Vec::new() },
            arm: 0,
            episode: Vec::new(),
            next_start: 0,
            covered_end: 0,
            extrinsic_return: 0.0,
            intrinsic_return: 0.0,
            buf: Vec::new(),
        })
    }

    pub fn config(&self) -> &ActorConfig {
        &self.config
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn bandit(&self) -> &BanditState {
        &self.bandit
    }

    pub fn tables(&self) -> &Arc<FamilyTables> {
        &self.tables
    }

    pub fn needs_refresh(&self) -> bool {
        self.steps_since_refresh >= self.config.refresh_period
    }

    pub fn refresh(&mut self, tables: Arc<FamilyTables>) {
        self.tables = tables;
        self.steps_since_refresh = 0;
    }

    fn start_episode(&mut self) {
        self.arm = self.bandit.select_arm(&mut self.rng);
        self.observation = self.env.reset();
        if let Some(novelty) = &mut self.novelty {
            novelty.reset_episode();
            // The start state counts as visited for the episodic memory.
            let _ = novelty.reward(&self.observation.embedding);
        }
        self.episode.clear();
        self.next_start = 0;
        self.covered_end = 0;
        self.extrinsic_return = 0.0;
        self.intrinsic_return = 0.0;
        self.active = true;
    }

    fn emit(&self, spec: &AgentSpec, start: usize, end: usize) -> Result<TransitionSequence> {
        let mut seq = TransitionSequence::padded(self.episode[start..end].to_vec(), self.config.trace_length)?;
        let errs = spec.sequence_errors(&seq, &self.tables, &self.tables)?;
        seq.priority = spec.priority(self.arm, &errs.td_e, &errs.td_i)?;
        Ok(seq)
    }

    /// Advances one environment step, starting a new episode when needed.
    pub fn step(&mut self, spec: &AgentSpec) -> Result<ActorStep> {
        if !self.active {
            self.start_episode();
        }
        let x = self.observation.state;
        let (action, mu) =
            spec.select_action(&self.tables, self.arm, x, self.epsilon, &mut self.rng, &mut self.buf);
        let outcome = match self.env.step(action) {
            Ok(o) => o,
            Err(e) => {
                self.active = false;
                self.episode.clear();
                return Err(e);
            }
        };
        let r_i = match &mut self.novelty {
            Some(n) => n.reward(&outcome.observation.embedding)?,
            None => 0.0,
        };
        let prev = self.episode.last();
        let transition = Transition {
            prev_extrinsic_reward: prev.map_or(0.0, |t| t.extrinsic_reward),
            prev_intrinsic_reward: prev.map_or(0.0, |t| t.intrinsic_reward),
            prev_action: prev.map_or(0, |t| t.action),
            prev_recurrent: RecurrentState,
            observation: x,
            action,
            recurrent: RecurrentState,
            behavior_prob: mu,
            family_index: self.arm,
            extrinsic_reward: outcome.reward,
            intrinsic_reward: r_i,
            next_observation: outcome.observation.state,
            terminal: outcome.terminal,
        };
        self.episode.push(transition);
        self.extrinsic_return += outcome.reward;
        self.intrinsic_return += r_i;
        self.frames += 1;
        self.steps_since_refresh += 1;
        self.observation = outcome.observation;

        let (h, stride) = (self.config.trace_length, self.config.trace_length - self.config.replay_period);
        let mut result = ActorStep::default();
        while self.next_start + h <= self.episode.len() {
            result.sequences.push(self.emit(spec, self.next_start, self.next_start + h)?);
            self.covered_end = self.next_start + h;
            self.next_start += stride;
        }
        if outcome.done {
            if self.episode.len() > self.covered_end {
                result.sequences.push(self.emit(spec, self.next_start, self.episode.len())?);
            }
            self.bandit.update(self.arm, self.extrinsic_return)?;
            result.finished = Some(EpisodeSummary {
                arm: self.arm,
                extrinsic_return: self.extrinsic_return,
                intrinsic_return: self.intrinsic_return,
                length: self.episode.len(),
            });
            self.active = false;
        }
        Ok(result)
    }

    /// Runs until the current (or next) episode ends.
    pub fn run_episode(&mut self, spec: &AgentSpec) -> Result<(Vec<TransitionSequence>, EpisodeSummary)> {
        let mut sequences = Vec::new();
        loop {
            let step = self.step(spec)?;
            sequences.extend(step.sequences);
            if let Some(summary) = step.finished {
                return Ok((sequences, summary));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_ladder() {
        assert_eq!(actor_epsilon(0, 8, 0.4, 8.0).unwrap(), 0.4);
        assert!((actor_epsilon(7, 8, 0.4, 8.0).unwrap() - 0.4f64.powi(9)).abs() < 1e-18);
        assert!((actor_epsilon(2, 5, 0.4, 8.0).unwrap() - 0.4f64.powi(5)).abs() < 1e-15);
        assert_eq!(actor_epsilon(0, 1, 0.4, 8.0).unwrap(), 0.4);
        assert!(actor_epsilon(3, 3, 0.4, 8.0).is_err());
    }
}
