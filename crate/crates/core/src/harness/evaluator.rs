//! Evaluator: alternates blocks of bandit-training episodes with blocks of
//! greedy-arm evaluation episodes. Its experience never reaches replay.

use super::agent::{AgentSpec, FamilyTables};
use crate::bandit::BanditState;
use crate::env::{Environment, Observation};
use crate::error::{Error, Result};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalPhase {
    /// Arm from the evaluator bandit, which is updated with the return.
    Training,
    /// Arm fixed to the bandit's greedy arm.
    Evaluation,
}

impl EvalPhase {
    pub fn letter(self) -> char {
        match self {
            EvalPhase::Training => 'T',
            EvalPhase::Evaluation => 'E',
        }
    }
}

/// Phase of the `episode`-th evaluator episode (0-based).
pub fn phase_for(episode: u64, block: usize) -> EvalPhase {
    if (episode / block.max(1) as u64).is_multiple_of(2) {
        EvalPhase::Training
    } else {
        EvalPhase::Evaluation
    }
}

/// One completed greedy-arm evaluation block.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub block_index: u64,
    pub arm: usize,
    pub episode_returns: Vec<f64>,
    pub mean_return: f64,
}

pub struct Evaluator {
    env: Box<dyn Environment>,
    bandit: BanditState,
    rng: ChaCha8Rng,
    epsilon: f64,
    block: usize,
    tables: Arc<FamilyTables>,
    episodes: u64,
    frames: u64,
    active: bool,
    phase: EvalPhase,
    arm: usize,
    observation: Observation,
    episode_return: f64,
    block_returns: Vec<f64>,
    buf: Vec<f64>,
}

impl Evaluator {
    pub fn new(
        env: Box<dyn Environment>,
        bandit: BanditState,
        rng: ChaCha8Rng,
        epsilon: f64,
        block: usize,
        tables: Arc<FamilyTables>,
    ) -> Result<Self> {
        if block == 0 {
            return Err(Error::Config("evaluator block must be positive".into()));
        }
        if bandit.num_arms() != tables.num_policies() {
            return Err(Error::Dimension(format!(
                "evaluator bandit has {} arms for {} family members",
                bandit.num_arms(),
                tables.num_policies()
            )));
        }
        Ok(Self {
            env,
            bandit,
            rng,
            epsilon,
            block,
            tables,
            episodes: 0,
            frames: 0,
            active: false,
            phase: EvalPhase::Training,
            arm: 0,
            observation: Observation { state: 0, embedding: Vec::new() },
            episode_return: 0.0,
            block_returns: Vec::new(),
            buf: Vec::new(),
        })
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn bandit(&self) -> &BanditState {
        &self.bandit
    }

    /// True between episodes at a block boundary, when tables are refreshed.
    pub fn needs_refresh(&self) -> bool {
        !self.active && self.episodes.is_multiple_of(self.block as u64)
    }

    pub fn refresh(&mut self, tables: Arc<FamilyTables>) {
        self.tables = tables;
    }

    fn start_episode(&mut self) {
        self.phase = phase_for(self.episodes, self.block);
        self.arm = match self.phase {
            EvalPhase::Training => self.bandit.select_arm(&mut self.rng),
            EvalPhase::Evaluation => self.bandit.greedy_arm(),
        };
        self.observation = self.env.reset();
        self.episode_return = 0.0;
        self.active = true;
    }

    /// One environment step; returns a record when an evaluation block completes.
    pub fn step(&mut self, spec: &AgentSpec) -> Result<Option<EvalRecord>> {
        if !self.active {
            self.start_episode();
        }
        let (action, _) =
            spec.select_action(&self.tables, self.arm, self.observation.state, self.epsilon, &mut self.rng, &mut self.buf);
        let outcome = match self.env.step(action) {
            Ok(o) => o,
            Err(e) => {
                self.active = false;
                return Err(e);
            }
        };
        self.frames += 1;
        self.episode_return += outcome.reward;
        self.observation = outcome.observation;
        if !outcome.done {
            return Ok(None);
        }
        self.active = false;
        self.episodes += 1;
        match self.phase {
            EvalPhase::Training => {
                self.bandit.update(self.arm, self.episode_return)?;
                Ok(None)
            }
            EvalPhase::Evaluation => {
                self.block_returns.push(self.episode_return);
                if self.block_returns.len() < self.block {
                    return Ok(None);
                }
                let returns = std::mem::take(&mut self.block_returns);
                let mean_return = returns.iter().sum::<f64>() / returns.len() as f64;
                Ok(Some(EvalRecord {
                    block_index: self.episodes / self.block as u64 - 1,
                    arm: self.arm,
                    episode_returns: returns,
                    mean_return,
                }))
            }
        }
    }

    /// Runs `episodes` whole episodes against fixed tables and returns the
    /// records of every evaluation block completed along the way.
    pub fn run_episodes(&mut self, spec: &AgentSpec, episodes: u64) -> Result<Vec<EvalRecord>> {
        let target = self.episodes + episodes;
        let mut records = Vec::new();
        while self.episodes < target {
            if let Some(r) = self.step(spec)? {
                records.push(r);
            }
        }
        Ok(records)
    }
}

/// Runs `episodes` episodes of family member `arm` with `epsilon`-greedy actions
/// and returns each undiscounted extrinsic return plus the steps taken.
pub fn evaluate_arm(
    env: &mut dyn Environment,
    spec: &AgentSpec,
    tables: &FamilyTables,
    arm: usize,
    epsilon: f64,
    episodes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, u64)> {
    if arm >= tables.num_policies() {
        return Err(Error::OutOfRange { index: arm, limit: tables.num_policies() });
    }
    let mut returns = Vec::with_capacity(episodes);
    let mut steps = 0;
    let mut buf = Vec::new();
    for _ in 0..episodes {
        let mut obs = env.reset();
        let mut total = 0.0;
        loop {
            let (action, _) = spec.select_action(tables, arm, obs.state, epsilon, rng, &mut buf);
            let out = env.step(action)?;
            steps += 1;
            total += out.reward;
            obs = out.observation;
            if out.done {
                break;
            }
        }
        returns.push(total);
    }
    Ok((returns, steps))
}
