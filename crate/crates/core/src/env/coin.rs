//! The "random coin" room: an agent and a coin dropped uniformly at random into
//! an empty grid; stepping on the coin pays 1 and ends the episode.

use super::{Environment, Observation, StepOutcome};
use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomCoinConfig {
    pub width: usize,
    pub height: usize,
    pub max_steps: usize,
}

impl Default for RandomCoinConfig {
    fn default() -> Self {
        Self { width: 15, height: 15, max_steps: 200 }
    }
}

impl RandomCoinConfig {
    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    /// Joint `(agent, coin)` index used by the value tables.
    pub fn state_index(&self, agent: (usize, usize), coin: (usize, usize)) -> usize {
        self.cell(agent) * self.cells() + self.cell(coin)
    }

    pub fn cell(&self, pos: (usize, usize)) -> usize {
        pos.1 * self.width + pos.0
    }

    pub fn position(&self, cell: usize) -> (usize, usize) {
        (cell % self.width, cell / self.width)
    }

    /// Walls clamp movement.
    pub fn moved(&self, pos: (usize, usize), action: CoinAction) -> (usize, usize) {
        let (x, y) = pos;
        match action {
            CoinAction::Up => (x, y.saturating_sub(1)),
            CoinAction::Down => (x, (y + 1).min(self.height - 1)),
            CoinAction::Left => (x.saturating_sub(1), y),
            CoinAction::Right => ((x + 1).min(self.width - 1), y),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells() < 2 || self.max_steps == 0 {
            return Err(Error::Config(format!("degenerate coin room {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoinAction {
    Up,
    Down,
    Left,
    Right,
}

impl CoinAction {
    pub const ALL: [CoinAction; 4] = [CoinAction::Up, CoinAction::Down, CoinAction::Left, CoinAction::Right];

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL.get(index).copied().ok_or(Error::OutOfRange { index, limit: 4 })
    }
}

#[derive(Debug, Clone)]
pub struct RandomCoinEnv {
    config: RandomCoinConfig,
    agent: (usize, usize),
    coin: (usize, usize),
    steps: usize,
    done: bool,
    rng: ChaCha8Rng,
}

impl RandomCoinEnv {
    pub fn new(config: RandomCoinConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            agent: (0, 0),
            coin: (0, 0),
            steps: 0,
            done: true,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn config(&self) -> &RandomCoinConfig {
        &self.config
    }

    pub fn agent(&self) -> (usize, usize) {
        self.agent
    }

    pub fn coin(&self) -> (usize, usize) {
        self.coin
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Fresh uniform placements with the agent off the coin.
    pub fn reset_with(&mut self, rng: &mut impl Rng) -> Observation {
        let cells = self.config.cells();
        let agent = rng.gen_range(0..cells);
        // uniform over the remaining cells
        let mut coin = rng.gen_range(0..cells - 1);
        if coin >= agent {
            coin += 1;
        }
        self.agent = self.config.position(agent);
        self.coin = self.config.position(coin);
        self.steps = 0;
        self.done = false;
        self.observation()
    }

    /// Places agent and coin explicitly.
    pub fn reset_to(&mut self, agent: (usize, usize), coin: (usize, usize)) -> Result<Observation> {
        let in_bounds = |p: (usize, usize)| p.0 < self.config.width && p.1 < self.config.height;
        if !in_bounds(agent) || !in_bounds(coin) || agent == coin {
            return Err(Error::Domain(format!("invalid placement agent={agent:?} coin={coin:?}")));
        }
        self.agent = agent;
        self.coin = coin;
        self.steps = 0;
        self.done = false;
        Ok(self.observation())
    }

    pub fn observation(&self) -> Observation {
        Observation {
            state: self.config.state_index(self.agent, self.coin),
            embedding: vec![self.agent.0 as f64, self.agent.1 as f64],
        }
    }
}

impl Environment for RandomCoinEnv {
    fn num_states(&self) -> usize {
        self.config.cells() * self.config.cells()
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn reset(&mut self) -> Observation {
        let mut rng = self.rng.clone();
        let obs = self.reset_with(&mut rng);
        self.rng = rng;
        obs
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Protocol("step called on a finished episode; reset first".into()));
        }
        let action = CoinAction::from_index(action)?;
        self.agent = self.config.moved(self.agent, action);
        self.steps += 1;
        let collected = self.agent == self.coin;
        self.done = collected || self.steps >= self.config.max_steps;
        Ok(StepOutcome {
            observation: self.observation(),
            reward: if collected { 1.0 } else { 0.0 },
            done: self.done,
            terminal: collected,
        })
    }
}

/// Exact tabular model over `(agent, coin)` pairs. States with the agent on the
/// coin are absorbing; the step limit is not part of the model.
pub fn coin_to_mdp(config: &RandomCoinConfig) -> Result<TabularMdp> {
    config.validate()?;
    let cells = config.cells();
    let num_states = cells * cells;
    let mut successors = Vec::with_capacity(num_states * 4);
    let mut reward = Vec::with_capacity(num_states * 4);
    let mut terminal = Vec::with_capacity(num_states);
    for agent_cell in 0..cells {
        for coin_cell in 0..cells {
            let state = agent_cell * cells + coin_cell;
            let absorbing = agent_cell == coin_cell;
            terminal.push(absorbing);
            for action in CoinAction::ALL {
                if absorbing {
                    successors.push(vec![(state, 1.0)]);
                    reward.push(0.0);
                    continue;
                }
                let next = config.cell(config.moved(config.position(agent_cell), action));
                successors.push(vec![(next * cells + coin_cell, 1.0)]);
                reward.push(if next == coin_cell { 1.0 } else { 0.0 });
            }
        }
    }
    TabularMdp::from_sparse(num_states, 4, successors, reward, None, terminal)
}
