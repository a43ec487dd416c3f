use super::{Environment, Observation, StepOutcome};
use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random finite MDPs for oracle suites.
///
/// Rewards are non-negative; `reward_sparsity` is the probability that an
/// extrinsic reward entry is zero.
#[derive(Debug, Clone)]
pub struct MdpGenerator {
    pub num_states: usize,
    pub num_actions: usize,
    pub reward_sparsity: f64,
    pub seed: u64,
    pub deterministic: bool,
    pub zero_rewards: bool,
}

impl MdpGenerator {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            reward_sparsity: 0.0,
            seed: 0,
            deterministic: false,
            zero_rewards: false,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn reward_sparsity(mut self, sparsity: f64) -> Self {
        self.reward_sparsity = sparsity;
        self
    }

    /// Every `(x, a)` has exactly one successor.
    pub fn deterministic(mut self) -> Self {
        self.deterministic = true;
        self
    }

    pub fn zero_rewards(mut self) -> Self {
        self.zero_rewards = true;
        self
    }

    pub fn generate(&self) -> Result<TabularMdp> {
        if !(0.0..=1.0).contains(&self.reward_sparsity) {
            return Err(Error::Config(format!("reward sparsity {} outside [0, 1]", self.reward_sparsity)));
        }
        let (ns, na) = (self.num_states, self.num_actions);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut successors = Vec::with_capacity(ns * na);
        for _ in 0..ns * na {
            if self.deterministic {
                successors.push(vec![(rng.gen_range(0..ns), 1.0)]);
                continue;
            }
            let weights: Vec<f64> = (0..ns).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = weights.iter().sum();
            successors.push(weights.iter().enumerate().map(|(y, w)| (y, w / total)).collect());
        }
        let mut extrinsic = Vec::with_capacity(ns * na);
        let mut intrinsic = Vec::with_capacity(ns * na);
        for _ in 0..ns * na {
            let keep = rng.gen_range(0.0..1.0) >= self.reward_sparsity;
            let re = rng.gen_range(0.0..1.0);
            let ri = rng.gen_range(0.0..1.0);
            if self.zero_rewards {
                extrinsic.push(0.0);
                intrinsic.push(0.0);
            } else {
                extrinsic.push(if keep { re } else { 0.0 });
                intrinsic.push(ri);
            }
        }
        TabularMdp::from_sparse(ns, na, successors, extrinsic, Some(intrinsic), vec![false; ns])
    }
}

/// Samples episodes from a [`TabularMdp`]; the embedding is a one-hot state code.
#[derive(Debug, Clone)]
pub struct RandomMdpEnv {
    mdp: TabularMdp,
    max_steps: usize,
    state: usize,
    steps: usize,
    done: bool,
    rng: ChaCha8Rng,
}

impl RandomMdpEnv {
    pub fn new(mdp: TabularMdp, max_steps: usize, seed: u64) -> Result<Self> {
        if max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        if (0..mdp.num_states()).all(|x| mdp.is_terminal(x)) {
            return Err(Error::Config("the MDP has no non-terminal start state".into()));
        }
        Ok(Self {
            mdp,
            max_steps,
            state: 0,
            steps: 0,
            done: true,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    fn observation(&self) -> Observation {
        let mut embedding = vec![0.0; self.mdp.num_states()];
        embedding[self.state] = 1.0;
        Observation { state: self.state, embedding }
    }
}

impl Environment for RandomMdpEnv {
    fn num_states(&self) -> usize {
        self.mdp.num_states()
    }

    fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }

    fn reset(&mut self) -> Observation {
        loop {
            let x = self.rng.gen_range(0..self.mdp.num_states());
            if !self.mdp.is_terminal(x) {
                self.state = x;
                break;
            }
        }
        self.steps = 0;
        self.done = false;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Protocol("step called on a finished episode; reset first".into()));
        }
        if action >= self.mdp.num_actions() {
            return Err(Error::OutOfRange { index: action, limit: self.mdp.num_actions() });
        }
        let reward = self.mdp.reward(self.state, action, crate::mdp::RewardSelect::Extrinsic);
        let u: f64 = self.rng.gen_range(0.0..1.0);
        let succ = self.mdp.successors(self.state, action);
        let mut acc = 0.0;
        let mut next = succ.last().map(|&(y, _)| y).unwrap_or(self.state);
        for &(y, p) in succ {
            acc += p;
            if u < acc {
                next = y;
                break;
            }
        }
        self.state = next;
        self.steps += 1;
        let terminal = self.mdp.is_terminal(next);
        self.done = terminal || self.steps >= self.max_steps;
        Ok(StepOutcome { observation: self.observation(), reward, done: self.done, terminal })
    }
}
