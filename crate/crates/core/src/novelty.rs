//! Episodic and life-long novelty, combined into the clipped intrinsic reward
//! `r^i = r_episodic * min(max(alpha, 1), L)`.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{HashMap, VecDeque};

/// Constant added under the square root of the episodic score.
pub const EPISODIC_CONSTANT: f64 = 1e-3;

/// k-nearest-neighbour episodic memory over embeddings, emptied at every
/// episode boundary. The running mean of squared neighbour distances is kept
/// across episodes.
#[derive(Debug, Clone)]
pub struct EpisodicMemory {
    embeddings: VecDeque<Vec<f64>>,
    capacity: usize,
    k_neighbors: usize,
    kernel_epsilon: f64,
    distance_sum: f64,
    distance_count: u64,
    scratch: Vec<f64>,
}

impl EpisodicMemory {
    pub const DEFAULT_CAPACITY: usize = 30_000;
    pub const DEFAULT_NEIGHBORS: usize = 10;
    pub const DEFAULT_KERNEL_EPSILON: f64 = 1e-4;

    pub fn new(capacity: usize, k_neighbors: usize, kernel_epsilon: f64) -> Result<Self> {
        if capacity == 0 || k_neighbors == 0 {
            return Err(Error::Config("episodic memory needs positive capacity and neighbour count".into()));
        }
        if !(kernel_epsilon > 0.0) {
            return Err(Error::Config(format!("kernel epsilon must be positive, got {kernel_epsilon}")));
        }
        Ok(Self {
            embeddings: VecDeque::new(),
            capacity,
            k_neighbors,
            kernel_epsilon,
            distance_sum: 0.0,
            distance_count: 0,
            scratch: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Running mean of squared k-NN distances seen so far.
    pub fn mean_squared_distance(&self) -> f64 {
        if self.distance_count == 0 {
            0.0
        } else {
            self.distance_sum / self.distance_count as f64
        }
    }

    /// Drops the stored embeddings; distance statistics survive.
    pub fn reset(&mut self) {
        self.embeddings.clear();
    }

    /// Scores `embedding` against the memory, then stores it.
    ///
    /// Empty memory scores 1. Otherwise the score is `1 / sqrt(sum_i K(d_i) + c)`
    /// over the k nearest stored embeddings with
    /// `K(d) = eps / (d^2 / d_m^2 + eps)` and `d_m^2` the running mean.
    pub fn novelty(&mut self, embedding: &[f64]) -> f64 {
        let score = if self.embeddings.is_empty() {
            1.0
        } else {
            self.scratch.clear();
            self.scratch.extend(self.embeddings.iter().map(|e| squared_distance(e, embedding)));
            let k = self.k_neighbors.min(self.scratch.len());
            if k < self.scratch.len() {
                self.scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
            }
            let nearest = &self.scratch[..k];
            self.distance_sum += nearest.iter().sum::<f64>();
            self.distance_count += k as u64;
            let mean = self.mean_squared_distance();
            let eps = self.kernel_epsilon;
            let kernel_sum: f64 = nearest
                .iter()
                .map(|&d| {
                    let normalized = if mean > 0.0 { d / mean } else { 0.0 };
                    eps / (normalized + eps)
                })
                .sum();
            1.0 / (kernel_sum + EPISODIC_CONSTANT).sqrt()
        };
        if self.embeddings.len() == self.capacity {
            self.embeddings.pop_front();
        }
        self.embeddings.push_back(embedding.to_vec());
        score
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Free-function form of [`EpisodicMemory::novelty`].
pub fn episodic_novelty(embedding: &[f64], mem: &mut EpisodicMemory) -> f64 {
    mem.novelty(embedding)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LifelongBackendKind {
    #[default]
    CountBased,
    RandomDistillation,
}

impl std::str::FromStr for LifelongBackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "count" | "count_based" => Ok(Self::CountBased),
            "rnd" | "random_distillation" => Ok(Self::RandomDistillation),
            other => Err(Error::Config(format!("unknown lifelong backend `{other}`"))),
        }
    }
}

/// Fixed random linear target with a linear predictor fitted online by
/// normalized least mean squares.
#[derive(Debug, Clone)]
pub struct RandomDistillation {
    input_dim: usize,
    output_dim: usize,
    target: Vec<f64>,
    predictor: Vec<f64>,
    learning_rate: f64,
    count: u64,
    mean: f64,
    m2: f64,
}

impl RandomDistillation {
    pub const DEFAULT_OUTPUT_DIM: usize = 16;
    pub const DEFAULT_LEARNING_RATE: f64 = 0.5;

    pub fn new(input_dim: usize, output_dim: usize, learning_rate: f64, seed: u64) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::Config("distillation needs positive dimensions".into()));
        }
        if !(learning_rate > 0.0 && learning_rate < 2.0) {
            return Err(Error::Config(format!("distillation learning rate must lie in (0, 2), got {learning_rate}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let target = (0..input_dim * output_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Ok(Self {
            input_dim,
            output_dim,
            target,
            predictor: vec![0.0; input_dim * output_dim],
            learning_rate,
            count: 0,
            mean: 0.0,
            m2: 0.0,
        })
    }

    fn project(weights: &[f64], x: &[f64], row: usize) -> f64 {
        weights[row * x.len()..(row + 1) * x.len()].iter().zip(x).map(|(w, v)| w * v).sum()
    }

    /// Squared prediction error for `x` without training.
    pub fn error(&self, x: &[f64]) -> f64 {
        (0..self.output_dim)
            .map(|r| {
                let d = Self::project(&self.predictor, x, r) - Self::project(&self.target, x, r);
                d * d
            })
            .sum()
    }

    /// Scores `x`, folds its error into the running statistics and takes one
    /// predictor step.
    pub fn alpha(&mut self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension(format!("embedding has {} entries, expected {}", x.len(), self.input_dim)));
        }
        let err = self.error(x);
        self.count += 1;
        let delta = err - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (err - self.mean);
        let std = if self.count > 1 { (self.m2 / self.count as f64).sqrt() } else { 0.0 };
        let alpha = if std > 0.0 { (1.0 + (err - self.mean) / std).max(0.0) } else { 1.0 };

        let step = self.learning_rate / (1.0 + x.iter().map(|v| v * v).sum::<f64>());
        for r in 0..self.output_dim {
            let residual = Self::project(&self.target, x, r) - Self::project(&self.predictor, x, r);
            for (w, v) in self.predictor[r * self.input_dim..(r + 1) * self.input_dim].iter_mut().zip(x) {
                *w += step * residual * v;
            }
        }
        Ok(alpha)
    }
}

/// Slowly decaying life-long novelty multiplier.
#[derive(Debug, Clone)]
pub enum LifelongModulator {
    /// `alpha = 1 + 1/sqrt(n)` with `n` the visit count of the exact embedding.
    CountBased(HashMap<Vec<u64>, u64>),
    RandomDistillation(RandomDistillation),
}

impl LifelongModulator {
    pub fn count_based() -> Self {
        LifelongModulator::CountBased(HashMap::new())
    }

    pub fn random_distillation(input_dim: usize, seed: u64) -> Result<Self> {
        Ok(LifelongModulator::RandomDistillation(RandomDistillation::new(
            input_dim,
            RandomDistillation::DEFAULT_OUTPUT_DIM,
            RandomDistillation::DEFAULT_LEARNING_RATE,
            seed,
        )?))
    }

    pub fn new(kind: LifelongBackendKind, input_dim: usize, seed: u64) -> Result<Self> {
        match kind {
            LifelongBackendKind::CountBased => Ok(Self::count_based()),
            LifelongBackendKind::RandomDistillation => Self::random_distillation(input_dim, seed),
        }
    }

    /// Visits `embedding` and returns its multiplier.
    pub fn alpha(&mut self, embedding: &[f64]) -> Result<f64> {
        match self {
            LifelongModulator::CountBased(counts) => {
                let key: Vec<u64> = embedding.iter().map(|v| v.to_bits()).collect();
                let n = counts.entry(key).or_insert(0);
                *n += 1;
                Ok(1.0 + 1.0 / (*n as f64).sqrt())
            }
            LifelongModulator::RandomDistillation(rnd) => rnd.alpha(embedding),
        }
    }
}

/// Free-function form of [`LifelongModulator::alpha`].
pub fn lifelong_alpha(embedding: &[f64], modulator: &mut LifelongModulator) -> Result<f64> {
    modulator.alpha(embedding)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntrinsicRewardConfig {
    /// Upper clip `L` on the life-long multiplier.
    pub clip_max: f64,
    /// Largest mixing weight in the family.
    pub beta_scale: f64,
}

impl Default for IntrinsicRewardConfig {
    fn default() -> Self {
        Self { clip_max: 5.0, beta_scale: 0.3 }
    }
}

impl IntrinsicRewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_max >= 1.0) {
            return Err(Error::Config(format!("clip L must be at least 1, got {}", self.clip_max)));
        }
        if !(self.beta_scale >= 0.0) {
            return Err(Error::Config(format!("intrinsic reward scale must be non-negative, got {}", self.beta_scale)));
        }
        Ok(())
    }
}

/// `r_episodic * min(max(alpha, 1), L)`
pub fn intrinsic_reward(r_episodic: f64, alpha: f64, cfg: &IntrinsicRewardConfig) -> f64 {
    r_episodic * alpha.max(1.0).min(cfg.clip_max)
}

/// Per-actor novelty state: one episodic memory and one life-long modulator.
#[derive(Debug, Clone)]
pub struct NoveltyModule {
    pub episodic: EpisodicMemory,
    pub lifelong: LifelongModulator,
    pub config: IntrinsicRewardConfig,
}

impl NoveltyModule {
    pub fn new(episodic: EpisodicMemory, lifelong: LifelongModulator, config: IntrinsicRewardConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { episodic, lifelong, config })
    }

    /// Intrinsic reward for arriving at `embedding`.
    pub fn reward(&mut self, embedding: &[f64]) -> Result<f64> {
        let r_episodic = self.episodic.novelty(embedding);
        let alpha = self.lifelong.alpha(embedding)?;
        Ok(intrinsic_reward(r_episodic, alpha, &self.config))
    }

    /// Episode boundary: the episodic memory empties, the life-long state stays.
    pub fn reset_episode(&mut self) {
        self.episodic.reset();
    }
}
