//! Non-stationary bandits used as meta-controllers over the policy family.
//!
//! The controller that drives actors and the evaluator is a sliding-window UCB
//! with forced round-robin start, `eps`-uniform exploration and bonus
//! `beta * sqrt(1 / N(a, tau))`. Classic UCB1 and a log-bonus sliding-window UCB
//! exist for comparison runs.

use crate::error::{Error, Result};
use rand::Rng;
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BanditAlgorithm {
    /// Sliding window, `eps`-uniform draws, `beta sqrt(1/N)` bonus.
    #[default]
    Simplified,
    /// Whole-history UCB1 with `beta sqrt(2 ln k / N)`.
    Ucb1,
    /// Sliding window with `beta sqrt(ln min(k, tau) / N)`.
    SlidingWindow,
}

impl std::str::FromStr for BanditAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simplified" => Ok(Self::Simplified),
            "ucb1" => Ok(Self::Ucb1),
            "sw-ucb" | "sw_ucb" => Ok(Self::SlidingWindow),
            other => Err(Error::Config(format!("unknown bandit algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BanditConfig {
    pub num_arms: usize,
    pub window: usize,
    pub epsilon: f64,
    pub bonus_beta: f64,
    pub algorithm: BanditAlgorithm,
}

impl BanditConfig {
    pub const ACTOR_WINDOW: usize = 160;
    pub const ACTOR_EPSILON: f64 = 0.5;
    pub const EVALUATOR_WINDOW: usize = 3600;
    pub const EVALUATOR_EPSILON: f64 = 0.01;
    pub const DEFAULT_BONUS: f64 = 1.0;

    pub fn actor(num_arms: usize) -> Self {
        Self::new(num_arms, Self::ACTOR_WINDOW, Self::ACTOR_EPSILON)
    }

    pub fn evaluator(num_arms: usize) -> Self {
        Self::new(num_arms, Self::EVALUATOR_WINDOW, Self::EVALUATOR_EPSILON)
    }

    pub fn new(num_arms: usize, window: usize, epsilon: f64) -> Self {
        Self { num_arms, window, epsilon, bonus_beta: Self::DEFAULT_BONUS, algorithm: BanditAlgorithm::Simplified }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_arms == 0 {
            return Err(Error::Config("bandit needs at least one arm".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("bandit window must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("bandit epsilon {} outside [0, 1]", self.epsilon)));
        }
        if !(self.bonus_beta >= 0.0) {
            return Err(Error::Config(format!("bandit bonus {} must be non-negative", self.bonus_beta)));
        }
        Ok(())
    }
}

/// Bandit history and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditState {
    config: BanditConfig,
    history: VecDeque<(usize, f64)>,
    /// Whole-history statistics for UCB1 only.
    totals: Vec<(u64, f64)>,
    steps: u64,
}

/// Per-arm pull counts and empirical means over the window. Means of arms
/// with no pulls are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowStats {
    pub counts: Vec<usize>,
    pub means: Vec<f64>,
}

impl BanditState {
    pub fn new(config: BanditConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, history: VecDeque::with_capacity(config.window.min(1 << 16)), totals: vec![(0, 0.0); config.num_arms], steps: 0 })
    }

    pub fn config(&self) -> &BanditConfig {
        &self.config
    }

    pub fn num_arms(&self) -> usize {
        self.config.num_arms
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn history(&self) -> impl Iterator<Item = &(usize, f64)> {
        self.history.iter()
    }

    pub fn window_stats(&self) -> WindowStats {
        stats_of(self.history.iter(), self.config.num_arms)
    }

    /// Score vector used by the UCB branch; never-pulled arms score `+inf`.
    pub fn scores(&self) -> Vec<f64> {
        let n = self.config.num_arms;
        let beta = self.config.bonus_beta;
        match self.config.algorithm {
            BanditAlgorithm::Ucb1 => {
                let ln_k = (self.steps.max(1) as f64).ln();
                self.totals
                    .iter()
                    .map(|&(c, s)| if c == 0 { f64::INFINITY } else { s / c as f64 + beta * (2.0 * ln_k / c as f64).sqrt() })
                    .collect()
            }
            algorithm => {
                let stats = self.window_stats();
                let ln_w = ((self.steps.min(self.config.window as u64)).max(1) as f64).ln();
                (0..n)
                    .map(|a| {
                        let c = stats.counts[a];
                        if c == 0 {
                            return f64::INFINITY;
                        }
                        let bonus = match algorithm {
                            BanditAlgorithm::SlidingWindow => (ln_w / c as f64).sqrt(),
                            _ => (1.0 / c as f64).sqrt(),
                        };
                        stats.means[a] + beta * bonus
                    })
                    .collect()
            }
        }
    }

    /// Arm for step `k`: arm `k` while `k < N`, then the rule of the configured algorithm.
    /// Arms with no pulls in the window are taken before any score comparison.
    pub fn select_arm(&self, rng: &mut impl Rng) -> usize {
        let n = self.config.num_arms;
        if self.steps < n as u64 {
            return self.steps as usize;
        }
        if self.config.algorithm == BanditAlgorithm::Simplified {
            let u: f64 = rng.gen();
            if u < self.config.epsilon {
                return rng.gen_range(0..n);
            }
        }
        first_max(&self.scores())
    }

    /// Records `(arm, reward)` and slides the window.
    pub fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        if arm >= self.config.num_arms {
            return Err(Error::OutOfRange { index: arm, limit: self.config.num_arms });
        }
        if !reward.is_finite() {
            return Err(Error::Domain(format!("bandit reward must be finite, got {reward}")));
        }
        self.history.push_back((arm, reward));
        if self.history.len() > self.config.window {
            self.history.pop_front();
        }
        self.totals[arm].0 += 1;
        self.totals[arm].1 += reward;
        self.steps += 1;
        Ok(())
    }

    /// Arm with the best windowed mean among arms pulled inside the window;
    /// arm 0 when the window is empty.
    pub fn greedy_arm(&self) -> usize {
        let stats = self.window_stats();
        let mut best: Option<(usize, f64)> = None;
        for a in 0..self.config.num_arms {
            if stats.counts[a] == 0 {
                continue;
            }
            if best.is_none_or(|(_, m)| stats.means[a] > m) {
                best = Some((a, stats.means[a]));
            }
        }
        best.map_or(0, |(a, _)| a)
    }
}

fn stats_of<'a>(entries: impl Iterator<Item = &'a (usize, f64)>, num_arms: usize) -> WindowStats {
    let mut counts = vec![0usize; num_arms];
    let mut sums = vec![0.0; num_arms];
    for &(a, r) in entries {
        counts[a] += 1;
        sums[a] += r;
    }
    let means = counts.iter().zip(&sums).map(|(&c, &s)| if c == 0 { 0.0 } else { s / c as f64 }).collect();
    WindowStats { counts, means }
}

/// Index of the largest value; ties and infinities go to the lowest index.
fn first_max(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One row of a bandit simulation trace.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditTraceRow {
    pub step: u64,
    pub arm: usize,
    pub reward: f64,
    pub scores: Vec<f64>,
}

/// Bernoulli arms whose means may change at given steps.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliSchedule {
    /// `(first step, means)` segments in increasing step order.
    pub segments: Vec<(u64, Vec<f64>)>,
}

impl BernoulliSchedule {
    pub fn stationary(means: Vec<f64>) -> Self {
        Self { segments: vec![(0, means)] }
    }

    /// Means of the two arms swap at `at`.
    pub fn swapping(first: f64, second: f64, at: u64) -> Self {
        Self { segments: vec![(0, vec![first, second]), (at, vec![second, first])] }
    }

    pub fn means_at(&self, step: u64) -> &[f64] {
        let mut current = &self.segments[0].1;
        for (start, means) in &self.segments {
            if *start <= step {
                current = means;
            }
        }
        current
    }

    pub fn best_arm_at(&self, step: u64) -> usize {
        first_max(self.means_at(step))
    }
}

/// Plays `steps` rounds against `schedule`, returning the full trace.
pub fn simulate(state: &mut BanditState, schedule: &BernoulliSchedule, steps: u64, rng: &mut impl Rng) -> Result<Vec<BanditTraceRow>> {
    let mut trace = Vec::with_capacity(steps as usize);
    for step in 0..steps {
        let means = schedule.means_at(step);
        if means.len() != state.num_arms() {
            return Err(Error::Dimension(format!("schedule has {} arms, bandit has {}", means.len(), state.num_arms())));
        }
        let scores = state.scores();
        let arm = state.select_arm(rng);
        let reward = if rng.gen::<f64>() < means[arm] { 1.0 } else { 0.0 };
        state.update(arm, reward)?;
        trace.push(BanditTraceRow { step, arm, reward, scores });
    }
    Ok(trace)
}

/// Fraction of steps in `[from, to)` where the trace played the best arm.
pub fn best_arm_frequency(trace: &[BanditTraceRow], schedule: &BernoulliSchedule, from: u64, to: u64) -> f64 {
    let window: Vec<_> = trace.iter().filter(|r| r.step >= from && r.step < to).collect();
    if window.is_empty() {
        return 0.0;
    }
    window.iter().filter(|r| r.arm == schedule.best_arm_at(r.step)).count() as f64 / window.len() as f64
}

/// `step,arm,reward,score_0,...` rows; infinite scores print as `inf`.
pub fn trace_to_csv(trace: &[BanditTraceRow]) -> String {
    let arms = trace.first().map_or(0, |r| r.scores.len());
    let mut out = String::from("step,arm,reward");
    for a in 0..arms {
        out.push_str(&format!(",score_{a}"));
    }
    out.push('\n');
    for r in trace {
        out.push_str(&format!("{},{},{}", r.step, r.arm, r.reward));
        for s in &r.scores {
            out.push_str(&format!(",{s}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trace_csv_layout() {
        let trace = vec![BanditTraceRow { step: 0, arm: 1, reward: 1.0, scores: vec![f64::INFINITY, 0.5] }];
        assert_eq!(trace_to_csv(&trace), "step,arm,reward,score_0,score_1\n0,1,1,inf,0.5\n");
    }
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bandit(n: usize, window: usize, eps: f64) -> BanditState {
        BanditState::new(BanditConfig::new(n, window, eps)).unwrap()
    }

    #[test]
    fn round_robin_start() {
        let mut b = bandit(4, 10, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for k in 0..4 {
            assert_eq!(b.select_arm(&mut rng), k);
            b.update(k, 0.0).unwrap();
        }
    }

    #[test]
    fn dominant_mean_wins() {
        let mut b = bandit(3, 100, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..3 {
            for a in 0..3 {
                b.update(a, if a == 2 { 1.0 } else { 0.0 }).unwrap();
            }
        }
        assert_eq!(b.select_arm(&mut rng), 2);
        assert_eq!(b.greedy_arm(), 2);
    }

    #[test]
    fn window_trace() {
        let mut b = bandit(2, 2, 0.0);
        b.update(0, 1.0).unwrap();
        b.update(1, 0.0).unwrap();
        b.update(0, 5.0).unwrap();
        let stats = b.window_stats();
        assert_eq!(stats.counts, vec![1, 1]);
        assert_eq!(stats.means[0], 5.0);
        assert_eq!(b.steps(), 3);
        assert!(b.update(2, 0.0).is_err());
    }

    #[test]
    fn arm_that_slid_out_is_replayed_first() {
        let mut b = bandit(2, 3, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        b.update(0, 0.0).unwrap();
        for _ in 0..3 {
            b.update(1, 1.0).unwrap();
        }
        assert_eq!(b.window_stats().counts[0], 0);
        assert_eq!(b.select_arm(&mut rng), 0);
    }

    #[test]
    fn greedy_arm_ties_go_low() {
        let mut b = bandit(3, 10, 0.0);
        b.update(2, 1.0).unwrap();
        b.update(1, 1.0).unwrap();
        assert_eq!(b.greedy_arm(), 1);
        assert_eq!(bandit(3, 10, 0.0).greedy_arm(), 0);
    }

    #[test]
    fn full_epsilon_is_uniform() {
        let mut b = bandit(4, 50, 1.0);
        for a in 0..4 {
            b.update(a, a as f64).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            counts[b.select_arm(&mut rng)] += 1;
        }
        let p = 0.25;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn classic_variants_find_the_best_arm() {
        for algorithm in [BanditAlgorithm::Ucb1, BanditAlgorithm::SlidingWindow] {
            let mut cfg = BanditConfig::new(3, 500, 0.0);
            cfg.algorithm = algorithm;
            let mut b = BanditState::new(cfg).unwrap();
            let schedule = BernoulliSchedule::stationary(vec![0.2, 0.8, 0.4]);
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let trace = simulate(&mut b, &schedule, 5000, &mut rng).unwrap();
            assert!(best_arm_frequency(&trace, &schedule, 4000, 5000) > 0.6, "{algorithm:?}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(BanditState::new(BanditConfig::new(0, 10, 0.1)).is_err());
        assert!(BanditState::new(BanditConfig::new(2, 0, 0.1)).is_err());
        assert!(BanditState::new(BanditConfig::new(2, 10, 1.5)).is_err());
        assert_eq!("sw-ucb".parse::<BanditAlgorithm>().unwrap(), BanditAlgorithm::SlidingWindow);
    }

    proptest! {
        #[test]
        fn window_statistics_only_see_the_last_tau(pulls in proptest::collection::vec((0usize..3, -5.0f64..5.0), 1..200), tau in 1usize..40) {
            let mut b = bandit(3, tau, 0.1);
            for &(a, r) in &pulls {
                b.update(a, r).unwrap();
            }
            let start = pulls.len().saturating_sub(tau);
            let expected = stats_of(pulls[start..].iter(), 3);
            prop_assert_eq!(b.window_stats(), expected);
            prop_assert_eq!(b.window_stats().counts.iter().sum::<usize>(), pulls.len().min(tau));
        }

        #[test]
        fn rescaling_rewards_and_bonus_keeps_the_choice(pulls in proptest::collection::vec((0usize..3, 0.0f64..1.0), 3..60), c in 0.5f64..8.0) {
            let mut a = bandit(3, 30, 0.0);
            let mut cfg = BanditConfig::new(3, 30, 0.0);
            cfg.bonus_beta *= c;
            let mut b = BanditState::new(cfg).unwrap();
            for (i, &(_, r)) in pulls.iter().enumerate() {
                let arm = i % 3;
                a.update(arm, r).unwrap();
                b.update(arm, r * c).unwrap();
            }
            let mut rng_a = ChaCha8Rng::seed_from_u64(0);
            let mut rng_b = ChaCha8Rng::seed_from_u64(0);
            let (sa, sb) = (a.scores(), b.scores());
            let gap = sa.iter().map(|s| s * c).zip(&sb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            prop_assume!(gap < 1e-9);
            let mut sorted = sa.clone();
            sorted.sort_by(|x, y| y.total_cmp(x));
            prop_assume!(sorted[0] - sorted[1] > 1e-9);
            prop_assert_eq!(a.select_arm(&mut rng_a), b.select_arm(&mut rng_b));
        }
    }
}
