//! Flat `key = value` run configuration.
//!
//! Keys are matched after normalization: lower-cased, `$` and `\` removed and
//! every run of other non-alphanumeric characters turned into `_`. Hyperparameter
//! table names can therefore be written as printed, e.g. `Retrace $\lambda$ = 0.95`
//! is the key `retrace_lambda`.

use crate::bandit::BanditConfig;
use crate::decomposition::MixKind;
use crate::env::RandomCoinConfig;
use crate::error::{Error, Result};
use crate::family::{build_family, FamilySchedule, PolicyFamily};
use crate::mdp::SquashTransform;
use crate::novelty::{EpisodicMemory, IntrinsicRewardConfig, LifelongBackendKind};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnvKind {
    #[default]
    RandomCoin,
    RandomMdp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RunMode {
    #[default]
    Single,
    Multi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessConfig {
    pub seed: u64,
    pub mode: RunMode,

    pub env: EnvKind,
    pub coin: RandomCoinConfig,
    pub random_mdp_states: usize,
    pub random_mdp_actions: usize,
    pub random_mdp_seed: u64,
    pub random_mdp_max_steps: usize,

    pub family_schedule: FamilySchedule,
    /// Explicit `(beta, gamma)` pairs replacing the schedule.
    pub family_pairs: Option<Vec<(f64, f64)>>,

    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub adam_epsilon: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_clip_norm: f64,
    pub batch_size: usize,
    pub trace_length: usize,
    pub replay_period: usize,
    pub retrace_lambda: f64,
    /// Value transform for the losses; `None` uses plain Retrace.
    pub value_transform: Option<SquashTransform>,
    pub value_mix: MixKind,
    pub target_update_period: u64,
    pub divergence_limit: f64,

    pub intrinsic_rewards: bool,
    pub lifelong_backend: LifelongBackendKind,
    pub episodic_memory_capacity: usize,
    pub kernel_epsilon: f64,
    pub kernel_neighbors: usize,
    pub intrinsic: IntrinsicRewardConfig,

    pub replay_capacity: usize,
    pub priority_exponent: f64,
    pub priority_floor: f64,
    pub min_replay_size: usize,

    pub num_actors: usize,
    pub actor_base_epsilon: f64,
    pub actor_epsilon_alpha: f64,
    pub actor_update_period: u64,
    pub actor_bandit: BanditConfigTemplate,
    pub evaluator_bandit: BanditConfigTemplate,
    pub evaluation_epsilon: f64,
    pub evaluator_block: usize,
    pub final_eval_episodes: usize,

    pub steps_per_learner_update: u64,
    pub frame_budget: u64,

    /// Accepted keys with no effect on tabular agents, kept for reference.
    pub inert: BTreeMap<String, String>,
}

/// Bandit settings without the arm count, which comes from the family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BanditConfigTemplate {
    pub window: usize,
    pub epsilon: f64,
    pub bonus_beta: f64,
}

impl BanditConfigTemplate {
    pub fn with_arms(&self, num_arms: usize) -> BanditConfig {
        let mut cfg = BanditConfig::new(num_arms, self.window, self.epsilon);
        cfg.bonus_beta = self.bonus_beta;
        cfg
    }
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            mode: RunMode::Single,
            env: EnvKind::RandomCoin,
            coin: RandomCoinConfig::default(),
            random_mdp_states: 20,
            random_mdp_actions: 4,
            random_mdp_seed: 0,
            random_mdp_max_steps: 200,
            family_schedule: FamilySchedule::default(),
            family_pairs: None,
            optimizer: OptimizerKind::Sgd,
            learning_rate: 0.5,
            adam_epsilon: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_clip_norm: 40.0,
            batch_size: 16,
            trace_length: 40,
            replay_period: 20,
            retrace_lambda: 0.95,
            value_transform: Some(SquashTransform::default()),
            value_mix: MixKind::Identity,
            target_update_period: 1500,
            divergence_limit: 1e9,
            intrinsic_rewards: true,
            lifelong_backend: LifelongBackendKind::CountBased,
            episodic_memory_capacity: EpisodicMemory::DEFAULT_CAPACITY,
            kernel_epsilon: EpisodicMemory::DEFAULT_KERNEL_EPSILON,
            kernel_neighbors: EpisodicMemory::DEFAULT_NEIGHBORS,
            intrinsic: IntrinsicRewardConfig::default(),
            replay_capacity: 50_000,
            priority_exponent: 0.9,
            priority_floor: 1e-3,
            min_replay_size: 64,
            num_actors: 8,
            actor_base_epsilon: 0.4,
            actor_epsilon_alpha: 8.0,
            actor_update_period: 400,
            actor_bandit: BanditConfigTemplate {
                window: BanditConfig::ACTOR_WINDOW,
                epsilon: BanditConfig::ACTOR_EPSILON,
                bonus_beta: BanditConfig::DEFAULT_BONUS,
            },
            evaluator_bandit: BanditConfigTemplate {
                window: BanditConfig::EVALUATOR_WINDOW,
                epsilon: BanditConfig::EVALUATOR_EPSILON,
                bonus_beta: BanditConfig::DEFAULT_BONUS,
            },
            evaluation_epsilon: 0.01,
            evaluator_block: 5,
            final_eval_episodes: 50,
            steps_per_learner_update: 8,
            frame_budget: 200_000,
            inert: BTreeMap::new(),
        }
    }
}

/// Lower-case, drop `$` and `\`, collapse other non-alphanumerics to `_`.
pub fn normalize_key(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_sep = false;
    for ch in raw.chars() {
        if ch == '$' || ch == '\\' {
            continue;
        }
        if ch.is_ascii_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.push(ch.to_ascii_lowercase());
        } else {
            pending_sep = true;
        }
    }
    out
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value.parse().map_err(|_| Error::Config(format!("{key}: `{value}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("{key}: `{value}` is not finite")));
    }
    Ok(v)
}

/// Integers may be written in float notation such as `5e4`.
fn parse_u64(key: &str, value: &str) -> Result<u64> {
    if let Ok(v) = value.parse::<u64>() {
        return Ok(v);
    }
    let v = parse_f64(key, value)?;
    if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(Error::Config(format!("{key}: `{value}` is not a non-negative integer")));
    }
    Ok(v as u64)
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    Ok(parse_u64(key, value)? as usize)
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: `{value}` is not a boolean"))),
    }
}

/// `beta:gamma` pairs separated by commas.
fn parse_pairs(key: &str, value: &str) -> Result<Vec<(f64, f64)>> {
    value
        .split(',')
        .map(|item| {
            let (b, g) = item
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("{key}: `{item}` is not a beta:gamma pair")))?;
            Ok((parse_f64(key, b.trim())?, parse_f64(key, g.trim())?))
        })
        .collect()
}

/// Keys accepted for completeness that tabular agents ignore.
const INERT_KEYS: [&str; 7] = [
    "learning_rate_rnd_and_action_prediction",
    "discount_r_i",
    "discount_r_e",
    "embeddings_memory_mode",
    "embeddings_target_update_period",
    "action_prediction_network_l2_weight",
    "target_epsilon",
];

impl HarnessConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses a config on top of the defaults and validates the result.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            cfg.set(key, value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", lineno + 1, e.to_string().trim_start_matches("config error: "))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key. Unknown keys are errors.
    pub fn set(&mut self, raw_key: &str, value: &str) -> Result<()> {
        let key = normalize_key(raw_key);
        let k = key.as_str();
        match k {
            "seed" => self.seed = parse_u64(k, value)?,
            "mode" => {
                self.mode = match value {
                    "single" => RunMode::Single,
                    "multi" => RunMode::Multi,
                    _ => return Err(Error::Config(format!("{k}: expected single or multi"))),
                }
            }
            "env" => {
                self.env = match value {
                    "random_coin" => EnvKind::RandomCoin,
                    "random_mdp" => EnvKind::RandomMdp,
                    _ => return Err(Error::Config(format!("{k}: unknown environment `{value}`"))),
                }
            }
            "coin_width" => self.coin.width = parse_usize(k, value)?,
            "coin_height" => self.coin.height = parse_usize(k, value)?,
            "max_episode_steps" => {
                let steps = parse_usize(k, value)?;
                self.coin.max_steps = steps;
                self.random_mdp_max_steps = steps;
            }
            "random_mdp_states" => self.random_mdp_states = parse_usize(k, value)?,
            "random_mdp_actions" => self.random_mdp_actions = parse_usize(k, value)?,
            "random_mdp_seed" => self.random_mdp_seed = parse_u64(k, value)?,
            "number_of_mixtures_n" | "num_policies" => self.family_schedule.num_policies = parse_usize(k, value)?,
            "intrinsic_reward_scale_beta" => {
                let beta = parse_f64(k, value)?;
                self.family_schedule.beta_max = beta;
                self.intrinsic.beta_scale = beta;
            }
            "gamma0" => self.family_schedule.gamma0 = parse_f64(k, value)?,
            "gamma1" => self.family_schedule.gamma1 = parse_f64(k, value)?,
            "gamma2" => self.family_schedule.gamma2 = parse_f64(k, value)?,
            "reverse_gamma_tail" => self.family_schedule.reverse_gamma_tail = parse_bool(k, value)?,
            "family" => self.family_pairs = Some(parse_pairs(k, value)?),
            "optimizer" => {
                self.optimizer = match value.to_ascii_lowercase().as_str() {
                    "sgd" => OptimizerKind::Sgd,
                    "adam" | "adamoptimizer" | "adamoptimizer (for all losses)" => OptimizerKind::Adam,
                    _ => return Err(Error::Config(format!("{k}: expected sgd or adam"))),
                }
            }
            "learning_rate_r2d2" | "learning_rate" => self.learning_rate = parse_f64(k, value)?,
            "adam_epsilon" => self.adam_epsilon = parse_f64(k, value)?,
            "adam_beta1" => self.adam_beta1 = parse_f64(k, value)?,
            "adam_beta2" => self.adam_beta2 = parse_f64(k, value)?,
            "adam_clip_norm" => self.adam_clip_norm = parse_f64(k, value)?,
            "batch_size" => self.batch_size = parse_usize(k, value)?,
            "trace_length" => self.trace_length = parse_usize(k, value)?,
            "replay_period" => self.replay_period = parse_usize(k, value)?,
            "retrace_lambda" => self.retrace_lambda = parse_f64(k, value)?,
            "r2d2_reward_transformation" | "value_transform" => {
                let v = value.to_ascii_lowercase();
                self.value_transform = if v == "identity" || v == "none" {
                    None
                } else if v == "h" || v.starts_with("sign") {
                    Some(self.value_transform.unwrap_or_default())
                } else {
                    return Err(Error::Config(format!("{k}: expected h or identity")));
                }
            }
            "reward_transformation_epsilon" => {
                self.value_transform = Some(SquashTransform::new(parse_f64(k, value)?)?);
            }
            "value_mix" => {
                self.value_mix = match value {
                    "identity" => MixKind::Identity,
                    "transformed" => MixKind::Transformed,
                    _ => return Err(Error::Config(format!("{k}: expected identity or transformed"))),
                }
            }
            "target_q_network_update_period" => self.target_update_period = parse_u64(k, value)?,
            "divergence_limit" => self.divergence_limit = parse_f64(k, value)?,
            "intrinsic_rewards" => self.intrinsic_rewards = parse_bool(k, value)?,
            "lifelong_backend" => self.lifelong_backend = value.parse()?,
            "episodic_memory_capacity" => self.episodic_memory_capacity = parse_usize(k, value)?,
            "kernel_epsilon" => self.kernel_epsilon = parse_f64(k, value)?,
            "kernel_num_neighbors_used" => self.kernel_neighbors = parse_usize(k, value)?,
            "rnd_clipping_factor_l" => self.intrinsic.clip_max = parse_f64(k, value)?,
            "replay_capacity" => self.replay_capacity = parse_usize(k, value)?,
            "replay_priority_exponent" => self.priority_exponent = parse_f64(k, value)?,
            "priority_floor" => self.priority_floor = parse_f64(k, value)?,
            "importance_sampling_exponent" => {
                if parse_f64(k, value)? != 0.0 {
                    return Err(Error::Config(format!("{k}: only 0 is supported (no importance weighting)")));
                }
            }
            "minimum_sequences_to_start_replay" => self.min_replay_size = parse_usize(k, value)?,
            "num_actors" => self.num_actors = parse_usize(k, value)?,
            "actor_base_epsilon" => self.actor_base_epsilon = parse_f64(k, value)?,
            "actor_epsilon_alpha" => self.actor_epsilon_alpha = parse_f64(k, value)?,
            "actor_update_period" => self.actor_update_period = parse_u64(k, value)?,
            "bandit_window_size" => self.actor_bandit.window = parse_usize(k, value)?,
            "bandit_epsilon" => self.actor_bandit.epsilon = parse_f64(k, value)?,
            "bandit_ucb_beta" => {
                let beta = parse_f64(k, value)?;
                self.actor_bandit.bonus_beta = beta;
                self.evaluator_bandit.bonus_beta = beta;
            }
            "evaluator_bandit_window_size" => self.evaluator_bandit.window = parse_usize(k, value)?,
            "evaluator_bandit_epsilon" => self.evaluator_bandit.epsilon = parse_f64(k, value)?,
            "evaluation_epsilon" => self.evaluation_epsilon = parse_f64(k, value)?,
            "evaluator_block" => self.evaluator_block = parse_usize(k, value)?,
            "final_eval_episodes" => self.final_eval_episodes = parse_usize(k, value)?,
            "steps_per_learner_update" => self.steps_per_learner_update = parse_u64(k, value)?,
            "frame_budget" => self.frame_budget = parse_u64(k, value)?,
            _ if INERT_KEYS.contains(&k) => {
                self.inert.insert(key.clone(), value.to_string());
            }
            _ => return Err(Error::Config(format!("unknown key `{raw_key}` (normalized `{key}`)"))),
        }
        Ok(())
    }

    pub fn family(&self) -> Result<PolicyFamily> {
        match &self.family_pairs {
            Some(pairs) => PolicyFamily::from_pairs(pairs.clone()),
            None => build_family(&self.family_schedule),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        self.family()?;
        self.intrinsic.validate()?;
        if self.trace_length == 0 || self.replay_period >= self.trace_length {
            return fail(format!(
                "need 0 <= replay_period < trace_length, got {} and {}",
                self.replay_period, self.trace_length
            ));
        }
        if self.batch_size == 0 || self.num_actors == 0 || self.steps_per_learner_update == 0 {
            return fail("batch_size, num_actors and steps_per_learner_update must be positive".into());
        }
        if self.replay_capacity == 0 || self.min_replay_size == 0 || self.min_replay_size > self.replay_capacity {
            return fail(format!(
                "need 0 < minimum_sequences_to_start_replay <= replay_capacity, got {} and {}",
                self.min_replay_size, self.replay_capacity
            ));
        }
        if !(0.0..=1.0).contains(&self.priority_exponent) {
            return fail(format!("replay priority exponent {} outside [0, 1]", self.priority_exponent));
        }
        if !(self.priority_floor >= 0.0) {
            return fail(format!("priority floor {} must be non-negative", self.priority_floor));
        }
        if !(0.0..=1.0).contains(&self.retrace_lambda) {
            return fail(format!("retrace lambda {} outside [0, 1]", self.retrace_lambda));
        }
        if !(self.learning_rate > 0.0) {
            return fail(format!("learning rate {} must be positive", self.learning_rate));
        }
        if self.optimizer == OptimizerKind::Sgd && self.learning_rate > 1.0 {
            return fail(format!("sgd learning rate {} above 1 overshoots table targets", self.learning_rate));
        }
        if !(0.0..=1.0).contains(&self.actor_base_epsilon) || !(0.0..=1.0).contains(&self.evaluation_epsilon) {
            return fail("actor and evaluation epsilons must lie in [0, 1]".into());
        }
        if self.actor_update_period == 0 || self.target_update_period == 0 || self.evaluator_block == 0 {
            return fail("update periods and the evaluator block must be positive".into());
        }
        if self.value_mix == MixKind::Transformed && self.value_transform.is_none() {
            return fail("value_mix = transformed needs the h value transform".into());
        }
        if self.episodic_memory_capacity == 0 || self.kernel_neighbors == 0 || !(self.kernel_epsilon > 0.0) {
            return fail("episodic memory settings must be positive".into());
        }
        self.actor_bandit.with_arms(1).validate()?;
        self.evaluator_bandit.with_arms(1).validate()?;
        match self.env {
            EnvKind::RandomCoin => self.coin.validate()?,
            EnvKind::RandomMdp => {
                if self.random_mdp_states == 0 || self.random_mdp_actions == 0 || self.random_mdp_max_steps == 0 {
                    return fail("random MDP dimensions must be positive".into());
                }
            }
        }
        Ok(())
    }
}

/// Every recognized key with its default here and the reference-scale value.
pub fn config_reference() -> String {
    let rows: &[(&str, &str, &str, &str)] = &[
        ("seed", "0", "-", "master seed; the CLI flag overrides it"),
        ("mode", "single", "-", "single (deterministic interleave) or multi (threads and channels)"),
        ("env", "random_coin", "-", "random_coin or random_mdp"),
        ("coin_width / coin_height", "15 / 15", "15 / 15", "room size"),
        ("max_episode_steps", "200", "200", "episode step limit"),
        ("random_mdp_states / random_mdp_actions / random_mdp_seed", "20 / 4 / 0", "-", "random MDP environment"),
        ("number_of_mixtures_n", "32", "32", "family size N"),
        ("intrinsic_reward_scale_beta", "0.3", "0.3", "largest beta in the family"),
        ("gamma0 / gamma1 / gamma2", "0.9999 / 0.997 / 0.99", "same", "discount schedule anchors"),
        ("reverse_gamma_tail", "false", "-", "serve the j >= 8 discounts in descending order"),
        ("family", "unset", "-", "explicit beta:gamma pairs, e.g. 0:0.99,0.3:0.99"),
        ("optimizer", "sgd", "AdamOptimizer", "sgd or adam"),
        ("learning_rate_r2d2", "0.5", "0.0001", "table step size"),
        ("adam_epsilon / adam_beta1 / adam_beta2", "0.0001 / 0.9 / 0.999", "same", "Adam moments"),
        ("adam_clip_norm", "40", "40", "gradient norm clip (Adam)"),
        ("batch_size", "16", "64", "sequences per learner step"),
        ("trace_length", "40", "160", "stored sequence length H"),
        ("replay_period", "20", "80", "overlap between adjacent sequences"),
        ("retrace_lambda", "0.95", "0.95", "trace coefficient"),
        ("r2d2_reward_transformation", "h", "h", "h or identity for the value losses"),
        ("reward_transformation_epsilon", "0.001", "0.001", "epsilon inside h"),
        ("value_mix", "identity", "-", "identity or transformed extrinsic/intrinsic mix"),
        ("target_q_network_update_period", "1500", "1500", "learner steps between target copies"),
        ("divergence_limit", "1e9", "-", "abort when a table entry exceeds this"),
        ("intrinsic_rewards", "true", "-", "false forces every intrinsic reward to zero"),
        ("lifelong_backend", "count", "-", "count or rnd life-long novelty"),
        ("episodic_memory_capacity", "30000", "30000", "episodic ring buffer size"),
        ("kernel_epsilon", "0.0001", "0.0001", "episodic kernel epsilon"),
        ("kernel_num_neighbors_used", "10", "10", "episodic k"),
        ("rnd_clipping_factor_l", "5", "5", "upper clip L on the life-long multiplier"),
        ("replay_capacity", "50000", "5e6", "stored sequences"),
        ("replay_priority_exponent", "0.9", "0.9", "eta in the max/mean priority mix"),
        ("importance_sampling_exponent", "0", "0", "only 0 is supported"),
        ("priority_floor", "0.001", "-", "lower bound on computed priorities"),
        ("minimum_sequences_to_start_replay", "64", "6250", "learner waits for this many sequences"),
        ("num_actors", "8", "256", "actor count L"),
        ("actor_base_epsilon / actor_epsilon_alpha", "0.4 / 8", "0.4 / 8", "epsilon ladder"),
        ("actor_update_period", "400", "100 (400 frames in the actor description)", "actor steps between table refreshes"),
        ("bandit_window_size", "160", "90 (160 in the experiments text)", "actor bandit window"),
        ("bandit_epsilon", "0.5", "0.5", "actor bandit epsilon"),
        ("bandit_ucb_beta", "1", "1", "bandit bonus coefficient"),
        ("evaluator_bandit_window_size / evaluator_bandit_epsilon", "3600 / 0.01", "3600 / 0.01", "evaluator bandit"),
        ("evaluation_epsilon", "0.01", "0.01", "evaluator action epsilon"),
        ("evaluator_block", "5", "5", "episodes per evaluator phase"),
        ("final_eval_episodes", "50", "-", "per-arm episodes in the closing evaluation"),
        ("steps_per_learner_update", "8", "-", "actor steps per learner step"),
        ("frame_budget", "200000", "-", "actor environment steps"),
        ("learning_rate_rnd_and_action_prediction", "ignored", "0.0005", "no learned embedding here"),
        ("discount_r_i / discount_r_e", "ignored", "0.99 / 0.997", "discounts come from the family"),
        ("embeddings_memory_mode", "ignored", "Ring buffer", "the episodic memory is always a ring buffer"),
        ("embeddings_target_update_period", "ignored", "once/episode", "no learned embedding here"),
        ("action_prediction_network_l2_weight", "ignored", "0.00001", "no learned embedding here"),
        ("target_epsilon", "ignored", "0.01", "the target policy is greedy"),
    ];
    let mut out = String::from("key | default | reference value | meaning\n");
    for (k, d, p, m) in rows {
        out.push_str(&format!("{k} | {d} | {p} | {m}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_normalization() {
        assert_eq!(normalize_key("Retrace $\\lambda$"), "retrace_lambda");
        assert_eq!(normalize_key("Number of mixtures $N$"), "number_of_mixtures_n");
        assert_eq!(normalize_key("Learning rate (R2D2)"), "learning_rate_r2d2");
        assert_eq!(normalize_key("Discount $r^i$"), "discount_r_i");
        assert_eq!(normalize_key("RND clipping factor $L$"), "rnd_clipping_factor_l");
        assert_eq!(normalize_key("  batch_size "), "batch_size");
    }

    #[test]
    fn verbatim_table_names_parse() {
        let text = "\
# comment
Retrace $\\lambda$ = 0.9
Replay capacity = 5e4
Importance sampling exponent = 0.0
Kernel $\\epsilon$ = 0.0002
Bandit window size = 90
Discount $r^e$ = 0.997
family = 0:0.99, 0.3:0.99
";
        let cfg = HarnessConfig::parse(text).unwrap();
        assert_eq!(cfg.retrace_lambda, 0.9);
        assert_eq!(cfg.replay_capacity, 50_000);
        assert_eq!(cfg.kernel_epsilon, 0.0002);
        assert_eq!(cfg.actor_bandit.window, 90);
        assert_eq!(cfg.inert["discount_r_e"], "0.997");
        assert_eq!(cfg.family().unwrap().pairs(), &[(0.0, 0.99), (0.3, 0.99)]);
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(HarnessConfig::parse("no_such_key = 1").is_err());
        assert!(HarnessConfig::parse("importance_sampling_exponent = 0.5").is_err());
        assert!(HarnessConfig::parse("trace_length = 10\nreplay_period = 10").is_err());
        assert!(HarnessConfig::parse("batch_size = x").is_err());
        assert!(HarnessConfig::parse("batch_size 4").is_err());
        assert!(HarnessConfig::parse("value_transform = identity\nvalue_mix = transformed").is_err());
        assert!(HarnessConfig::parse("number_of_mixtures_n = 9").is_err());
    }

    #[test]
    fn reference_lists_every_settable_key() {
        let reference = config_reference();
        for key in ["retrace_lambda", "replay_capacity", "bandit_ucb_beta", "target_epsilon", "frame_budget"] {
            assert!(reference.contains(key), "{key}");
        }
    }
}
