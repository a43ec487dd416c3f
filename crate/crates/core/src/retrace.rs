//! Retrace: exact operators on tabular MDPs, the greedy control schemes built
//! from them, and the sampled targets and squared losses used by the learner.

use crate::decomposition::{mix_identity, mix_transformed, ValuePair};
use crate::error::{Error, Result};
use crate::mdp::{
    check_discount, greedy_policy, IdentityTransform, Policy, QFunction, QTable, RewardSelect, SquashTransform,
    StochasticPolicy, TabularMdp, ValueTransform,
};
use crate::sequence::{Transition, TransitionSequence};
use std::collections::BTreeMap;

/// Tail mass below which a truncated exact operator counts as exact.
pub const TAIL_TOLERANCE: f64 = 1e-12;

/// Any table entry above this magnitude is treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConfig {
    pub lambda: f64,
    pub gamma: f64,
}

impl TraceConfig {
    pub const DEFAULT_LAMBDA: f64 = 0.95;

    pub fn new(lambda: f64, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Domain(format!("trace lambda must lie in [0, 1], got {lambda}")));
        }
        check_discount(gamma)?;
        Ok(Self { lambda, gamma })
    }
}

/// `c = lambda * min(1, pi / mu)`
pub fn trace_coefficient(pi_prob: f64, mu_prob: f64, cfg: &TraceConfig) -> Result<f64> {
    if !(mu_prob > 0.0) {
        return Err(Error::DegenerateBehaviorProbability(mu_prob));
    }
    if !(pi_prob >= 0.0) {
        return Err(Error::Domain(format!("target probability must be non-negative, got {pi_prob}")));
    }
    Ok(cfg.lambda * (pi_prob / mu_prob).min(1.0))
}

#[inline]
fn trace_unchecked(pi_prob: f64, mu_prob: f64, lambda: f64) -> f64 {
    lambda * (pi_prob / mu_prob).min(1.0)
}

/// Result of applying an exact Retrace operator truncated after `horizon` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactRetrace {
    pub q: QFunction,
    pub horizon: usize,
    /// Upper bound on the neglected tail, `(gamma lambda)^(H+1) ||delta|| / (1 - gamma lambda)`.
    pub tail_bound: f64,
}

impl ExactRetrace {
    /// The requested horizon leaves a tail above [`TAIL_TOLERANCE`].
    pub fn truncation_warning(&self) -> bool {
        self.tail_bound >= TAIL_TOLERANCE
    }
}

fn tail_bound(rate: f64, delta_norm: f64, horizon: usize) -> f64 {
    if delta_norm == 0.0 || rate == 0.0 {
        return 0.0;
    }
    rate.powi(horizon as i32 + 1) * delta_norm / (1.0 - rate)
}

/// Smallest horizon whose tail bound is below [`TAIL_TOLERANCE`].
pub fn horizon_for(cfg: &TraceConfig, delta_norm: f64) -> usize {
    let rate = cfg.gamma * cfg.lambda;
    let mut horizon = 0;
    while tail_bound(rate, delta_norm, horizon) >= TAIL_TOLERANCE {
        horizon += 1;
    }
    horizon
}

/// `T^{mu,pi} Q(x,a) = Q(x,a) + E_mu[sum_t gamma^t (prod_{s=1..t} c_s) delta_t]`, computed
/// by propagating trace-weighted state-action occupancies forward from every
/// `(x, a)`. `horizon = None` picks the smallest horizon meeting [`TAIL_TOLERANCE`].
pub fn retrace_operator_exact(
    mdp: &TabularMdp,
    mu: &StochasticPolicy,
    pi: &StochasticPolicy,
    q: &QFunction,
    cfg: &TraceConfig,
    horizon: Option<usize>,
    select: RewardSelect,
) -> Result<ExactRetrace> {
    exact_operator(mdp, mu, pi, q, cfg, horizon, select, &IdentityTransform)
}

/// Transformed operator `h(h^-1(Q) + E_mu[sum_t gamma^t (prod c_s) delta^h_t])`.
#[allow(clippy::too_many_arguments)]
pub fn transformed_retrace_operator_exact(
    mdp: &TabularMdp,
    mu: &StochasticPolicy,
    pi: &StochasticPolicy,
    q: &QFunction,
    cfg: &TraceConfig,
    horizon: Option<usize>,
    transform: &impl ValueTransform,
    select: RewardSelect,
) -> Result<ExactRetrace> {
    exact_operator(mdp, mu, pi, q, cfg, horizon, select, transform)
}

#[allow(clippy::too_many_arguments)]
fn exact_operator(
    mdp: &TabularMdp,
    mu: &StochasticPolicy,
    pi: &StochasticPolicy,
    q: &QFunction,
    cfg: &TraceConfig,
    horizon: Option<usize>,
    select: RewardSelect,
    transform: &impl ValueTransform,
) -> Result<ExactRetrace> {
    mdp.check_table(q, "retrace operator")?;
    mdp.check_policy(mu, "retrace behavior policy")?;
    mdp.check_policy(pi, "retrace target policy")?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let gamma = cfg.gamma;
    let raw = q.map(|v| transform.invert(v));

    let expected_next: Vec<f64> = (0..ns)
        .map(|y| pi.row(y).iter().zip(raw.row(y)).map(|(p, v)| p * v).sum())
        .collect();
    let delta = QFunction::from_fn(ns, na, |x, a| {
        let next: f64 = mdp.successors(x, a).iter().map(|&(y, p)| p * expected_next[y]).sum();
        mdp.reward(x, a, select) + gamma * next - raw.get(x, a)
    });
    let delta_norm = delta.sup_norm();
    let horizon = horizon.unwrap_or_else(|| horizon_for(cfg, delta_norm));

    // mu(b|y) * c(y, b) = lambda * min(mu, pi); well defined where mu = 0
    let weight: Vec<f64> = mu
        .probs()
        .iter()
        .zip(pi.probs())
        .map(|(&m, &p)| cfg.lambda * m.min(p))
        .collect();

    let mut acc = delta.values().to_vec();
    let mut term = acc.clone();
    let mut carried = vec![0.0; ns];
    for _ in 0..horizon {
        for (y, c) in carried.iter_mut().enumerate() {
            *c = (0..na).map(|b| weight[y * na + b] * term[y * na + b]).sum();
        }
        let mut magnitude: f64 = 0.0;
        for x in 0..ns {
            for a in 0..na {
                let v = gamma * mdp.successors(x, a).iter().map(|&(y, p)| p * carried[y]).sum::<f64>();
                term[x * na + a] = v;
                acc[x * na + a] += v;
                magnitude = magnitude.max(v.abs());
            }
        }
        if magnitude == 0.0 {
            break;
        }
    }
    let values = raw.values().iter().zip(&acc).map(|(r, d)| transform.apply(r + d)).collect();
    Ok(ExactRetrace {
        q: QFunction::from_values(ns, na, values)?,
        horizon,
        tail_bound: tail_bound(gamma * cfg.lambda, delta_norm, horizon),
    })
}

/// How the behavior policy of each control iteration is chosen from the current table.
#[derive(Debug, Clone, PartialEq)]
pub enum BehaviorRule {
    EpsilonGreedy(f64),
    Greedy,
    Fixed(StochasticPolicy),
}

impl Default for BehaviorRule {
    fn default() -> Self {
        BehaviorRule::EpsilonGreedy(0.1)
    }
}

impl BehaviorRule {
    pub fn policy_for(&self, q: &QFunction) -> Result<StochasticPolicy> {
        match self {
            BehaviorRule::EpsilonGreedy(eps) => StochasticPolicy::epsilon_greedy(q, *eps),
            BehaviorRule::Greedy => Ok(greedy_policy(q)),
            BehaviorRule::Fixed(mu) => Ok(mu.clone()),
        }
    }
}

/// Greedy control with Retrace evaluation: `pi_k = G(Q_k)`, `Q_{k+1} = T^{mu_k, pi_k} Q_k`.
#[derive(Debug, Clone)]
pub struct RetraceControl<'a> {
    pub mdp: &'a TabularMdp,
    pub cfg: TraceConfig,
    pub behavior: BehaviorRule,
    pub transform: Option<SquashTransform>,
    pub horizon: Option<usize>,
    pub select: RewardSelect,
}

impl<'a> RetraceControl<'a> {
    pub fn new(mdp: &'a TabularMdp, cfg: TraceConfig, select: RewardSelect) -> Self {
        Self {
            mdp,
            cfg,
            behavior: BehaviorRule::default(),
            transform: None,
            horizon: None,
            select,
        }
    }

    pub fn behavior(mut self, behavior: BehaviorRule) -> Self {
        self.behavior = behavior;
        self
    }

    pub fn transform(mut self, transform: Option<SquashTransform>) -> Self {
        self.transform = transform;
        self
    }

    pub fn step(&self, q: &QFunction) -> Result<QFunction> {
        let pi = greedy_policy(q);
        let mu = self.behavior.policy_for(q)?;
        let next = match &self.transform {
            Some(t) => transformed_retrace_operator_exact(self.mdp, &mu, &pi, q, &self.cfg, self.horizon, t, self.select)?,
            None => retrace_operator_exact(self.mdp, &mu, &pi, q, &self.cfg, self.horizon, self.select)?,
        };
        check_divergence(&next.q)?;
        Ok(next.q)
    }

    /// Runs `iters` iterations, calling `observe(k, Q_k)` for `k = 0..=iters`.
    pub fn run_with(&self, q0: QFunction, iters: usize, mut observe: impl FnMut(usize, &QFunction)) -> Result<QFunction> {
        self.mdp.check_table(&q0, "retrace control initial table")?;
        let mut q = q0;
        observe(0, &q);
        for k in 1..=iters {
            q = self.step(&q)?;
            observe(k, &q);
        }
        Ok(q)
    }

    pub fn run(&self, q0: QFunction, iters: usize) -> Result<QFunction> {
        self.run_with(q0, iters, |_, _| {})
    }
}

fn check_divergence(q: &QFunction) -> Result<()> {
    let norm = q.sup_norm();
    if !norm.is_finite() || norm > DIVERGENCE_LIMIT {
        return Err(Error::Divergence(format!("||Q||_inf = {norm:e}")));
    }
    Ok(())
}

/// Untransformed Retrace control from `q0` for `iters` iterations.
pub fn retrace_control_scheme(
    mdp: &TabularMdp,
    behavior: BehaviorRule,
    q0: QFunction,
    cfg: &TraceConfig,
    iters: usize,
    select: RewardSelect,
) -> Result<QFunction> {
    RetraceControl::new(mdp, *cfg, select).behavior(behavior).run(q0, iters)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedRetrace {
    pub q_extrinsic: QFunction,
    pub q_intrinsic: QFunction,
    pub q_mixed: QFunction,
}

/// Retrace control with separate extrinsic and intrinsic tables that share the
/// greedy target policy (and the behavior policy) of their mix.
///
/// With `transform` each component uses the transformed operator and the mix
/// is `h(h^-1(Q^e) + beta h^-1(Q^i))`; otherwise `Q^e + beta Q^i`.
/// `observe(k, mix_k)` sees every iterate including the initial one.
#[allow(clippy::too_many_arguments)]
pub fn retrace_decomposed_scheme(
    mdp: &TabularMdp,
    q_e0: QFunction,
    q_i0: QFunction,
    beta: f64,
    cfg: &TraceConfig,
    transform: Option<&SquashTransform>,
    behavior: &BehaviorRule,
    iters: usize,
    mut observe: impl FnMut(usize, &QFunction),
) -> Result<DecomposedRetrace> {
    if !(beta >= 0.0) {
        return Err(Error::Domain(format!("beta must be non-negative, got {beta}")));
    }
    mdp.check_table(&q_e0, "extrinsic initial table")?;
    mdp.check_table(&q_i0, "intrinsic initial table")?;
    let mix = |vp: &ValuePair| -> Result<QFunction> {
        match transform {
            Some(t) => mix_transformed(vp, t),
            None => mix_identity(vp),
        }
    };
    let mut pair = ValuePair::new(q_e0, q_i0, beta)?;
    let mut mixed = mix(&pair)?;
    observe(0, &mixed);
    for k in 1..=iters {
        let pi = greedy_policy(&mixed);
        let mu = behavior.policy_for(&mixed)?;
        let backup = |q: &QFunction, select| -> Result<QFunction> {
            let out = match transform {
                Some(t) => transformed_retrace_operator_exact(mdp, &mu, &pi, q, cfg, None, t, select)?,
                None => retrace_operator_exact(mdp, &mu, &pi, q, cfg, None, select)?,
            };
            check_divergence(&out.q)?;
            Ok(out.q)
        };
        let q_i = backup(&pair.q_intrinsic, RewardSelect::Intrinsic)?;
        let q_e = backup(&pair.q_extrinsic, RewardSelect::Extrinsic)?;
        pair = ValuePair::new(q_e, q_i, beta)?;
        mixed = mix(&pair)?;
        observe(k, &mixed);
    }
    Ok(DecomposedRetrace {
        q_extrinsic: pair.q_extrinsic,
        q_intrinsic: pair.q_intrinsic,
        q_mixed: mixed,
    })
}

#[inline]
fn step_reward(t: &Transition, select: RewardSelect) -> f64 {
    match select {
        RewardSelect::Extrinsic => t.extrinsic_reward,
        RewardSelect::Intrinsic => t.intrinsic_reward,
        RewardSelect::Mixed(beta) => t.extrinsic_reward + beta * t.intrinsic_reward,
    }
}

#[inline]
fn expected_under(pi: &impl Policy, q: &impl QTable, state: usize, f: impl Fn(f64) -> f64) -> f64 {
    q.row(state)
        .iter()
        .enumerate()
        .map(|(a, &v)| {
            let p = pi.prob(state, a);
            if p == 0.0 {
                0.0
            } else {
                p * f(v)
            }
        })
        .sum()
}

fn check_sequence(seq: &TransitionSequence, q: &impl QTable) -> Result<()> {
    seq.validate()?;
    for t in seq.valid() {
        if t.observation >= q.num_states() || t.next_observation >= q.num_states() {
            return Err(Error::OutOfRange { index: t.observation.max(t.next_observation), limit: q.num_states() });
        }
        if t.action >= q.num_actions() {
            return Err(Error::OutOfRange { index: t.action, limit: q.num_actions() });
        }
    }
    Ok(())
}

/// Sampled Retrace targets for the valid steps of one sequence, with the TD
/// errors `delta_s` they were built from.
///
/// `target_s = Q(x_s,a_s) + sum_{j>=s} gamma^{j-s} (prod_{i=s+1..j} c_i) delta_j`,
/// all values read from `q_target`.
pub fn sequence_targets(
    seq: &TransitionSequence,
    q_target: &impl QTable,
    pi: &impl Policy,
    cfg: &TraceConfig,
    select: RewardSelect,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_sequence(seq, q_target)?;
    let steps = seq.valid();
    let n = steps.len();
    let mut deltas = Vec::with_capacity(n);
    for t in steps {
        let bootstrap = if t.terminal {
            0.0
        } else {
            expected_under(pi, q_target, t.next_observation, |v| v)
        };
        deltas.push(step_reward(t, select) + cfg.gamma * bootstrap - q_target.value(t.observation, t.action));
    }
    let mut targets = vec![0.0; n];
    let mut carry = 0.0;
    for s in (0..n).rev() {
        let t = &steps[s];
        carry = if s + 1 < n {
            let next = &steps[s + 1];
            let c = trace_unchecked(pi.prob(next.observation, next.action), next.behavior_prob, cfg.lambda);
            deltas[s] + cfg.gamma * c * carry
        } else {
            deltas[s]
        };
        targets[s] = q_target.value(t.observation, t.action) + carry;
    }
    Ok((targets, deltas))
}

/// Transformed sampled targets
/// `h(h^-1(Q(x_s,a_s)) + sum_{j>=s} gamma^{j-s} (prod c_i) delta^h_j)`, where
/// `delta^h` is the TD error of the de-squashed table.
pub fn transformed_sequence_targets(
    seq: &TransitionSequence,
    q_target: &impl QTable,
    pi: &impl Policy,
    cfg: &TraceConfig,
    transform: &impl ValueTransform,
    select: RewardSelect,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_sequence(seq, q_target)?;
    let steps = seq.valid();
    let n = steps.len();
    let raw: Vec<f64> = steps.iter().map(|t| transform.invert(q_target.value(t.observation, t.action))).collect();
    let mut deltas = Vec::with_capacity(n);
    for (t, &here) in steps.iter().zip(&raw) {
        let bootstrap = if t.terminal {
            0.0
        } else {
            expected_under(pi, q_target, t.next_observation, |v| transform.invert(v))
        };
        deltas.push(step_reward(t, select) + cfg.gamma * bootstrap - here);
    }
    let mut targets = vec![0.0; n];
    let mut carry = 0.0;
    for s in (0..n).rev() {
        carry = if s + 1 < n {
            let next = &steps[s + 1];
            let c = trace_unchecked(pi.prob(next.observation, next.action), next.behavior_prob, cfg.lambda);
            deltas[s] + cfg.gamma * c * carry
        } else {
            deltas[s]
        };
        targets[s] = transform.apply(raw[s] + carry);
    }
    Ok((targets, deltas))
}

/// Targets and TD errors for a batch, one vector per sequence over its valid steps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RetraceTargets {
    pub targets: Vec<Vec<f64>>,
    pub td_errors: Vec<Vec<f64>>,
}

/// Sampled (optionally transformed) targets for a batch sharing one target table and policy.
pub fn retrace_targets_sampled(
    batch: &[TransitionSequence],
    q_target: &impl QTable,
    pi: &impl Policy,
    cfg: &TraceConfig,
    transform: Option<&SquashTransform>,
    select: RewardSelect,
) -> Result<RetraceTargets> {
    let mut out = RetraceTargets::default();
    for seq in batch {
        let (targets, deltas) = match transform {
            Some(t) => transformed_sequence_targets(seq, q_target, pi, cfg, t, select)?,
            None => sequence_targets(seq, q_target, pi, cfg, select)?,
        };
        out.targets.push(targets);
        out.td_errors.push(deltas);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetraceLoss {
    /// `sum_b sum_s (Q(x,a) - target)^2` over valid steps.
    pub loss: f64,
    /// `target - Q(x,a)` per valid step, the input to sequence priorities.
    pub per_step_td: Vec<Vec<f64>>,
}

fn check_targets(batch: &[TransitionSequence], targets: &RetraceTargets) -> Result<()> {
    if targets.targets.len() != batch.len()
        || batch.iter().zip(&targets.targets).any(|(s, t)| s.valid_len != t.len())
    {
        return Err(Error::Dimension("targets were not computed from this batch".into()));
    }
    Ok(())
}

pub fn retrace_loss(batch: &[TransitionSequence], q_online: &impl QTable, targets: &RetraceTargets) -> Result<RetraceLoss> {
    check_targets(batch, targets)?;
    let mut loss = 0.0;
    let mut per_step_td = Vec::with_capacity(batch.len());
    for (seq, seq_targets) in batch.iter().zip(&targets.targets) {
        let td: Vec<f64> = seq
            .valid()
            .iter()
            .zip(seq_targets)
            .map(|(t, &target)| target - q_online.value(t.observation, t.action))
            .collect();
        loss += td.iter().map(|d| d * d).sum::<f64>();
        per_step_td.push(td);
    }
    Ok(RetraceLoss { loss, per_step_td })
}

/// `dL/dQ(x,a) = sum over occurrences of 2 (Q(x,a) - target)`, keyed by `(state, action)`.
pub fn retrace_loss_gradient(
    batch: &[TransitionSequence],
    q_online: &impl QTable,
    targets: &RetraceTargets,
) -> Result<BTreeMap<(usize, usize), f64>> {
    check_targets(batch, targets)?;
    let mut grad = BTreeMap::new();
    for (seq, seq_targets) in batch.iter().zip(&targets.targets) {
        for (t, &target) in seq.valid().iter().zip(seq_targets) {
            *grad.entry((t.observation, t.action)).or_insert(0.0) += 2.0 * (q_online.value(t.observation, t.action) - target);
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::MdpGenerator;
    use crate::mdp::{bellman_eval_step, policy_eval_exact, value_iteration};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(lambda: f64, gamma: f64) -> TraceConfig {
        TraceConfig::new(lambda, gamma).unwrap()
    }

    fn random_policy(rng: &mut impl Rng, ns: usize, na: usize) -> StochasticPolicy {
        let mut probs = Vec::new();
        for _ in 0..ns {
            let w: Vec<f64> = (0..na).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            probs.extend(w.iter().map(|v| v / s));
        }
        StochasticPolicy::new(ns, na, probs).unwrap()
    }

    #[test]
    fn trace_coefficient_cases() {
        let c = cfg(0.95, 0.9);
        assert_eq!(trace_coefficient(0.3, 0.3, &c).unwrap(), 0.95);
        assert_eq!(trace_coefficient(0.0, 0.7, &c).unwrap(), 0.0);
        assert_eq!(trace_coefficient(0.9, 0.3, &c).unwrap(), 0.95);
        assert!(matches!(trace_coefficient(0.5, 0.0, &c), Err(Error::DegenerateBehaviorProbability(_))));
        assert!(TraceConfig::new(1.5, 0.9).is_err());
        assert!(TraceConfig::new(0.5, 1.0).is_err());
    }

    #[test]
    fn exact_operator_fixes_q_pi() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for seed in 0..5 {
            let mdp = MdpGenerator::new(5, 3).seed(seed).generate().unwrap();
            let (mu, pi) = (random_policy(&mut rng, 5, 3), random_policy(&mut rng, 5, 3));
            let q_pi = policy_eval_exact(&mdp, &pi, 0.9, RewardSelect::Extrinsic).unwrap();
            let out = retrace_operator_exact(&mdp, &mu, &pi, &q_pi, &cfg(0.95, 0.9), None, RewardSelect::Extrinsic).unwrap();
            assert!(out.q.max_abs_diff(&q_pi) <= 1e-9);
            assert!(!out.truncation_warning());
        }
    }

    #[test]
    fn zero_lambda_is_a_one_step_backup() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mdp = MdpGenerator::new(2, 2).seed(8).generate().unwrap();
        let (mu, pi) = (random_policy(&mut rng, 2, 2), random_policy(&mut rng, 2, 2));
        let q = QFunction::from_fn(2, 2, |x, a| (x * 2 + a) as f64 - 1.5);
        let retrace = retrace_operator_exact(&mdp, &mu, &pi, &q, &cfg(0.0, 0.7), None, RewardSelect::Extrinsic).unwrap();
        let one_step = bellman_eval_step(&mdp, &pi, &q, 0.7, RewardSelect::Extrinsic).unwrap();
        assert!(retrace.q.max_abs_diff(&one_step) <= 1e-10);
    }

    #[test]
    fn short_horizon_carries_a_warning() {
        let mdp = MdpGenerator::new(3, 2).seed(1).generate().unwrap();
        let pi = StochasticPolicy::uniform(3, 2);
        let out = retrace_operator_exact(&mdp, &pi, &pi, &QFunction::zeros(3, 2), &cfg(1.0, 0.9), Some(3), RewardSelect::Extrinsic).unwrap();
        assert!(out.truncation_warning());
        assert_eq!(out.horizon, 3);
    }

    #[test]
    fn control_converges_to_optimum() {
        let mdp = MdpGenerator::new(5, 3).seed(3).generate().unwrap();
        let q_star = value_iteration(&mdp, 0.9, 1e-12, 1_000_000, RewardSelect::Extrinsic).unwrap();
        let q = retrace_control_scheme(&mdp, BehaviorRule::default(), QFunction::zeros(5, 3), &cfg(0.95, 0.9), 300, RewardSelect::Extrinsic).unwrap();
        assert!(q.max_abs_diff(&q_star) <= 1e-6);
    }

    #[test]
    fn zero_lambda_greedy_control_is_value_iteration() {
        let mdp = MdpGenerator::new(5, 3).seed(4).generate().unwrap();
        let control = RetraceControl::new(&mdp, cfg(0.0, 0.9), RewardSelect::Extrinsic).behavior(BehaviorRule::Greedy);
        let mut q_vi = QFunction::zeros(5, 3);
        let mut q_rt = QFunction::zeros(5, 3);
        for _ in 0..50 {
            q_rt = control.step(&q_rt).unwrap();
            q_vi = bellman_eval_step(&mdp, &greedy_policy(&q_vi), &q_vi, 0.9, RewardSelect::Extrinsic).unwrap();
            assert!(q_rt.max_abs_diff(&q_vi) <= 1e-10);
        }
    }

    #[test]
    fn zero_reward_control_stays_zero() {
        let mdp = MdpGenerator::new(4, 2).zero_rewards().generate().unwrap();
        let q = retrace_control_scheme(&mdp, BehaviorRule::default(), QFunction::zeros(4, 2), &cfg(0.95, 0.9), 20, RewardSelect::Extrinsic).unwrap();
        assert_eq!(q.sup_norm(), 0.0);
    }

    #[test]
    fn divergence_is_reported() {
        let mdp = MdpGenerator::new(2, 1).seed(1).generate().unwrap();
        let huge = QFunction::filled(2, 1, 1e12);
        let err = retrace_control_scheme(&mdp, BehaviorRule::Greedy, huge, &cfg(0.5, 0.99), 1, RewardSelect::Extrinsic);
        assert!(matches!(err, Err(Error::Divergence(_))));
    }

    #[test]
    fn decomposed_scheme_with_zero_beta_tracks_extrinsic_scheme() {
        let mdp = MdpGenerator::new(4, 3).seed(9).generate().unwrap();
        let c = cfg(0.95, 0.9);
        let mut extrinsic_only = Vec::new();
        RetraceControl::new(&mdp, c, RewardSelect::Extrinsic)
            .run_with(QFunction::zeros(4, 3), 20, |_, q| extrinsic_only.push(q.clone()))
            .unwrap();
        let mut k = 0;
        retrace_decomposed_scheme(&mdp, QFunction::zeros(4, 3), QFunction::zeros(4, 3), 0.0, &c, None, &BehaviorRule::default(), 20, |i, q| {
            assert_eq!(q, &extrinsic_only[i]);
            k += 1;
        })
        .unwrap();
        assert_eq!(k, 21);
    }

    fn chain_sequence(states: &[usize], actions: &[usize], rewards: &[f64], mu: &[f64], terminal_end: bool) -> TransitionSequence {
        let n = actions.len();
        let steps = (0..n)
            .map(|s| {
                Transition::simple(states[s], actions[s], mu[s], rewards[s], states[s + 1]).with_terminal(terminal_end && s + 1 == n)
            })
            .collect();
        TransitionSequence::new(steps)
    }

    #[test]
    fn terminal_single_step_target_is_reward() {
        let q = QFunction::filled(3, 2, 0.7);
        let pi = StochasticPolicy::uniform(3, 2);
        let seq = chain_sequence(&[0, 2], &[1], &[2.5], &[0.5], true);
        let (targets, _) = sequence_targets(&seq, &q, &pi, &cfg(0.95, 0.9), RewardSelect::Extrinsic).unwrap();
        assert!((targets[0] - 2.5).abs() < 1e-15);
        let h = SquashTransform::default();
        let (targets, _) = transformed_sequence_targets(&seq, &q, &pi, &cfg(0.95, 0.9), &h, RewardSelect::Extrinsic).unwrap();
        assert!((targets[0] - h.apply(2.5)).abs() < 1e-12);
    }

    #[test]
    fn zero_lambda_targets_are_one_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = QFunction::from_fn(4, 2, |_, _| rng.gen_range(-1.0..1.0));
        let pi = random_policy(&mut rng, 4, 2);
        let seq = chain_sequence(&[0, 1, 3, 2], &[1, 0, 1], &[0.5, -1.0, 2.0], &[0.4, 0.6, 0.5], false);
        let (targets, _) = sequence_targets(&seq, &q, &pi, &cfg(0.0, 0.8), RewardSelect::Extrinsic).unwrap();
        for (s, t) in seq.valid().iter().enumerate() {
            let v: f64 = (0..2).map(|a| pi.prob(t.next_observation, a) * q.get(t.next_observation, a)).sum();
            assert!((targets[s] - (t.extrinsic_reward + 0.8 * v)).abs() < 1e-14);
        }
    }

    #[test]
    fn traces_cut_at_off_policy_actions() {
        // pi always picks action 0; the behavior takes action 1 at step 2
        let pi = StochasticPolicy::deterministic(2, &[0, 0, 0, 0, 0]).unwrap();
        let q = QFunction::zeros(5, 2);
        let rewards = [0.0, 0.0, 0.0, 10.0];
        let seq = chain_sequence(&[0, 1, 2, 3, 4], &[0, 0, 1, 0], &rewards, &[0.5; 4], false);
        let (targets, _) = sequence_targets(&seq, &q, &pi, &cfg(1.0, 0.9), RewardSelect::Extrinsic).unwrap();
        // c_2 = 0, so the reward at step 3 never reaches steps 0 and 1
        assert_eq!(targets[0], 0.0);
        assert_eq!(targets[1], 0.0);
        assert_eq!(targets[2], 0.9 * 10.0);
    }

    #[test]
    fn identity_transform_matches_plain_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let q = QFunction::from_fn(6, 3, |_, _| rng.gen_range(-3.0..3.0));
        let pi = random_policy(&mut rng, 6, 3);
        let seq = chain_sequence(&[0, 4, 2, 5, 1, 3], &[2, 0, 1, 1, 0], &[1.0, 0.0, -0.5, 0.25, 3.0], &[0.3, 0.2, 0.5, 0.9, 0.4], false);
        let (plain, _) = sequence_targets(&seq, &q, &pi, &cfg(0.9, 0.95), RewardSelect::Extrinsic).unwrap();
        let (ident, _) = transformed_sequence_targets(&seq, &q, &pi, &cfg(0.9, 0.95), &IdentityTransform, RewardSelect::Extrinsic).unwrap();
        for (a, b) in plain.iter().zip(&ident) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn targets_ignore_the_online_table() {
        let q_target = QFunction::from_fn(3, 2, |x, a| (x + a) as f64);
        let pi = StochasticPolicy::uniform(3, 2);
        let seq = chain_sequence(&[0, 1, 2], &[0, 1], &[1.0, 2.0], &[0.5, 0.5], false);
        let batch = vec![seq];
        let t1 = retrace_targets_sampled(&batch, &q_target, &pi, &cfg(0.95, 0.9), None, RewardSelect::Extrinsic).unwrap();
        // the online table is not an input at all; losses differ, targets do not
        let online_a = QFunction::zeros(3, 2);
        let online_b = QFunction::filled(3, 2, 5.0);
        let la = retrace_loss(&batch, &online_a, &t1).unwrap();
        let lb = retrace_loss(&batch, &online_b, &t1).unwrap();
        assert_ne!(la.loss, lb.loss);
        let t2 = retrace_targets_sampled(&batch, &q_target, &pi, &cfg(0.95, 0.9), None, RewardSelect::Extrinsic).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn loss_values() {
        let seq = chain_sequence(&[0, 1], &[0], &[0.0], &[1.0], true);
        let batch = vec![seq];
        let targets = RetraceTargets { targets: vec![vec![2.0]], td_errors: vec![vec![2.0]] };
        let out = retrace_loss(&batch, &QFunction::zeros(2, 1), &targets).unwrap();
        assert_eq!(out.loss, 4.0);
        assert_eq!(out.per_step_td, vec![vec![2.0]]);
        let exact = QFunction::from_values(2, 1, vec![2.0, 0.0]).unwrap();
        assert_eq!(retrace_loss(&batch, &exact, &targets).unwrap().loss, 0.0);
        let wrong = RetraceTargets { targets: vec![vec![1.0, 2.0]], td_errors: vec![] };
        assert!(retrace_loss(&batch, &exact, &wrong).is_err());
    }
}
