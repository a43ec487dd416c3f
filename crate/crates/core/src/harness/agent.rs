//! Per-family value tables and the pieces of learning logic shared by actors,
//! learner and evaluator.

use crate::decomposition::MixKind;
use crate::error::{Error, Result};
use crate::family::PolicyFamily;
use crate::mdp::{Policy, QFunction, QTable, RewardSelect, SquashTransform};
use crate::retrace::{sequence_targets, transformed_sequence_targets, TraceConfig};
use crate::sequence::TransitionSequence;
use rand::Rng;
use std::cell::Cell;

use super::replay::sequence_priority;

/// Extrinsic and intrinsic tables for every family index `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyTables {
    pub extrinsic: Vec<QFunction>,
    pub intrinsic: Vec<QFunction>,
}

impl FamilyTables {
    pub fn zeros(num_policies: usize, num_states: usize, num_actions: usize) -> Self {
        Self {
            extrinsic: vec![QFunction::zeros(num_states, num_actions); num_policies],
            intrinsic: vec![QFunction::zeros(num_states, num_actions); num_policies],
        }
    }

    pub fn num_policies(&self) -> usize {
        self.extrinsic.len()
    }

    pub fn num_states(&self) -> usize {
        self.extrinsic[0].num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.extrinsic[0].num_actions()
    }

    /// Largest absolute entry over every table.
    pub fn sup_norm(&self) -> f64 {
        self.extrinsic.iter().chain(&self.intrinsic).map(QFunction::sup_norm).fold(0.0, f64::max)
    }
}

/// Deterministic policy greedy on `mix(Q^e_j, Q^i_j)` with the lowest-index tie rule.
#[derive(Debug)]
pub struct GreedyMix<'a> {
    qe: &'a QFunction,
    qi: &'a QFunction,
    beta: f64,
    mix: MixKind,
    h: SquashTransform,
    cache: Cell<Option<(usize, usize)>>,
}

impl<'a> GreedyMix<'a> {
    pub fn new(qe: &'a QFunction, qi: &'a QFunction, beta: f64, mix: MixKind, h: SquashTransform) -> Self {
        Self { qe, qi, beta, mix, h, cache: Cell::new(None) }
    }

    pub fn action(&self, state: usize) -> usize {
        if let Some((s, a)) = self.cache.get() {
            if s == state {
                return a;
            }
        }
        let (re, ri) = (self.qe.row(state), self.qi.row(state));
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for a in 0..re.len() {
            let v = self.mix.mix_values(re[a], ri[a], self.beta, &self.h);
            if v > best_value {
                best = a;
                best_value = v;
            }
        }
        self.cache.set(Some((state, best)));
        best
    }
}

impl Policy for GreedyMix<'_> {
    fn prob(&self, state: usize, action: usize) -> f64 {
        if self.action(state) == action {
            1.0
        } else {
            0.0
        }
    }
}

/// Targets and TD errors of one sequence for both value components.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceErrors {
    pub targets_e: Vec<f64>,
    pub targets_i: Vec<f64>,
    /// `target - Q_online` per valid step.
    pub td_e: Vec<f64>,
    pub td_i: Vec<f64>,
}

/// Settings that turn tables and sequences into targets, actions and priorities.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub family: PolicyFamily,
    pub lambda: f64,
    /// Transform used by the Retrace losses; `None` is plain Retrace.
    pub transform: Option<SquashTransform>,
    pub mix: MixKind,
    pub eta: f64,
    pub priority_floor: f64,
}

impl AgentSpec {
    fn mix_h(&self) -> SquashTransform {
        self.transform.unwrap_or_default()
    }

    pub fn check_tables(&self, tables: &FamilyTables) -> Result<()> {
        if tables.num_policies() != self.family.len() {
            return Err(Error::Dimension(format!(
                "{} table pairs for a family of {}",
                tables.num_policies(),
                self.family.len()
            )));
        }
        Ok(())
    }

    pub fn greedy<'a>(&self, tables: &'a FamilyTables, j: usize) -> GreedyMix<'a> {
        GreedyMix::new(&tables.extrinsic[j], &tables.intrinsic[j], self.family.beta(j), self.mix, self.mix_h())
    }

    /// Mixed action values of `state` for family member `j`.
    pub fn mixed_row(&self, tables: &FamilyTables, j: usize, state: usize, out: &mut Vec<f64>) {
        let (re, ri) = (tables.extrinsic[j].row(state), tables.intrinsic[j].row(state));
        let (beta, h) = (self.family.beta(j), self.mix_h());
        out.clear();
        out.extend(re.iter().zip(ri).map(|(&e, &i)| self.mix.mix_values(e, i, beta, &h)));
    }

    /// `eps`-greedy action on the mix with its behavior probability. Ties
    /// between greedy actions are broken uniformly at random so untrained
    /// tables do not pin the agent to one action.
    pub fn select_action(
        &self,
        tables: &FamilyTables,
        j: usize,
        state: usize,
        epsilon: f64,
        rng: &mut impl Rng,
        buf: &mut Vec<f64>,
    ) -> (usize, f64) {
        let na = tables.num_actions();
        if rng.gen::<f64>() < epsilon {
            return (rng.gen_range(0..na), behavior_probability(false, epsilon, na));
        }
        self.mixed_row(tables, j, state, buf);
        let best = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ties = buf.iter().filter(|&&v| v == best).count();
        let pick = if ties > 1 { rng.gen_range(0..ties) } else { 0 };
        let action = buf.iter().enumerate().filter(|(_, &v)| v == best).nth(pick).map_or(0, |(a, _)| a);
        (action, behavior_probability(true, epsilon, na))
    }

    fn trace_config(&self, j: usize) -> Result<TraceConfig> {
        TraceConfig::new(self.lambda, self.family.gamma(j))
    }

    /// Targets from `target` tables (with `pi` greedy on their mix) and TD
    /// errors against `online`, for the sequence's own family member.
    pub fn sequence_errors(&self, seq: &TransitionSequence, online: &FamilyTables, target: &FamilyTables) -> Result<SequenceErrors> {
        let j = seq.family_index();
        if j >= self.family.len() {
            return Err(Error::OutOfRange { index: j, limit: self.family.len() });
        }
        let cfg = self.trace_config(j)?;
        let pi = self.greedy(target, j);
        let compute = |q: &QFunction, select| match &self.transform {
            Some(h) => transformed_sequence_targets(seq, q, &pi, &cfg, h, select),
            None => sequence_targets(seq, q, &pi, &cfg, select),
        };
        let (targets_e, _) = compute(&target.extrinsic[j], RewardSelect::Extrinsic)?;
        let (targets_i, _) = compute(&target.intrinsic[j], RewardSelect::Intrinsic)?;
        let td = |targets: &[f64], q: &QFunction| -> Vec<f64> {
            seq.valid().iter().zip(targets).map(|(t, &y)| y - q.get(t.observation, t.action)).collect()
        };
        let td_e = td(&targets_e, &online.extrinsic[j]);
        let td_i = td(&targets_i, &online.intrinsic[j]);
        Ok(SequenceErrors { targets_e, targets_i, td_e, td_i })
    }

    /// Priority from per-step `|td_e| + beta_j |td_i|`, floored at `priority_floor`.
    pub fn priority(&self, j: usize, td_e: &[f64], td_i: &[f64]) -> Result<f64> {
        let beta = self.family.beta(j);
        let combined: Vec<f64> = td_e.iter().zip(td_i).map(|(e, i)| e.abs() + beta * i.abs()).collect();
        Ok(sequence_priority(&combined, self.eta)?.max(self.priority_floor))
    }
}

/// `eps / |A|` for a uniform draw, `1 - eps (|A| - 1) / |A|` for the greedy choice.
pub fn behavior_probability(is_greedy_action: bool, epsilon: f64, action_count: usize) -> f64 {
    let n = action_count.max(1) as f64;
    if is_greedy_action {
        1.0 - epsilon * (n - 1.0) / n
    } else {
        epsilon / n
    }
}
