//! Learner: split Retrace losses on sampled sequences, one optimizer step per
//! batch, priority write-back and periodic target copies.

use super::agent::{AgentSpec, FamilyTables};
use super::replay::{SampledSequence, SequenceReplay};
use crate::error::{Error, Result};
use rand::Rng;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub clip_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerConfig {
    /// Moves each touched entry by `lr` times the mean of `target - Q` over its
    /// occurrences in the batch, so `lr = 1` lands a singly visited entry on its target.
    Sgd { learning_rate: f64 },
    /// Gradient of the summed squared loss, clipped by global norm, with lazily
    /// updated moments on touched entries.
    Adam { learning_rate: f64, config: AdamConfig },
}

#[derive(Debug, Clone, PartialEq)]
struct AdamMoments {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub target_update_period: u64,
    pub divergence_limit: f64,
}

/// Result of one learner step. Losses are measured before the update.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerMetrics {
    pub step: u64,
    pub loss_e: f64,
    pub loss_i: f64,
    pub target_updated: bool,
    /// New priority for every sampled sequence id.
    pub priorities: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Learner {
    config: LearnerConfig,
    online: FamilyTables,
    target: FamilyTables,
    adam: Option<[AdamMoments; 2]>,
    steps: u64,
}

type EntryKey = (usize, usize); // (family index, flat table index)

#[derive(Default)]
struct Accumulator {
    /// Sum of `Q - target` and occurrence count per entry.
    entries: BTreeMap<EntryKey, (f64, u32)>,
}

impl Accumulator {
    fn add(&mut self, key: EntryKey, residual: f64) {
        let e = self.entries.entry(key).or_insert((0.0, 0));
        e.0 += residual;
        e.1 += 1;
    }
}

impl Learner {
    pub fn new(config: LearnerConfig, initial: FamilyTables) -> Result<Self> {
        if config.batch_size == 0 || config.target_update_period == 0 {
            return Err(Error::Config("batch size and target update period must be positive".into()));
        }
        let adam = match config.optimizer {
            OptimizerConfig::Sgd { learning_rate } | OptimizerConfig::Adam { learning_rate, .. }
                if !(learning_rate > 0.0) =>
            {
                return Err(Error::Config(format!("learning rate {learning_rate} must be positive")))
            }
            OptimizerConfig::Sgd { .. } => None,
            OptimizerConfig::Adam { .. } => {
                let size = initial.num_states() * initial.num_actions();
                let zeros = vec![vec![0.0; size]; initial.num_policies()];
                let moments = AdamMoments { m: zeros.clone(), v: zeros };
                Some([moments.clone(), moments])
            }
        };
        Ok(Self { config, target: initial.clone(), online: initial, adam, steps: 0 })
    }

    pub fn online(&self) -> &FamilyTables {
        &self.online
    }

    pub fn target(&self) -> &FamilyTables {
        &self.target
    }

    pub fn into_online(self) -> FamilyTables {
        self.online
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Samples a batch, trains on it and writes the new priorities back.
    pub fn step(&mut self, replay: &mut SequenceReplay, spec: &AgentSpec, rng: &mut impl Rng) -> Result<LearnerMetrics> {
        let batch = replay.sample(self.config.batch_size, rng)?;
        let metrics = self.train_on(&batch, spec)?;
        for &(id, p) in &metrics.priorities {
            replay.update_priority(id, p)?;
        }
        Ok(metrics)
    }

    /// One optimizer step on an already sampled batch.
    pub fn train_on(&mut self, batch: &[SampledSequence], spec: &AgentSpec) -> Result<LearnerMetrics> {
        spec.check_tables(&self.online)?;
        let na = self.online.num_actions();
        let mut acc = [Accumulator::default(), Accumulator::default()];
        let mut targets = Vec::with_capacity(batch.len());
        let (mut loss_e, mut loss_i) = (0.0, 0.0);
        for item in batch {
            let seq = &item.sequence;
            let j = seq.family_index();
            let errs = spec.sequence_errors(seq, &self.online, &self.target)?;
            for (t, (&de, &di)) in seq.valid().iter().zip(errs.td_e.iter().zip(&errs.td_i)) {
                let idx = t.observation * na + t.action;
                acc[0].add((j, idx), -de);
                acc[1].add((j, idx), -di);
                loss_e += de * de;
                loss_i += di * di;
            }
            targets.push((item.id, j, errs.targets_e, errs.targets_i));
        }

        for (kind, a) in acc.iter().enumerate() {
            self.apply(kind, a)?;
        }

        let mut priorities = Vec::with_capacity(batch.len());
        for (item, (id, j, te, ti)) in batch.iter().zip(&targets) {
            let valid = item.sequence.valid();
            let td = |ys: &[f64], kind: usize| -> Vec<f64> {
                let q = if kind == 0 { &self.online.extrinsic[*j] } else { &self.online.intrinsic[*j] };
                valid.iter().zip(ys).map(|(t, &y)| y - q.get(t.observation, t.action)).collect()
            };
            priorities.push((*id, spec.priority(*j, &td(te, 0), &td(ti, 1))?));
        }

        self.steps += 1;
        let target_updated = self.steps.is_multiple_of(self.config.target_update_period);
        if target_updated {
            self.target = self.online.clone();
        }
        Ok(LearnerMetrics { step: self.steps, loss_e, loss_i, target_updated, priorities })
    }

    fn apply(&mut self, kind: usize, acc: &Accumulator) -> Result<()> {
        let tables = if kind == 0 { &mut self.online.extrinsic } else { &mut self.online.intrinsic };
        match self.config.optimizer {
            OptimizerConfig::Sgd { learning_rate } => {
                for (&(j, idx), &(sum, count)) in &acc.entries {
                    let values = tables[j].values_mut();
                    values[idx] -= learning_rate * sum / count as f64;
                }
            }
            OptimizerConfig::Adam { learning_rate, config } => {
                let moments = &mut self.adam.as_mut().expect("adam moments exist for the adam optimizer")[kind];
                let norm = acc.entries.values().map(|&(s, _)| (2.0 * s).powi(2)).sum::<f64>().sqrt();
                let scale = if norm > config.clip_norm { config.clip_norm / norm } else { 1.0 };
                let t = (self.steps + 1) as i32;
                let (c1, c2) = (1.0 - config.beta1.powi(t), 1.0 - config.beta2.powi(t));
                for (&(j, idx), &(sum, _)) in &acc.entries {
                    let g = 2.0 * sum * scale;
                    let m = &mut moments.m[j][idx];
                    let v = &mut moments.v[j][idx];
                    *m = config.beta1 * *m + (1.0 - config.beta1) * g;
                    *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
                    let step = learning_rate * (*m / c1) / ((*v / c2).sqrt() + config.epsilon);
                    tables[j].values_mut()[idx] -= step;
                }
            }
        }
        for &(j, idx) in acc.entries.keys() {
            let v = tables[j].values()[idx];
            if !v.is_finite() || v.abs() > self.config.divergence_limit {
                let which = if kind == 0 { "extrinsic" } else { "intrinsic" };
                return Err(Error::Divergence(format!(
                    "{which} table {j} entry {idx} reached {v:e} after learner step {} (limit {:e})",
                    self.steps + 1,
                    self.config.divergence_limit
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::MixKind;
    use crate::family::PolicyFamily;
    use crate::sequence::{Transition, TransitionSequence};

    fn spec() -> AgentSpec {
        AgentSpec {
            family: PolicyFamily::from_pairs(vec![(0.0, 0.9)]).unwrap(),
            lambda: 0.95,
            transform: None,
            mix: MixKind::Identity,
            eta: 0.9,
            priority_floor: 0.0,
        }
    }

    fn learner(lr: f64) -> Learner {
        let cfg = LearnerConfig {
            optimizer: OptimizerConfig::Sgd { learning_rate: lr },
            batch_size: 1,
            target_update_period: 3,
            divergence_limit: 1e9,
        };
        Learner::new(cfg, FamilyTables::zeros(1, 2, 2)).unwrap()
    }

    fn batch() -> Vec<SampledSequence> {
        let t = Transition::simple(0, 1, 1.0, 2.0, 1).with_terminal(true);
        vec![SampledSequence { id: 7, sequence: TransitionSequence::new(vec![t]) }]
    }

    #[test]
    fn unit_learning_rate_lands_on_target() {
        let mut l = learner(1.0);
        let m = l.train_on(&batch(), &spec()).unwrap();
        assert_eq!(l.online().extrinsic[0].get(0, 1), 2.0);
        assert_eq!(m.loss_e, 4.0);
        assert_eq!(m.priorities, vec![(7, 0.0)]);
    }

    #[test]
    fn zero_loss_leaves_tables_unchanged() {
        let mut l = learner(1.0);
        let t = Transition::simple(0, 1, 1.0, 0.0, 1).with_terminal(true);
        let b = vec![SampledSequence { id: 0, sequence: TransitionSequence::new(vec![t]) }];
        let before = l.online().clone();
        l.train_on(&b, &spec()).unwrap();
        assert_eq!(l.online(), &before);
    }

    #[test]
    fn target_copies_on_period() {
        let mut l = learner(0.5);
        for step in 1..=3 {
            let m = l.train_on(&batch(), &spec()).unwrap();
            assert_eq!(m.target_updated, step == 3);
            if step < 3 {
                assert_eq!(l.target().extrinsic[0].get(0, 1), 0.0);
            }
        }
        assert_eq!(l.target(), l.online());
    }

    #[test]
    fn divergence_guard_trips() {
        let cfg = LearnerConfig {
            optimizer: OptimizerConfig::Sgd { learning_rate: 1.0 },
            batch_size: 1,
            target_update_period: 10,
            divergence_limit: 1.0,
        };
        let mut l = Learner::new(cfg, FamilyTables::zeros(1, 2, 2)).unwrap();
        assert!(matches!(l.train_on(&batch(), &spec()), Err(Error::Divergence(_))));
    }
}
