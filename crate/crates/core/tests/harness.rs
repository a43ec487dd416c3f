use std::sync::{Arc, Mutex};

use familyrl::bandit::{BanditConfig, BanditState};
use familyrl::decomposition::MixKind;
use familyrl::env::{coin_to_mdp, Environment, Observation, RandomCoinConfig, RandomCoinEnv, StepOutcome};
use familyrl::family::PolicyFamily;
use familyrl::harness::{
    run_single, run_training, Actor, ActorConfig, AgentSpec, Evaluator, FamilyTables, HarnessConfig, Learner,
    LearnerConfig, OptimizerConfig, SampledSequence, SequenceReplay,
};
use familyrl::mdp::{value_iteration, RewardSelect};
use familyrl::sequence::TransitionSequence;
use familyrl::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ROOM: RandomCoinConfig = RandomCoinConfig { width: 5, height: 5, max_steps: 60 };

fn single_arm_spec() -> AgentSpec {
    AgentSpec {
        family: PolicyFamily::from_pairs(vec![(0.0, 0.99)]).unwrap(),
        lambda: 0.95,
        transform: None,
        mix: MixKind::Identity,
        eta: 0.9,
        priority_floor: 1e-3,
    }
}

fn optimal_tables() -> Arc<FamilyTables> {
    let mdp = coin_to_mdp(&ROOM).unwrap();
    let q = value_iteration(&mdp, 0.99, 1e-12, 10_000, RewardSelect::Extrinsic).unwrap();
    let mut tables = FamilyTables::zeros(1, mdp.num_states(), mdp.num_actions());
    tables.extrinsic[0] = q;
    Arc::new(tables)
}

fn actor(env: Box<dyn Environment>, epsilon: f64, tables: Arc<FamilyTables>, h: usize, p: usize) -> Actor {
    let cfg = ActorConfig {
        index: 0,
        num_actors: 1,
        base_epsilon: epsilon,
        alpha: 8.0,
        refresh_period: 400,
        trace_length: h,
        replay_period: p,
    };
    let bandit = BanditState::new(BanditConfig::actor(tables.num_policies())).unwrap();
    Actor::new(cfg, env, bandit, None, ChaCha8Rng::seed_from_u64(9), tables).unwrap()
}

fn manhattan(state: usize) -> usize {
    let cells = ROOM.cells();
    let (a, c) = (ROOM.position(state / cells), ROOM.position(state % cells));
    a.0.abs_diff(c.0) + a.1.abs_diff(c.1)
}

#[test]
fn greedy_actor_on_optimal_table_walks_the_shortest_path() {
    let spec = single_arm_spec();
    let env = Box::new(RandomCoinEnv::new(ROOM, 3).unwrap());
    let mut actor = actor(env, 0.0, optimal_tables(), 4, 2);
    for _ in 0..30 {
        let (sequences, summary) = actor.run_episode(&spec).unwrap();
        let start = sequences[0].transitions[0].observation;
        assert_eq!(summary.extrinsic_return, 1.0);
        assert_eq!(summary.length, manhattan(start));
        assert!(sequences.iter().flat_map(|s| s.valid()).all(|t| t.behavior_prob == 1.0));
    }
}

#[test]
fn emitted_sequences_respect_episode_layout() {
    let spec = single_arm_spec();
    let (h, p) = (6, 2);
    let env = Box::new(RandomCoinEnv::new(ROOM, 5).unwrap());
    let mut actor = actor(env, 0.5, Arc::new(FamilyTables::zeros(1, ROOM.cells() * ROOM.cells(), 4)), h, p);
    let mut padded_seen = false;
    for _ in 0..40 {
        let (sequences, summary) = actor.run_episode(&spec).unwrap();
        assert!(!sequences.is_empty());
        for seq in &sequences {
            seq.validate().unwrap();
            assert_eq!(seq.len(), h);
            assert!(seq.transitions.iter().all(|t| t.family_index == summary.arm));
            let mask = seq.mask();
            assert!(mask.iter().take(seq.valid_len).all(|&m| m));
            assert!(mask.iter().skip(seq.valid_len).all(|&m| !m));
            padded_seen |= seq.valid_len < h;
            // only the final valid step may end the episode
            assert!(seq.valid()[..seq.valid_len - 1].iter().all(|t| !t.terminal));
        }
        for pair in sequences.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if b.valid_len > p {
                assert_eq!(&a.transitions[h - p..h], &b.transitions[..p], "overlap equals replay_period");
            }
        }
        let covered: usize = sequences.last().map_or(0, |s| (sequences.len() - 1) * (h - p) + s.valid_len);
        assert_eq!(covered, summary.length);
    }
    assert!(padded_seen);
}

/// Coin room that fails on a chosen step and records its reset observations.
struct FaultyEnv {
    inner: RandomCoinEnv,
    fail_at: usize,
    steps: usize,
    resets: Arc<Mutex<Vec<usize>>>,
}

impl Environment for FaultyEnv {
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    fn reset(&mut self) -> Observation {
        let obs = self.inner.reset();
        self.resets.lock().unwrap().push(obs.state);
        obs
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        self.steps += 1;
        if self.steps == self.fail_at {
            return Err(Error::Internal("injected fault".into()));
        }
        self.inner.step(action)
    }
}

#[test]
fn environment_fault_aborts_the_episode() {
    let spec = single_arm_spec();
    let resets = Arc::new(Mutex::new(Vec::new()));
    // a random walk in a wide room takes well over five steps to end
    let room = RandomCoinConfig { width: 30, height: 1, max_steps: 500 };
    let env = FaultyEnv { inner: RandomCoinEnv::new(room, 1).unwrap(), fail_at: 5, steps: 0, resets: resets.clone() };
    let cfg = ActorConfig {
        index: 0,
        num_actors: 1,
        base_epsilon: 1.0,
        alpha: 8.0,
        refresh_period: 400,
        trace_length: 3,
        replay_period: 1,
    };
    let bandit = BanditState::new(BanditConfig::actor(1)).unwrap();
    let tables = Arc::new(FamilyTables::zeros(1, room.cells() * room.cells(), 4));
    let mut actor = Actor::new(cfg, Box::new(env), bandit, None, ChaCha8Rng::seed_from_u64(2), tables).unwrap();
    let mut emitted = Vec::new();
    let err = loop {
        match actor.step(&spec) {
            Ok(step) => {
                assert!(step.finished.is_none());
                emitted.extend(step.sequences);
            }
            Err(e) => break e,
        }
    };
    assert!(matches!(err, Error::Internal(_)));
    // only the full window [0, 3) of the aborted episode was emitted
    assert_eq!(emitted.len(), 1);
    assert_eq!(actor.frames(), 4);
    let (sequences, summary) = actor.run_episode(&spec).unwrap();
    let resets = resets.lock().unwrap().clone();
    assert_eq!(resets.len(), 2);
    let first = sequences[0].transitions[0];
    assert_eq!(first.observation, resets[1]);
    assert_eq!((first.prev_action, first.prev_extrinsic_reward), (0, 0.0));
    let valid: usize = sequences.last().map(|s| (sequences.len() - 1) * 2 + s.valid_len).unwrap();
    assert_eq!(valid, summary.length);
}

#[test]
fn evaluator_with_one_policy_is_greedy_performance() {
    let spec = single_arm_spec();
    let env = Box::new(RandomCoinEnv::new(ROOM, 11).unwrap());
    let bandit = BanditState::new(BanditConfig::evaluator(1)).unwrap();
    let mut evaluator = Evaluator::new(env, bandit, ChaCha8Rng::seed_from_u64(4), 0.0, 5, optimal_tables()).unwrap();
    let records = evaluator.run_episodes(&spec, 40).unwrap();
    assert_eq!(records.len(), 4);
    for record in &records {
        assert_eq!(record.arm, 0);
        assert_eq!(record.episode_returns, vec![1.0; 5]);
        assert_eq!(record.mean_return, 1.0);
    }
    assert_eq!(evaluator.bandit().greedy_arm(), 0);
}

/// Collects a few sequences by acting on zero tables.
fn frozen_batch(spec: &AgentSpec) -> Vec<SampledSequence> {
    let env = Box::new(RandomCoinEnv::new(ROOM, 21).unwrap());
    let mut actor = actor(env, 1.0, Arc::new(FamilyTables::zeros(1, ROOM.cells() * ROOM.cells(), 4)), 8, 4);
    let mut batch = Vec::new();
    while batch.len() < 12 {
        let (sequences, _) = actor.run_episode(spec).unwrap();
        for sequence in sequences {
            batch.push(SampledSequence { id: batch.len() as u64, sequence });
        }
    }
    batch
}

fn learner(period: u64, lr: f64) -> Learner {
    let cfg = LearnerConfig {
        optimizer: OptimizerConfig::Sgd { learning_rate: lr },
        batch_size: 12,
        target_update_period: period,
        divergence_limit: 1e9,
    };
    let mut init = FamilyTables::zeros(1, ROOM.cells() * ROOM.cells(), 4);
    for (k, v) in init.extrinsic[0].values_mut().iter_mut().enumerate() {
        *v = ((k * 37) % 11) as f64 / 11.0;
    }
    Learner::new(cfg, init).unwrap()
}

#[test]
fn target_tables_are_frozen_between_updates() {
    let spec = single_arm_spec();
    let batch = frozen_batch(&spec);
    let mut learner = learner(7, 0.3);
    let probe = &batch[0].sequence;
    let mut previous_target = learner.target().clone();
    let mut previous_targets = spec.sequence_errors(probe, learner.online(), learner.target()).unwrap().targets_e;
    for step in 1..=21u64 {
        let metrics = learner.train_on(&batch, &spec).unwrap();
        assert_eq!(metrics.step, step);
        if step % 7 == 0 {
            assert!(metrics.target_updated);
            assert_eq!(learner.target(), learner.online());
            assert_ne!(learner.target(), &previous_target);
        } else {
            assert!(!metrics.target_updated);
            assert_eq!(learner.target(), &previous_target);
            let targets = spec.sequence_errors(probe, learner.online(), learner.target()).unwrap().targets_e;
            let same_bits = targets.iter().zip(&previous_targets).all(|(a, b)| a.to_bits() == b.to_bits());
            assert!(same_bits, "targets moved between target updates at step {step}");
        }
        previous_target = learner.target().clone();
        previous_targets = spec.sequence_errors(probe, learner.online(), learner.target()).unwrap().targets_e;
    }
}

#[test]
fn priorities_shrink_on_a_frozen_batch() {
    let spec = single_arm_spec();
    let batch = frozen_batch(&spec);
    let mut learner = learner(1_000_000, 0.3);
    let mut losses = Vec::new();
    let mut first_priorities = None;
    let mut last_priorities = Vec::new();
    for _ in 0..50 {
        let metrics = learner.train_on(&batch, &spec).unwrap();
        losses.push(metrics.loss_e);
        let mean = metrics.priorities.iter().map(|p| p.1).sum::<f64>() / metrics.priorities.len() as f64;
        first_priorities.get_or_insert(mean);
        last_priorities.push(mean);
    }
    assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-15), "loss must not increase: {losses:?}");
    assert!(losses[49] < 0.05 * losses[0]);
    assert!(*last_priorities.last().unwrap() < 0.25 * first_priorities.unwrap());
}

#[test]
fn replay_draws_follow_priorities() {
    let mut replay = SequenceReplay::new(10, 1).unwrap();
    let mut seq = |p: f64| {
        let mut s = TransitionSequence::new(vec![familyrl::sequence::Transition::simple(0, 0, 1.0, 0.0, 0)]);
        s.priority = p;
        replay.insert(s).unwrap()
    };
    let (a, b, z) = (seq(3.0), seq(1.0), seq(0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 100_000;
    let draws = replay.sample(n, &mut rng).unwrap();
    let count_a = draws.iter().filter(|d| d.id == a).count() as f64;
    assert!(draws.iter().all(|d| d.id == a || d.id == b));
    assert!(draws.iter().all(|d| d.id != z));
    let sigma = (0.75f64 * 0.25 / n as f64).sqrt();
    assert!((count_a / n as f64 - 0.75).abs() <= 3.0 * sigma, "frequency {}", count_a / n as f64);

    let mut equal = SequenceReplay::new(10, 1).unwrap();
    let ids: Vec<u64> = (0..4)
        .map(|_| {
            let mut s = TransitionSequence::new(vec![familyrl::sequence::Transition::simple(0, 0, 1.0, 0.0, 0)]);
            s.priority = 2.0;
            equal.insert(s).unwrap()
        })
        .collect();
    let draws = equal.sample(n, &mut rng).unwrap();
    let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
    for id in ids {
        let f = draws.iter().filter(|d| d.id == id).count() as f64 / n as f64;
        assert!((f - 0.25).abs() <= 3.0 * sigma, "frequency {f}");
    }
}

fn small_config(extra: &str) -> HarnessConfig {
    let text = format!(
        "coin_width = 5\ncoin_height = 5\nmax_episode_steps = 60\nnum_actors = 2\nminimum_sequences_to_start_replay = 16\nframe_budget = 20000\nfinal_eval_episodes = 5\n{extra}"
    );
    HarnessConfig::parse(&text).unwrap()
}

#[test]
fn single_process_runs_are_reproducible() {
    let cfg = small_config("family = 0:0.99, 0.3:0.99\nseed = 4");
    let a = run_single(&cfg).unwrap();
    let b = run_single(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.metrics_csv().unwrap(), b.metrics_csv().unwrap());
    assert!(a.actor_frames >= 20_000);
    assert!(a.learner_steps > 0);
    let mut other = cfg.clone();
    other.seed = 5;
    assert_ne!(run_single(&other).unwrap().metrics_csv().unwrap(), a.metrics_csv().unwrap());
}

#[test]
fn intrinsic_tables_stay_put_without_intrinsic_rewards() {
    let cfg = small_config("family = 0:0.99, 0:0.9\nintrinsic_rewards = false\nseed = 2");
    let run = run_single(&cfg).unwrap();
    assert!(run.learner_steps > 0);
    assert!(run.tables.intrinsic.iter().all(|q| q.values().iter().all(|&v| v == 0.0)));
    assert!(run.tables.extrinsic.iter().any(|q| q.values().iter().any(|&v| v != 0.0)));
    assert!(run.actor_episodes.iter().all(|e| e.intrinsic_return == 0.0));
}

#[test]
fn multi_worker_run_completes() {
    let cfg = small_config("family = 0:0.99, 0.3:0.99\nmode = multi\nseed = 6");
    let run = run_training(&cfg).unwrap();
    assert!(run.actor_frames >= 20_000);
    assert!(run.learner_steps > 0);
    assert_eq!(run.final_arms.len(), 2);
    assert!(run.final_arms.iter().all(|a| a.returns.len() == 5));
    assert!(!run.actor_episodes.is_empty());
    assert_eq!(run.arm_counts().iter().sum::<u64>(), run.actor_episodes.len() as u64);
}

#[test]
fn divergent_learning_rate_is_reported() {
    let mut cfg = small_config("family = 0:0.99\noptimizer = adam\nlearning_rate = 100\nseed = 1");
    cfg.divergence_limit = 10.0;
    match run_single(&cfg) {
        Err(Error::Divergence(_)) => {}
        other => panic!("expected a divergence error, got {other:?}"),
    }
}
