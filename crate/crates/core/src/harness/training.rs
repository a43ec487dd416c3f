//! Run orchestration: a deterministic single-process interleave and a
//! multi-worker mode with threads and channels.

use super::actor::{Actor, ActorConfig, EpisodeSummary};
use super::agent::{AgentSpec, FamilyTables};
use super::config::{EnvKind, HarnessConfig, OptimizerKind, RunMode};
use super::evaluator::{evaluate_arm, EvalRecord, Evaluator};
use super::learner::{AdamConfig, Learner, LearnerConfig, OptimizerConfig};
use super::replay::{SampledSequence, SequenceReplay};
use crate::bandit::BanditState;
use crate::env::{Environment, MdpGenerator, RandomCoinEnv, RandomMdpEnv};
use crate::error::{Error, Result};
use crate::metrics::{write_metrics_csv, MetricsRow};
use crate::novelty::{EpisodicMemory, LifelongModulator, NoveltyModule};
use crate::sequence::TransitionSequence;
use crossbeam_channel::{bounded, unbounded, Receiver, Sender};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

/// Window of the reported evaluator return mean.
pub const RETURN_WINDOW: usize = 50;

const STREAM_ACTOR: u64 = 1_000;
const STREAM_ACTOR_ENV: u64 = 2_000;
const STREAM_ACTOR_NOVELTY: u64 = 3_000;
const STREAM_EVALUATOR: u64 = 4_000;
const STREAM_EVALUATOR_ENV: u64 = 4_001;
const STREAM_LEARNER: u64 = 5_000;
const STREAM_FINAL: u64 = 6_000;
const STREAM_FINAL_ENV: u64 = 6_001;

/// Independent generator for one component of a seeded run.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn stream_seed(seed: u64, stream: u64) -> u64 {
    rng_stream(seed, stream).gen()
}

pub fn make_env(cfg: &HarnessConfig, seed: u64) -> Result<Box<dyn Environment>> {
    Ok(match cfg.env {
        EnvKind::RandomCoin => Box::new(RandomCoinEnv::new(cfg.coin, seed)?),
        EnvKind::RandomMdp => {
            let mdp = MdpGenerator::new(cfg.random_mdp_states, cfg.random_mdp_actions)
                .seed(cfg.random_mdp_seed)
                .generate()?;
            Box::new(RandomMdpEnv::new(mdp, cfg.random_mdp_max_steps, seed)?)
        }
    })
}

pub fn agent_spec(cfg: &HarnessConfig) -> Result<AgentSpec> {
    Ok(AgentSpec {
        family: cfg.family()?,
        lambda: cfg.retrace_lambda,
        transform: cfg.value_transform,
        mix: cfg.value_mix,
        eta: cfg.priority_exponent,
        priority_floor: cfg.priority_floor,
    })
}

pub fn learner_config(cfg: &HarnessConfig) -> LearnerConfig {
    let optimizer = match cfg.optimizer {
        OptimizerKind::Sgd => OptimizerConfig::Sgd { learning_rate: cfg.learning_rate },
        OptimizerKind::Adam => OptimizerConfig::Adam {
            learning_rate: cfg.learning_rate,
            config: AdamConfig {
                beta1: cfg.adam_beta1,
                beta2: cfg.adam_beta2,
                epsilon: cfg.adam_epsilon,
                clip_norm: cfg.adam_clip_norm,
            },
        },
    };
    LearnerConfig {
        optimizer,
        batch_size: cfg.batch_size,
        target_update_period: cfg.target_update_period,
        divergence_limit: cfg.divergence_limit,
    }
}

fn make_novelty(cfg: &HarnessConfig, embedding_dim: usize, seed: u64) -> Result<Option<NoveltyModule>> {
    if !cfg.intrinsic_rewards {
        return Ok(None);
    }
    let episodic = EpisodicMemory::new(cfg.episodic_memory_capacity, cfg.kernel_neighbors, cfg.kernel_epsilon)?;
    let lifelong = LifelongModulator::new(cfg.lifelong_backend, embedding_dim, seed)?;
    Ok(Some(NoveltyModule::new(episodic, lifelong, cfg.intrinsic)?))
}

fn make_actor(cfg: &HarnessConfig, index: usize, tables: Arc<FamilyTables>) -> Result<Actor> {
    let mut env = make_env(cfg, stream_seed(cfg.seed, STREAM_ACTOR_ENV + index as u64))?;
    let dim = env.reset().embedding.len();
    let actor_cfg = ActorConfig {
        index,
        num_actors: cfg.num_actors,
        base_epsilon: cfg.actor_base_epsilon,
        alpha: cfg.actor_epsilon_alpha,
        refresh_period: cfg.actor_update_period,
        trace_length: cfg.trace_length,
        replay_period: cfg.replay_period,
    };
    let bandit = BanditState::new(cfg.actor_bandit.with_arms(tables.num_policies()))?;
    let novelty = make_novelty(cfg, dim, stream_seed(cfg.seed, STREAM_ACTOR_NOVELTY + index as u64))?;
    Actor::new(actor_cfg, env, bandit, novelty, rng_stream(cfg.seed, STREAM_ACTOR + index as u64), tables)
}

fn make_evaluator(cfg: &HarnessConfig, tables: Arc<FamilyTables>) -> Result<Evaluator> {
    let env = make_env(cfg, stream_seed(cfg.seed, STREAM_EVALUATOR_ENV))?;
    let bandit = BanditState::new(cfg.evaluator_bandit.with_arms(tables.num_policies()))?;
    Evaluator::new(env, bandit, rng_stream(cfg.seed, STREAM_EVALUATOR), cfg.evaluation_epsilon, cfg.evaluator_block, tables)
}

fn initial_tables(cfg: &HarnessConfig, spec: &AgentSpec) -> Result<FamilyTables> {
    let env = make_env(cfg, 0)?;
    Ok(FamilyTables::zeros(spec.family.len(), env.num_states(), env.num_actions()))
}

/// Closing per-arm evaluation on the final online tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmEvaluation {
    pub arm: usize,
    pub beta: f64,
    pub gamma: f64,
    pub returns: Vec<f64>,
    pub mean_return: f64,
}

/// Everything a training run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub metrics: Vec<MetricsRow>,
    pub evaluation_records: Vec<EvalRecord>,
    pub actor_episodes: Vec<EpisodeSummary>,
    pub final_arms: Vec<ArmEvaluation>,
    pub tables: FamilyTables,
    pub actor_frames: u64,
    pub evaluator_frames: u64,
    pub final_eval_frames: u64,
    pub learner_steps: u64,
}

impl TrainingRun {
    /// Environment steps taken by actors, the evaluator and the closing evaluation.
    pub fn total_env_steps(&self) -> u64 {
        self.actor_frames + self.evaluator_frames + self.final_eval_frames
    }

    /// Mean extrinsic return of `arm` in the closing evaluation.
    pub fn final_return(&self, arm: usize) -> Option<f64> {
        self.final_arms.get(arm).map(|a| a.mean_return)
    }

    /// Actor episodes per arm.
    pub fn arm_counts(&self) -> Vec<u64> {
        let mut counts = vec![0; self.final_arms.len().max(self.tables.num_policies())];
        for e in &self.actor_episodes {
            counts[e.arm] += 1;
        }
        counts
    }

    pub fn metrics_csv(&self) -> Result<String> {
        let mut out = Vec::new();
        write_metrics_csv(&self.metrics, &mut out)?;
        String::from_utf8(out).map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn final_eval_csv(&self) -> String {
        let mut out = String::from("arm,beta,gamma,episodes,mean_return\n");
        for a in &self.final_arms {
            out.push_str(&format!("{},{},{},{},{}\n", a.arm, a.beta, a.gamma, a.returns.len(), a.mean_return));
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "actor_frames {}\nevaluator_frames {}\nfinal_eval_frames {}\nlearner_steps {}\nactor_episodes {}\n",
            self.actor_frames,
            self.evaluator_frames,
            self.final_eval_frames,
            self.learner_steps,
            self.actor_episodes.len()
        );
        for (arm, n) in self.arm_counts().iter().enumerate() {
            s.push_str(&format!("arm {arm}: {n} actor episodes"));
            if let Some(r) = self.final_return(arm) {
                s.push_str(&format!(", final mean return {r:.4}"));
            }
            s.push('\n');
        }
        s
    }

    /// Writes `metrics.csv`, `final_eval.csv` and `summary.txt` into `dir`.
    pub fn write_artifacts(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("metrics.csv"), self.metrics_csv()?)?;
        std::fs::write(dir.join("final_eval.csv"), self.final_eval_csv())?;
        std::fs::write(dir.join("summary.txt"), self.summary())?;
        Ok(())
    }
}

fn final_evaluation(cfg: &HarnessConfig, spec: &AgentSpec, tables: &FamilyTables) -> Result<(Vec<ArmEvaluation>, u64)> {
    let mut env = make_env(cfg, stream_seed(cfg.seed, STREAM_FINAL_ENV))?;
    let mut rng = rng_stream(cfg.seed, STREAM_FINAL);
    let mut frames = 0;
    let mut arms = Vec::with_capacity(spec.family.len());
    for arm in 0..spec.family.len() {
        let (returns, steps) =
            evaluate_arm(env.as_mut(), spec, tables, arm, cfg.evaluation_epsilon, cfg.final_eval_episodes, &mut rng)?;
        frames += steps;
        let mean_return = if returns.is_empty() { 0.0 } else { returns.iter().sum::<f64>() / returns.len() as f64 };
        arms.push(ArmEvaluation { arm, beta: spec.family.beta(arm), gamma: spec.family.gamma(arm), returns, mean_return });
    }
    Ok((arms, frames))
}

/// Running evaluator-side aggregates that become metrics rows.
#[derive(Default)]
struct MetricsState {
    eval_returns: Vec<f64>,
    loss_e: f64,
    loss_i: f64,
    loss_count: u64,
}

impl MetricsState {
    fn add_loss(&mut self, e: f64, i: f64) {
        self.loss_e += e;
        self.loss_i += i;
        self.loss_count += 1;
    }

    fn row(&mut self, wall_step: u64, frames: u64, record: &EvalRecord, replay_fill: usize) -> MetricsRow {
        self.eval_returns.extend(&record.episode_returns);
        let tail = &self.eval_returns[self.eval_returns.len().saturating_sub(RETURN_WINDOW)..];
        let n = self.loss_count.max(1) as f64;
        let row = MetricsRow {
            wall_step,
            frames,
            evaluator_return_mean50: tail.iter().sum::<f64>() / tail.len() as f64,
            chosen_arm: record.arm,
            loss_e: self.loss_e / n,
            loss_i: self.loss_i / n,
            replay_fill,
        };
        self.loss_e = 0.0;
        self.loss_i = 0.0;
        self.loss_count = 0;
        row
    }
}

pub fn run_training(cfg: &HarnessConfig) -> Result<TrainingRun> {
    cfg.validate()?;
    match cfg.mode {
        RunMode::Single => run_single(cfg),
        RunMode::Multi => run_multi(cfg),
    }
}

/// Fixed interleave: per loop every actor takes one step (the learner steps
/// after every `steps_per_learner_update` actor steps once replay is ready),
/// then the evaluator takes one step.
pub fn run_single(cfg: &HarnessConfig) -> Result<TrainingRun> {
    cfg.validate()?;
    let spec = agent_spec(cfg)?;
    let mut learner = Learner::new(learner_config(cfg), initial_tables(cfg, &spec)?)?;
    let mut learner_rng = rng_stream(cfg.seed, STREAM_LEARNER);
    let mut replay = SequenceReplay::new(cfg.replay_capacity, cfg.min_replay_size)?;
    let mut snapshot = Arc::new(learner.online().clone());
    let mut snapshot_step = learner.steps();
    let mut actors =
        (0..cfg.num_actors).map(|l| make_actor(cfg, l, snapshot.clone())).collect::<Result<Vec<_>>>()?;
    let mut evaluator = make_evaluator(cfg, snapshot.clone())?;

    let fresh = |learner: &Learner, snapshot: &mut Arc<FamilyTables>, snapshot_step: &mut u64| {
        if *snapshot_step != learner.steps() {
            *snapshot = Arc::new(learner.online().clone());
            *snapshot_step = learner.steps();
        }
        snapshot.clone()
    };

    let mut state = MetricsState::default();
    let mut metrics = Vec::new();
    let mut records = Vec::new();
    let mut episodes = Vec::new();
    let (mut frames, mut since_learn, mut wall_step) = (0u64, 0u64, 0u64);
    while frames < cfg.frame_budget {
        wall_step += 1;
        for actor in actors.iter_mut() {
            if frames >= cfg.frame_budget {
                break;
            }
            if actor.needs_refresh() {
                actor.refresh(fresh(&learner, &mut snapshot, &mut snapshot_step));
            }
            let step = actor.step(&spec)?;
            for seq in step.sequences {
                replay.insert(seq)?;
            }
            episodes.extend(step.finished);
            frames += 1;
            since_learn += 1;
            if since_learn >= cfg.steps_per_learner_update {
                since_learn = 0;
                if replay.is_ready() {
                    let m = learner.step(&mut replay, &spec, &mut learner_rng)?;
                    state.add_loss(m.loss_e, m.loss_i);
                }
            }
        }
        if evaluator.needs_refresh() {
            evaluator.refresh(fresh(&learner, &mut snapshot, &mut snapshot_step));
        }
        if let Some(record) = evaluator.step(&spec)? {
            metrics.push(state.row(wall_step, frames, &record, replay.len()));
            records.push(record);
        }
    }

    let tables = learner.online().clone();
    let (final_arms, final_eval_frames) = final_evaluation(cfg, &spec, &tables)?;
    Ok(TrainingRun {
        metrics,
        evaluation_records: records,
        actor_episodes: episodes,
        final_arms,
        tables,
        actor_frames: frames,
        evaluator_frames: evaluator.frames(),
        final_eval_frames,
        learner_steps: learner.steps(),
    })
}

enum ReplayMsg {
    Insert(Vec<TransitionSequence>),
    Sample { batch_size: usize, reply: Sender<Result<Vec<SampledSequence>>> },
    UpdatePriorities(Vec<(u64, f64)>),
    Fill { reply: Sender<usize> },
    Shutdown,
}

/// Sole owner of the replay buffer; everything else talks to it by message.
fn replay_owner(mut replay: SequenceReplay, mut rng: ChaCha8Rng, inbox: Receiver<ReplayMsg>) -> Result<()> {
    for msg in inbox {
        match msg {
            ReplayMsg::Insert(seqs) => {
                for s in seqs {
                    replay.insert(s)?;
                }
            }
            ReplayMsg::Sample { batch_size, reply } => {
                let _ = reply.send(replay.sample(batch_size, &mut rng));
            }
            ReplayMsg::UpdatePriorities(updates) => {
                for (id, p) in updates {
                    // Sequences evicted since sampling are skipped.
                    replay.update_priority(id, p)?;
                }
            }
            ReplayMsg::Fill { reply } => {
                let _ = reply.send(replay.len());
            }
            ReplayMsg::Shutdown => break,
        }
    }
    Ok(())
}

fn join<T>(handle: thread::JoinHandle<Result<T>>, who: &str) -> Result<T> {
    handle.join().map_err(|_| Error::Internal(format!("{who} thread panicked")))?
}

/// Actors, evaluator, learner and replay owner on separate threads. Results
/// depend on scheduling and are not reproducible bit for bit.
pub fn run_multi(cfg: &HarnessConfig) -> Result<TrainingRun> {
    cfg.validate()?;
    let spec = Arc::new(agent_spec(cfg)?);
    let learner = Learner::new(learner_config(cfg), initial_tables(cfg, &spec)?)?;
    let published = Arc::new(Mutex::new(Arc::new(learner.online().clone())));
    let frames = Arc::new(AtomicU64::new(0));
    let stop = Arc::new(AtomicBool::new(false));
    let losses = Arc::new(Mutex::new(MetricsState::default()));
    let (replay_tx, replay_rx) = unbounded::<ReplayMsg>();

    let replay = SequenceReplay::new(cfg.replay_capacity, cfg.min_replay_size)?;
    let replay_rng = rng_stream(cfg.seed, STREAM_LEARNER + 1);
    let replay_handle = thread::spawn(move || replay_owner(replay, replay_rng, replay_rx));

    let current = |p: &Arc<Mutex<Arc<FamilyTables>>>| -> Result<Arc<FamilyTables>> {
        Ok(p.lock().map_err(|_| Error::Internal("snapshot lock poisoned".into()))?.clone())
    };

    let mut actor_handles = Vec::new();
    for l in 0..cfg.num_actors {
        let mut actor = make_actor(cfg, l, current(&published)?)?;
        let (spec, published, frames, tx, budget) =
            (spec.clone(), published.clone(), frames.clone(), replay_tx.clone(), cfg.frame_budget);
        actor_handles.push(thread::spawn(move || -> Result<Vec<EpisodeSummary>> {
            let mut episodes = Vec::new();
            while frames.fetch_add(1, Ordering::SeqCst) < budget {
                if actor.needs_refresh() {
                    let latest = published.lock().map_err(|_| Error::Internal("snapshot lock poisoned".into()))?.clone();
                    actor.refresh(latest);
                }
                let step = actor.step(&spec)?;
                if !step.sequences.is_empty() {
                    tx.send(ReplayMsg::Insert(step.sequences)).map_err(|_| Error::Internal("replay owner gone".into()))?;
                }
                episodes.extend(step.finished);
            }
            Ok(episodes)
        }));
    }

    let learner_handle = {
        let (spec, published, frames, stop, tx, losses) =
            (spec.clone(), published.clone(), frames.clone(), stop.clone(), replay_tx.clone(), losses.clone());
        let (ratio, batch_size) = (cfg.steps_per_learner_update, cfg.batch_size);
        let publish_every = (cfg.actor_update_period / ratio).max(1);
        let mut learner = learner;
        thread::spawn(move || -> Result<Learner> {
            while !stop.load(Ordering::SeqCst) {
                if learner.steps() >= frames.load(Ordering::SeqCst) / ratio {
                    thread::yield_now();
                    continue;
                }
                let (reply_tx, reply_rx) = bounded(1);
                if tx.send(ReplayMsg::Sample { batch_size, reply: reply_tx }).is_err() {
                    break;
                }
                let batch = match reply_rx.recv().map_err(|_| Error::Internal("replay owner gone".into()))? {
                    Ok(b) => b,
                    Err(Error::NotReady { .. }) => {
                        thread::yield_now();
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let m = learner.train_on(&batch, &spec)?;
                losses.lock().map_err(|_| Error::Internal("loss lock poisoned".into()))?.add_loss(m.loss_e, m.loss_i);
                let _ = tx.send(ReplayMsg::UpdatePriorities(m.priorities));
                if learner.steps() % publish_every == 0 {
                    *published.lock().map_err(|_| Error::Internal("snapshot lock poisoned".into()))? =
                        Arc::new(learner.online().clone());
                }
            }
            Ok(learner)
        })
    };

    let evaluator_handle = {
        let mut evaluator = make_evaluator(cfg, current(&published)?)?;
        let (spec, published, frames, stop, tx, losses) =
            (spec.clone(), published.clone(), frames.clone(), stop.clone(), replay_tx.clone(), losses.clone());
        let budget = cfg.frame_budget;
        thread::spawn(move || -> Result<(Vec<MetricsRow>, Vec<EvalRecord>, u64)> {
            let (mut rows, mut records) = (Vec::new(), Vec::new());
            let mut wall_step = 0;
            while !stop.load(Ordering::SeqCst) {
                wall_step += 1;
                if evaluator.needs_refresh() {
                    let latest = published.lock().map_err(|_| Error::Internal("snapshot lock poisoned".into()))?.clone();
                    evaluator.refresh(latest);
                }
                if let Some(record) = evaluator.step(&spec)? {
                    let (reply_tx, reply_rx) = bounded(1);
                    let fill = match tx.send(ReplayMsg::Fill { reply: reply_tx }) {
                        Ok(()) => reply_rx.recv().unwrap_or(0),
                        Err(_) => 0,
                    };
                    let f = frames.load(Ordering::SeqCst).min(budget);
                    let mut state = losses.lock().map_err(|_| Error::Internal("loss lock poisoned".into()))?;
                    rows.push(state.row(wall_step, f, &record, fill));
                    records.push(record);
                }
            }
            Ok((rows, records, evaluator.frames()))
        })
    };

    let mut episodes = Vec::new();
    let mut first_error = None;
    for h in actor_handles {
        match join(h, "actor") {
            Ok(e) => episodes.extend(e),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    stop.store(true, Ordering::SeqCst);
    let learner = join(learner_handle, "learner");
    let evaluated = join(evaluator_handle, "evaluator");
    let _ = replay_tx.send(ReplayMsg::Shutdown);
    let replay_result = join(replay_handle, "replay");
    if let Some(e) = first_error {
        return Err(e);
    }
    let learner = learner?;
    let (metrics, records, evaluator_frames) = evaluated?;
    replay_result?;

    let learner_steps = learner.steps();
    let tables = learner.into_online();
    let (final_arms, final_eval_frames) = final_evaluation(cfg, &spec, &tables)?;
    Ok(TrainingRun {
        metrics,
        evaluation_records: records,
        actor_episodes: episodes,
        final_arms,
        tables,
        actor_frames: frames.load(Ordering::SeqCst).min(cfg.frame_budget),
        evaluator_frames,
        final_eval_frames,
        learner_steps,
    })
}
