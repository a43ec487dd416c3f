//! Actor, learner, replay and evaluator protocol with its run orchestration.

pub mod actor;
pub mod agent;
pub mod config;
pub mod evaluator;
pub mod learner;
pub mod replay;
pub mod training;

pub use actor::{actor_epsilon, Actor, ActorConfig, ActorStep, EpisodeSummary};
pub use agent::{behavior_probability, AgentSpec, FamilyTables, GreedyMix, SequenceErrors};
pub use config::{config_reference, EnvKind, HarnessConfig, OptimizerKind, RunMode};
pub use evaluator::{evaluate_arm, phase_for, EvalPhase, EvalRecord, Evaluator};
pub use learner::{AdamConfig, Learner, LearnerConfig, LearnerMetrics, OptimizerConfig};
pub use replay::{sequence_priority, SampledSequence, SequenceReplay};
pub use training::{run_multi, run_single, run_training, ArmEvaluation, TrainingRun};
