//! Desk-scale laboratory for training tool-use planners.
//!
//! The crate simulates the full loop of a planner that gathers evidence with
//! tools before answering: a synthetic task family with hidden fact tables,
//! a linear-softmax planner over a finite action vocabulary, noisy binary
//! judges, a process-level reward that scores evidence-gathering completeness
//! instead of final-answer correctness, and three policy-gradient trainers
//! (REINFORCE++, GRPO, PPO) wired into a reproducible experiment harness.
//!
//! Everything is deterministic given a seed: rollout, judge, and summarizer
//! randomness all come from per-trajectory ChaCha streams derived from
//! `(seed, iteration, task, rollout)`, so parallel and serial execution
//! produce identical artifacts.

pub mod env;
pub mod harness;
pub mod judges;
pub mod policy;
pub mod reward;
pub mod seeds;
pub mod template;
pub mod trainers;
pub mod trajectory;

/// Deterministic stream rng used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

pub use env::{
    generate_tasks, oracle_completeness, oracle_summarize, rollout, ComputeKind, ComputeSpec,
    EpisodeState, Planner, TaskDistribution, TaskSpec, ABSTENTION,
};
pub use harness::{
    evaluate, judge_accuracy_experiment, run_cold_start, run_experiment, run_judge_study,
    EvalReport, ExperimentConfig, ExperimentSetup, HarnessError, JudgeStudyConfig,
    JudgeStudyReport, RunOutcome,
};
pub use judges::{
    AnswerJudge, CompletenessJudge, JudgeConfig, NoisyAnswerJudge, NoisyCompletenessJudge,
};
pub use policy::{ActionVocabulary, Featurizer, PolicyParams, PolicyPlanner};
pub use reward::{
    answer_reward, completeness_reward, gated_answer_reward, rule_rewards, total_reward,
    RewardBreakdown, RewardConfig, FORMAT_PENALTY,
};
pub use template::{parse_template, render_training_template, TemplateSegment};
pub use trainers::{
    cold_start_bc, gae, grpo_advantages, reinforcepp_advantages, reject_sample, train_loop,
    Algorithm, ColdStartConfig, ColdStartOutcome, RewardMode, ScriptedTeacher, TrainContext,
    TrainerConfig, TrainingLog,
};
pub use trajectory::{
    error_count, repetition_count, validate_format, Action, FormatVerdict, InvalidReason,
    Observation, Step, ToolErrorCode, ToolRegistry, ToolSpec, Trajectory,
};
