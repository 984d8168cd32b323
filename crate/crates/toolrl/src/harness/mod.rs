//! Experiment orchestration: turn one config into a directory of artifacts.
//!
//! A run stages everything in a temporary directory next to the target and
//! renames it into place at the end, so a crashed or interrupted run leaves
//! no partial output directory behind.

mod config;
mod eval;

pub use config::{
    ExperimentConfig, JudgesSection, SummarizerSection, TaskSection, SCHEMA_VERSION,
};
pub use eval::{
    evaluate, judge_accuracy_experiment, EvalReport, JudgeStudyConfig, JudgeStudyReport,
    PredictorScore, TaskEvalRow,
};

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::env::{generate_tasks, TaskDistribution, TaskSpec};
use crate::judges::{NoisyAnswerJudge, NoisyCompletenessJudge};
use crate::policy::{save_checkpoint, ActionVocabulary, Featurizer};
use crate::reward::{total_reward, RewardBreakdown};
use crate::seeds::{rng_for, seed_for, stream};
use crate::template::render_text;
use crate::trainers::{
    cold_start_bc, train_loop, ColdStartOutcome, ScriptedTeacher, TrainContext, TrainerConfig,
    TrainingLog,
};
use crate::trajectory::{ToolRegistry, Trajectory};

pub const CONFIG_FILE: &str = "config.toml";
pub const SFT_FILE: &str = "sft_data.jsonl";
pub const CHECKPOINT_COLD_FILE: &str = "checkpoint_cold_start.txt";
pub const CHECKPOINT_FINAL_FILE: &str = "checkpoint_final.txt";
pub const EVAL_COLD_FILE: &str = "eval_cold_start.json";
pub const EVAL_REPORT_FILE: &str = "eval_report.json";
pub const TRAINING_LOG_FILE: &str = "training_log.csv";
pub const TRAJECTORIES_FILE: &str = "trajectories.jsonl";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("output directory {} already exists", .0.display())]
    OutputExists(PathBuf),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Everything derived from a validated config before any phase runs: the
/// task family, its tool registry, the feature map, both task splits, and
/// the judges.
pub struct ExperimentSetup {
    pub config: ExperimentConfig,
    pub dist: TaskDistribution,
    pub registry: ToolRegistry,
    pub featurizer: Featurizer,
    pub train_tasks: Vec<TaskSpec>,
    pub eval_tasks: Vec<TaskSpec>,
    pub completeness_judge: NoisyCompletenessJudge,
    pub answer_judge: NoisyAnswerJudge,
}

impl ExperimentSetup {
    /// Validates the config and materializes both task splits. The splits
    /// hang off `tasks.seed` alone (train on one stream, eval on a sibling),
    /// so changing the run seed never changes the tasks.
    pub fn build(config: &ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let mut config = config.clone();
        config.trainer.seed = config.seed;
        let dist = config.tasks.distribution();
        let registry = dist.tool_registry();
        let vocab = ActionVocabulary::from_registry(&registry);
        let featurizer = Featurizer::new(vocab, dist.query_feature_dim(), config.trainer.max_turns);
        let train_seed = seed_for(dist.seed, &[stream::TASKS, 0]);
        let eval_seed = seed_for(dist.seed, &[stream::TASKS, 1]);
        let train_tasks = generate_tasks(&dist, config.tasks.train_tasks, train_seed)
            .map_err(|e| HarnessError::Config(format!("tasks: {e}")))?;
        let eval_tasks = generate_tasks(&dist, config.tasks.eval_tasks, eval_seed)
            .map_err(|e| HarnessError::Config(format!("tasks: {e}")))?;
        Ok(ExperimentSetup {
            completeness_judge: NoisyCompletenessJudge {
                config: config.judges.completeness,
            },
            answer_judge: NoisyAnswerJudge {
                config: config.judges.answer,
            },
            config,
            dist,
            registry,
            featurizer,
            train_tasks,
            eval_tasks,
        })
    }

    pub fn teacher(&self) -> ScriptedTeacher {
        ScriptedTeacher {
            deviation: self.config.cold_start.teacher_deviation,
        }
    }

    pub fn train_context(&self) -> TrainContext<'_> {
        TrainContext {
            registry: &self.registry,
            featurizer: &self.featurizer,
            tasks: &self.train_tasks,
            reward: &self.config.reward,
            completeness_judge: &self.completeness_judge,
            answer_judge: &self.answer_judge,
            summarizer_h: self.config.summarizer.hallucination_rate,
        }
    }

    /// The trainer config with the run seed patched in.
    pub fn trainer_config(&self) -> TrainerConfig {
        self.config.trainer
    }

    pub fn run_cold_start(&self) -> ColdStartOutcome {
        cold_start_bc(
            &self.teacher(),
            &self.train_tasks,
            &self.featurizer,
            &self.config.cold_start,
            self.config.seed,
        )
    }

    /// Greedy oracle-scored evaluation of a parameter matrix on the eval
    /// split.
    pub fn evaluate(&self, theta: &ndarray::Array2<f64>) -> (EvalReport, Vec<Trajectory>) {
        evaluate(
            &self.eval_tasks,
            &self.featurizer,
            theta,
            self.config.summarizer.hallucination_rate,
            self.config.trainer.max_turns,
            self.config.seed,
        )
    }
}

/// What a full run hands back to the caller, beyond the files on disk.
#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub cold_eval: EvalReport,
    pub final_eval: EvalReport,
    pub log: TrainingLog,
}

#[derive(Serialize)]
struct SftRecord<'a> {
    #[serde(flatten)]
    trajectory: &'a Trajectory,
    /// Rendered training text; absent for the rare kept trajectory that hit
    /// the turn cap and so has no terminal marker.
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<String>,
}

#[derive(Serialize)]
struct TrajectoryRecord<'a> {
    #[serde(flatten)]
    trajectory: &'a Trajectory,
    reward: &'a RewardBreakdown,
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), HarnessError> {
    let mut buf = Vec::new();
    for record in records {
        serde_json::to_writer(&mut buf, record).expect("record serializes");
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(io_err(path))
}

/// Claims `out_dir` for a staged write: errors if it exists, returns a
/// staging directory on the same filesystem plus the parent to rename from.
fn stage_for(out_dir: &Path) -> Result<tempfile::TempDir, HarnessError> {
    if out_dir.exists() {
        return Err(HarnessError::OutputExists(out_dir.to_path_buf()));
    }
    let parent = match out_dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(io_err(&parent))?;
    tempfile::Builder::new()
        .prefix(".stage-")
        .tempdir_in(&parent)
        .map_err(io_err(&parent))
}

fn commit_stage(stage: tempfile::TempDir, out_dir: &Path) -> Result<(), HarnessError> {
    fs::rename(stage.path(), out_dir).map_err(io_err(out_dir))
    // TempDir drop now points at a moved path; its cleanup is a no-op.
}

fn write_cold_artifacts(
    setup: &ExperimentSetup,
    outcome: &ColdStartOutcome,
    cold_eval: &EvalReport,
    dir: &Path,
) -> Result<(), HarnessError> {
    let records: Vec<SftRecord<'_>> = outcome
        .dataset
        .iter()
        .map(|trajectory| SftRecord {
            trajectory,
            text: render_text(trajectory).ok(),
        })
        .collect();
    write_jsonl(&dir.join(SFT_FILE), &records)?;
    save_checkpoint(
        &dir.join(CHECKPOINT_COLD_FILE),
        &outcome.params.theta,
        setup.featurizer.vocab(),
    )
    .map_err(|e| HarnessError::Checkpoint(e.to_string()))?;
    write_json(&dir.join(EVAL_COLD_FILE), cold_eval)
}

/// Cold start only: distill the teacher, evaluate the result, write the
/// cold-start artifacts. The output directory appears atomically.
pub fn run_cold_start(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(EvalReport, PathBuf), HarnessError> {
    let setup = ExperimentSetup::build(config)?;
    let stage = stage_for(out_dir)?;
    let outcome = setup.run_cold_start();
    let (cold_eval, _) = setup.evaluate(&outcome.params.theta);
    write_text(
        &stage.path().join(CONFIG_FILE),
        &setup.config.to_toml_string(),
    )?;
    write_cold_artifacts(&setup, &outcome, &cold_eval, stage.path())?;
    commit_stage(stage, out_dir)?;
    Ok((cold_eval, out_dir.to_path_buf()))
}

/// The full pipeline: cold start, reinforcement learning, final evaluation,
/// all artifacts. Every byte written is a pure function of the config, so a
/// rerun into a fresh directory produces identical files.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<RunOutcome, HarnessError> {
    let setup = ExperimentSetup::build(config)?;
    let stage = stage_for(out_dir)?;
    let dir = stage.path();
    write_text(&dir.join(CONFIG_FILE), &setup.config.to_toml_string())?;

    let cold = setup.run_cold_start();
    let (cold_eval, _) = setup.evaluate(&cold.params.theta);
    write_cold_artifacts(&setup, &cold, &cold_eval, dir)?;

    let trainer_config = setup.trainer_config();
    let (params, log) = train_loop(cold.params, &trainer_config, &setup.train_context());
    write_text(&dir.join(TRAINING_LOG_FILE), &log.to_csv())?;
    save_checkpoint(
        &dir.join(CHECKPOINT_FINAL_FILE),
        &params.theta,
        setup.featurizer.vocab(),
    )
    .map_err(|e| HarnessError::Checkpoint(e.to_string()))?;

    let (final_eval, rollouts) = setup.evaluate(&params.theta);
    let rewards: Vec<RewardBreakdown> = rollouts
        .iter()
        .enumerate()
        .map(|(i, traj)| {
            let task = &setup.eval_tasks[i];
            let mut rng = rng_for(setup.config.seed, &[stream::EVAL_SCORE, i as u64]);
            total_reward(
                task,
                traj,
                &setup.registry,
                &setup.completeness_judge,
                &setup.config.reward,
                &mut rng,
            )
        })
        .collect();
    let records: Vec<TrajectoryRecord<'_>> = rollouts
        .iter()
        .zip(&rewards)
        .map(|(trajectory, reward)| TrajectoryRecord { trajectory, reward })
        .collect();
    write_jsonl(&dir.join(TRAJECTORIES_FILE), &records)?;
    write_json(&dir.join(EVAL_REPORT_FILE), &final_eval)?;

    commit_stage(stage, out_dir)?;
    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        cold_eval,
        final_eval,
        log,
    })
}

/// Judge study wired from a config: tasks from the eval split, judges and
/// sampling counts from their sections.
pub fn run_judge_study(
    config: &ExperimentConfig,
    study: &JudgeStudyConfig,
) -> Result<JudgeStudyReport, HarnessError> {
    let setup = ExperimentSetup::build(config)?;
    Ok(judge_accuracy_experiment(
        &setup.eval_tasks,
        &setup.completeness_judge,
        &setup.answer_judge,
        setup.config.reward.judge_samples,
        setup.config.summarizer.hallucination_rate,
        study,
        setup.config.seed,
    ))
}
