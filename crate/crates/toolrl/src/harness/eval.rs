//! Ground-truth evaluation of a policy, and the judge-accuracy study.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::env::{oracle_completeness, oracle_summarize, rollout, TaskSpec, ABSTENTION};
use crate::judges::{AnswerJudge, CompletenessJudge};
use crate::policy::{Featurizer, PolicyPlanner};
use crate::reward::completeness_reward;
use crate::seeds::{rng_for, stream};
use crate::trainers::ScriptedTeacher;
use crate::trajectory::{error_count, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEvalRow {
    pub query_id: String,
    pub complete: bool,
    /// `None` when the summarizer abstained.
    pub answer: Option<i64>,
    pub is_correct: bool,
    pub turns: usize,
    pub errors: usize,
    pub format_valid: bool,
}

/// Oracle-scored evaluation over one task set. All rates are over tasks
/// except `error_rate`, which is per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tasks: usize,
    /// Fraction of rollouts that gathered everything their task required.
    pub completeness: f64,
    /// Fraction whose summarized answer equals the gold answer.
    pub answer_match: f64,
    pub mean_turns: f64,
    /// Failed tool calls per step.
    pub error_rate: f64,
    pub format_invalid_rate: f64,
    pub per_task: Vec<TaskEvalRow>,
}

/// Greedy rollouts on every task, scored against the oracles rather than the
/// noisy judges. Rollout `i` owns the rng stream `(seed, [EVAL, i])`; greedy
/// action choice consumes no randomness, so the stream only feeds the
/// summarizer.
pub fn evaluate(
    tasks: &[TaskSpec],
    featurizer: &Featurizer,
    theta: &Array2<f64>,
    summarizer_h: f64,
    max_turns: usize,
    seed: u64,
) -> (EvalReport, Vec<Trajectory>) {
    assert!(!tasks.is_empty(), "evaluation needs at least one task");
    let planner = PolicyPlanner {
        featurizer,
        theta,
        greedy: true,
    };
    let mut rows = Vec::with_capacity(tasks.len());
    let mut rollouts = Vec::with_capacity(tasks.len());
    let mut steps_total = 0usize;
    let mut errors_total = 0usize;
    for (i, task) in tasks.iter().enumerate() {
        let mut rng = rng_for(seed, &[stream::EVAL, i as u64]);
        let traj = rollout(&planner, task, max_turns, &mut rng);
        let summary = oracle_summarize(task, &traj, summarizer_h, &mut rng);
        let errors = error_count(&traj);
        steps_total += traj.steps.len();
        errors_total += errors;
        rows.push(TaskEvalRow {
            query_id: task.query_id.clone(),
            complete: oracle_completeness(task, &traj),
            answer: (summary.answer != ABSTENTION).then_some(summary.answer),
            is_correct: summary.is_correct,
            turns: traj.steps.len(),
            errors,
            format_valid: traj.terminated,
        });
        rollouts.push(traj);
    }
    let n = tasks.len() as f64;
    let report = EvalReport {
        tasks: tasks.len(),
        completeness: rows.iter().filter(|r| r.complete).count() as f64 / n,
        answer_match: rows.iter().filter(|r| r.is_correct).count() as f64 / n,
        mean_turns: steps_total as f64 / n,
        error_rate: errors_total as f64 / steps_total as f64,
        format_invalid_rate: rows.iter().filter(|r| !r.format_valid).count() as f64 / n,
        per_task: rows,
    };
    (report, rollouts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JudgeStudyConfig {
    /// Rollouts scored by both judges.
    pub rollouts: usize,
    /// Wander probability of the scripted planner that generates the study
    /// rollouts. Raised well above the training default so the sample holds
    /// a healthy mix of complete and incomplete trajectories.
    pub planner_deviation: f64,
    pub max_turns: usize,
}

impl Default for JudgeStudyConfig {
    fn default() -> Self {
        JudgeStudyConfig {
            rollouts: 1000,
            planner_deviation: 0.5,
            max_turns: 8,
        }
    }
}

/// Confusion counts for one predictor of "this rollout deserves credit".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorScore {
    pub accuracy: f64,
    pub f1: f64,
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl PredictorScore {
    fn from_pairs(pairs: &[(bool, bool)]) -> Self {
        let mut tp = 0;
        let mut fp = 0;
        let mut tn = 0;
        let mut fnn = 0;
        for &(truth, pred) in pairs {
            match (truth, pred) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
                (true, false) => fnn += 1,
            }
        }
        let denom = 2 * tp + fp + fnn;
        PredictorScore {
            accuracy: (tp + tn) as f64 / pairs.len() as f64,
            f1: if denom == 0 {
                0.0
            } else {
                2.0 * tp as f64 / denom as f64
            },
            true_pos: tp,
            false_pos: fp,
            true_neg: tn,
            false_neg: fnn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JudgeStudyReport {
    pub rollouts: usize,
    /// Rollouts whose summarized answer was actually correct.
    pub positives: usize,
    pub completeness_judge: PredictorScore,
    pub answer_judge: PredictorScore,
}

/// Head-to-head study of the two reward signals as predictors of answer
/// correctness. Each rollout is summarized once; the completeness judge
/// predicts "correct" when the averaged verdict clears 0.5, the answer judge
/// by accepting the summary's answer. Ground truth is the summary against
/// the gold answer.
#[allow(clippy::too_many_arguments)]
pub fn judge_accuracy_experiment(
    tasks: &[TaskSpec],
    completeness_judge: &dyn CompletenessJudge,
    answer_judge: &dyn AnswerJudge,
    judge_samples: usize,
    summarizer_h: f64,
    config: &JudgeStudyConfig,
    seed: u64,
) -> JudgeStudyReport {
    assert!(!tasks.is_empty(), "judge study needs at least one task");
    assert!(config.rollouts >= 1, "judge study needs rollouts");
    let planner = ScriptedTeacher {
        deviation: config.planner_deviation,
    };
    let mut completeness_pairs = Vec::with_capacity(config.rollouts);
    let mut answer_pairs = Vec::with_capacity(config.rollouts);
    let mut positives = 0usize;
    for i in 0..config.rollouts {
        let task = &tasks[i % tasks.len()];
        let mut rng = rng_for(seed, &[stream::JUDGE_STUDY, i as u64]);
        let traj = rollout(&planner, task, config.max_turns, &mut rng);
        let summary = oracle_summarize(task, &traj, summarizer_h, &mut rng);
        let truth = summary.is_correct;
        positives += truth as usize;

        let r_comp = completeness_reward(task, &traj, completeness_judge, judge_samples, &mut rng);
        completeness_pairs.push((truth, r_comp >= 0.5));
        answer_pairs.push((truth, answer_judge.verdict(task, summary.answer, &mut rng)));
    }
    JudgeStudyReport {
        rollouts: config.rollouts,
        positives,
        completeness_judge: PredictorScore::from_pairs(&completeness_pairs),
        answer_judge: PredictorScore::from_pairs(&answer_pairs),
    }
}
