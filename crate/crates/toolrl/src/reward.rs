//! Reward assembly.
//!
//! The trainable signal is process-level: a format gate, a judged
//! completeness score, and two rule penalties computed from the transcript
//! itself. An ill-formed episode earns the flat format penalty and nothing
//! else; a well-formed one earns the mean of `N` independent judge verdicts
//! plus `-λ · repetitions` and `-μ · errors`, with no clipping below.
//!
//! `answer_reward` is the end-to-end alternative used for comparison runs:
//! the same format gate, then a single judged verdict on the summarizer's
//! final answer, with no rule shaping. The two paths never mix; trainers
//! pick exactly one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{oracle_summarize, TaskSpec};
use crate::judges::{AnswerJudge, CompletenessJudge};
use crate::trajectory::{error_count, repetition_count, validate_format, ToolRegistry, Trajectory};
use crate::Rng;

/// Flat reward for any format-invalid trajectory.
pub const FORMAT_PENALTY: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    /// Independent judge verdicts averaged into the completeness reward.
    pub judge_samples: usize,
    /// Penalty weight per immediate repetition (λ).
    pub repeat_weight: f64,
    /// Penalty weight per tool error (μ).
    pub error_weight: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            judge_samples: 4,
            repeat_weight: 0.1,
            error_weight: 0.1,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RewardConfigError {
    #[error("judge_samples must be at least 1")]
    NoJudgeSamples,
    #[error("{name} must be finite and >= 0; got {value}")]
    BadWeight { name: &'static str, value: String },
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardConfigError> {
        if self.judge_samples == 0 {
            return Err(RewardConfigError::NoJudgeSamples);
        }
        for (name, value) in [
            ("repeat_weight", self.repeat_weight),
            ("error_weight", self.error_weight),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(RewardConfigError::BadWeight {
                    name,
                    value: value.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Score components for one trajectory. Serialized under the `reward` key of
/// trajectory log records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub format_valid: bool,
    pub r_comp: f64,
    pub r_repeat: f64,
    pub r_error: f64,
    pub r_total: f64,
}

impl RewardBreakdown {
    pub fn r_rule(&self) -> f64 {
        self.r_repeat + self.r_error
    }

    fn invalid() -> Self {
        Self {
            format_valid: false,
            r_comp: 0.0,
            r_repeat: 0.0,
            r_error: 0.0,
            r_total: FORMAT_PENALTY,
        }
    }
}

/// Mean of `n` independent judge verdicts. Counts are accumulated as
/// integers and divided once, so the result is exactly `k/n` as rounded by
/// IEEE division, one of `{0, 1/n, ..., 1}`.
pub fn completeness_reward(
    task: &TaskSpec,
    traj: &Trajectory,
    judge: &dyn CompletenessJudge,
    n: usize,
    rng: &mut Rng,
) -> f64 {
    assert!(n >= 1, "completeness reward needs at least one judge sample");
    let ones = (0..n).filter(|_| judge.verdict(task, traj, rng)).count();
    ones as f64 / n as f64
}

/// `(-repeat_weight · repetitions, -error_weight · errors)`.
pub fn rule_rewards(traj: &Trajectory, repeat_weight: f64, error_weight: f64) -> (f64, f64) {
    (
        -repeat_weight * repetition_count(traj) as f64,
        -error_weight * error_count(traj) as f64,
    )
}

/// The full process-level reward. Format-invalid transcripts are not judged
/// at all: they score the flat penalty with zeroed components. Valid ones
/// score `r_comp + r_repeat + r_error`, unclipped, so heavy misbehavior can
/// legitimately land below the format penalty.
pub fn total_reward(
    task: &TaskSpec,
    traj: &Trajectory,
    registry: &ToolRegistry,
    judge: &dyn CompletenessJudge,
    config: &RewardConfig,
    rng: &mut Rng,
) -> RewardBreakdown {
    if !validate_format(traj, registry).is_valid() {
        return RewardBreakdown::invalid();
    }
    let r_comp = completeness_reward(task, traj, judge, config.judge_samples, rng);
    let (r_repeat, r_error) = rule_rewards(traj, config.repeat_weight, config.error_weight);
    RewardBreakdown {
        format_valid: true,
        r_comp,
        r_repeat,
        r_error,
        r_total: r_comp + r_repeat + r_error,
    }
}

/// End-to-end answer reward for a format-valid trajectory: summarize, then
/// judge the answer. Binary, with no rule shaping.
pub fn answer_reward(
    task: &TaskSpec,
    traj: &Trajectory,
    summarizer_h: f64,
    judge: &dyn AnswerJudge,
    rng: &mut Rng,
) -> f64 {
    let summary = oracle_summarize(task, traj, summarizer_h, rng);
    if judge.verdict(task, summary.answer, rng) {
        1.0
    } else {
        0.0
    }
}

/// Answer reward behind the same format gate as `total_reward`. This is the
/// whole reward path of end-to-end training runs.
pub fn gated_answer_reward(
    task: &TaskSpec,
    traj: &Trajectory,
    registry: &ToolRegistry,
    summarizer_h: f64,
    judge: &dyn AnswerJudge,
    rng: &mut Rng,
) -> RewardBreakdown {
    if !validate_format(traj, registry).is_valid() {
        return RewardBreakdown::invalid();
    }
    let r = answer_reward(task, traj, summarizer_h, judge, rng);
    RewardBreakdown {
        format_valid: true,
        r_comp: 0.0,
        r_repeat: 0.0,
        r_error: 0.0,
        r_total: r,
    }
}
