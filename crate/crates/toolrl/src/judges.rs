//! Noisy binary judges.
//!
//! Real reward models are imperfect, so both judges here wrap an oracle in
//! configurable error rates. The completeness judge misreads a genuinely
//! complete trajectory with probability `fn` and credits an incomplete one
//! with probability `fp`. The answer judge rejects a gold-matching answer
//! with probability `fn` and, crucially, accepts a fabricated answer with
//! probability `h`: that acceptance channel is what lets answer-only reward
//! signals be hacked by confident fabrication.
//!
//! Judges are stateless; every verdict draws from a caller-provided rng
//! stream. The traits are single-call contracts so a remote or learned judge
//! can slot in without touching reward code.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{oracle_completeness, TaskSpec, ABSTENTION};
use crate::trajectory::Trajectory;
use crate::Rng;
use rand::Rng as _;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JudgeConfig {
    /// P(verdict = 1 | ground truth = 0).
    #[serde(rename = "fp")]
    pub false_positive: f64,
    /// P(verdict = 0 | ground truth = 1).
    #[serde(rename = "fn")]
    pub false_negative: f64,
    /// Answer judge only: P(accept | fabricated answer).
    #[serde(rename = "h")]
    pub hallucination: f64,
    /// Stream tag for callers that run a judge standalone.
    pub seed: u64,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        Self {
            false_positive: 0.1,
            false_negative: 0.1,
            hallucination: 0.25,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("judge rate {name} must be in [0, 1]; got {value}")]
pub struct JudgeConfigError {
    pub name: &'static str,
    pub value: String,
}

impl JudgeConfig {
    pub fn validate(&self) -> Result<(), JudgeConfigError> {
        for (name, value) in [
            ("fp", self.false_positive),
            ("fn", self.false_negative),
            ("h", self.hallucination),
        ] {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(JudgeConfigError {
                    name,
                    value: value.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Exact judge: every rate zero.
    pub fn noiseless() -> Self {
        Self {
            false_positive: 0.0,
            false_negative: 0.0,
            hallucination: 0.0,
            seed: 0,
        }
    }
}

/// Binary verdict on whether a trajectory gathered everything the task needs.
pub trait CompletenessJudge {
    fn verdict(&self, task: &TaskSpec, traj: &Trajectory, rng: &mut Rng) -> bool;
}

/// Binary verdict on a final answer.
pub trait AnswerJudge {
    fn verdict(&self, task: &TaskSpec, answer: i64, rng: &mut Rng) -> bool;
}

/// Oracle completeness with symmetric-rate label noise.
#[derive(Debug, Clone, Copy)]
pub struct NoisyCompletenessJudge {
    pub config: JudgeConfig,
}

impl CompletenessJudge for NoisyCompletenessJudge {
    fn verdict(&self, task: &TaskSpec, traj: &Trajectory, rng: &mut Rng) -> bool {
        let truth = oracle_completeness(task, traj);
        let flip_prob = if truth {
            self.config.false_negative
        } else {
            self.config.false_positive
        };
        truth ^ rng.random_bool(flip_prob)
    }
}

/// Answer acceptance with miss and hallucination-acceptance channels.
/// Abstentions are always rejected: an explicit "not enough information"
/// never reads as a correct answer.
#[derive(Debug, Clone, Copy)]
pub struct NoisyAnswerJudge {
    pub config: JudgeConfig,
}

impl AnswerJudge for NoisyAnswerJudge {
    fn verdict(&self, task: &TaskSpec, answer: i64, rng: &mut Rng) -> bool {
        if answer == ABSTENTION {
            false
        } else if answer == task.gold_answer {
            !rng.random_bool(self.config.false_negative)
        } else {
            rng.random_bool(self.config.hallucination)
        }
    }
}
