//! Synthetic multi-hop task family and episode mechanics.
//!
//! A task hides a small fact table behind a search tool. The planner sees
//! only `query_features` (a noisy indicator of which slots and compute op
//! the task needs) and must gather every required fact, run the compute op
//! when one is present, and then answer. Searching a slot outside the task's
//! table errors, compute before its operands errors, and both kinds of
//! misstep stay in the transcript for the rule rewards to count.
//!
//! Two oracles close the loop: `oracle_completeness` checks that the
//! evidence-gathering sequence was sufficient and well-ordered, and
//! `oracle_summarize` models a perfect-when-informed summarizer that answers
//! `gold_answer` exactly when the trajectory is complete and otherwise
//! abstains or fabricates.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeds::{rng_for, stream};
use crate::trajectory::{Action, Observation, Step, ToolErrorCode, ToolRegistry, ToolSpec, Trajectory};
use crate::Rng;

/// Reserved answer meaning "not enough information gathered". Outside every
/// reachable gold-answer range.
pub const ABSTENTION: i64 = i64::MIN;

/// Fact values are drawn uniformly from this closed range.
pub const FACT_MIN: i64 = -50;
pub const FACT_MAX: i64 = 50;

/// Gold answers land in `[-100, 100]`; fabricated answers are drawn from the
/// same range so they stay plausible.
pub const ANSWER_MIN: i64 = 2 * FACT_MIN;
pub const ANSWER_MAX: i64 = 2 * FACT_MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComputeKind {
    Diff,
    Sum,
    Max,
}

impl ComputeKind {
    pub const ALL: [ComputeKind; 3] = [ComputeKind::Diff, ComputeKind::Sum, ComputeKind::Max];

    /// Argument-slot spelling used in actions and the tool registry.
    pub fn arg_name(self) -> &'static str {
        match self {
            ComputeKind::Diff => "diff",
            ComputeKind::Sum => "sum",
            ComputeKind::Max => "max",
        }
    }

    pub fn from_arg(arg: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.arg_name() == arg)
    }

    /// Operands are ordered: `diff` is `a - b`.
    pub fn apply(self, a: i64, b: i64) -> i64 {
        match self {
            ComputeKind::Diff => a - b,
            ComputeKind::Sum => a + b,
            ComputeKind::Max => a.max(b),
        }
    }

    fn one_hot_index(self) -> usize {
        match self {
            ComputeKind::Diff => 0,
            ComputeKind::Sum => 1,
            ComputeKind::Max => 2,
        }
    }
}

/// A required arithmetic step: which op, and which two searched slots feed it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComputeSpec {
    pub kind: ComputeKind,
    pub operands: [String; 2],
}

/// One task instance. Everything except `query_id` and `query_features` is
/// hidden from the planner; oracles, judges, and the teacher may read it all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub query_id: String,
    pub query_features: Vec<f64>,
    pub required_search: Vec<String>,
    pub required_compute: Option<ComputeSpec>,
    pub fact_table: BTreeMap<String, i64>,
    pub distractor_slots: Vec<String>,
    pub gold_answer: i64,
}

/// Parameters of the task family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDistribution {
    /// Number of searchable slots `k0..k{M-1}`.
    pub num_slots: usize,
    /// Upper bound on required searches per task. Tasks with a compute op
    /// need two operands, so they draw their count from `[2, required_max]`;
    /// tasks without one require exactly the single slot that answers them.
    pub required_max: usize,
    /// Probability that a task carries a compute op.
    pub compute_prob: f64,
    /// Searchable-but-unneeded slots added to each task's fact table.
    pub distractor_count: usize,
    /// Stddev of the Gaussian noise added to every query-feature component.
    pub feature_noise: f64,
    /// Seed that pins the task family independently of training seeds.
    pub seed: u64,
}

impl Default for TaskDistribution {
    fn default() -> Self {
        Self {
            num_slots: 8,
            required_max: 2,
            compute_prob: 1.0,
            distractor_count: 2,
            feature_noise: 0.1,
            seed: 7,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnvError {
    #[error("task distribution invalid: {0}")]
    BadDistribution(String),
    #[error("episode already terminated")]
    EpisodeTerminated,
}

impl TaskDistribution {
    pub fn validate(&self) -> Result<(), EnvError> {
        let fail = |msg: String| Err(EnvError::BadDistribution(msg));
        if self.num_slots == 0 {
            return fail("num_slots must be at least 1".into());
        }
        if self.required_max == 0 || self.required_max > self.num_slots {
            return fail(format!(
                "required_max must be in [1, num_slots]; got {} with num_slots {}",
                self.required_max, self.num_slots
            ));
        }
        if !(0.0..=1.0).contains(&self.compute_prob) {
            return fail(format!("compute_prob must be in [0, 1]; got {}", self.compute_prob));
        }
        if self.compute_prob > 0.0 && self.required_max < 2 {
            return fail("compute_prob > 0 requires required_max >= 2 (ops take two operands)".into());
        }
        if self.required_max + self.distractor_count > self.num_slots {
            return fail(format!(
                "required_max + distractor_count must fit in num_slots; got {} + {} > {}",
                self.required_max, self.distractor_count, self.num_slots
            ));
        }
        if !self.feature_noise.is_finite() || self.feature_noise < 0.0 {
            return fail(format!("feature_noise must be finite and >= 0; got {}", self.feature_noise));
        }
        Ok(())
    }

    /// Length of `query_features`: slot indicator plus compute-op one-hot.
    pub fn query_feature_dim(&self) -> usize {
        self.num_slots + ComputeKind::ALL.len()
    }

    /// Registry every planner in this family acts against: one search slot
    /// per fact slot, one compute arg per op, nothing else.
    pub fn tool_registry(&self) -> ToolRegistry {
        ToolRegistry::new(vec![
            ToolSpec {
                name: "search".into(),
                args: (0..self.num_slots).map(slot_name).collect(),
                description: "look up one fact slot".into(),
            },
            ToolSpec {
                name: "compute".into(),
                args: ComputeKind::ALL.iter().map(|k| k.arg_name().into()).collect(),
                description: "apply an arithmetic op to the task's operand facts".into(),
            },
        ])
        .expect("registry construction is static")
    }
}

pub fn slot_name(index: usize) -> String {
    format!("k{index}")
}

/// Draws `n` tasks. Deterministic given `(self, seed)`: the distribution's
/// own `seed` field is a convention for callers, not consulted here.
pub fn generate_tasks(dist: &TaskDistribution, n: usize, seed: u64) -> Result<Vec<TaskSpec>, EnvError> {
    dist.validate()?;
    let mut rng = rng_for(seed, &[stream::TASKS]);
    let id_tag = crate::seeds::seed_for(seed, &[stream::TASKS]) as u32;
    let noise = if dist.feature_noise > 0.0 {
        Some(
            rand_distr::Normal::new(0.0, dist.feature_noise)
                .expect("validated finite non-negative stddev"),
        )
    } else {
        None
    };

    let mut tasks = Vec::with_capacity(n);
    for i in 0..n {
        let has_compute = dist.required_max >= 2 && rng.random_bool(dist.compute_prob);
        let req_count = if has_compute {
            rng.random_range(2..=dist.required_max)
        } else {
            1
        };

        let mut required_idx: Vec<usize> =
            rand::seq::index::sample(&mut rng, dist.num_slots, req_count).into_vec();
        required_idx.sort_unstable();
        let required_search: Vec<String> = required_idx.iter().copied().map(slot_name).collect();

        let free: Vec<usize> = (0..dist.num_slots)
            .filter(|i| !required_idx.contains(i))
            .collect();
        let mut distractor_idx: Vec<usize> =
            rand::seq::index::sample(&mut rng, free.len(), dist.distractor_count)
                .into_iter()
                .map(|j| free[j])
                .collect();
        distractor_idx.sort_unstable();
        let distractor_slots: Vec<String> = distractor_idx.iter().copied().map(slot_name).collect();

        let mut fact_table = BTreeMap::new();
        for &idx in required_idx.iter().chain(&distractor_idx) {
            fact_table.insert(slot_name(idx), rng.random_range(FACT_MIN..=FACT_MAX));
        }

        let required_compute = if has_compute {
            let kind = ComputeKind::ALL[rng.random_range(0..ComputeKind::ALL.len())];
            let first = rng.random_range(0..req_count);
            let mut second = rng.random_range(0..req_count - 1);
            if second >= first {
                second += 1;
            }
            Some(ComputeSpec {
                kind,
                operands: [required_search[first].clone(), required_search[second].clone()],
            })
        } else {
            None
        };

        let gold_answer = match &required_compute {
            Some(spec) => spec
                .kind
                .apply(fact_table[&spec.operands[0]], fact_table[&spec.operands[1]]),
            None => fact_table[&required_search[0]],
        };

        let mut query_features = vec![0.0; dist.query_feature_dim()];
        for &idx in &required_idx {
            query_features[idx] = 1.0;
        }
        if let Some(spec) = &required_compute {
            query_features[dist.num_slots + spec.kind.one_hot_index()] = 1.0;
        }
        if let Some(noise) = &noise {
            for f in &mut query_features {
                *f += noise.sample(&mut rng);
            }
        }

        tasks.push(TaskSpec {
            query_id: format!("t{id_tag:08x}-{i:05}"),
            query_features,
            required_search,
            required_compute,
            fact_table,
            distractor_slots,
            gold_answer,
        });
    }
    Ok(tasks)
}

/// Live episode over one task.
#[derive(Debug, Clone)]
pub struct EpisodeState<'a> {
    pub task: &'a TaskSpec,
    pub gathered: BTreeMap<String, i64>,
    pub compute_done: bool,
    pub turn: usize,
    pub history: Vec<Step>,
    pub terminated: bool,
}

impl<'a> EpisodeState<'a> {
    pub fn new(task: &'a TaskSpec) -> Self {
        Self {
            task,
            gathered: BTreeMap::new(),
            compute_done: false,
            turn: 0,
            history: Vec::new(),
            terminated: false,
        }
    }

    /// Applies one action, records the step, and returns the observation
    /// (`None` for `Answer`).
    pub fn step(&mut self, action: Action) -> Result<Option<Observation>, EnvError> {
        if self.terminated {
            return Err(EnvError::EpisodeTerminated);
        }
        let observation = match &action {
            Action::Answer => {
                self.terminated = true;
                None
            }
            Action::ToolCall { tool, arg } if tool == "search" => {
                Some(match self.task.fact_table.get(arg) {
                    Some(&value) => {
                        self.gathered.insert(arg.clone(), value);
                        Observation::Fact {
                            slot: arg.clone(),
                            value,
                        }
                    }
                    None => Observation::ToolError {
                        code: ToolErrorCode::UnknownSlot,
                    },
                })
            }
            Action::ToolCall { tool, arg } if tool == "compute" => {
                Some(self.apply_compute(arg))
            }
            Action::ToolCall { .. } => Some(Observation::ToolError {
                code: ToolErrorCode::BadTool,
            }),
        };
        self.history.push(Step {
            index: self.turn,
            action,
            observation: observation.clone(),
        });
        self.turn += 1;
        Ok(observation)
    }

    /// The op named by the action runs over the task's designated operand
    /// slots. Succeeding requires that both operands have been searched; a
    /// task without a compute step has no operands to feed any op.
    fn apply_compute(&mut self, arg: &str) -> Observation {
        let Some(kind) = ComputeKind::from_arg(arg) else {
            return Observation::ToolError {
                code: ToolErrorCode::BadTool,
            };
        };
        let Some(spec) = &self.task.required_compute else {
            return Observation::ToolError {
                code: ToolErrorCode::MissingOperands,
            };
        };
        let (Some(&a), Some(&b)) = (
            self.gathered.get(&spec.operands[0]),
            self.gathered.get(&spec.operands[1]),
        ) else {
            return Observation::ToolError {
                code: ToolErrorCode::MissingOperands,
            };
        };
        self.compute_done = true;
        Observation::ComputeResult {
            value: kind.apply(a, b),
        }
    }
}

/// A decision rule over episode states. Policies and the scripted teacher
/// both implement this; `rollout` is generic over it.
pub trait Planner {
    fn plan(&self, state: &EpisodeState<'_>, rng: &mut Rng) -> Action;
}

/// Runs one episode to answer or to the turn cap, whichever comes first.
/// A capped episode keeps `terminated = false` and is format-invalid.
pub fn rollout<P: Planner + ?Sized>(
    planner: &P,
    task: &TaskSpec,
    max_turns: usize,
    rng: &mut Rng,
) -> Trajectory {
    assert!(max_turns >= 1, "rollout needs at least one turn");
    let mut state = EpisodeState::new(task);
    while !state.terminated && state.turn < max_turns {
        let action = planner.plan(&state, rng);
        state
            .step(action)
            .expect("loop guard keeps the episode live");
    }
    Trajectory {
        query_id: task.query_id.clone(),
        query_features: task.query_features.clone(),
        steps: state.history,
        terminated: state.terminated,
    }
}

/// Ground-truth completeness: did the trajectory gather every required fact,
/// and (when the task has a compute step) land a successful compute after
/// all its operands were in hand? Works on arbitrary well-formed
/// trajectories by replaying observations, so hand-built transcripts with
/// out-of-order computes score 0 unless the compute was retried.
pub fn oracle_completeness(task: &TaskSpec, traj: &Trajectory) -> bool {
    let mut gathered: BTreeSet<&str> = BTreeSet::new();
    let mut compute_ok = task.required_compute.is_none();
    for step in &traj.steps {
        match &step.observation {
            Some(Observation::Fact { slot, .. }) => {
                gathered.insert(slot);
            }
            Some(Observation::ComputeResult { .. }) => {
                if let Some(spec) = &task.required_compute {
                    if spec.operands.iter().all(|o| gathered.contains(o.as_str())) {
                        compute_ok = true;
                    }
                }
            }
            _ => {}
        }
    }
    compute_ok
        && task
            .required_search
            .iter()
            .all(|slot| gathered.contains(slot.as_str()))
}

/// Summarizer output: the final answer and whether it matches gold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Summary {
    pub answer: i64,
    pub is_correct: bool,
}

/// Ideal-but-honest summarizer. Complete evidence yields the gold answer;
/// on incomplete evidence it fabricates a plausible wrong answer with
/// probability `h` and otherwise abstains. Fabrications never collide with
/// gold and abstention never matches it, so `is_correct` is exactly the
/// completeness bit for every `h`.
pub fn oracle_summarize(task: &TaskSpec, traj: &Trajectory, h: f64, rng: &mut Rng) -> Summary {
    assert!((0.0..=1.0).contains(&h), "hallucination rate must be in [0, 1]");
    if oracle_completeness(task, traj) {
        return Summary {
            answer: task.gold_answer,
            is_correct: true,
        };
    }
    if rng.random_bool(h) {
        let answer = loop {
            let v = rng.random_range(ANSWER_MIN..=ANSWER_MAX);
            if v != task.gold_answer {
                break v;
            }
        };
        Summary {
            answer,
            is_correct: false,
        }
    } else {
        Summary {
            answer: ABSTENTION,
            is_correct: false,
        }
    }
}
