//! Cold start: a scripted teacher, rejection sampling over its rollouts, and
//! behavior cloning of the kept trajectories into an initial policy.

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::env::{rollout, EpisodeState, Planner, TaskSpec};
use crate::policy::{grad_log_prob, log_probs, Featurizer, PolicyParams};
use crate::seeds::{rng_for, stream};
use crate::trajectory::{Action, Trajectory};
use crate::Rng;

/// Demonstration policy that reads the task spec directly: gather the
/// required slots in order, run the required computation, answer. With
/// probability `deviation` per step it wanders instead (a distractor search
/// or a compute call that may be premature), so its rollouts are imperfect
/// and rejection sampling has work to do.
#[derive(Debug, Clone, Copy)]
pub struct ScriptedTeacher {
    pub deviation: f64,
}

impl Default for ScriptedTeacher {
    fn default() -> Self {
        ScriptedTeacher { deviation: 0.2 }
    }
}

impl ScriptedTeacher {
    fn next_needed(state: &EpisodeState<'_>) -> Action {
        let task = state.task;
        for slot in &task.required_search {
            if !state.gathered.contains_key(slot) {
                return Action::call("search", slot);
            }
        }
        if let Some(spec) = &task.required_compute {
            if !state.compute_done {
                return Action::call("compute", spec.kind.arg_name());
            }
        }
        Action::Answer
    }

    fn wander(state: &EpisodeState<'_>, rng: &mut Rng) -> Action {
        let task = state.task;
        if !task.distractor_slots.is_empty() && rng.random_bool(0.5) {
            let i = rng.random_range(0..task.distractor_slots.len());
            Action::call("search", &task.distractor_slots[i])
        } else {
            let ops = crate::env::ComputeKind::ALL;
            let kind = ops[rng.random_range(0..ops.len())];
            Action::call("compute", kind.arg_name())
        }
    }
}

impl Planner for ScriptedTeacher {
    fn plan(&self, state: &EpisodeState<'_>, rng: &mut Rng) -> Action {
        if self.deviation > 0.0 && rng.random_bool(self.deviation) {
            ScriptedTeacher::wander(state, rng)
        } else {
            ScriptedTeacher::next_needed(state)
        }
    }
}

/// Roll the planner `n` times on one task and keep the best trajectory under
/// `scorer`. Ties break toward fewer turns, then toward the earlier rollout,
/// so the result is a pure function of the rng stream.
pub fn reject_sample(
    planner: &dyn Planner,
    task: &TaskSpec,
    n: usize,
    max_turns: usize,
    scorer: &dyn Fn(&TaskSpec, &Trajectory) -> f64,
    rng: &mut Rng,
) -> Trajectory {
    assert!(n >= 1, "rejection sampling needs at least one rollout");
    let mut best: Option<(f64, usize, Trajectory)> = None;
    for _ in 0..n {
        let traj = rollout(planner, task, max_turns, rng);
        let score = scorer(task, &traj);
        let turns = traj.steps.len();
        let better = match &best {
            None => true,
            Some((s, t, _)) => score > *s || (score == *s && turns < *t),
        };
        if better {
            best = Some((score, turns, traj));
        }
    }
    best.expect("n >= 1").2
}

/// Scores a rollout 1.0 when it gathers everything the task requires, else
/// 0.0. The default rejection-sampling scorer.
pub fn completeness_scorer(task: &TaskSpec, traj: &Trajectory) -> f64 {
    if crate::env::oracle_completeness(task, traj) {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColdStartConfig {
    /// Rollouts drawn per task before keeping the best one.
    pub rollouts_per_task: usize,
    /// Full-batch gradient-ascent passes over the kept dataset.
    pub epochs: usize,
    pub learning_rate: f64,
    /// Per-step wander probability of the scripted teacher.
    pub teacher_deviation: f64,
    pub max_turns: usize,
}

impl Default for ColdStartConfig {
    fn default() -> Self {
        ColdStartConfig {
            rollouts_per_task: 4,
            epochs: 30,
            learning_rate: 2.0,
            teacher_deviation: 0.2,
            max_turns: 8,
        }
    }
}

impl ColdStartConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.rollouts_per_task == 0 {
            return Err("cold_start.rollouts_per_task must be >= 1".into());
        }
        if self.epochs == 0 {
            return Err("cold_start.epochs must be >= 1".into());
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err("cold_start.learning_rate must be positive and finite".into());
        }
        if !(0.0..=1.0).contains(&self.teacher_deviation) {
            return Err("cold_start.teacher_deviation must be in [0, 1]".into());
        }
        if self.max_turns == 0 {
            return Err("cold_start.max_turns must be >= 1".into());
        }
        Ok(())
    }
}

pub struct ColdStartOutcome {
    pub params: PolicyParams,
    /// The trajectory kept for each task, in task order.
    pub dataset: Vec<Trajectory>,
    /// Mean negative log-likelihood at the start of each epoch.
    pub nll_per_epoch: Vec<f64>,
}

/// Distill the teacher into a fresh linear policy: rejection-sample one
/// trajectory per task, expand to (state features, action) pairs, and run
/// full-batch gradient ascent on log-likelihood from zero weights.
pub fn cold_start_bc(
    teacher: &ScriptedTeacher,
    tasks: &[TaskSpec],
    featurizer: &Featurizer,
    config: &ColdStartConfig,
    seed: u64,
) -> ColdStartOutcome {
    assert!(!tasks.is_empty(), "cold start needs at least one task");
    config.validate().expect("cold start config");

    let dataset: Vec<Trajectory> = tasks
        .iter()
        .enumerate()
        .map(|(i, task)| {
            let mut rng = rng_for(seed, &[stream::TEACHER, i as u64]);
            reject_sample(
                teacher,
                task,
                config.rollouts_per_task,
                config.max_turns,
                &completeness_scorer,
                &mut rng,
            )
        })
        .collect();

    let vocab = featurizer.vocab();
    let mut samples = Vec::new();
    for traj in &dataset {
        for t in 0..traj.steps.len() {
            let phi = featurizer.features_from_parts(&traj.query_features, &traj.steps[..t], t);
            let a = vocab
                .index_of(&traj.steps[t].action)
                .expect("teacher actions come from the registry vocabulary");
            samples.push((phi, a));
        }
    }
    assert!(!samples.is_empty(), "teacher produced no steps");

    let mut theta = Array2::<f64>::zeros((vocab.len(), featurizer.dim()));
    let mut nll_per_epoch = Vec::with_capacity(config.epochs);
    let inv_n = 1.0 / samples.len() as f64;
    for _ in 0..config.epochs {
        let mut nll = 0.0;
        let mut grad = Array2::<f64>::zeros(theta.raw_dim());
        for (phi, a) in &samples {
            nll -= log_probs(&theta, phi)[*a];
            grad += &grad_log_prob(&theta, phi, *a);
        }
        nll_per_epoch.push(nll * inv_n);
        grad *= inv_n;
        theta.scaled_add(config.learning_rate, &grad);
    }

    let mut params = PolicyParams {
        theta,
        theta_ref: None,
    };
    params.freeze_reference();
    ColdStartOutcome {
        params,
        dataset,
        nll_per_epoch,
    }
}
