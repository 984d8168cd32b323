//! Training: cold start plus three on-policy algorithms (REINFORCE++, GRPO,
//! PPO) over either reward channel.
//!
//! One iteration has four phases. Phase 1 picks a task batch and samples
//! rollouts (optionally in parallel; every rollout owns an rng derived from
//! the iteration and its batch slot, so the schedule is identical either
//! way). Phase 2 scores each rollout through exactly one reward channel.
//! Phase 3 replays the rollouts against the current parameters to collect
//! per-step features, log-probabilities and reference KL. Phase 4 applies
//! one parameter update; it is the only phase that writes.

mod advantage;
mod cold_start;

pub use advantage::{gae, grpo_advantages, reinforcepp_advantages, standardize, GAMMA, LAMBDA};
pub use cold_start::{
    cold_start_bc, completeness_scorer, reject_sample, ColdStartConfig, ColdStartOutcome,
    ScriptedTeacher,
};

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{rollout, TaskSpec};
use crate::judges::{AnswerJudge, CompletenessJudge};
use crate::policy::{
    grad_kl, grad_log_prob, kl_divergence, log_prob, Featurizer, PolicyParams, PolicyPlanner,
};
use crate::reward::{gated_answer_reward, total_reward, RewardBreakdown, RewardConfig};
use crate::seeds::{rng_for, stream};
use crate::trajectory::{Trajectory, ToolRegistry};

/// Inner optimization passes per PPO iteration.
pub const PPO_EPOCHS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "reinforcepp")]
    ReinforcePp,
    #[serde(rename = "grpo")]
    Grpo,
    #[serde(rename = "ppo")]
    Ppo,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::ReinforcePp, Algorithm::Grpo, Algorithm::Ppo];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::ReinforcePp => "reinforcepp",
            Algorithm::Grpo => "grpo",
            Algorithm::Ppo => "ppo",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "reinforcepp" => Ok(Algorithm::ReinforcePp),
            "grpo" => Ok(Algorithm::Grpo),
            "ppo" => Ok(Algorithm::Ppo),
            other => Err(format!(
                "unknown algorithm {other:?}; expected reinforcepp, grpo, or ppo"
            )),
        }
    }
}

/// Which reward channel scores rollouts. The two are mutually exclusive:
/// process-reward runs never consult the answer judge, and answer-reward
/// runs never consult the completeness judge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardMode {
    #[serde(rename = "rltr")]
    Rltr,
    #[serde(rename = "e2e_answer")]
    E2eAnswer,
}

impl RewardMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RewardMode::Rltr => "rltr",
            RewardMode::E2eAnswer => "e2e_answer",
        }
    }
}

impl fmt::Display for RewardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rltr" => Ok(RewardMode::Rltr),
            "e2e" | "e2e_answer" => Ok(RewardMode::E2eAnswer),
            other => Err(format!(
                "unknown reward mode {other:?}; expected rltr or e2e_answer"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    pub algorithm: Algorithm,
    pub reward_mode: RewardMode,
    /// Tasks drawn per iteration.
    pub batch_size: usize,
    /// Rollouts per task. Only GRPO compares within a group; the other
    /// algorithms always roll once per task.
    pub group_size: usize,
    pub learning_rate: f64,
    /// Weight of the KL leash to the frozen reference policy.
    pub kl_beta: f64,
    /// Ratio clip for the surrogate objective.
    pub clip_epsilon: f64,
    pub iterations: usize,
    pub max_turns: usize,
    /// Added to the population std when standardizing advantages, so a
    /// zero-variance group yields zeros instead of NaN.
    pub std_floor: f64,
    pub seed: u64,
    /// Generate and score rollouts on the rayon pool. Purely a throughput
    /// knob: results are identical to the serial path.
    pub parallel: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            algorithm: Algorithm::Grpo,
            reward_mode: RewardMode::Rltr,
            batch_size: 32,
            group_size: 8,
            learning_rate: 0.05,
            kl_beta: 0.01,
            clip_epsilon: 0.2,
            iterations: 300,
            max_turns: 8,
            std_floor: 1e-8,
            seed: 0,
            parallel: true,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.batch_size == 0 {
            return Err("trainer.batch_size must be >= 1".into());
        }
        if self.algorithm == Algorithm::Grpo && self.group_size < 2 {
            return Err("trainer.group_size must be >= 2 for grpo".into());
        }
        if self.group_size == 0 {
            return Err("trainer.group_size must be >= 1".into());
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err("trainer.learning_rate must be positive and finite".into());
        }
        if !(self.kl_beta >= 0.0) || !self.kl_beta.is_finite() {
            return Err("trainer.kl_beta must be >= 0 and finite".into());
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err("trainer.clip_epsilon must be in (0, 1)".into());
        }
        if self.iterations == 0 {
            return Err("trainer.iterations must be >= 1".into());
        }
        if self.max_turns == 0 {
            return Err("trainer.max_turns must be >= 1".into());
        }
        if !(self.std_floor > 0.0) || !self.std_floor.is_finite() {
            return Err("trainer.std_floor must be positive and finite".into());
        }
        Ok(())
    }

    /// Rollouts per task actually generated: `group_size` under GRPO, one
    /// otherwise.
    pub fn effective_group(&self) -> usize {
        if self.algorithm == Algorithm::Grpo {
            self.group_size
        } else {
            1
        }
    }
}

/// One row of the training log; every field but `iter` is a batch mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub r_total: f64,
    pub r_comp: f64,
    /// Mean magnitude of the error penalty, so "falls over training" reads
    /// as a decreasing column.
    pub err_penalty: f64,
    pub turns: f64,
    /// Mean trainable text length in characters.
    pub len: f64,
    /// Mean per-step KL against the frozen reference.
    pub kl: f64,
    pub invalid_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<IterationRecord>,
}

impl TrainingLog {
    pub const CSV_HEADER: &'static str =
        "iter,r_total,r_comp,err_penalty,turns,len,kl,invalid_rate";

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                r.iter, r.r_total, r.r_comp, r.err_penalty, r.turns, r.len, r.kl, r.invalid_rate
            ));
        }
        out
    }
}

/// Everything a training run reads but does not own. Both judges are always
/// present; the reward mode decides which one is ever consulted.
pub struct TrainContext<'a> {
    pub registry: &'a ToolRegistry,
    pub featurizer: &'a Featurizer,
    pub tasks: &'a [TaskSpec],
    pub reward: &'a RewardConfig,
    pub completeness_judge: &'a (dyn CompletenessJudge + Sync),
    pub answer_judge: &'a (dyn AnswerJudge + Sync),
    /// Fabrication rate of the summarizer on the answer-reward path.
    pub summarizer_h: f64,
}

struct StepSample {
    phi: Array1<f64>,
    action: usize,
    /// Log-probability under the parameters that generated the rollout.
    logp: f64,
    /// KL against the frozen reference at this state, under those same
    /// parameters.
    kl: f64,
}

fn map_jobs<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Gradient of `min(ratio * A, clip(ratio, 1 +- eps) * A)` for one step,
/// folded into `scale * d log pi`: the unclipped branch contributes
/// `ratio * A`, and when the clipped branch is strictly smaller the clamp is
/// necessarily saturated, so the gradient is zero.
fn surrogate_scale(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    if unclipped <= clipped {
        unclipped
    } else {
        0.0
    }
}

/// One ascent step on the clipped surrogate, token-averaged over
/// `(trajectory, step)` pairs. `advantages` holds one scalar per trajectory
/// for the scalar-advantage algorithms; `per_step` overrides it with
/// step-level advantages for PPO.
fn surrogate_step(
    theta: &mut Array2<f64>,
    samples: &[Vec<StepSample>],
    advantages: &[f64],
    per_step: Option<&[Vec<f64>]>,
    lr: f64,
    eps: f64,
) {
    let mut grad = Array2::<f64>::zeros(theta.raw_dim());
    let mut steps = 0usize;
    for (k, traj) in samples.iter().enumerate() {
        for (t, s) in traj.iter().enumerate() {
            let adv = match per_step {
                Some(a) => a[k][t],
                None => advantages[k],
            };
            let ratio = (log_prob(theta, &s.phi, s.action) - s.logp).exp();
            let scale = surrogate_scale(ratio, adv, eps);
            if scale != 0.0 {
                grad.scaled_add(scale, &grad_log_prob(theta, &s.phi, s.action));
            }
            steps += 1;
        }
    }
    theta.scaled_add(lr / steps as f64, &grad);
}

fn grpo_update(
    theta: &mut Array2<f64>,
    theta_ref: &Array2<f64>,
    samples: &[Vec<StepSample>],
    scores: &[RewardBreakdown],
    config: &TrainerConfig,
) {
    let group = config.group_size;
    let mut advantages = vec![0.0; samples.len()];
    for b in 0..samples.len() / group {
        let rewards: Vec<f64> = (0..group).map(|g| scores[b * group + g].r_total).collect();
        let adv = grpo_advantages(&rewards, config.std_floor);
        advantages[b * group..(b + 1) * group].copy_from_slice(&adv);
    }

    // Single on-policy step: every ratio is exactly 1, so the clipped
    // surrogate gradient reduces to advantage-weighted score functions.
    // The KL leash enters the loss directly.
    let mut grad = Array2::<f64>::zeros(theta.raw_dim());
    let mut steps = 0usize;
    for (traj, &adv) in samples.iter().zip(&advantages) {
        for s in traj {
            grad.scaled_add(adv, &grad_log_prob(theta, &s.phi, s.action));
            if config.kl_beta != 0.0 {
                grad.scaled_add(-config.kl_beta, &grad_kl(theta, theta_ref, &s.phi));
            }
            steps += 1;
        }
    }
    theta.scaled_add(config.learning_rate / steps as f64, &grad);
}

fn reinforcepp_update(
    theta: &mut Array2<f64>,
    samples: &[Vec<StepSample>],
    scores: &[RewardBreakdown],
    config: &TrainerConfig,
) {
    // The KL leash is folded into the return, not the loss, and there is no
    // critic anywhere: advantages are batch-standardized shaped returns.
    let rewards: Vec<f64> = scores.iter().map(|s| s.r_total).collect();
    let kl_sums: Vec<f64> = samples
        .iter()
        .map(|traj| traj.iter().map(|s| s.kl).sum())
        .collect();
    let advantages = reinforcepp_advantages(&rewards, &kl_sums, config.kl_beta, config.std_floor);
    surrogate_step(
        theta,
        samples,
        &advantages,
        None,
        config.learning_rate,
        config.clip_epsilon,
    );
}

fn ppo_update(
    theta: &mut Array2<f64>,
    value_w: &mut Array1<f64>,
    samples: &[Vec<StepSample>],
    scores: &[RewardBreakdown],
    config: &TrainerConfig,
) {
    // Terminal-reward episodes: the trajectory reward lands on the last
    // step, every step pays the KL toll, and a linear value head supplies
    // the baseline.
    let mut advantages = Vec::with_capacity(samples.len());
    let mut returns = Vec::with_capacity(samples.len());
    for (traj, score) in samples.iter().zip(scores) {
        let mut rewards: Vec<f64> = traj.iter().map(|s| -config.kl_beta * s.kl).collect();
        *rewards.last_mut().expect("rollouts have at least one step") += score.r_total;
        let values: Vec<f64> = traj.iter().map(|s| value_w.dot(&s.phi)).collect();
        let (adv, ret) = gae(&rewards, &values);
        advantages.push(adv);
        returns.push(ret);
    }

    let steps: usize = samples.iter().map(|t| t.len()).sum();
    for _ in 0..PPO_EPOCHS {
        surrogate_step(
            theta,
            samples,
            &[],
            Some(&advantages),
            config.learning_rate,
            config.clip_epsilon,
        );
        // Half-MSE descent on the value head against the fixed returns.
        let mut vgrad = Array1::<f64>::zeros(value_w.len());
        for (traj, ret) in samples.iter().zip(&returns) {
            for (s, &r) in traj.iter().zip(ret) {
                vgrad.scaled_add(r - value_w.dot(&s.phi), &s.phi);
            }
        }
        value_w.scaled_add(config.learning_rate / steps as f64, &vgrad);
    }
}

/// Run the configured algorithm for `config.iterations` updates and return
/// the final parameters plus the per-iteration log. If `params` carries no
/// frozen reference, the incoming parameters become one.
pub fn train_loop(
    mut params: PolicyParams,
    config: &TrainerConfig,
    ctx: &TrainContext<'_>,
) -> (PolicyParams, TrainingLog) {
    config.validate().expect("trainer config");
    ctx.reward.validate().expect("reward config");
    assert!(!ctx.tasks.is_empty(), "training needs at least one task");
    assert_eq!(
        params.theta.dim(),
        (ctx.featurizer.vocab().len(), ctx.featurizer.dim()),
        "parameter shape does not match the featurizer"
    );
    assert!(
        (0.0..=1.0).contains(&ctx.summarizer_h),
        "summarizer_h must be a probability"
    );

    if params.theta_ref.is_none() {
        params.freeze_reference();
    }
    let theta_ref = params.theta_ref.clone().expect("frozen above");

    let group = config.effective_group();
    let rollouts_per_iter = config.batch_size * group;
    let mut value_w = Array1::<f64>::zeros(ctx.featurizer.dim());
    let mut log = TrainingLog::default();

    for iter in 0..config.iterations {
        let it = iter as u64;

        // Phase 1: pick tasks, then sample one rollout per (task, slot).
        let mut select = rng_for(config.seed, &[stream::SELECT, it]);
        let task_idx: Vec<usize> = (0..config.batch_size)
            .map(|_| select.random_range(0..ctx.tasks.len()))
            .collect();
        let theta = &params.theta;
        let rollouts: Vec<Trajectory> = map_jobs(rollouts_per_iter, config.parallel, |k| {
            let (b, g) = (k / group, k % group);
            let planner = PolicyPlanner {
                featurizer: ctx.featurizer,
                theta,
                greedy: false,
            };
            let mut rng = rng_for(config.seed, &[stream::ROLLOUT, it, b as u64, g as u64]);
            rollout(&planner, &ctx.tasks[task_idx[b]], config.max_turns, &mut rng)
        });

        // Phase 2: score through exactly one reward channel.
        let scores: Vec<RewardBreakdown> = map_jobs(rollouts_per_iter, config.parallel, |k| {
            let (b, g) = (k / group, k % group);
            let task = &ctx.tasks[task_idx[b]];
            let mut rng = rng_for(config.seed, &[stream::SCORE, it, b as u64, g as u64]);
            match config.reward_mode {
                RewardMode::Rltr => total_reward(
                    task,
                    &rollouts[k],
                    ctx.registry,
                    ctx.completeness_judge,
                    ctx.reward,
                    &mut rng,
                ),
                RewardMode::E2eAnswer => gated_answer_reward(
                    task,
                    &rollouts[k],
                    ctx.registry,
                    ctx.summarizer_h,
                    ctx.answer_judge,
                    &mut rng,
                ),
            }
        });

        // Phase 3: replay for per-step features, behavior log-probs, KL.
        let samples: Vec<Vec<StepSample>> = map_jobs(rollouts_per_iter, config.parallel, |k| {
            let traj = &rollouts[k];
            (0..traj.steps.len())
                .map(|t| {
                    let phi = ctx.featurizer.features_from_parts(
                        &traj.query_features,
                        &traj.steps[..t],
                        t,
                    );
                    let action = ctx
                        .featurizer
                        .vocab()
                        .index_of(&traj.steps[t].action)
                        .expect("policy rollouts act from the vocabulary");
                    let logp = log_prob(theta, &phi, action);
                    let kl = kl_divergence(theta, &theta_ref, &phi);
                    StepSample {
                        phi,
                        action,
                        logp,
                        kl,
                    }
                })
                .collect()
        });

        // Phase 4: one update, single writer.
        match config.algorithm {
            Algorithm::Grpo => {
                grpo_update(&mut params.theta, &theta_ref, &samples, &scores, config)
            }
            Algorithm::ReinforcePp => {
                reinforcepp_update(&mut params.theta, &samples, &scores, config)
            }
            Algorithm::Ppo => {
                ppo_update(&mut params.theta, &mut value_w, &samples, &scores, config)
            }
        }

        let m = rollouts_per_iter as f64;
        let steps_total: usize = samples.iter().map(|t| t.len()).sum();
        log.records.push(IterationRecord {
            iter,
            r_total: scores.iter().map(|s| s.r_total).sum::<f64>() / m,
            r_comp: scores.iter().map(|s| s.r_comp).sum::<f64>() / m,
            err_penalty: scores.iter().map(|s| s.r_error.abs()).sum::<f64>() / m,
            turns: rollouts.iter().map(|r| r.steps.len() as f64).sum::<f64>() / m,
            len: rollouts
                .iter()
                .map(|r| r.action_text_len() as f64)
                .sum::<f64>()
                / m,
            kl: samples
                .iter()
                .flat_map(|t| t.iter().map(|s| s.kl))
                .sum::<f64>()
                / steps_total as f64,
            invalid_rate: scores.iter().filter(|s| !s.format_valid).count() as f64 / m,
        });
    }

    (params, log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    use crate::env::{generate_tasks, TaskDistribution};
    use crate::judges::{JudgeConfig, NoisyAnswerJudge, NoisyCompletenessJudge};
    use crate::policy::ActionVocabulary;
    use crate::Rng;

    struct Fixture {
        registry: ToolRegistry,
        featurizer: Featurizer,
        tasks: Vec<TaskSpec>,
        reward: RewardConfig,
        completeness: NoisyCompletenessJudge,
        answer: NoisyAnswerJudge,
    }

    fn fixture() -> Fixture {
        let dist = TaskDistribution {
            num_slots: 5,
            required_max: 2,
            distractor_count: 1,
            ..TaskDistribution::default()
        };
        let tasks = generate_tasks(&dist, 6, 31).unwrap();
        let registry = dist.tool_registry();
        let vocab = ActionVocabulary::from_registry(&registry);
        let featurizer = Featurizer::new(vocab, dist.query_feature_dim(), 6);
        let judge = JudgeConfig::noiseless();
        Fixture {
            registry,
            featurizer,
            tasks,
            reward: RewardConfig::default(),
            completeness: NoisyCompletenessJudge { config: judge },
            answer: NoisyAnswerJudge { config: judge },
        }
    }

    fn context<'a>(f: &'a Fixture) -> TrainContext<'a> {
        TrainContext {
            registry: &f.registry,
            featurizer: &f.featurizer,
            tasks: &f.tasks,
            reward: &f.reward,
            completeness_judge: &f.completeness,
            answer_judge: &f.answer,
            summarizer_h: 1.0,
        }
    }

    fn small_config(algorithm: Algorithm) -> TrainerConfig {
        TrainerConfig {
            algorithm,
            batch_size: 6,
            group_size: 4,
            iterations: 4,
            max_turns: 6,
            seed: 13,
            ..TrainerConfig::default()
        }
    }

    fn fresh_params(f: &Fixture) -> PolicyParams {
        PolicyParams::zeros(f.featurizer.vocab().len(), f.featurizer.dim())
    }

    #[test]
    fn csv_layout_is_fixed() {
        let log = TrainingLog {
            records: vec![IterationRecord {
                iter: 0,
                r_total: 0.5,
                r_comp: 0.25,
                err_penalty: 0.1,
                turns: 3.0,
                len: 17.5,
                kl: 0.001234567,
                invalid_rate: 0.0,
            }],
        };
        assert_eq!(
            log.to_csv(),
            "iter,r_total,r_comp,err_penalty,turns,len,kl,invalid_rate\n\
             0,0.500000,0.250000,0.100000,3.000000,17.500000,0.001235,0.000000\n"
        );
    }

    #[test]
    fn surrogate_scale_matches_min_branch_analysis() {
        // ratio above the clip window: positive advantage clips to zero
        // gradient, negative advantage keeps the unclipped branch.
        assert_eq!(surrogate_scale(2.0, 1.0, 0.2), 0.0);
        assert_eq!(surrogate_scale(2.0, -1.0, 0.2), -2.0);
        // ratio below the window: mirrored.
        assert_eq!(surrogate_scale(0.5, -1.0, 0.2), 0.0);
        assert_eq!(surrogate_scale(0.5, 1.0, 0.2), 0.5);
        // inside the window both branches agree.
        assert_eq!(surrogate_scale(1.1, 1.0, 0.2), 1.1);
        assert_eq!(surrogate_scale(1.0, -2.5, 0.2), -2.5);
    }

    #[test]
    fn parallel_and_serial_runs_are_identical() {
        let f = fixture();
        let ctx = context(&f);
        for algorithm in Algorithm::ALL {
            let serial = TrainerConfig {
                parallel: false,
                ..small_config(algorithm)
            };
            let parallel = TrainerConfig {
                parallel: true,
                ..small_config(algorithm)
            };
            let (pa, la) = train_loop(fresh_params(&f), &serial, &ctx);
            let (pb, lb) = train_loop(fresh_params(&f), &parallel, &ctx);
            assert_eq!(pa.theta, pb.theta, "{algorithm}");
            assert_eq!(la.to_csv(), lb.to_csv(), "{algorithm}");
        }
    }

    #[test]
    fn reruns_are_deterministic() {
        let f = fixture();
        let ctx = context(&f);
        let config = small_config(Algorithm::Grpo);
        let (pa, la) = train_loop(fresh_params(&f), &config, &ctx);
        let (pb, lb) = train_loop(fresh_params(&f), &config, &ctx);
        assert_eq!(pa.theta, pb.theta);
        assert_eq!(la, lb);
    }

    struct CountingCompleteness {
        inner: NoisyCompletenessJudge,
        calls: AtomicUsize,
    }

    impl CompletenessJudge for CountingCompleteness {
        fn verdict(&self, task: &TaskSpec, traj: &Trajectory, rng: &mut Rng) -> bool {
            self.calls.fetch_add(1, Ordering::Relaxed);
            self.inner.verdict(task, traj, rng)
        }
    }

    struct CountingAnswer {
        inner: NoisyAnswerJudge,
        calls: AtomicUsize,
    }

    impl AnswerJudge for CountingAnswer {
        fn verdict(&self, task: &TaskSpec, answer: i64, rng: &mut Rng) -> bool {
            self.calls.fetch_add(1, Ordering::Relaxed);
            self.inner.verdict(task, answer, rng)
        }
    }

    #[test]
    fn reward_modes_consult_disjoint_judges() {
        let f = fixture();
        let completeness = CountingCompleteness {
            inner: f.completeness,
            calls: AtomicUsize::new(0),
        };
        let answer = CountingAnswer {
            inner: f.answer,
            calls: AtomicUsize::new(0),
        };
        let ctx = TrainContext {
            registry: &f.registry,
            featurizer: &f.featurizer,
            tasks: &f.tasks,
            reward: &f.reward,
            completeness_judge: &completeness,
            answer_judge: &answer,
            summarizer_h: 1.0,
        };

        let rltr = TrainerConfig {
            reward_mode: RewardMode::Rltr,
            ..small_config(Algorithm::Grpo)
        };
        train_loop(fresh_params(&f), &rltr, &ctx);
        assert!(completeness.calls.load(Ordering::Relaxed) > 0);
        assert_eq!(answer.calls.load(Ordering::Relaxed), 0);

        completeness.calls.store(0, Ordering::Relaxed);
        let e2e = TrainerConfig {
            reward_mode: RewardMode::E2eAnswer,
            ..small_config(Algorithm::Grpo)
        };
        let (_, log) = train_loop(fresh_params(&f), &e2e, &ctx);
        assert_eq!(completeness.calls.load(Ordering::Relaxed), 0);
        assert!(answer.calls.load(Ordering::Relaxed) > 0);
        // the answer channel never reports a completeness component
        assert!(log.records.iter().all(|r| r.r_comp == 0.0));
    }

    #[test]
    fn zero_beta_makes_updates_independent_of_the_reference() {
        let f = fixture();
        let ctx = context(&f);
        for algorithm in Algorithm::ALL {
            let config = TrainerConfig {
                kl_beta: 0.0,
                ..small_config(algorithm)
            };
            let mut a = fresh_params(&f);
            a.freeze_reference();
            let mut b = fresh_params(&f);
            b.set_reference(Array2::from_elem(b.theta.dim(), 0.7));
            let (pa, _) = train_loop(a, &config, &ctx);
            let (pb, _) = train_loop(b, &config, &ctx);
            assert_eq!(pa.theta, pb.theta, "{algorithm}");
        }
    }

    #[test]
    fn keeps_an_existing_reference_instead_of_refreezing() {
        let f = fixture();
        let ctx = context(&f);
        let config = small_config(Algorithm::Grpo);
        let reference = Array2::from_elem(
            (f.featurizer.vocab().len(), f.featurizer.dim()),
            0.3,
        );
        let mut params = fresh_params(&f);
        params.set_reference(reference.clone());
        let (out, _) = train_loop(params, &config, &ctx);
        assert_eq!(out.theta_ref, Some(reference));
    }

    #[test]
    fn every_algorithm_lifts_reward_from_zero_init() {
        let f = fixture();
        let ctx = context(&f);
        for algorithm in Algorithm::ALL {
            let config = TrainerConfig {
                iterations: 40,
                learning_rate: 0.1,
                seed: 5,
                ..small_config(algorithm)
            };
            let (_, log) = train_loop(fresh_params(&f), &config, &ctx);
            let first = log.records[0].r_total;
            let last = log.records.last().unwrap().r_total;
            assert!(
                last > first + 0.1,
                "{algorithm}: no lift ({first:.3} -> {last:.3})"
            );
        }
    }

    #[test]
    fn log_has_one_record_per_iteration() {
        let f = fixture();
        let ctx = context(&f);
        let config = small_config(Algorithm::ReinforcePp);
        let (_, log) = train_loop(fresh_params(&f), &config, &ctx);
        assert_eq!(log.records.len(), config.iterations);
        for (i, r) in log.records.iter().enumerate() {
            assert_eq!(r.iter, i);
            assert!(r.turns >= 1.0);
            assert!(r.kl >= 0.0);
            assert!((0.0..=1.0).contains(&r.invalid_rate));
        }
    }
}
