//! Linear-softmax planner over a finite action vocabulary.
//!
//! The policy is a single matrix `theta` of shape `|A| x d`: action
//! preferences are `theta · phi(s)` and the policy is their softmax. The
//! feature map is deliberately blind to everything the planner should not
//! know: it sees the task's observable query features, its own call history
//! (counts capped so features stay bounded), the kind of the last
//! observation, and the normalized turn index. Hidden task state (fact
//! tables, required slots, gold answers) never enters `phi`.
//!
//! All gradients here are exact. Downstream trainers rely on
//! `grad_log_prob` being `(e_a - pi) phi^T` and on the KL between two
//! parameter matrices at a state being the exact categorical KL, not a
//! sampled estimate.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng as _;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::env::{EpisodeState, Planner};
use crate::trajectory::{Action, Step, ToolRegistry};
use crate::Rng;

/// Indexed, ordered action set: every `tool(arg)` pair a registry admits,
/// then `Answer` last. Order is fixed for the life of a run and hashed into
/// checkpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionVocabulary {
    actions: Vec<Action>,
    index: HashMap<Action, usize>,
    answer_index: usize,
}

impl ActionVocabulary {
    pub fn from_registry(registry: &ToolRegistry) -> Self {
        let mut actions = Vec::new();
        for tool in registry.tools() {
            for arg in &tool.args {
                actions.push(Action::call(tool.name.clone(), arg.clone()));
            }
        }
        actions.push(Action::Answer);
        let index = actions
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        let answer_index = actions.len() - 1;
        Self {
            actions,
            index,
            answer_index,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn action(&self, index: usize) -> &Action {
        &self.actions[index]
    }

    pub fn index_of(&self, action: &Action) -> Option<usize> {
        self.index.get(action).copied()
    }

    pub fn answer_index(&self) -> usize {
        self.answer_index
    }

    /// Stable 16-hex-digit digest of the ordered action list. Checkpoints
    /// refuse to load under a different vocabulary.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for action in &self.actions {
            match action {
                Action::ToolCall { tool, arg } => {
                    hasher.update(tool.as_bytes());
                    hasher.update(b"(");
                    hasher.update(arg.as_bytes());
                    hasher.update(b")\n");
                }
                Action::Answer => hasher.update(b"answer\n"),
            }
        }
        let digest = hasher.finalize();
        let mut out = String::with_capacity(16);
        for byte in &digest[..8] {
            write!(out, "{byte:02x}").expect("writing to a string");
        }
        out
    }
}

/// State-to-feature map. Layout:
/// `[query features | per-action call counts (answer excluded, capped) |
///   last-observation flags fact/result/error | turn / max_turns]`.
#[derive(Debug, Clone)]
pub struct Featurizer {
    vocab: ActionVocabulary,
    query_dim: usize,
    max_turns: usize,
}

/// Call counts saturate here so feature magnitude stays bounded no matter
/// how degenerate a rollout gets.
pub const COUNT_CAP: f64 = 3.0;

impl Featurizer {
    pub fn new(vocab: ActionVocabulary, query_dim: usize, max_turns: usize) -> Self {
        assert!(max_turns >= 1, "featurizer needs a positive turn cap");
        Self {
            vocab,
            query_dim,
            max_turns,
        }
    }

    pub fn vocab(&self) -> &ActionVocabulary {
        &self.vocab
    }

    pub fn query_dim(&self) -> usize {
        self.query_dim
    }

    pub fn max_turns(&self) -> usize {
        self.max_turns
    }

    pub fn dim(&self) -> usize {
        self.query_dim + (self.vocab.len() - 1) + 3 + 1
    }

    /// Feature vector for a state given as raw parts. Used both live (via
    /// [`Featurizer::features`]) and when replaying logged trajectories for
    /// gradient computation; the two paths are the same code on purpose.
    pub fn features_from_parts(
        &self,
        query_features: &[f64],
        history: &[Step],
        turn: usize,
    ) -> Array1<f64> {
        assert_eq!(
            query_features.len(),
            self.query_dim,
            "query feature length does not match the featurizer"
        );
        let mut phi = Array1::zeros(self.dim());
        for (i, &q) in query_features.iter().enumerate() {
            phi[i] = q;
        }

        let counts_base = self.query_dim;
        for step in history {
            if let Some(idx) = self.vocab.index_of(&step.action) {
                if idx != self.vocab.answer_index() {
                    let slot = counts_base + idx;
                    phi[slot] = (phi[slot] + 1.0).min(COUNT_CAP);
                }
            }
        }

        let flags_base = counts_base + self.vocab.len() - 1;
        if let Some(obs) = history.last().and_then(|s| s.observation.as_ref()) {
            use crate::trajectory::Observation;
            let flag = match obs {
                Observation::Fact { .. } => 0,
                Observation::ComputeResult { .. } => 1,
                Observation::ToolError { .. } => 2,
            };
            phi[flags_base + flag] = 1.0;
        }

        phi[flags_base + 3] = turn as f64 / self.max_turns as f64;
        phi
    }

    /// Feature vector for a live episode. Reads only the observable task
    /// descriptor, never hidden task fields.
    pub fn features(&self, state: &EpisodeState<'_>) -> Array1<f64> {
        self.features_from_parts(&state.task.query_features, &state.history, state.turn)
    }
}

/// Policy parameters plus the frozen reference used for KL regularization.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub theta: Array2<f64>,
    pub theta_ref: Option<Array2<f64>>,
}

impl PolicyParams {
    pub fn zeros(actions: usize, dim: usize) -> Self {
        Self {
            theta: Array2::zeros((actions, dim)),
            theta_ref: None,
        }
    }

    /// Snapshots the current parameters as the KL anchor.
    pub fn freeze_reference(&mut self) {
        self.theta_ref = Some(self.theta.clone());
    }

    pub fn set_reference(&mut self, reference: Array2<f64>) {
        assert_eq!(
            reference.dim(),
            self.theta.dim(),
            "reference parameters must match the policy shape"
        );
        self.theta_ref = Some(reference);
    }
}

pub fn logits(theta: &Array2<f64>, phi: &Array1<f64>) -> Array1<f64> {
    assert_eq!(
        theta.ncols(),
        phi.len(),
        "feature length does not match parameter columns"
    );
    theta.dot(phi)
}

/// Softmax with max-logit subtraction. Entries are positive and sum to 1
/// within 1e-12 for any finite logits.
pub fn action_probs(theta: &Array2<f64>, phi: &Array1<f64>) -> Array1<f64> {
    let z = logits(theta, phi);
    let max = z.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut e = z.mapv(|v| (v - max).exp());
    let sum = e.sum();
    e.mapv_inplace(|v| v / sum);
    e
}

/// Log-softmax via the same stabilized path.
pub fn log_probs(theta: &Array2<f64>, phi: &Array1<f64>) -> Array1<f64> {
    let z = logits(theta, phi);
    let max = z.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = max + z.mapv(|v| (v - max).exp()).sum().ln();
    z.mapv(|v| v - lse)
}

pub fn log_prob(theta: &Array2<f64>, phi: &Array1<f64>, action: usize) -> f64 {
    log_probs(theta, phi)[action]
}

fn outer(col: &Array1<f64>, row: &Array1<f64>) -> Array2<f64> {
    let c = col.view().insert_axis(Axis(1));
    let r = row.view().insert_axis(Axis(0));
    &c * &r
}

/// Exact score function: `d log pi(a|phi) / d theta = (e_a - pi) phi^T`.
pub fn grad_log_prob(theta: &Array2<f64>, phi: &Array1<f64>, action: usize) -> Array2<f64> {
    let mut coef = action_probs(theta, phi);
    coef.mapv_inplace(|p| -p);
    coef[action] += 1.0;
    outer(&coef, phi)
}

/// Exact categorical KL between the policies induced by `theta` and
/// `theta_ref` at one state. Clamped at zero so rounding can never report a
/// negative divergence.
pub fn kl_divergence(theta: &Array2<f64>, theta_ref: &Array2<f64>, phi: &Array1<f64>) -> f64 {
    let lp = log_probs(theta, phi);
    let lq = log_probs(theta_ref, phi);
    let mut kl = 0.0;
    for i in 0..lp.len() {
        let p = lp[i].exp();
        if p > 0.0 {
            kl += p * (lp[i] - lq[i]);
        }
    }
    kl.max(0.0)
}

/// Exact gradient of `KL(pi_theta || pi_ref)` at one state with respect to
/// `theta`: `sum_a pi_a (log pi_a - log q_a) (e_a - pi) phi^T`, which
/// collapses to `(pi .* d - KL pi) phi^T` with `d = log pi - log q`.
pub fn grad_kl(theta: &Array2<f64>, theta_ref: &Array2<f64>, phi: &Array1<f64>) -> Array2<f64> {
    let lp = log_probs(theta, phi);
    let lq = log_probs(theta_ref, phi);
    let p = lp.mapv(f64::exp);
    let d = &lp - &lq;
    let kl: f64 = (&p * &d).sum();
    let coef = &p * &d - &(p.mapv(|v| v * kl));
    outer(&coef, phi)
}

/// Inverse-CDF categorical draw over the action probabilities.
pub fn sample_action(theta: &Array2<f64>, phi: &Array1<f64>, rng: &mut Rng) -> usize {
    let probs = action_probs(theta, phi);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Argmax action; ties break to the lowest index.
pub fn greedy_action(theta: &Array2<f64>, phi: &Array1<f64>) -> usize {
    let z = logits(theta, phi);
    let mut best = 0;
    for i in 1..z.len() {
        if z[i] > z[best] {
            best = i;
        }
    }
    best
}

/// Planner view of a parameter matrix: stochastic for training rollouts,
/// greedy for evaluation.
#[derive(Debug, Clone, Copy)]
pub struct PolicyPlanner<'a> {
    pub featurizer: &'a Featurizer,
    pub theta: &'a Array2<f64>,
    pub greedy: bool,
}

impl Planner for PolicyPlanner<'_> {
    fn plan(&self, state: &EpisodeState<'_>, rng: &mut Rng) -> Action {
        let phi = self.featurizer.features(state);
        let idx = if self.greedy {
            greedy_action(self.theta, &phi)
        } else {
            sample_action(self.theta, &phi, rng)
        };
        self.featurizer.vocab().action(idx).clone()
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint header: {0}")]
    BadHeader(String),
    #[error("checkpoint vocabulary {found} does not match current vocabulary {expected}")]
    VocabMismatch { expected: String, found: String },
    #[error("checkpoint row {row} has {found} values, expected {expected}")]
    BadRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("unparsable value {0:?} in checkpoint")]
    BadValue(String),
}

const CHECKPOINT_MAGIC: &str = "toolrl-policy v1";

/// Text checkpoint: magic line, `actions <|A|> dim <d> vocab <digest>`,
/// then one row of shortest-round-trip floats per action. Loads are exact.
pub fn save_checkpoint(
    path: &Path,
    theta: &Array2<f64>,
    vocab: &ActionVocabulary,
) -> Result<(), CheckpointError> {
    assert_eq!(theta.nrows(), vocab.len(), "row per vocabulary action");
    let mut out = String::new();
    writeln!(out, "{CHECKPOINT_MAGIC}").expect("writing to a string");
    writeln!(
        out,
        "actions {} dim {} vocab {}",
        theta.nrows(),
        theta.ncols(),
        vocab.fingerprint()
    )
    .expect("writing to a string");
    for row in theta.rows() {
        let mut line = String::new();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            write!(line, "{v:?}").expect("writing to a string");
        }
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_checkpoint(
    path: &Path,
    vocab: &ActionVocabulary,
) -> Result<Array2<f64>, CheckpointError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(CHECKPOINT_MAGIC) => {}
        other => {
            return Err(CheckpointError::BadHeader(format!(
                "magic line {other:?}"
            )))
        }
    }
    let header = lines
        .next()
        .ok_or_else(|| CheckpointError::BadHeader("missing shape line".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let (actions, dim, digest) = match parts.as_slice() {
        ["actions", a, "dim", d, "vocab", v] => {
            let a: usize = a
                .parse()
                .map_err(|_| CheckpointError::BadHeader(header.into()))?;
            let d: usize = d
                .parse()
                .map_err(|_| CheckpointError::BadHeader(header.into()))?;
            (a, d, v.to_string())
        }
        _ => return Err(CheckpointError::BadHeader(header.into())),
    };
    if digest != vocab.fingerprint() {
        return Err(CheckpointError::VocabMismatch {
            expected: vocab.fingerprint(),
            found: digest,
        });
    }
    if actions != vocab.len() {
        return Err(CheckpointError::BadHeader(format!(
            "{actions} actions for a vocabulary of {}",
            vocab.len()
        )));
    }

    let mut theta = Array2::zeros((actions, dim));
    for row in 0..actions {
        let line = lines.next().ok_or(CheckpointError::BadRow {
            row,
            expected: dim,
            found: 0,
        })?;
        let values: Vec<&str> = line.split(' ').collect();
        if values.len() != dim {
            return Err(CheckpointError::BadRow {
                row,
                expected: dim,
                found: values.len(),
            });
        }
        for (col, token) in values.iter().enumerate() {
            theta[(row, col)] = token
                .parse()
                .map_err(|_| CheckpointError::BadValue((*token).to_string()))?;
        }
    }
    Ok(theta)
}
