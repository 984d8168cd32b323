//! Trajectory formalism: actions, observations, format validation, and the
//! step counters the rule rewards are built on.
//!
//! A trajectory is the unit every other module consumes. Judges and rewards
//! only ever see `(task, trajectory)` pairs, trainers replay trajectories to
//! recover per-step features, and the harness logs them as JSONL (one object
//! per line with `query_id`, `steps`, `terminated`; query features belong to
//! the task and are not serialized).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One callable tool: a name plus the argument slots it accepts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub args: Vec<String>,
    pub description: String,
}

/// Closed set of tools a planner may call. Fixed for the life of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolRegistry {
    tools: Vec<ToolSpec>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("duplicate tool name {0:?}")]
    DuplicateTool(String),
    #[error("tool {0:?} declares no argument slots")]
    NoArgs(String),
    #[error("tool name {0:?} is reserved")]
    ReservedName(String),
    #[error("invalid identifier {0:?}")]
    BadIdentifier(String),
}

/// Identifiers that may appear in rendered templates: tool names, argument
/// slots, and query ids. Kept to a charset that cannot collide with template
/// delimiters.
pub fn valid_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | ':'))
}

impl ToolRegistry {
    /// `answer` is reserved for the terminal action and may not name a tool.
    pub fn new(tools: Vec<ToolSpec>) -> Result<Self, RegistryError> {
        for (i, tool) in tools.iter().enumerate() {
            if tool.name == "answer" {
                return Err(RegistryError::ReservedName(tool.name.clone()));
            }
            if !valid_identifier(&tool.name) {
                return Err(RegistryError::BadIdentifier(tool.name.clone()));
            }
            if tool.args.is_empty() {
                return Err(RegistryError::NoArgs(tool.name.clone()));
            }
            for arg in &tool.args {
                if !valid_identifier(arg) {
                    return Err(RegistryError::BadIdentifier(arg.clone()));
                }
            }
            if tools[..i].iter().any(|t| t.name == tool.name) {
                return Err(RegistryError::DuplicateTool(tool.name.clone()));
            }
        }
        Ok(Self { tools })
    }

    pub fn tools(&self) -> &[ToolSpec] {
        &self.tools
    }

    pub fn tool(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.iter().find(|t| t.name == name)
    }

    /// True when `tool(arg)` is a call this registry admits.
    pub fn admits(&self, tool: &str, arg: &str) -> bool {
        self.tool(tool)
            .is_some_and(|t| t.args.iter().any(|a| a == arg))
    }
}

/// What the planner emits at each turn. `Answer` hands off to the summarizer
/// and carries no payload of its own.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    ToolCall { tool: String, arg: String },
    Answer,
}

impl Action {
    pub fn call(tool: impl Into<String>, arg: impl Into<String>) -> Self {
        Action::ToolCall {
            tool: tool.into(),
            arg: arg.into(),
        }
    }

    pub fn is_answer(&self) -> bool {
        matches!(self, Action::Answer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolErrorCode {
    UnknownSlot,
    MissingOperands,
    BadTool,
}

impl ToolErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ToolErrorCode::UnknownSlot => "unknown_slot",
            ToolErrorCode::MissingOperands => "missing_operands",
            ToolErrorCode::BadTool => "bad_tool",
        }
    }
}

/// Environment response to a tool call. Answers produce no observation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observation {
    Fact { slot: String, value: i64 },
    ComputeResult { value: i64 },
    ToolError { code: ToolErrorCode },
}

impl Observation {
    pub fn is_error(&self) -> bool {
        matches!(self, Observation::ToolError { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
}

/// A full episode. `terminated` is true exactly when the last action is
/// `Answer`; episodes cut off by the turn cap keep `terminated = false` and
/// are format-invalid by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub query_id: String,
    /// Observable task descriptor, carried for feature replay. Not part of
    /// the serialized record.
    #[serde(skip)]
    pub query_features: Vec<f64>,
    pub steps: Vec<Step>,
    pub terminated: bool,
}

impl Trajectory {
    /// Total characters of action text, the planner-emitted share of the
    /// rendered episode. Defined for invalid trajectories too, unlike the
    /// full template rendering.
    pub fn action_text_len(&self) -> usize {
        self.steps
            .iter()
            .map(|s| match &s.action {
                // "<act>" + tool + "(" + arg + ")" + "</act>"
                Action::ToolCall { tool, arg } => 13 + tool.len() + arg.len(),
                // "<act>answer</act>" + "\n<answer/>"
                Action::Answer => 27,
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    EmptySteps,
    /// No terminal `Answer`; covers episodes truncated by the turn cap.
    MissingAnswer,
    AnswerNotLast { index: usize },
    UnknownTool { tool: String },
    UnknownArg { tool: String, arg: String },
    IndexGap { expected: usize, found: usize },
    /// Tool call without an observation, or an observation on `Answer`.
    ObservationShape { index: usize },
}

impl std::fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InvalidReason::EmptySteps => write!(f, "empty step list"),
            InvalidReason::MissingAnswer => write!(f, "no terminal answer"),
            InvalidReason::AnswerNotLast { index } => {
                write!(f, "answer at step {index} is not last")
            }
            InvalidReason::UnknownTool { tool } => write!(f, "unknown tool {tool:?}"),
            InvalidReason::UnknownArg { tool, arg } => {
                write!(f, "tool {tool:?} does not accept arg {arg:?}")
            }
            InvalidReason::IndexGap { expected, found } => {
                write!(f, "step index {found} where {expected} was expected")
            }
            InvalidReason::ObservationShape { index } => {
                write!(f, "bad observation shape at step {index}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormatVerdict {
    Valid,
    Invalid(InvalidReason),
}

impl FormatVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, FormatVerdict::Valid)
    }
}

/// Structural and registry check for a whole episode. Anything that fails
/// here earns the fixed format penalty regardless of content: the reward
/// model never scores ill-formed transcripts.
pub fn validate_format(traj: &Trajectory, registry: &ToolRegistry) -> FormatVerdict {
    use FormatVerdict::Invalid;

    if traj.steps.is_empty() {
        return Invalid(InvalidReason::EmptySteps);
    }
    let last = traj.steps.len() - 1;
    for (pos, step) in traj.steps.iter().enumerate() {
        if step.index != pos {
            return Invalid(InvalidReason::IndexGap {
                expected: pos,
                found: step.index,
            });
        }
        match &step.action {
            Action::Answer => {
                if pos != last {
                    return Invalid(InvalidReason::AnswerNotLast { index: pos });
                }
                if step.observation.is_some() {
                    return Invalid(InvalidReason::ObservationShape { index: pos });
                }
            }
            Action::ToolCall { tool, arg } => {
                if registry.tool(tool).is_none() {
                    return Invalid(InvalidReason::UnknownTool { tool: tool.clone() });
                }
                if !registry.admits(tool, arg) {
                    return Invalid(InvalidReason::UnknownArg {
                        tool: tool.clone(),
                        arg: arg.clone(),
                    });
                }
                if step.observation.is_none() {
                    return Invalid(InvalidReason::ObservationShape { index: pos });
                }
            }
        }
    }
    if !traj.terminated || !traj.steps[last].action.is_answer() {
        return Invalid(InvalidReason::MissingAnswer);
    }
    FormatVerdict::Valid
}

/// Number of immediate repeats: positions `t >= 1` with `a_t == a_{t-1}`.
/// Only identical consecutive actions count; revisiting an action later is
/// legal and unpenalized.
pub fn repetition_count(traj: &Trajectory) -> usize {
    traj.steps
        .windows(2)
        .filter(|w| w[0].action == w[1].action)
        .count()
}

/// Number of steps whose observation is a tool error, the operational form
/// of "action outside the admissible set at that state".
pub fn error_count(traj: &Trajectory) -> usize {
    traj.steps
        .iter()
        .filter(|s| s.observation.as_ref().is_some_and(Observation::is_error))
        .count()
}
