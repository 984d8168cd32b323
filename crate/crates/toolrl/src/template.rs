//! Training-template rendering and parsing.
//!
//! An episode serializes to a plain-text transcript:
//!
//! ```text
//! <traj q01>
//! <turn 0>
//! <act>search(k1)</act>
//! <obs>fact:k1=5</obs>
//! <turn 1>
//! <act>answer</act>
//! <answer/>
//! ```
//!
//! The transcript is split into segments tagged `trainable`. Action spans
//! (`<act>…</act>` and the terminal `<answer/>`) are trainable; everything
//! else, turn scaffolding and observation blocks, is masked so tool output
//! and role markers never become loss targets. Rendering stops at the
//! terminal marker: answer content is the summarizer's job, not the
//! planner's.
//!
//! `parse_template` inverts `render_training_template` exactly. Accepted
//! text re-renders to the same bytes, and only canonical forms are accepted
//! (no `+5`, no leading zeros, no stray whitespace).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::{
    valid_identifier, Action, InvalidReason, Observation, Step, ToolErrorCode, ToolRegistry,
    Trajectory,
};

/// One span of the rendered transcript. Concatenating segment texts in order
/// reproduces the full transcript byte for byte.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSegment {
    pub text: String,
    pub trainable: bool,
}

impl TemplateSegment {
    fn masked(text: String) -> Self {
        Self {
            text,
            trainable: false,
        }
    }

    fn trainable(text: String) -> Self {
        Self {
            text,
            trainable: true,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("malformed trajectory: {0}")]
    Malformed(InvalidReason),
    #[error("bad identifier {0:?}")]
    BadIdentifier(String),
    #[error("expected {expected:?} at byte {at}")]
    Expected { expected: &'static str, at: usize },
    #[error("unknown tool {tool:?} in template")]
    UnknownTool { tool: String },
    #[error("tool {tool:?} does not accept {arg:?}")]
    UnknownArg { tool: String, arg: String },
    #[error("non-canonical integer literal {0:?}")]
    BadInteger(String),
    #[error("unknown error code {0:?}")]
    BadErrorCode(String),
    #[error("bad observation payload {0:?}")]
    BadObservation(String),
    #[error("text continues after terminal marker")]
    TrailingText,
}

fn obs_payload(obs: &Observation) -> String {
    match obs {
        Observation::Fact { slot, value } => format!("fact:{slot}={value}"),
        Observation::ComputeResult { value } => format!("result={value}"),
        Observation::ToolError { code } => format!("error:{}", code.as_str()),
    }
}

/// Structural screen for rendering. Registry membership is deliberately not
/// checked here: rendering is a pure serialization of the episode shape,
/// parsing is where tool names meet the registry.
fn check_renderable(traj: &Trajectory) -> Result<(), TemplateError> {
    use TemplateError::Malformed;

    if traj.steps.is_empty() {
        return Err(Malformed(InvalidReason::EmptySteps));
    }
    if !valid_identifier(&traj.query_id) {
        return Err(TemplateError::BadIdentifier(traj.query_id.clone()));
    }
    let last = traj.steps.len() - 1;
    for (pos, step) in traj.steps.iter().enumerate() {
        if step.index != pos {
            return Err(Malformed(InvalidReason::IndexGap {
                expected: pos,
                found: step.index,
            }));
        }
        match &step.action {
            Action::Answer => {
                if pos != last {
                    return Err(Malformed(InvalidReason::AnswerNotLast { index: pos }));
                }
                if step.observation.is_some() {
                    return Err(Malformed(InvalidReason::ObservationShape { index: pos }));
                }
            }
            Action::ToolCall { tool, arg } => {
                if !valid_identifier(tool) {
                    return Err(TemplateError::BadIdentifier(tool.clone()));
                }
                if !valid_identifier(arg) {
                    return Err(TemplateError::BadIdentifier(arg.clone()));
                }
                let Some(obs) = &step.observation else {
                    return Err(Malformed(InvalidReason::ObservationShape { index: pos }));
                };
                if let Observation::Fact { slot, .. } = obs {
                    if !valid_identifier(slot) {
                        return Err(TemplateError::BadIdentifier(slot.clone()));
                    }
                }
            }
        }
    }
    if !traj.terminated || !traj.steps[last].action.is_answer() {
        return Err(Malformed(InvalidReason::MissingAnswer));
    }
    Ok(())
}

/// Renders an episode into mask-tagged segments. The first scaffold carries
/// the trajectory header; every later turn marker is its own masked segment;
/// the terminal marker is the planner's final trainable emission.
pub fn render_training_template(traj: &Trajectory) -> Result<Vec<TemplateSegment>, TemplateError> {
    check_renderable(traj)?;

    let mut segments = Vec::with_capacity(traj.steps.len() * 2 + 2);
    for (pos, step) in traj.steps.iter().enumerate() {
        let scaffold = if pos == 0 {
            format!("<traj {}>\n<turn 0>\n", traj.query_id)
        } else {
            format!("<turn {pos}>\n")
        };
        segments.push(TemplateSegment::masked(scaffold));
        match &step.action {
            Action::ToolCall { tool, arg } => {
                segments.push(TemplateSegment::trainable(format!("<act>{tool}({arg})</act>")));
                let obs = step.observation.as_ref().expect("checked above");
                segments.push(TemplateSegment::masked(format!(
                    "\n<obs>{}</obs>\n",
                    obs_payload(obs)
                )));
            }
            Action::Answer => {
                segments.push(TemplateSegment::trainable("<act>answer</act>".into()));
                segments.push(TemplateSegment::trainable("\n<answer/>".into()));
            }
        }
    }
    Ok(segments)
}

/// Full transcript text, the concatenation of rendered segments.
pub fn render_text(traj: &Trajectory) -> Result<String, TemplateError> {
    Ok(render_training_template(traj)?
        .into_iter()
        .map(|s| s.text)
        .collect())
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn eat(&mut self, lit: &'static str) -> Result<(), TemplateError> {
        if self.text[self.pos..].starts_with(lit) {
            self.pos += lit.len();
            Ok(())
        } else {
            Err(TemplateError::Expected {
                expected: lit,
                at: self.pos,
            })
        }
    }

    fn take_until(&mut self, stop: &'static str) -> Result<&'a str, TemplateError> {
        match self.text[self.pos..].find(stop) {
            Some(offset) => {
                let piece = &self.text[self.pos..self.pos + offset];
                self.pos += offset + stop.len();
                Ok(piece)
            }
            None => Err(TemplateError::Expected {
                expected: stop,
                at: self.pos,
            }),
        }
    }

    fn at_end(&self) -> bool {
        self.pos == self.text.len()
    }
}

fn parse_canonical_i64(token: &str) -> Result<i64, TemplateError> {
    let value: i64 = token
        .parse()
        .map_err(|_| TemplateError::BadInteger(token.to_owned()))?;
    if value.to_string() != token {
        return Err(TemplateError::BadInteger(token.to_owned()));
    }
    Ok(value)
}

fn parse_ident(token: &str) -> Result<String, TemplateError> {
    if valid_identifier(token) {
        Ok(token.to_owned())
    } else {
        Err(TemplateError::BadIdentifier(token.to_owned()))
    }
}

fn parse_observation(payload: &str) -> Result<Observation, TemplateError> {
    if let Some(rest) = payload.strip_prefix("fact:") {
        let (slot, value) = rest
            .split_once('=')
            .ok_or_else(|| TemplateError::BadObservation(payload.to_owned()))?;
        return Ok(Observation::Fact {
            slot: parse_ident(slot)?,
            value: parse_canonical_i64(value)?,
        });
    }
    if let Some(value) = payload.strip_prefix("result=") {
        return Ok(Observation::ComputeResult {
            value: parse_canonical_i64(value)?,
        });
    }
    if let Some(code) = payload.strip_prefix("error:") {
        let code = match code {
            "unknown_slot" => ToolErrorCode::UnknownSlot,
            "missing_operands" => ToolErrorCode::MissingOperands,
            "bad_tool" => ToolErrorCode::BadTool,
            other => return Err(TemplateError::BadErrorCode(other.to_owned())),
        };
        return Ok(Observation::ToolError { code });
    }
    Err(TemplateError::BadObservation(payload.to_owned()))
}

/// Parses a transcript back into the episode it renders from. Strict: turn
/// numbering must be contiguous, every tool token must exist in `registry`
/// with an admissible argument, and nothing may follow the terminal marker.
/// Query features are task-side state, so the parsed trajectory carries an
/// empty feature vector.
pub fn parse_template(text: &str, registry: &ToolRegistry) -> Result<Trajectory, TemplateError> {
    let mut cur = Cursor { text, pos: 0 };
    cur.eat("<traj ")?;
    let query_id = parse_ident(cur.take_until(">\n")?)?;

    let mut steps = Vec::new();
    loop {
        let turn = steps.len();
        cur.eat("<turn ")?;
        let turn_token = cur.take_until(">\n")?;
        if parse_canonical_i64(turn_token)? != turn as i64 {
            return Err(TemplateError::Expected {
                expected: "contiguous turn index",
                at: cur.pos,
            });
        }
        cur.eat("<act>")?;
        let act = cur.take_until("</act>")?;
        if act == "answer" {
            cur.eat("\n<answer/>")?;
            steps.push(Step {
                index: turn,
                action: Action::Answer,
                observation: None,
            });
            if !cur.at_end() {
                return Err(TemplateError::TrailingText);
            }
            return Ok(Trajectory {
                query_id,
                query_features: vec![],
                steps,
                terminated: true,
            });
        }
        let (tool, rest) = act.split_once('(').ok_or(TemplateError::Expected {
            expected: "tool(arg)",
            at: cur.pos,
        })?;
        let arg = rest.strip_suffix(')').ok_or(TemplateError::Expected {
            expected: "closing paren",
            at: cur.pos,
        })?;
        let tool = parse_ident(tool)?;
        let arg = parse_ident(arg)?;
        if registry.tool(&tool).is_none() {
            return Err(TemplateError::UnknownTool { tool });
        }
        if !registry.admits(&tool, &arg) {
            return Err(TemplateError::UnknownArg { tool, arg });
        }
        cur.eat("\n<obs>")?;
        let observation = parse_observation(cur.take_until("</obs>\n")?)?;
        steps.push(Step {
            index: turn,
            action: Action::call(tool, arg),
            observation: Some(observation),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::ToolSpec;

    fn registry() -> ToolRegistry {
        ToolRegistry::new(vec![
            ToolSpec {
                name: "search".into(),
                args: vec!["k0".into(), "k1".into()],
                description: String::new(),
            },
            ToolSpec {
                name: "compute".into(),
                args: vec!["diff".into(), "sum".into(), "max".into()],
                description: String::new(),
            },
        ])
        .unwrap()
    }

    fn two_step() -> Trajectory {
        Trajectory {
            query_id: "q01".into(),
            query_features: vec![],
            steps: vec![
                Step {
                    index: 0,
                    action: Action::call("search", "k1"),
                    observation: Some(Observation::Fact {
                        slot: "k1".into(),
                        value: -5,
                    }),
                },
                Step {
                    index: 1,
                    action: Action::Answer,
                    observation: None,
                },
            ],
            terminated: true,
        }
    }

    #[test]
    fn renders_expected_text() {
        let text = render_text(&two_step()).unwrap();
        assert_eq!(
            text,
            "<traj q01>\n<turn 0>\n<act>search(k1)</act>\n<obs>fact:k1=-5</obs>\n\
             <turn 1>\n<act>answer</act>\n<answer/>"
        );
    }

    #[test]
    fn answer_only_episode_has_three_segments() {
        let traj = Trajectory {
            query_id: "q".into(),
            query_features: vec![],
            steps: vec![Step {
                index: 0,
                action: Action::Answer,
                observation: None,
            }],
            terminated: true,
        };
        let segments = render_training_template(&traj).unwrap();
        assert_eq!(segments.len(), 3);
        assert!(!segments[0].trainable);
        assert!(segments[1].trainable);
        assert!(segments[2].trainable);
    }

    #[test]
    fn one_tool_step_yields_one_masked_observation() {
        let segments = render_training_template(&two_step()).unwrap();
        let masked_obs: Vec<_> = segments
            .iter()
            .filter(|s| !s.trainable && s.text.contains("<obs>"))
            .collect();
        assert_eq!(masked_obs.len(), 1);
        assert_eq!(masked_obs[0].text, "\n<obs>fact:k1=-5</obs>\n");
    }

    #[test]
    fn masked_segments_carry_no_action_text() {
        let segments = render_training_template(&two_step()).unwrap();
        for seg in segments.iter().filter(|s| !s.trainable) {
            assert!(!seg.text.contains("<act>"));
            assert!(!seg.text.contains("<answer/>"));
        }
        for seg in segments.iter().filter(|s| s.trainable) {
            assert!(!seg.text.contains("<obs>"));
            assert!(!seg.text.contains("<turn"));
        }
    }

    #[test]
    fn round_trip_restores_structure() {
        let traj = two_step();
        let parsed = parse_template(&render_text(&traj).unwrap(), &registry()).unwrap();
        assert_eq!(parsed, traj);
    }

    #[test]
    fn parse_then_render_is_identity_on_text() {
        let text = render_text(&two_step()).unwrap();
        let parsed = parse_template(&text, &registry()).unwrap();
        assert_eq!(render_text(&parsed).unwrap(), text);
    }

    #[test]
    fn action_text_len_matches_rendered_spans() {
        let traj = two_step();
        let rendered: usize = render_training_template(&traj)
            .unwrap()
            .iter()
            .filter(|s| s.trainable)
            .map(|s| s.text.len())
            .sum();
        assert_eq!(traj.action_text_len(), rendered);
    }

    #[test]
    fn rejects_unknown_tool_token() {
        let text = render_text(&two_step())
            .unwrap()
            .replace("search(k1)", "fetch(k1)");
        assert_eq!(
            parse_template(&text, &registry()),
            Err(TemplateError::UnknownTool { tool: "fetch".into() })
        );
    }

    #[test]
    fn rejects_inadmissible_arg() {
        let text = render_text(&two_step())
            .unwrap()
            .replace("search(k1)", "search(zz)");
        assert_eq!(
            parse_template(&text, &registry()),
            Err(TemplateError::UnknownArg {
                tool: "search".into(),
                arg: "zz".into(),
            })
        );
    }

    #[test]
    fn rejects_trailing_text_and_noncanonical_ints() {
        let mut text = render_text(&two_step()).unwrap();
        text.push('\n');
        assert_eq!(parse_template(&text, &registry()), Err(TemplateError::TrailingText));

        let text = render_text(&two_step()).unwrap().replace("=-5", "=-05");
        assert_eq!(
            parse_template(&text, &registry()),
            Err(TemplateError::BadInteger("-05".into()))
        );

        let text = render_text(&two_step()).unwrap().replace("=-5", "=+5");
        assert_eq!(
            parse_template(&text, &registry()),
            Err(TemplateError::BadInteger("+5".into()))
        );
    }

    #[test]
    fn render_rejects_truncated_episode() {
        let mut traj = two_step();
        traj.steps.pop();
        traj.terminated = false;
        assert_eq!(
            render_training_template(&traj),
            Err(TemplateError::Malformed(InvalidReason::MissingAnswer))
        );
    }

    #[test]
    fn render_rejects_hostile_identifiers() {
        let mut traj = two_step();
        traj.steps[0].action = Action::call("sea rch", "k1");
        assert!(matches!(
            render_training_template(&traj),
            Err(TemplateError::BadIdentifier(_))
        ));

        let mut traj = two_step();
        traj.query_id = "q<1>".into();
        assert!(matches!(
            render_training_template(&traj),
            Err(TemplateError::BadIdentifier(_))
        ));
    }

    #[test]
    fn concatenation_partitions_text() {
        let traj = two_step();
        let segments = render_training_template(&traj).unwrap();
        let text = render_text(&traj).unwrap();
        let joined: String = segments.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(joined, text);
    }
}
