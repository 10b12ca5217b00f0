//! Scenario files: a duration plus timestamped protocol commands.
//!
//! ```text
//! # press for three seconds
//! DURATION 5
//! AT 1.0 PRESS 45
//! AT 4.0 RELEASE
//! ```

use thiserror::Error;

use crate::protocol::{parse_command, Command};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("line {line}: {reason}")]
    SyntaxError { line: usize, reason: String },
    #[error("line {line}: event at t={t} precedes the previous event")]
    UnsortedEvents { line: usize, t: f64 },
    #[error("scenario has no DURATION")]
    MissingDuration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioEvent {
    pub t: f64,
    pub command: Command,
    /// Source line, for diagnostics.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub duration: f64,
    pub events: Vec<ScenarioEvent>,
}

impl Scenario {
    /// Scenario with no events.
    pub fn idle(duration: f64) -> Self {
        Self {
            duration,
            events: Vec::new(),
        }
    }
}

fn parse_time(field: Option<&str>, line: usize) -> Result<f64, ScenarioError> {
    let field = field.ok_or_else(|| ScenarioError::SyntaxError {
        line,
        reason: "missing time".into(),
    })?;
    match field.parse::<f64>() {
        Ok(t) if t.is_finite() && t >= 0.0 => Ok(t),
        _ => Err(ScenarioError::SyntaxError {
            line,
            reason: format!("bad time '{field}'"),
        }),
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut duration = None;
    let mut events: Vec<ScenarioEvent> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.splitn(3, ' ');
        match parts.next() {
            Some("DURATION") => {
                if duration.is_some() {
                    return Err(ScenarioError::SyntaxError {
                        line,
                        reason: "duplicate DURATION".into(),
                    });
                }
                let t = parse_time(parts.next(), line)?;
                if parts.next().is_some() {
                    return Err(ScenarioError::SyntaxError {
                        line,
                        reason: "trailing text after DURATION".into(),
                    });
                }
                duration = Some(t);
            }
            Some("AT") => {
                let t = parse_time(parts.next(), line)?;
                let cmd_text = parts.next().ok_or_else(|| ScenarioError::SyntaxError {
                    line,
                    reason: "missing command".into(),
                })?;
                let command =
                    parse_command(cmd_text.as_bytes()).map_err(|e| ScenarioError::SyntaxError {
                        line,
                        reason: format!("{e}: '{cmd_text}'"),
                    })?;
                if events.last().is_some_and(|prev| t < prev.t) {
                    return Err(ScenarioError::UnsortedEvents { line, t });
                }
                events.push(ScenarioEvent { t, command, line });
            }
            Some(other) => {
                return Err(ScenarioError::SyntaxError {
                    line,
                    reason: format!("expected AT or DURATION, found '{other}'"),
                })
            }
            None => unreachable!("empty lines are skipped"),
        }
    }

    let duration = duration.ok_or(ScenarioError::MissingDuration)?;
    if let Some(late) = events.iter().find(|e| e.t > duration) {
        return Err(ScenarioError::SyntaxError {
            line: late.line,
            reason: format!("event at t={} is after DURATION {duration}", late.t),
        });
    }
    Ok(Scenario { duration, events })
}
