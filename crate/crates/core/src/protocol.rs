//! Newline-framed ASCII control and telemetry protocol.
//!
//! Requests (one per line, single spaces, case-sensitive):
//!
//! ```text
//! PING | PRESS <deg> | RELEASE | SET RPM <rpm> | SET LOAD <N·m>
//! GET STATUS | STREAM ON | STREAM OFF
//! ```
//!
//! Every request gets exactly one reply line: `PONG`, `OK`, `STATUS ...` or
//! `ERR <reason>`. Streamed samples are `T ...` lines.

use std::fmt;

use thiserror::Error;

/// Largest accepted bend angle for `PRESS`.
pub const MAX_BEND_DEG: f64 = 180.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Command {
    Ping,
    Press { bend: f64 },
    Release,
    SetRpm { rpm: f64 },
    SetLoad { tau: f64 },
    GetStatus,
    Stream { on: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("unknown-command")]
    UnknownCommand,
    #[error("bad-arg")]
    BadArg,
}

impl Command {
    /// Canonical wire rendering, newline included.
    pub fn to_line(&self) -> String {
        format!("{self}\n")
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Ping => f.write_str("PING"),
            Command::Press { bend } => write!(f, "PRESS {bend}"),
            Command::Release => f.write_str("RELEASE"),
            Command::SetRpm { rpm } => write!(f, "SET RPM {rpm}"),
            Command::SetLoad { tau } => write!(f, "SET LOAD {tau}"),
            Command::GetStatus => f.write_str("GET STATUS"),
            Command::Stream { on: true } => f.write_str("STREAM ON"),
            Command::Stream { on: false } => f.write_str("STREAM OFF"),
        }
    }
}

fn parse_number(arg: &str) -> Result<f64, ProtocolError> {
    // Rust's float parser also takes "inf"/"NaN"; neither is a valid argument.
    match arg.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ProtocolError::BadArg),
    }
}

/// Parse one record. A single trailing `\n` (or `\r\n`) is accepted.
pub fn parse_command(line: &[u8]) -> Result<Command, ProtocolError> {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    let line = line.strip_suffix(b"\r").unwrap_or(line);
    let text = std::str::from_utf8(line).map_err(|_| ProtocolError::UnknownCommand)?;

    let (verb, rest) = match text.split_once(' ') {
        Some((verb, rest)) => (verb, Some(rest)),
        None => (text, None),
    };
    match (verb, rest) {
        ("PING", None) => Ok(Command::Ping),
        ("RELEASE", None) => Ok(Command::Release),
        ("PRESS", Some(arg)) => {
            let bend = parse_number(arg)?;
            if !(0.0..=MAX_BEND_DEG).contains(&bend) {
                return Err(ProtocolError::BadArg);
            }
            Ok(Command::Press { bend })
        }
        ("SET", Some(rest)) => match rest.split_once(' ') {
            Some(("RPM", arg)) => Ok(Command::SetRpm {
                rpm: parse_number(arg)?,
            }),
            Some(("LOAD", arg)) => Ok(Command::SetLoad {
                tau: parse_number(arg)?,
            }),
            _ => Err(ProtocolError::UnknownCommand),
        },
        ("GET", Some("STATUS")) => Ok(Command::GetStatus),
        ("STREAM", Some("ON")) => Ok(Command::Stream { on: true }),
        ("STREAM", Some("OFF")) => Ok(Command::Stream { on: false }),
        // A known verb missing its argument is still a malformed argument.
        ("PRESS", None) => Err(ProtocolError::BadArg),
        _ => Err(ProtocolError::UnknownCommand),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Ok,
    Pong,
    Status(String),
    Err(ProtocolError),
}

impl Reply {
    pub fn to_line(&self) -> String {
        match self {
            Reply::Ok => "OK\n".to_owned(),
            Reply::Pong => "PONG\n".to_owned(),
            Reply::Status(line) => line.clone(),
            Reply::Err(e) => format!("ERR {e}\n"),
        }
    }
}

/// Point-in-time view of the controller and plant used for `STATUS`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StatusSnapshot {
    pub t: f64,
    pub rpm: f64,
    pub setpoint: f64,
    pub duty: f64,
    pub adc: u32,
    pub pressed: bool,
    /// Actuator position (mm).
    pub pos_mm: f64,
    pub in1: bool,
    pub in2: bool,
}

impl StatusSnapshot {
    pub fn direction(&self) -> &'static str {
        if self.duty <= 0.0 {
            return "STOP";
        }
        match (self.in1, self.in2) {
            (true, false) => "CW",
            (false, true) => "CCW",
            _ => "STOP",
        }
    }
}

/// Fixed-point formatting without a `-` on values that round to zero.
pub(crate) fn fixed(value: f64, decimals: usize) -> String {
    let s = format!("{value:.decimals$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_owned(),
        _ => s,
    }
}

pub fn format_status(s: &StatusSnapshot) -> String {
    format!(
        "STATUS t={} rpm={} sp={} duty={} adc={} pressed={} pos={} dir={}\n",
        fixed(s.t, 3),
        fixed(s.rpm, 2),
        fixed(s.setpoint, 2),
        fixed(s.duty, 3),
        s.adc,
        u8::from(s.pressed),
        fixed(s.pos_mm, 2),
        s.direction(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TelemetryFrame {
    pub t: f64,
    pub rpm: f64,
    pub duty: f64,
    pub adc: u32,
    pub total_counts: i64,
    /// Actuator position (mm).
    pub pos: f64,
}

pub fn format_telemetry(frame: &TelemetryFrame) -> String {
    format!(
        "T {} {} {} {} {} {}\n",
        fixed(frame.t, 3),
        fixed(frame.rpm, 2),
        fixed(frame.duty, 3),
        frame.adc,
        frame.total_counts,
        fixed(frame.pos, 2),
    )
}
