//! Multi-channel signal recorder with CSV export.
//!
//! Logic channels are stored as volts (0.0 / 5.0). Time is written with six
//! decimals; signal values use the shortest representation that parses back
//! to the same `f64`, so an exported trace re-imports bit-for-bit whenever
//! the sample period is a whole number of microseconds.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

/// High logic level in exported traces.
pub const LOGIC_HIGH_V: f64 = 5.0;

#[derive(Debug, Error)]
pub enum ScopeError {
    #[error("unknown signal '{0}'")]
    UnknownSignal(String),
    #[error("invalid trace config: {0}")]
    InvalidConfig(String),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("malformed CSV at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    IoFailure(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    /// Averaged voltage across the motor terminals.
    VBridge,
    EncA,
    EncB,
    /// Flex divider node voltage.
    FlexNode,
    /// Thresholded press signal as a 0/5 V level.
    Pressed5v,
    Rpm,
    Duty,
    /// Actuator position (mm).
    Pos,
}

impl Signal {
    pub const ALL: [Signal; 8] = [
        Signal::VBridge,
        Signal::EncA,
        Signal::EncB,
        Signal::FlexNode,
        Signal::Pressed5v,
        Signal::Rpm,
        Signal::Duty,
        Signal::Pos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Signal::VBridge => "v_bridge",
            Signal::EncA => "enc_a",
            Signal::EncB => "enc_b",
            Signal::FlexNode => "flex_node",
            Signal::Pressed5v => "pressed_5v",
            Signal::Rpm => "rpm",
            Signal::Duty => "duty",
            Signal::Pos => "pos",
        }
    }

    /// Fast-switching channels that need plant-rate sampling.
    pub fn is_logic(self) -> bool {
        matches!(self, Signal::EncA | Signal::EncB)
    }
}

impl FromStr for Signal {
    type Err = ScopeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Signal::ALL
            .into_iter()
            .find(|sig| sig.name() == s)
            .ok_or_else(|| ScopeError::UnknownSignal(s.to_owned()))
    }
}

/// Parse a comma-separated signal list such as `enc_a,enc_b,rpm`.
pub fn parse_signal_list(list: &str) -> Result<Vec<Signal>, ScopeError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(Signal::from_str)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceConfig {
    pub signals: Vec<Signal>,
    pub sample_hz: f64,
    pub duration: f64,
}

impl TraceConfig {
    /// Default rates: 20 kHz when an encoder channel is probed, 1 kHz otherwise.
    pub fn with_default_rate(signals: Vec<Signal>, duration: f64) -> Self {
        let sample_hz = if signals.iter().any(|s| s.is_logic()) {
            20_000.0
        } else {
            1_000.0
        };
        Self {
            signals,
            sample_hz,
            duration,
        }
    }

    /// Check against the plant step and return the decimation factor.
    pub fn validate(&self, dt_plant: f64) -> Result<u64, ScopeError> {
        if self.signals.is_empty() {
            return Err(ScopeError::InvalidConfig("no signals selected".into()));
        }
        if !(self.sample_hz > 0.0) || self.sample_hz * dt_plant > 1.0 + 1e-9 {
            return Err(ScopeError::InvalidConfig(format!(
                "sample_hz {} exceeds plant rate {}",
                self.sample_hz,
                1.0 / dt_plant
            )));
        }
        let ratio = 1.0 / (self.sample_hz * dt_plant);
        if (ratio - ratio.round()).abs() > 1e-6 {
            return Err(ScopeError::InvalidConfig(format!(
                "sample period must be a whole number of plant steps (ratio {ratio})"
            )));
        }
        if !(self.duration >= 0.0) {
            return Err(ScopeError::InvalidConfig("duration must be >= 0".into()));
        }
        Ok(ratio.round() as u64)
    }

    pub fn expected_rows(&self) -> usize {
        (self.duration * self.sample_hz + 1e-9).floor() as usize + 1
    }
}

/// Column-oriented trace: a time column and one column per signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub signals: Vec<Signal>,
    pub t: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(signals: Vec<Signal>) -> Self {
        let columns = vec![Vec::new(); signals.len()];
        Self {
            signals,
            t: Vec::new(),
            columns,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn column(&self, signal: Signal) -> Option<&[f64]> {
        let idx = self.signals.iter().position(|s| *s == signal)?;
        Some(&self.columns[idx])
    }

    /// Append one row. `values` must follow `self.signals` order.
    pub fn push_row(&mut self, t: f64, values: impl IntoIterator<Item = f64>) {
        self.t.push(t);
        let mut n = 0;
        for (col, v) in self.columns.iter_mut().zip(values) {
            col.push(v);
            n += 1;
        }
        debug_assert_eq!(n, self.columns.len());
    }

    /// Keep only the most recent `max_rows` rows.
    pub fn truncate_front(&mut self, max_rows: usize) {
        if self.t.len() > max_rows {
            let excess = self.t.len() - max_rows;
            self.t.drain(..excess);
            for col in &mut self.columns {
                col.drain(..excess);
            }
        }
    }

    pub fn header(&self) -> String {
        let mut h = String::from("t_s");
        for s in &self.signals {
            h.push(',');
            h.push_str(s.name());
        }
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * (10 + 10 * self.signals.len()));
        out.push_str(&self.header());
        out.push('\n');
        for (row, t) in self.t.iter().enumerate() {
            let _ = write!(out, "{t:.6}");
            for col in &self.columns {
                let _ = write!(out, ",{}", col[row]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, ScopeError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(ScopeError::EmptyTrace)?;
        let mut names = header.split(',');
        if names.next() != Some("t_s") {
            return Err(ScopeError::Malformed {
                line: 1,
                reason: "header must start with t_s".into(),
            });
        }
        let signals = names.map(Signal::from_str).collect::<Result<Vec<_>, _>>()?;
        let mut trace = Trace::new(signals);
        for (idx, line) in lines {
            let malformed = |reason: String| ScopeError::Malformed {
                line: idx + 1,
                reason,
            };
            let values = line
                .split(',')
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| malformed(format!("{f:?}: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if values.len() != trace.signals.len() + 1 {
                return Err(malformed(format!(
                    "expected {} fields, got {}",
                    trace.signals.len() + 1,
                    values.len()
                )));
            }
            trace.push_row(values[0], values[1..].iter().copied());
        }
        Ok(trace)
    }
}

pub fn scope_export_csv(trace: &Trace, path: &Path) -> Result<(), ScopeError> {
    if trace.is_empty() {
        return Err(ScopeError::EmptyTrace);
    }
    fs::write(path, trace.to_csv())?;
    Ok(())
}

pub fn scope_import_csv(path: &Path) -> Result<Trace, ScopeError> {
    Trace::from_csv(&fs::read_to_string(path)?)
}

/// Count low→high transitions of a 0/5 V column.
pub fn rising_edges(column: &[f64]) -> usize {
    let high = LOGIC_HIGH_V / 2.0;
    column
        .windows(2)
        .filter(|w| w[0] < high && w[1] >= high)
        .count()
}
