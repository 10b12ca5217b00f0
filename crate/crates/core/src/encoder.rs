//! Two-channel Hall quadrature encoder on the motor shaft and its x4 decoder.
//!
//! Channel A leads channel B by a quarter electrical cycle while the motor
//! angle increases, so forward rotation walks the Gray sequence
//! `(1,0) → (1,1) → (0,1) → (0,0) → (1,0)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncoderError {
    #[error("non-finite shaft angle")]
    NonFiniteInput,
    #[error("rpm window must be > 0 s, got {0}")]
    ZeroWindow(f64),
    #[error(
        "{lines} lines x4 at gear ratio {gear_ratio} is not a whole count per output revolution"
    )]
    FractionalCounts { lines: u32, gear_ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderSpec {
    /// Electrical cycles per channel per motor revolution.
    pub lines_per_rev: u32,
    /// Decoder counts per motor revolution (4 × lines).
    pub counts_per_rev_x4: u32,
    /// Decoder counts per gearbox output revolution.
    pub counts_per_output_rev: u32,
}

impl EncoderSpec {
    pub fn new(lines_per_rev: u32, gear_ratio: f64) -> Result<Self, EncoderError> {
        let counts_per_rev_x4 = 4 * lines_per_rev;
        let per_output = f64::from(counts_per_rev_x4) * gear_ratio;
        if lines_per_rev == 0 || !per_output.is_finite() || per_output.fract() != 0.0 {
            return Err(EncoderError::FractionalCounts {
                lines: lines_per_rev,
                gear_ratio,
            });
        }
        Ok(Self {
            lines_per_rev,
            counts_per_rev_x4,
            counts_per_output_rev: per_output as u32,
        })
    }
}

impl Default for EncoderSpec {
    /// 16-line Hall encoder behind a 131.25:1 gearbox: 64 counts per motor
    /// revolution, 8400 per output revolution.
    fn default() -> Self {
        Self {
            lines_per_rev: 16,
            counts_per_rev_x4: 64,
            counts_per_output_rev: 8400,
        }
    }
}

/// Logic levels of the A/B channel pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct QuadState {
    pub a: bool,
    pub b: bool,
}

impl QuadState {
    pub const fn new(a: bool, b: bool) -> Self {
        Self { a, b }
    }

    /// Position in the forward Gray sequence.
    fn phase(self) -> u8 {
        match (self.a, self.b) {
            (true, false) => 0,
            (true, true) => 1,
            (false, true) => 2,
            (false, false) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecoderState {
    pub prev: QuadState,
    pub total_counts: i64,
    pub invalid_transitions: u64,
}

impl DecoderState {
    /// Start decoding from a real channel sample with a zero count.
    pub fn new(initial: QuadState) -> Self {
        Self {
            prev: initial,
            total_counts: 0,
            invalid_transitions: 0,
        }
    }
}

/// Channel levels for motor-shaft angle `theta_m` (rad).
pub fn encoder_emit(theta_m: f64, spec: &EncoderSpec) -> Result<QuadState, EncoderError> {
    if !theta_m.is_finite() {
        return Err(EncoderError::NonFiniteInput);
    }
    // Quarter-cycle index: 0 → (1,0), 1 → (1,1), 2 → (0,1), 3 → (0,0).
    let quarters = (theta_m / TAU * f64::from(spec.counts_per_rev_x4)).floor();
    let q = quarters.rem_euclid(4.0) as u8;
    Ok(QuadState {
        a: q < 2,
        b: q == 1 || q == 2,
    })
}

/// Decode one channel sample. Returns the updated state and the count delta.
pub fn quad_decode(state: DecoderState, curr: QuadState) -> (DecoderState, i8) {
    let step = (curr.phase() + 4 - state.prev.phase()) % 4;
    let mut next = DecoderState {
        prev: curr,
        ..state
    };
    let delta = match step {
        0 => 0,
        1 => 1,
        3 => -1,
        _ => {
            next.invalid_transitions += 1;
            0
        }
    };
    next.total_counts += i64::from(delta);
    (next, delta)
}

/// Output-shaft RPM from a count delta accumulated over `window` seconds.
pub fn counts_to_rpm(
    delta_counts: i64,
    window: f64,
    spec: &EncoderSpec,
) -> Result<f64, EncoderError> {
    if !(window > 0.0) || !window.is_finite() {
        return Err(EncoderError::ZeroWindow(window));
    }
    Ok(delta_counts as f64 / f64::from(spec.counts_per_output_rev) / window * 60.0)
}
