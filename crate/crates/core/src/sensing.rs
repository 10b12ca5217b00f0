//! Flex sensor input chain: bend → resistance → divider → ADC → hysteresis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensingError {
    #[error("bend angle must be non-negative, got {0}")]
    NegativeBend(f64),
    #[error("invalid flex parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlexParams {
    /// Resistance when flat (Ω).
    pub r_flat: f64,
    /// Resistance gained per degree of bend (Ω/°).
    pub k_bend: f64,
    /// Fixed divider resistor on the high side (Ω).
    pub r_fixed: f64,
    pub v_cc: f64,
    pub adc_bits: u32,
    /// Rising threshold (counts).
    pub press_on: u32,
    /// Falling threshold (counts).
    pub press_off: u32,
}

impl Default for FlexParams {
    fn default() -> Self {
        Self {
            r_flat: 25_000.0,
            // 100 kΩ at 90°
            k_bend: 75_000.0 / 90.0,
            r_fixed: 47_000.0,
            v_cc: 5.0,
            adc_bits: 10,
            press_on: 528,
            press_off: 496,
        }
    }
}

impl FlexParams {
    pub fn validate(&self) -> Result<(), SensingError> {
        for (name, value) in [
            ("r_flat", self.r_flat),
            ("k_bend", self.k_bend),
            ("r_fixed", self.r_fixed),
            ("v_cc", self.v_cc),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(SensingError::InvalidParams(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        if !(1..=24).contains(&self.adc_bits) {
            return Err(SensingError::InvalidParams(format!(
                "adc_bits must be in 1..=24, got {}",
                self.adc_bits
            )));
        }
        if self.press_off >= self.press_on {
            return Err(SensingError::InvalidParams(
                "press_off must be below press_on".into(),
            ));
        }
        if self.press_on == 0 || self.press_on >= self.full_scale() {
            return Err(SensingError::InvalidParams(format!(
                "press_on must be in 1..{}",
                self.full_scale()
            )));
        }
        Ok(())
    }

    /// Number of ADC codes, 2^bits.
    pub fn full_scale(&self) -> u32 {
        1 << self.adc_bits
    }

    pub fn max_code(&self) -> u32 {
        self.full_scale() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SenseState {
    /// Degrees.
    pub bend: f64,
    pub adc: u32,
    pub pressed: bool,
}

pub fn flex_resistance(bend: f64, p: &FlexParams) -> Result<f64, SensingError> {
    if !(bend >= 0.0) {
        return Err(SensingError::NegativeBend(bend));
    }
    Ok(p.r_flat + p.k_bend * bend)
}

/// Divider node voltage with the flex element on the low side, so more bend
/// reads higher.
pub fn divider_voltage(r_flex: f64, p: &FlexParams) -> f64 {
    p.v_cc * r_flex / (r_flex + p.r_fixed)
}

pub fn adc_quantize(v: f64, p: &FlexParams) -> u32 {
    let code = (v / p.v_cc * f64::from(p.full_scale())).floor();
    if code.is_nan() || code <= 0.0 {
        0
    } else {
        code.min(f64::from(p.max_code())) as u32
    }
}

/// Two-level comparator. Between the thresholds the previous decision holds.
pub fn threshold_press(state: SenseState, adc: u32, p: &FlexParams) -> SenseState {
    let pressed = if adc >= p.press_on {
        true
    } else if adc <= p.press_off {
        false
    } else {
        state.pressed
    };
    SenseState {
        adc,
        pressed,
        ..state
    }
}

/// Full chain from bend angle to ADC code.
pub fn bend_to_adc(bend: f64, p: &FlexParams) -> Result<u32, SensingError> {
    let r = flex_resistance(bend, p)?;
    Ok(adc_quantize(divider_voltage(r, p), p))
}
