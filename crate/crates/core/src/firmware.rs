//! Emulated controller loop: press supervisor, encoder tachometer, PID speed
//! hold and bridge pin outputs.
//!
//! The loop is ticked at a fixed rate by the scheduler. Each tick it
//! thresholds the flex ADC code, folds the decoder's count delta into a
//! sliding window to estimate output-shaft RPM, and (when pressed) computes a
//! duty for the bridge enable pin.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{counts_to_rpm, DecoderState, EncoderSpec};
use crate::hbridge::BridgeInputs;
use crate::sensing::{threshold_press, FlexParams, SenseState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FirmwareError {
    #[error("setpoint {rpm} RPM outside ±{max} RPM")]
    SetpointOutOfRange { rpm: f64, max: f64 },
    #[error("invalid firmware parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Idle,
    Run,
}

/// Control law used while running.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlLaw {
    /// Closed-loop speed hold.
    #[default]
    Pid,
    /// Fixed duty whenever pressed (plain on/off).
    Bang,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidGains {
    /// duty / RPM
    pub kp: f64,
    /// duty / (RPM·s)
    pub ki: f64,
    /// duty·s / RPM
    pub kd: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 0.02,
            ki: 0.1,
            kd: 0.0,
            u_min: 0.0,
            u_max: 1.0,
        }
    }
}

impl PidGains {
    pub fn validate(&self) -> Result<(), FirmwareError> {
        let gains_ok = [self.kp, self.ki, self.kd]
            .iter()
            .all(|g| g.is_finite() && *g >= 0.0);
        if !gains_ok {
            return Err(FirmwareError::InvalidParams(
                "PID gains must be finite and >= 0".into(),
            ));
        }
        if !(self.u_min >= 0.0 && self.u_max <= 1.0 && self.u_min < self.u_max) {
            return Err(FirmwareError::InvalidParams(format!(
                "need 0 <= u_min < u_max <= 1, got [{}, {}]",
                self.u_min, self.u_max
            )));
        }
        Ok(())
    }

    fn integ_bound(&self) -> f64 {
        self.u_max - self.u_min
    }
}

/// Static configuration the emulated controller runs with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirmwareConfig {
    pub tick_hz: f64,
    /// Tachometer window (s).
    pub rpm_window: f64,
    pub rpm_max: f64,
    pub control: ControlLaw,
    /// Enable duty used by [`ControlLaw::Bang`].
    pub bang_duty: f64,
    pub gains: PidGains,
    pub flex: FlexParams,
    pub encoder: EncoderSpec,
    pub v_supply: f64,
}

impl Default for FirmwareConfig {
    fn default() -> Self {
        Self {
            tick_hz: 1000.0,
            rpm_window: 0.1,
            rpm_max: 80.0,
            control: ControlLaw::Pid,
            bang_duty: 1.0,
            gains: PidGains::default(),
            flex: FlexParams::default(),
            encoder: EncoderSpec::default(),
            v_supply: 12.0,
        }
    }
}

impl FirmwareConfig {
    pub fn validate(&self) -> Result<(), FirmwareError> {
        self.gains.validate()?;
        if !(self.tick_hz.is_finite() && self.tick_hz > 0.0) {
            return Err(FirmwareError::InvalidParams("tick_hz must be > 0".into()));
        }
        if !(self.rpm_max.is_finite() && self.rpm_max > 0.0) {
            return Err(FirmwareError::InvalidParams("rpm_max must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.bang_duty) {
            return Err(FirmwareError::InvalidParams(
                "bang_duty must be in [0, 1]".into(),
            ));
        }
        let ticks = self.rpm_window * self.tick_hz;
        if !(ticks >= 1.0) || (ticks - ticks.round()).abs() > 1e-6 {
            return Err(FirmwareError::InvalidParams(format!(
                "rpm_window must be a whole number (>= 1) of ticks, got {ticks}"
            )));
        }
        Ok(())
    }

    pub fn window_ticks(&self) -> usize {
        (self.rpm_window * self.tick_hz).round() as usize
    }

    pub fn tick_dt(&self) -> f64 {
        1.0 / self.tick_hz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirmwareState {
    pub mode: Mode,
    /// Output-shaft RPM, signed.
    pub setpoint_rpm: f64,
    pub rpm_est: f64,
    pub integ: f64,
    pub prev_err: f64,
    /// Counts inside the current tachometer window.
    pub window_counts: i64,
    pub pins: BridgeInputs,
    pub tick_hz: f64,
    pub rpm_window: f64,
    pub sense: SenseState,
    last_total: i64,
    window: VecDeque<i64>,
}

impl Default for FirmwareState {
    fn default() -> Self {
        Self {
            mode: Mode::Idle,
            setpoint_rpm: 0.0,
            rpm_est: 0.0,
            integ: 0.0,
            prev_err: 0.0,
            window_counts: 0,
            pins: BridgeInputs::default(),
            tick_hz: 0.0,
            rpm_window: 0.0,
            sense: SenseState::default(),
            last_total: 0,
            window: VecDeque::new(),
        }
    }
}

impl FirmwareState {
    pub fn new(cfg: &FirmwareConfig, setpoint_rpm: f64) -> Self {
        Self {
            mode: Mode::Idle,
            setpoint_rpm,
            rpm_est: 0.0,
            integ: 0.0,
            prev_err: 0.0,
            window_counts: 0,
            pins: BridgeInputs {
                in1: setpoint_rpm >= 0.0,
                in2: setpoint_rpm < 0.0,
                ena_duty: 0.0,
                v_supply: cfg.v_supply,
            },
            tick_hz: cfg.tick_hz,
            rpm_window: cfg.rpm_window,
            sense: SenseState::default(),
            last_total: 0,
            window: VecDeque::with_capacity(cfg.window_ticks() + 1),
        }
    }

    fn reset_pid(&mut self) {
        self.integ = 0.0;
        self.prev_err = 0.0;
    }
}

/// One PID update. `err` is in RPM; the returned duty is clamped to
/// `[u_min, u_max]`. The integrator only accumulates when the unclamped
/// output is not already saturated in the direction of the error.
pub fn pid_step(err: f64, mut fw: FirmwareState, g: &PidGains, dt: f64) -> (FirmwareState, f64) {
    let derivative = if g.kd > 0.0 {
        g.kd * (err - fw.prev_err) / dt
    } else {
        0.0
    };
    let u = g.kp * err + fw.integ + derivative;

    let pushing_high = u > g.u_max && err > 0.0;
    let pushing_low = u < g.u_min && err < 0.0;
    if !(pushing_high || pushing_low) {
        let bound = g.integ_bound();
        fw.integ = (fw.integ + g.ki * err * dt).clamp(-bound, bound);
    }
    fw.prev_err = err;
    (fw, u.clamp(g.u_min, g.u_max))
}

/// Run one controller tick against the latest ADC code and decoder state.
pub fn firmware_tick(
    mut fw: FirmwareState,
    adc: u32,
    decoder: &DecoderState,
    cfg: &FirmwareConfig,
    dt: f64,
) -> (FirmwareState, BridgeInputs) {
    fw.sense = threshold_press(fw.sense, adc, &cfg.flex);

    // Tachometer: sliding window of per-tick count deltas.
    let delta = decoder.total_counts - fw.last_total;
    fw.last_total = decoder.total_counts;
    fw.window.push_back(delta);
    fw.window_counts += delta;
    while fw.window.len() > cfg.window_ticks() {
        fw.window_counts -= fw.window.pop_front().unwrap_or(0);
    }
    fw.rpm_est = counts_to_rpm(fw.window_counts, fw.rpm_window, &cfg.encoder).unwrap_or(0.0);

    fw.mode = if fw.sense.pressed {
        Mode::Run
    } else {
        Mode::Idle
    };
    match fw.mode {
        Mode::Idle => {
            fw.reset_pid();
            fw.pins.ena_duty = 0.0;
        }
        Mode::Run => {
            if fw.setpoint_rpm > 0.0 {
                fw.pins.in1 = true;
                fw.pins.in2 = false;
            } else if fw.setpoint_rpm < 0.0 {
                fw.pins.in1 = false;
                fw.pins.in2 = true;
            }
            fw.pins.ena_duty = match cfg.control {
                ControlLaw::Bang => cfg.bang_duty,
                ControlLaw::Pid => {
                    // Regulate speed magnitude along the selected direction.
                    let sign = if fw.pins.in2 && !fw.pins.in1 {
                        -1.0
                    } else {
                        1.0
                    };
                    let err = sign * (fw.setpoint_rpm - fw.rpm_est);
                    let (next, duty) = pid_step(err, fw, &cfg.gains, dt);
                    fw = next;
                    duty
                }
            };
        }
    }
    let pins = fw.pins;
    (fw, pins)
}

pub fn set_setpoint(
    mut fw: FirmwareState,
    rpm: f64,
    rpm_max: f64,
) -> Result<FirmwareState, FirmwareError> {
    if !(rpm.abs() <= rpm_max) {
        return Err(FirmwareError::SetpointOutOfRange { rpm, max: rpm_max });
    }
    fw.setpoint_rpm = rpm;
    Ok(fw)
}
