//! Geared brushed DC motor driving a lead-screw linear actuator.
//!
//! Electrical and mechanical states are advanced with semi-implicit Euler:
//! armature current first, then shaft speed using the new current.
//!
//! ```text
//! L·di/dt  = v − R·i − k_e·ω
//! J·dω/dt  = k_t·i − B·ω − τ_ext/(N·η)
//! dθ/dt    = ω
//! dpos/dt  = (ω/N)·lead/(2π)
//! ```

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),
    #[error("step {dt} s exceeds electrical time constant guard {limit} s")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("applied voltage {v} V exceeds supply {supply} V")]
    OverVoltage { v: f64, supply: f64 },
    #[error("bend angle must be non-negative, got {0}")]
    NegativeBend(f64),
    #[error("invalid plant parameter: {0}")]
    InvalidParams(String),
}

/// Electromechanical constants. Speeds and inertias refer to the motor shaft.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    /// Supply rail (V).
    pub v_supply: f64,
    /// Armature resistance (Ω).
    pub r_armature: f64,
    /// Armature inductance (H).
    pub l_armature: f64,
    /// Back-EMF constant (V·s/rad). Must equal `k_t`.
    pub k_e: f64,
    /// Torque constant (N·m/A).
    pub k_t: f64,
    /// Rotor inertia (kg·m²).
    pub j_rotor: f64,
    /// Viscous friction (N·m·s/rad).
    pub b_visc: f64,
    /// Motor revolutions per output revolution.
    pub gear_ratio: f64,
    /// Gearbox efficiency in (0, 1].
    pub gear_eff: f64,
    /// Actuator travel per output revolution (m).
    pub lead: f64,
    pub stroke_min: f64,
    pub stroke_max: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            v_supply: 12.0,
            r_armature: 2.0,
            l_armature: 1.0e-3,
            k_e: 0.012,
            k_t: 0.012,
            j_rotor: 1.0e-6,
            b_visc: 1.0e-6,
            gear_ratio: 131.25,
            gear_eff: 1.0,
            lead: 8.0e-3,
            stroke_min: 0.0,
            stroke_max: 0.1,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        let positive = [
            ("v_supply", self.v_supply),
            ("r_armature", self.r_armature),
            ("l_armature", self.l_armature),
            ("k_e", self.k_e),
            ("k_t", self.k_t),
            ("j_rotor", self.j_rotor),
            ("b_visc", self.b_visc),
            ("gear_ratio", self.gear_ratio),
            ("gear_eff", self.gear_eff),
            ("lead", self.lead),
            ("stroke_max", self.stroke_max),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(PlantError::InvalidParams(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        if !(self.stroke_min.is_finite() && self.stroke_min >= 0.0) {
            return Err(PlantError::InvalidParams(format!(
                "stroke_min must be >= 0, got {}",
                self.stroke_min
            )));
        }
        if self.stroke_max <= self.stroke_min {
            return Err(PlantError::InvalidParams(
                "stroke_max must exceed stroke_min".into(),
            ));
        }
        if self.gear_eff > 1.0 {
            return Err(PlantError::InvalidParams(format!(
                "gear_eff must be <= 1, got {}",
                self.gear_eff
            )));
        }
        // SI motor constants are the same quantity.
        if (self.k_e - self.k_t).abs() > 1e-12 * self.k_t.max(self.k_e) {
            return Err(PlantError::InvalidParams(format!(
                "k_e ({}) must equal k_t ({}) in SI units",
                self.k_e, self.k_t
            )));
        }
        Ok(())
    }

    /// Electrical time constant L/R, the largest allowed step.
    pub fn max_step(&self) -> f64 {
        self.l_armature / self.r_armature
    }

    /// Mechanical time constant J·R/(k_t·k_e).
    pub fn tau_mech(&self) -> f64 {
        self.j_rotor * self.r_armature / (self.k_t * self.k_e)
    }

    /// Output-shaft torque reflected to the motor shaft.
    pub fn reflected_torque(&self, tau_out: f64) -> f64 {
        tau_out / (self.gear_ratio * self.gear_eff)
    }

    pub fn motor_to_output_rpm(&self, omega_m: f64) -> f64 {
        omega_m / self.gear_ratio * 60.0 / TAU
    }

    pub fn output_rpm_to_motor(&self, rpm: f64) -> f64 {
        rpm * self.gear_ratio * TAU / 60.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantState {
    /// Armature current (A).
    pub i: f64,
    /// Motor shaft speed (rad/s).
    pub omega_m: f64,
    /// Accumulated motor shaft angle (rad), unbounded.
    pub theta_m: f64,
    /// Actuator position (m).
    pub pos: f64,
    pub at_stop: bool,
}

impl PlantState {
    pub fn at_rest(params: &PlantParams) -> Self {
        Self {
            pos: params.stroke_min,
            ..Self::default()
        }
    }
}

/// External load torque at the output shaft (N·m).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LoadSpec {
    pub tau_ext: f64,
}

impl LoadSpec {
    pub const NONE: LoadSpec = LoadSpec { tau_ext: 0.0 };
}

fn check_step_inputs(
    state: &PlantState,
    params: &PlantParams,
    load: LoadSpec,
    dt: f64,
) -> Result<(), PlantError> {
    let fields = [
        ("state.i", state.i),
        ("state.omega_m", state.omega_m),
        ("state.theta_m", state.theta_m),
        ("state.pos", state.pos),
        ("load.tau_ext", load.tau_ext),
        ("dt", dt),
    ];
    for (name, value) in fields {
        if !value.is_finite() {
            return Err(PlantError::NonFiniteInput(name));
        }
    }
    let limit = params.max_step();
    if dt <= 0.0 || dt > limit {
        return Err(PlantError::StepTooLarge { dt, limit });
    }
    Ok(())
}

/// Advance the plant by one step with voltage `v_applied` across the armature.
pub fn plant_step(
    state: PlantState,
    params: &PlantParams,
    v_applied: f64,
    load: LoadSpec,
    dt: f64,
) -> Result<PlantState, PlantError> {
    if !v_applied.is_finite() {
        return Err(PlantError::NonFiniteInput("v_applied"));
    }
    check_step_inputs(&state, params, load, dt)?;
    if v_applied.abs() > params.v_supply * (1.0 + 1e-12) {
        return Err(PlantError::OverVoltage {
            v: v_applied,
            supply: params.v_supply,
        });
    }

    let di =
        (v_applied - params.r_armature * state.i - params.k_e * state.omega_m) / params.l_armature;
    let i = state.i + di * dt;
    Ok(integrate_mechanics(state, params, i, load, dt))
}

/// Advance the plant with the armature circuit open (bridge coasting):
/// current is forced to zero and only friction and load act on the rotor.
pub fn plant_step_open(
    state: PlantState,
    params: &PlantParams,
    load: LoadSpec,
    dt: f64,
) -> Result<PlantState, PlantError> {
    check_step_inputs(&state, params, load, dt)?;
    Ok(integrate_mechanics(state, params, 0.0, load, dt))
}

fn integrate_mechanics(
    state: PlantState,
    params: &PlantParams,
    i: f64,
    load: LoadSpec,
    dt: f64,
) -> PlantState {
    let tau_load = params.reflected_torque(load.tau_ext);
    let torque = params.k_t * i - params.b_visc * state.omega_m - tau_load;
    let omega_free = state.omega_m + torque / params.j_rotor * dt;

    // Inelastic hard stops: a shaft held against a stop stays there while
    // the net drive still pushes into it.
    let mut omega_m = omega_free;
    if (state.pos <= params.stroke_min && omega_m < 0.0)
        || (state.pos >= params.stroke_max && omega_m > 0.0)
    {
        omega_m = 0.0;
    }

    let theta_m = state.theta_m + omega_m * dt;
    let mut pos = state.pos + omega_m / params.gear_ratio * params.lead / TAU * dt;
    let mut at_stop = false;
    if pos <= params.stroke_min && omega_free < 0.0 {
        pos = params.stroke_min;
        at_stop = true;
    } else if pos >= params.stroke_max && omega_free > 0.0 {
        pos = params.stroke_max;
        at_stop = true;
    }
    pos = pos.clamp(params.stroke_min, params.stroke_max);

    PlantState {
        i,
        omega_m,
        theta_m,
        pos,
        at_stop,
    }
}

/// Closed-form equilibrium motor speed for constant voltage and load.
/// Not clamped by the stroke limits; may be negative.
pub fn steady_state_speed(params: &PlantParams, v: f64, tau_ext: f64) -> Result<f64, PlantError> {
    params.validate()?;
    let numerator = params.k_t * v - params.r_armature * params.reflected_torque(tau_ext);
    Ok(numerator / (params.r_armature * params.b_visc + params.k_t * params.k_e))
}

/// Linear pressure model: bend angle (degrees) times `k_load` (N·m/degree).
pub fn pressure_to_load(bend: f64, k_load: f64) -> Result<LoadSpec, PlantError> {
    if !bend.is_finite() || !k_load.is_finite() {
        return Err(PlantError::NonFiniteInput("bend"));
    }
    if bend < 0.0 {
        return Err(PlantError::NegativeBend(bend));
    }
    Ok(LoadSpec {
        tau_ext: k_load * bend,
    })
}
