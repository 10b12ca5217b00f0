//! One channel of an L298-style dual H-bridge with averaged PWM on the enable pin.
//!
//! The second channel (IN3/IN4, OUT3/OUT4) is wired off on the bench and is
//! not modeled.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BridgeInputs {
    pub in1: bool,
    pub in2: bool,
    /// PWM duty on ENA, in [0, 1].
    pub ena_duty: f64,
    pub v_supply: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriveMode {
    Drive,
    /// Both motor terminals tied to the same rail.
    Brake,
    /// Enable low: outputs floating, armature open.
    Coast,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeDrive {
    pub mode: DriveMode,
    /// Averaged terminal voltage. Zero and meaningless when coasting.
    pub v_eff: f64,
}

impl BridgeDrive {
    pub const COAST: BridgeDrive = BridgeDrive {
        mode: DriveMode::Coast,
        v_eff: 0.0,
    };
}

pub fn bridge_resolve(inputs: &BridgeInputs) -> BridgeDrive {
    let duty = inputs.ena_duty.clamp(0.0, 1.0);
    // NaN duty also lands here: treat it as enable low.
    if !(duty > 0.0) {
        return BridgeDrive::COAST;
    }
    match (inputs.in1, inputs.in2) {
        (true, false) => BridgeDrive {
            mode: DriveMode::Drive,
            v_eff: inputs.v_supply * duty,
        },
        (false, true) => BridgeDrive {
            mode: DriveMode::Drive,
            v_eff: -inputs.v_supply * duty,
        },
        _ => BridgeDrive {
            mode: DriveMode::Brake,
            v_eff: 0.0,
        },
    }
}
