//! Deterministic digital twin of a small IoT motor bench: a 12 V brushed
//! gearmotor with a Hall quadrature encoder, driven through an L298-style
//! H-bridge by an emulated microcontroller that reads a flex (bend) sensor.
//!
//! The crate is organized bottom-up:
//!
//! - [`plant`]: motor, gearbox and lead-screw actuator dynamics
//! - [`encoder`]: channel generation and x4 decoding
//! - [`hbridge`]: pin/duty → terminal voltage
//! - [`sensing`]: flex sensor, divider, ADC and hysteresis
//! - [`firmware`]: press supervisor, tachometer and PID speed hold
//! - [`protocol`]: the newline-framed control/telemetry protocol
//! - [`scope`]: signal recorder and CSV traces
//! - [`config`], [`scenario`], [`sim`]: configuration, scripted runs and the
//!   fixed-step scheduler

// Guards like `!(x > 0.0)` are written that way so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod encoder;
pub mod firmware;
pub mod hbridge;
pub mod plant;
pub mod protocol;
pub mod scenario;
pub mod scope;
pub mod sensing;
pub mod sim;

pub use config::{ConfigError, RunMode, SimConfig};
pub use encoder::{DecoderState, EncoderSpec, QuadState};
pub use firmware::{ControlLaw, FirmwareState, Mode, PidGains};
pub use hbridge::{BridgeDrive, BridgeInputs, DriveMode};
pub use plant::{LoadSpec, PlantParams, PlantState};
pub use protocol::{Command, ProtocolError, Reply, StatusSnapshot, TelemetryFrame};
pub use scenario::{parse_scenario, Scenario};
pub use scope::{Signal, Trace, TraceConfig};
pub use sensing::{FlexParams, SenseState};
pub use sim::{run_scenario, RunOutput, SimError, Simulation};
