//! Fixed-step scheduler tying plant, encoder, sensor chain, firmware and
//! bridge together.
//!
//! Time is kept as an integer plant-step counter; `t = step · dt_plant`.
//! At each step boundary the scheduler (1) applies any pending commands,
//! (2) runs the firmware tick when one is due, then (3) integrates the plant
//! to the next boundary and feeds the new shaft angle to the decoder.

use thiserror::Error;

use crate::config::{ConfigError, RunMode, SimConfig};
use crate::encoder::{encoder_emit, quad_decode, DecoderState, EncoderError, EncoderSpec};
use crate::firmware::{firmware_tick, set_setpoint, FirmwareConfig, FirmwareState};
use crate::hbridge::{bridge_resolve, BridgeDrive, DriveMode};
use crate::plant::{
    plant_step, plant_step_open, pressure_to_load, LoadSpec, PlantError, PlantState,
};
use crate::protocol::{
    format_status, format_telemetry, Command, ProtocolError, Reply, StatusSnapshot, TelemetryFrame,
};
use crate::scenario::Scenario;
use crate::scope::{ScopeError, Signal, Trace, TraceConfig, LOGIC_HIGH_V};
use crate::sensing::{bend_to_adc, divider_voltage, flex_resistance};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scope(#[from] ScopeError),
    #[error("plant step {step} (t={t:.6} s)")]
    Plant {
        step: u64,
        t: f64,
        #[source]
        source: PlantError,
    },
    #[error("encoder at step {step} (t={t:.6} s)")]
    Encoder {
        step: u64,
        t: f64,
        #[source]
        source: EncoderError,
    },
}

/// The single owner of all mutable bench state.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    cfg: SimConfig,
    fw_cfg: FirmwareConfig,
    encoder: EncoderSpec,
    steps_per_tick: u64,
    steps_per_frame: u64,
    step: u64,
    /// Step whose firmware tick has already run.
    ticked: Option<u64>,
    plant: PlantState,
    decoder: DecoderState,
    last_delta: i8,
    firmware: FirmwareState,
    drive: BridgeDrive,
    bend: f64,
    pressure_load: f64,
    extra_load: f64,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let fw_cfg = cfg.firmware_config()?;
        let encoder = cfg.encoder_spec()?;
        let plant = PlantState::at_rest(&cfg.plant);
        let first = encoder_emit(plant.theta_m, &encoder).map_err(|source| SimError::Encoder {
            step: 0,
            t: 0.0,
            source,
        })?;
        Ok(Self {
            steps_per_tick: cfg.steps_per_tick()?,
            steps_per_frame: cfg.steps_per_frame()?,
            firmware: FirmwareState::new(&fw_cfg, cfg.sim.setpoint_rpm),
            fw_cfg,
            encoder,
            step: 0,
            ticked: None,
            plant,
            decoder: DecoderState::new(first),
            last_delta: 0,
            drive: BridgeDrive::COAST,
            bend: 0.0,
            pressure_load: 0.0,
            extra_load: 0.0,
            cfg,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn dt(&self) -> f64 {
        self.cfg.sim.dt_plant
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    /// Simulated time of the current step boundary (s).
    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.sim.dt_plant
    }

    pub fn plant(&self) -> &PlantState {
        &self.plant
    }

    pub fn decoder(&self) -> &DecoderState {
        &self.decoder
    }

    /// Count delta produced by the most recent plant step.
    pub fn last_delta(&self) -> i8 {
        self.last_delta
    }

    pub fn firmware(&self) -> &FirmwareState {
        &self.firmware
    }

    pub fn drive(&self) -> BridgeDrive {
        self.drive
    }

    pub fn encoder_spec(&self) -> &EncoderSpec {
        &self.encoder
    }

    pub fn steps_per_frame(&self) -> u64 {
        self.steps_per_frame
    }

    pub fn bend(&self) -> f64 {
        self.bend
    }

    /// Total output-shaft load torque currently applied (N·m).
    pub fn load(&self) -> LoadSpec {
        LoadSpec {
            tau_ext: self.pressure_load + self.extra_load,
        }
    }

    /// Apply one protocol command and produce its reply. Rejected commands
    /// leave the simulation untouched.
    pub fn apply(&mut self, command: &Command) -> Reply {
        match *command {
            Command::Ping => Reply::Pong,
            Command::Press { bend } => match pressure_to_load(bend, self.cfg.sim.k_load) {
                Ok(load) => {
                    self.bend = bend;
                    self.pressure_load = load.tau_ext;
                    Reply::Ok
                }
                Err(_) => Reply::Err(ProtocolError::BadArg),
            },
            Command::Release => {
                self.bend = 0.0;
                self.pressure_load = 0.0;
                Reply::Ok
            }
            Command::SetRpm { rpm } => {
                match set_setpoint(self.firmware.clone(), rpm, self.fw_cfg.rpm_max) {
                    Ok(fw) => {
                        self.firmware = fw;
                        Reply::Ok
                    }
                    Err(_) => Reply::Err(ProtocolError::BadArg),
                }
            }
            Command::SetLoad { tau } => {
                if tau.is_finite() {
                    self.extra_load = tau;
                    Reply::Ok
                } else {
                    Reply::Err(ProtocolError::BadArg)
                }
            }
            Command::GetStatus => Reply::Status(format_status(&self.snapshot())),
            // Streaming is a per-connection flag held by the transport.
            Command::Stream { .. } => Reply::Ok,
        }
    }

    /// Parse and apply one wire line.
    pub fn handle_line(&mut self, line: &[u8]) -> Reply {
        match crate::protocol::parse_command(line) {
            Ok(cmd) => self.apply(&cmd),
            Err(e) => Reply::Err(e),
        }
    }

    /// Run the firmware tick for the current step if it is due and has not
    /// run yet.
    pub fn sync(&mut self) {
        if self.step % self.steps_per_tick != 0 || self.ticked == Some(self.step) {
            return;
        }
        self.ticked = Some(self.step);
        let adc = bend_to_adc(self.bend, &self.cfg.flex).unwrap_or(0);
        let fw = std::mem::take(&mut self.firmware);
        let (fw, pins) = firmware_tick(fw, adc, &self.decoder, &self.fw_cfg, self.fw_cfg.tick_dt());
        self.firmware = fw;
        self.drive = bridge_resolve(&pins);
    }

    /// Integrate the plant to the next step boundary.
    pub fn integrate(&mut self) -> Result<(), SimError> {
        self.sync();
        let dt = self.cfg.sim.dt_plant;
        let load = self.load();
        let stepped = match self.drive.mode {
            DriveMode::Coast => plant_step_open(self.plant, &self.cfg.plant, load, dt),
            DriveMode::Drive | DriveMode::Brake => {
                plant_step(self.plant, &self.cfg.plant, self.drive.v_eff, load, dt)
            }
        };
        self.plant = stepped.map_err(|source| SimError::Plant {
            step: self.step,
            t: self.time(),
            source,
        })?;
        let q = encoder_emit(self.plant.theta_m, &self.encoder).map_err(|source| {
            SimError::Encoder {
                step: self.step,
                t: self.time(),
                source,
            }
        })?;
        let (decoder, delta) = quad_decode(self.decoder, q);
        self.decoder = decoder;
        self.last_delta = delta;
        self.step += 1;
        Ok(())
    }

    pub fn snapshot(&self) -> StatusSnapshot {
        StatusSnapshot {
            t: self.time(),
            rpm: self.firmware.rpm_est,
            setpoint: self.firmware.setpoint_rpm,
            duty: self.firmware.pins.ena_duty,
            adc: self.firmware.sense.adc,
            pressed: self.firmware.sense.pressed,
            pos_mm: self.plant.pos * 1e3,
            in1: self.firmware.pins.in1,
            in2: self.firmware.pins.in2,
        }
    }

    pub fn telemetry_frame(&self) -> TelemetryFrame {
        TelemetryFrame {
            t: self.time(),
            rpm: self.firmware.rpm_est,
            duty: self.firmware.pins.ena_duty,
            adc: self.firmware.sense.adc,
            total_counts: self.decoder.total_counts,
            pos: self.plant.pos * 1e3,
        }
    }

    pub fn frame_due(&self) -> bool {
        self.step % self.steps_per_frame == 0
    }

    /// Probe value for `signal` at the current step boundary.
    pub fn sample(&self, signal: Signal) -> f64 {
        let level = |on: bool| if on { LOGIC_HIGH_V } else { 0.0 };
        match signal {
            Signal::VBridge => match self.drive.mode {
                DriveMode::Coast => 0.0,
                _ => self.drive.v_eff,
            },
            Signal::EncA => level(self.decoder.prev.a),
            Signal::EncB => level(self.decoder.prev.b),
            Signal::FlexNode => flex_resistance(self.bend, &self.cfg.flex)
                .map(|r| divider_voltage(r, &self.cfg.flex))
                .unwrap_or(0.0),
            Signal::Pressed5v => level(self.firmware.sense.pressed),
            Signal::Rpm => self.firmware.rpm_est,
            Signal::Duty => self.firmware.pins.ena_duty,
            Signal::Pos => self.plant.pos * 1e3,
        }
    }
}

/// A command fired by a scenario, with the time it took effect.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub t: f64,
    pub command: Command,
    pub reply: Reply,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub snapshot: StatusSnapshot,
    pub trace: Trace,
    pub telemetry: Vec<TelemetryFrame>,
    pub events: Vec<EventRecord>,
}

impl RunOutput {
    pub fn telemetry_log(&self) -> String {
        self.telemetry.iter().map(format_telemetry).collect()
    }

    pub fn event_log(&self) -> String {
        self.events
            .iter()
            .map(|e| format!("{:.6} {} -> {}", e.t, e.command, e.reply.to_line()))
            .collect()
    }
}

/// First step boundary at or after `t`.
pub fn quantize_time(t: f64, dt: f64) -> u64 {
    (t / dt - 1e-9).ceil().max(0.0) as u64
}

/// Run a scenario headless. With `mode = "realtime"` the loop sleeps at
/// each telemetry frame to keep pace with the wall clock; the outputs are
/// the same either way.
pub fn run_scenario(
    cfg: SimConfig,
    scenario: &Scenario,
    traces: &TraceConfig,
) -> Result<RunOutput, SimError> {
    let realtime = cfg.sim.mode == RunMode::Realtime;
    let mut sim = Simulation::new(cfg)?;
    let dt = sim.dt();
    let start = std::time::Instant::now();
    let decimation = traces.validate(dt)?;
    let max_rows = traces.expected_rows();
    let last_step = (scenario.duration / dt + 1e-9).floor() as u64;

    let mut trace = Trace::new(traces.signals.clone());
    let mut telemetry = Vec::new();
    let mut events = Vec::with_capacity(scenario.events.len());
    let mut pending = scenario.events.iter().peekable();

    for n in 0..=last_step {
        while let Some(ev) = pending.next_if(|ev| quantize_time(ev.t, dt) <= n) {
            let reply = sim.apply(&ev.command);
            events.push(EventRecord {
                t: sim.time(),
                command: ev.command,
                reply,
            });
        }
        sim.sync();
        if n % decimation == 0 && trace.len() < max_rows {
            let row = trace.len() as f64 / traces.sample_hz;
            trace.push_row(row, traces.signals.iter().map(|s| sim.sample(*s)));
        }
        if sim.frame_due() {
            telemetry.push(sim.telemetry_frame());
            if realtime {
                let due = std::time::Duration::from_secs_f64(sim.time());
                if let Some(wait) = due.checked_sub(start.elapsed()) {
                    std::thread::sleep(wait);
                }
            }
        }
        if n < last_step {
            sim.integrate()?;
        }
    }

    Ok(RunOutput {
        snapshot: sim.snapshot(),
        trace,
        telemetry,
        events,
    })
}
