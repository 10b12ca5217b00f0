//! Simulation configuration, stored as a sectioned key-value (TOML) file.
//!
//! Every section and key is optional; missing values fall back to the
//! defaults compiled in here, which match `config/default.toml`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::EncoderSpec;
use crate::firmware::{ControlLaw, FirmwareConfig, PidGains};
use crate::plant::PlantParams;
use crate::scope::{parse_signal_list, ScopeError, TraceConfig};
use crate::sensing::FlexParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    /// Pace stepping to the wall clock.
    Realtime,
    /// Step as fast as possible.
    #[default]
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    /// Plant integration step (s).
    pub dt_plant: f64,
    /// Firmware loop rate (Hz).
    pub tick_hz: f64,
    /// Telemetry frame rate (Hz).
    pub stream_hz: f64,
    pub control: ControlLaw,
    pub mode: RunMode,
    /// Tachometer window (s).
    pub rpm_window: f64,
    pub rpm_max: f64,
    /// Setpoint at power-up (output RPM).
    pub setpoint_rpm: f64,
    /// Enable duty for `control = "bang"`.
    pub bang_duty: f64,
    /// Pressure load per degree of bend (N·m/°).
    pub k_load: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt_plant: 50e-6,
            tick_hz: 1000.0,
            stream_hz: 20.0,
            control: ControlLaw::Pid,
            mode: RunMode::Max,
            rpm_window: 0.1,
            rpm_max: 80.0,
            setpoint_rpm: 60.0,
            bang_duty: 1.0,
            k_load: 0.002,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSection {
    pub lines_per_rev: u32,
}

impl Default for EncoderSection {
    fn default() -> Self {
        Self { lines_per_rev: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScopeSection {
    /// Comma-separated signal names recorded by `run`.
    pub signals: String,
    /// Sample rate override (Hz). Zero picks 20 kHz for encoder channels and
    /// 1 kHz otherwise.
    pub sample_hz: f64,
    /// Seconds of history `serve` keeps for the shutdown flush.
    pub serve_history: f64,
    /// Where `serve` writes its trace on shutdown.
    pub out_dir: String,
}

impl Default for ScopeSection {
    fn default() -> Self {
        Self {
            signals: "v_bridge,enc_a,enc_b,flex_node,pressed_5v,rpm,duty,pos".into(),
            sample_hz: 0.0,
            serve_history: 10.0,
            out_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    /// Line protocol over TCP.
    pub port: u16,
    /// Dashboard and `/ws` gateway.
    pub http: u16,
    /// Built dashboard served at `/`; a minimal built-in page is used when
    /// the directory does not exist.
    pub webui_dir: String,
}

impl Default for NetSection {
    fn default() -> Self {
        Self {
            port: 7777,
            http: 8080,
            webui_dir: "webui/dist".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub sim: SimSection,
    pub plant: PlantParams,
    pub flex: FlexParams,
    pub pid: PidGains,
    pub encoder: EncoderSection,
    pub scope: ScopeSection,
    pub net: NetSection,
}

fn whole_ratio(name: &str, ratio: f64) -> Result<u64, ConfigError> {
    if !(ratio.is_finite() && ratio >= 1.0 - 1e-9) || (ratio - ratio.round()).abs() > 1e-6 {
        return Err(ConfigError::Invalid(format!(
            "{name} must be a whole number (>= 1) of plant steps, got {ratio}"
        )));
    }
    Ok(ratio.round() as u64)
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.plant.validate().map_err(|e| invalid(&e))?;
        self.flex.validate().map_err(|e| invalid(&e))?;
        self.encoder_spec()?;
        self.firmware_config()?
            .validate()
            .map_err(|e| invalid(&e))?;

        let dt = self.sim.dt_plant;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ConfigError::Invalid("dt_plant must be > 0".into()));
        }
        if dt > self.plant.max_step() {
            return Err(ConfigError::Invalid(format!(
                "dt_plant {dt} exceeds L/R = {}",
                self.plant.max_step()
            )));
        }
        self.steps_per_tick()?;
        self.steps_per_frame()?;
        if !(self.sim.setpoint_rpm.abs() <= self.sim.rpm_max) {
            return Err(ConfigError::Invalid(format!(
                "setpoint_rpm {} outside ±rpm_max",
                self.sim.setpoint_rpm
            )));
        }
        if !self.sim.k_load.is_finite() {
            return Err(ConfigError::Invalid("k_load must be finite".into()));
        }
        if !(self.scope.sample_hz >= 0.0) {
            return Err(ConfigError::Invalid("scope.sample_hz must be >= 0".into()));
        }
        Ok(())
    }

    pub fn encoder_spec(&self) -> Result<EncoderSpec, ConfigError> {
        EncoderSpec::new(self.encoder.lines_per_rev, self.plant.gear_ratio)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn firmware_config(&self) -> Result<FirmwareConfig, ConfigError> {
        Ok(FirmwareConfig {
            tick_hz: self.sim.tick_hz,
            rpm_window: self.sim.rpm_window,
            rpm_max: self.sim.rpm_max,
            control: self.sim.control,
            bang_duty: self.sim.bang_duty,
            gains: self.pid,
            flex: self.flex,
            encoder: self.encoder_spec()?,
            v_supply: self.plant.v_supply,
        })
    }

    /// Trace settings for a recording of `duration` seconds. `signals`
    /// overrides the configured list.
    pub fn trace_config(
        &self,
        signals: Option<&str>,
        duration: f64,
    ) -> Result<TraceConfig, ScopeError> {
        let list = parse_signal_list(signals.unwrap_or(&self.scope.signals))?;
        let mut traces = TraceConfig::with_default_rate(list, duration);
        if self.scope.sample_hz > 0.0 {
            traces.sample_hz = self.scope.sample_hz;
        }
        traces.validate(self.sim.dt_plant)?;
        Ok(traces)
    }

    /// Plant steps per firmware tick.
    pub fn steps_per_tick(&self) -> Result<u64, ConfigError> {
        whole_ratio("1/tick_hz", 1.0 / (self.sim.tick_hz * self.sim.dt_plant))
    }

    /// Plant steps per telemetry frame.
    pub fn steps_per_frame(&self) -> Result<u64, ConfigError> {
        whole_ratio(
            "1/stream_hz",
            1.0 / (self.sim.stream_hz * self.sim.dt_plant),
        )
    }
}
