//! Command handling behind the `simbench` binary.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use simbench_core::protocol::format_status;
use simbench_core::scope::scope_export_csv;
use simbench_core::{parse_scenario, run_scenario, SimConfig};
use simbench_server::ServeOptions;

/// Environment variable naming a config file when `--config` is absent.
pub const CONFIG_ENV: &str = "SIMBENCH_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "simbench", version, about = "Digital twin of a DC motor bench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run a scenario file and write traces, telemetry and events.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Config file (TOML). Falls back to $SIMBENCH_CONFIG, then defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory; `scope.out_dir` from the config when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated signal list, overriding `scope.signals`.
        #[arg(long)]
        trace: Option<String>,
    },
    /// Serve the bench in realtime over TCP and the HTTP gateway.
    Serve {
        /// Config file (TOML). Falls back to $SIMBENCH_CONFIG, then defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        http: Option<u16>,
        /// Address to listen on.
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

fn load_config(flag: Option<PathBuf>, env: Option<OsString>) -> Result<SimConfig> {
    match flag.or_else(|| env.map(PathBuf::from)) {
        Some(p) => Ok(SimConfig::load(&p)?),
        None => Ok(SimConfig::default()),
    }
}

/// Files written by [`run`], relative to the output directory.
pub const RUN_OUTPUTS: [&str; 4] = ["trace.csv", "telemetry.log", "events.log", "status.txt"];

/// Execute a scenario and write its outputs. Returns the final status line.
pub fn run(
    cfg: SimConfig,
    scenario: &Path,
    out: Option<PathBuf>,
    trace: Option<&str>,
) -> Result<String> {
    let text = fs::read_to_string(scenario)
        .with_context(|| format!("cannot read scenario {}", scenario.display()))?;
    let parsed = parse_scenario(&text).with_context(|| scenario.display().to_string())?;
    let traces = cfg.trace_config(trace, parsed.duration)?;
    let out = out.unwrap_or_else(|| PathBuf::from(&cfg.scope.out_dir));

    let output = run_scenario(cfg, &parsed, &traces)?;

    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    let write = |name: &str, body: &str| {
        let path = out.join(name);
        fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))
    };
    scope_export_csv(&output.trace, &out.join("trace.csv"))?;
    write("telemetry.log", &output.telemetry_log())?;
    write("events.log", &output.event_log())?;
    let status = format_status(&output.snapshot);
    write("status.txt", &status)?;
    Ok(status)
}

/// Dispatch a parsed command line. `env_config` is the value of
/// [`CONFIG_ENV`], passed in so callers control the environment.
pub fn execute(cli: Cli, env_config: Option<OsString>) -> Result<()> {
    match cli.command {
        Cmd::Run {
            scenario,
            config,
            out,
            trace,
        } => {
            let cfg = load_config(config, env_config)?;
            print!("{}", run(cfg, &scenario, out, trace.as_deref())?);
        }
        Cmd::Serve {
            config,
            port,
            http,
            host,
        } => {
            let cfg = load_config(config, env_config)?;
            let mut opts = ServeOptions::from_config(&cfg);
            opts.host = host;
            opts.port = port.unwrap_or(opts.port);
            opts.http = http.unwrap_or(opts.http);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(simbench_server::serve(cfg, opts))?;
        }
    }
    Ok(())
}
