//! Realtime stepping context.
//!
//! One OS thread owns the [`Simulation`]. Transports hand it lines over an
//! ordered queue and wait for the reply; telemetry fans out over a broadcast
//! channel so a slow subscriber only loses frames.

use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use simbench_core::protocol::format_telemetry;
use simbench_core::scope::{scope_export_csv, Trace};
use simbench_core::{Reply, SimConfig, SimError, Simulation, TraceConfig};
use tokio::sync::{broadcast, oneshot};

/// Frames buffered per subscriber before it starts dropping.
const TELEMETRY_BACKLOG: usize = 64;
/// Upper bound on plant steps per scheduling pass, so queued commands are
/// never starved while catching up.
const MAX_STEPS_PER_PASS: u64 = 2_000;

pub(crate) enum EngineMsg {
    Line {
        line: Vec<u8>,
        reply: oneshot::Sender<Reply>,
    },
    Shutdown,
}

/// Cloneable handle used by transports to reach the stepping thread.
#[derive(Clone)]
pub struct EngineHandle {
    tx: mpsc::Sender<EngineMsg>,
    telemetry: broadcast::Sender<Arc<str>>,
}

impl EngineHandle {
    /// Submit one wire line and wait for its reply.
    pub async fn request(&self, line: Vec<u8>) -> Option<Reply> {
        let (reply, rx) = oneshot::channel();
        self.tx.send(EngineMsg::Line { line, reply }).ok()?;
        rx.await.ok()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<str>> {
        self.telemetry.subscribe()
    }
}

/// Rolling scope buffer kept while serving, flushed to CSV on shutdown.
struct History {
    traces: TraceConfig,
    decimation: u64,
    rows: VecDeque<(f64, Vec<f64>)>,
    max_rows: usize,
}

impl History {
    fn record(&mut self, sim: &Simulation) {
        if sim.step_index() % self.decimation != 0 {
            return;
        }
        let values = self.traces.signals.iter().map(|s| sim.sample(*s)).collect();
        self.rows.push_back((sim.time(), values));
        if self.rows.len() > self.max_rows {
            self.rows.pop_front();
        }
    }

    fn into_trace(self) -> Trace {
        let mut trace = Trace::new(self.traces.signals);
        for (t, values) in self.rows {
            trace.push_row(t, values);
        }
        trace
    }
}

pub(crate) struct Engine {
    pub handle: EngineHandle,
    join: JoinHandle<Result<Simulation, SimError>>,
}

impl Engine {
    pub fn spawn(cfg: SimConfig, flush_to: Option<PathBuf>) -> Result<Self, SimError> {
        let history = cfg.trace_config(None, cfg.scope.serve_history)?;
        let decimation = history.validate(cfg.sim.dt_plant)?;
        let max_rows = history.expected_rows();
        let mut sim = Simulation::new(cfg)?;
        let (tx, rx) = mpsc::channel();
        let (telemetry, _) = broadcast::channel(TELEMETRY_BACKLOG);
        let handle = EngineHandle {
            tx,
            telemetry: telemetry.clone(),
        };

        let join = thread::Builder::new()
            .name("simbench-engine".into())
            .spawn(move || {
                let mut history = History {
                    traces: history,
                    decimation,
                    rows: VecDeque::new(),
                    max_rows,
                };
                let result = run_realtime(&mut sim, &rx, &telemetry, &mut history);
                if let Some(path) = flush_to {
                    let trace = history.into_trace();
                    if !trace.is_empty() {
                        if let Err(e) = scope_export_csv(&trace, &path) {
                            tracing::error!("scope flush to {} failed: {e}", path.display());
                        } else {
                            tracing::info!("scope trace written to {}", path.display());
                        }
                    }
                }
                result.map(|()| sim)
            })
            .expect("spawn engine thread");
        Ok(Self { handle, join })
    }

    /// Stop stepping, flush the scope and return the final simulation.
    pub fn shutdown(self) -> Result<Simulation, SimError> {
        let _ = self.handle.tx.send(EngineMsg::Shutdown);
        self.join.join().expect("engine thread panicked")
    }
}

fn run_realtime(
    sim: &mut Simulation,
    rx: &mpsc::Receiver<EngineMsg>,
    telemetry: &broadcast::Sender<Arc<str>>,
    history: &mut History,
) -> Result<(), SimError> {
    let dt = sim.dt();
    let start = Instant::now();
    let emit = |sim: &mut Simulation, history: &mut History| {
        sim.sync();
        history.record(sim);
        if sim.frame_due() {
            // No subscribers is not an error.
            let _ = telemetry.send(Arc::from(format_telemetry(&sim.telemetry_frame())));
        }
    };
    emit(sim, history);

    loop {
        // Steps are scheduled against the start instant, so sleep jitter
        // never accumulates into drift.
        let target = (start.elapsed().as_secs_f64() / dt) as u64;
        let mut budget = MAX_STEPS_PER_PASS;
        while sim.step_index() < target && budget > 0 {
            sim.integrate()?;
            emit(sim, history);
            budget -= 1;
        }

        let wait = if sim.step_index() < target {
            Duration::ZERO
        } else {
            Duration::from_millis(1)
        };
        match rx.recv_timeout(wait) {
            Ok(EngineMsg::Line { line, reply }) => {
                let _ = reply.send(sim.handle_line(&line));
                // Drain whatever else is queued at this same instant.
                while let Ok(msg) = rx.try_recv() {
                    match msg {
                        EngineMsg::Line { line, reply } => {
                            let _ = reply.send(sim.handle_line(&line));
                        }
                        EngineMsg::Shutdown => return Ok(()),
                    }
                }
            }
            Ok(EngineMsg::Shutdown) | Err(RecvTimeoutError::Disconnected) => return Ok(()),
            Err(RecvTimeoutError::Timeout) => {}
        }
    }
}
