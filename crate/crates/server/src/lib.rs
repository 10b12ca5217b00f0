//! Realtime serving of a simulated bench.
//!
//! [`start`] binds the line-protocol socket and the HTTP gateway, then steps
//! the simulation against the wall clock until [`Server::shutdown`]. Both
//! transports speak the same newline-delimited protocol; the gateway carries
//! it over WebSocket at `/ws` and serves the dashboard at `/`.

mod engine;
mod gateway;
mod session;
mod tcp;

use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;

use simbench_core::{SimConfig, SimError, Simulation};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::watch;
use tokio::task::JoinHandle;

pub use engine::EngineHandle;
pub use session::MAX_LINE;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("port {port} already in use")]
    PortInUse { port: u16 },
    #[error("cannot bind port {port}")]
    Bind { port: u16, source: io::Error },
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Where to listen and where to flush the scope trace on shutdown.
#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub host: String,
    pub port: u16,
    pub http: u16,
    pub webui_dir: PathBuf,
    /// `None` skips the shutdown flush.
    pub trace_out: Option<PathBuf>,
}

impl ServeOptions {
    /// Ports and paths taken from the config's `[net]` and `[scope]`.
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: cfg.net.port,
            http: cfg.net.http,
            webui_dir: PathBuf::from(&cfg.net.webui_dir),
            trace_out: Some(PathBuf::from(&cfg.scope.out_dir).join("serve_trace.csv")),
        }
    }
}

pub struct Server {
    tcp_addr: SocketAddr,
    http_addr: SocketAddr,
    engine: engine::Engine,
    stop: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
}

async fn bind(host: &str, port: u16) -> Result<TcpListener, ServerError> {
    TcpListener::bind((host, port)).await.map_err(|source| {
        if source.kind() == io::ErrorKind::AddrInUse {
            ServerError::PortInUse { port }
        } else {
            ServerError::Bind { port, source }
        }
    })
}

/// Bind both ports and start stepping. Config errors surface before any
/// port is bound. Must be called inside a Tokio runtime.
pub async fn start(cfg: SimConfig, opts: ServeOptions) -> Result<Server, ServerError> {
    // Fail on a bad config before touching the network.
    Simulation::new(cfg.clone())?;
    cfg.trace_config(None, cfg.scope.serve_history)
        .map_err(SimError::from)?;

    let tcp = bind(&opts.host, opts.port).await?;
    let http = bind(&opts.host, opts.http).await?;
    let tcp_addr = tcp.local_addr().map_err(|source| ServerError::Bind {
        port: opts.port,
        source,
    })?;
    let http_addr = http.local_addr().map_err(|source| ServerError::Bind {
        port: opts.http,
        source,
    })?;

    if let Some(dir) = opts.trace_out.as_ref().and_then(|p| p.parent()) {
        if !dir.as_os_str().is_empty() {
            let _ = std::fs::create_dir_all(dir);
        }
    }
    let engine = engine::Engine::spawn(cfg, opts.trace_out)?;
    let (stop, stop_rx) = watch::channel(false);
    let app = gateway::router(engine.handle.clone(), stop_rx.clone(), opts.webui_dir);
    let tasks = vec![
        tokio::spawn(tcp::accept_loop(
            tcp,
            engine.handle.clone(),
            stop_rx.clone(),
        )),
        tokio::spawn(gateway::serve(http, app, stop_rx)),
    ];
    tracing::info!("line protocol on {tcp_addr}, gateway on http://{http_addr}");
    Ok(Server {
        tcp_addr,
        http_addr,
        engine,
        stop,
        tasks,
    })
}

impl Server {
    pub fn tcp_addr(&self) -> SocketAddr {
        self.tcp_addr
    }

    pub fn http_addr(&self) -> SocketAddr {
        self.http_addr
    }

    pub fn engine(&self) -> &EngineHandle {
        &self.engine.handle
    }

    /// Disconnect clients, stop stepping and flush the scope trace.
    /// Returns the simulation as it stood when stopped.
    pub async fn shutdown(self) -> Result<Simulation, ServerError> {
        let _ = self.stop.send(true);
        for task in self.tasks {
            let _ = task.await;
        }
        let engine = self.engine;
        let sim = tokio::task::spawn_blocking(move || engine.shutdown())
            .await
            .expect("engine join")?;
        Ok(sim)
    }
}

/// Serve until interrupted, then shut down cleanly.
pub async fn serve(cfg: SimConfig, opts: ServeOptions) -> Result<(), ServerError> {
    let server = start(cfg, opts).await?;
    if let Err(e) = tokio::signal::ctrl_c().await {
        tracing::warn!("cannot listen for interrupt: {e}");
    }
    tracing::info!("interrupted, shutting down");
    let sim = server.shutdown().await?;
    tracing::info!("stopped at t={:.3} s", sim.time());
    Ok(())
}
