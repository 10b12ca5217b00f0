//! Per-connection protocol state shared by both transports.

use std::sync::Arc;

use simbench_core::protocol::parse_command;
use simbench_core::{Command, ProtocolError, Reply};
use tokio::sync::broadcast::{self, error::RecvError};

use crate::engine::EngineHandle;

/// Longest accepted request line, newline included.
pub const MAX_LINE: usize = 256;

pub(crate) type Frames = Option<broadcast::Receiver<Arc<str>>>;

pub(crate) struct Session {
    engine: EngineHandle,
}

impl Session {
    pub fn new(engine: EngineHandle) -> Self {
        Self { engine }
    }

    /// Forward one line to the engine and return the reply text. `None`
    /// means the engine has stopped. A successful `STREAM` toggles the
    /// connection's telemetry subscription.
    pub async fn handle(&mut self, line: &[u8], frames: &mut Frames) -> Option<String> {
        let reply = self.engine.request(line.to_vec()).await?;
        if reply == Reply::Ok {
            if let Ok(Command::Stream { on }) = parse_command(line) {
                if !on {
                    *frames = None;
                } else if frames.is_none() {
                    *frames = Some(self.engine.subscribe());
                }
            }
        }
        Some(reply.to_line())
    }

    pub fn overlong() -> String {
        Reply::Err(ProtocolError::UnknownCommand).to_line()
    }
}

/// Next telemetry frame, skipping any dropped while the client lagged.
/// Pends forever when streaming is off; `None` once the engine is gone.
pub(crate) async fn recv_frame(frames: &mut Frames) -> Option<Arc<str>> {
    let Some(rx) = frames else {
        return std::future::pending().await;
    };
    loop {
        match rx.recv().await {
            Ok(frame) => return Some(frame),
            Err(RecvError::Lagged(n)) => tracing::debug!("client lagged, dropped {n} frames"),
            Err(RecvError::Closed) => return None,
        }
    }
}
