//! Line protocol over a stream socket.

use tokio::io::{AsyncBufReadExt, AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, watch};

use crate::engine::EngineHandle;
use crate::session::{recv_frame, Session, MAX_LINE};

pub(crate) async fn accept_loop(
    listener: TcpListener,
    engine: EngineHandle,
    mut stop: watch::Receiver<bool>,
) {
    loop {
        tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    tracing::debug!("tcp client {peer} connected");
                    let _ = stream.set_nodelay(true);
                    tokio::spawn(client(stream, engine.clone(), stop.clone()));
                }
                Err(e) => tracing::warn!("accept failed: {e}"),
            },
            _ = stop.changed() => break,
        }
    }
}

async fn client(stream: TcpStream, engine: EngineHandle, mut stop: watch::Receiver<bool>) {
    let (rd, mut wr) = stream.into_split();
    let mut rd = BufReader::new(rd);
    let mut session = Session::new(engine);
    let mut frames: Option<broadcast::Receiver<_>> = None;
    // Partial input survives a cancelled read, so it lives outside the loop.
    let mut buf = Vec::with_capacity(128);
    let mut discarding = false;

    loop {
        let mut limited = (&mut rd).take((MAX_LINE - buf.len()) as u64);
        tokio::select! {
            read = limited.read_until(b'\n', &mut buf) => {
                if read.is_err() {
                    break;
                }
                if buf.last() == Some(&b'\n') {
                    if !std::mem::take(&mut discarding) {
                        let Some(reply) = session.handle(&buf, &mut frames).await else { break };
                        if wr.write_all(reply.as_bytes()).await.is_err() {
                            break;
                        }
                    }
                    buf.clear();
                } else if buf.len() >= MAX_LINE {
                    if !discarding {
                        discarding = true;
                        if wr.write_all(Session::overlong().as_bytes()).await.is_err() {
                            break;
                        }
                    }
                    buf.clear();
                } else {
                    // End of input.
                    break;
                }
            }
            frame = recv_frame(&mut frames) => {
                let Some(frame) = frame else { break };
                if wr.write_all(frame.as_bytes()).await.is_err() {
                    break;
                }
            }
            _ = stop.changed() => break,
        }
    }
}
