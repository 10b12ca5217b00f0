//! HTTP gateway: the dashboard at `/` and the line protocol at `/ws`.

use std::path::PathBuf;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;
use tokio::sync::watch;
use tower_http::services::ServeDir;

use crate::engine::EngineHandle;
use crate::session::{recv_frame, Frames, Session, MAX_LINE};

const FALLBACK_PAGE: &str = include_str!("../assets/index.html");

#[derive(Clone)]
struct Gateway {
    engine: EngineHandle,
    stop: watch::Receiver<bool>,
}

pub(crate) fn router(engine: EngineHandle, stop: watch::Receiver<bool>, webui: PathBuf) -> Router {
    let app = Router::new()
        .route("/ws", get(upgrade))
        .with_state(Gateway { engine, stop });
    if webui.is_dir() {
        app.fallback_service(ServeDir::new(webui))
    } else {
        tracing::info!("{} not found, serving the built-in page", webui.display());
        app.route("/", get(|| async { Html(FALLBACK_PAGE) }))
    }
}

pub(crate) async fn serve(listener: TcpListener, app: Router, mut stop: watch::Receiver<bool>) {
    let shutdown = async move {
        let _ = stop.changed().await;
    };
    if let Err(e) = axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
    {
        tracing::error!("gateway stopped: {e}");
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(gw): State<Gateway>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, gw))
}

async fn client(mut socket: WebSocket, gw: Gateway) {
    let Gateway { engine, mut stop } = gw;
    let mut session = Session::new(engine);
    let mut frames: Frames = None;

    loop {
        tokio::select! {
            msg = socket.recv() => {
                let text = match msg {
                    Some(Ok(Message::Text(text))) => text,
                    Some(Ok(Message::Binary(bytes))) => String::from_utf8_lossy(&bytes).into_owned(),
                    Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                    Some(Ok(_)) => continue,
                };
                // A message may carry several newline-terminated lines; a
                // bare final line without a newline still counts as one.
                for line in text.split_inclusive('\n') {
                    let reply = if line.len() > MAX_LINE {
                        Session::overlong()
                    } else {
                        match session.handle(line.as_bytes(), &mut frames).await {
                            Some(reply) => reply,
                            None => return,
                        }
                    };
                    if socket.send(Message::Text(reply)).await.is_err() {
                        return;
                    }
                }
            }
            frame = recv_frame(&mut frames) => {
                let Some(frame) = frame else { break };
                if socket.send(Message::Text(frame.to_string())).await.is_err() {
                    break;
                }
            }
            _ = stop.changed() => break,
        }
    }
    let _ = socket.send(Message::Close(None)).await;
}
