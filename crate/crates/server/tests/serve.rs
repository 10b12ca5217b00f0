use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use simbench_core::SimConfig;
use simbench_server::{start, ServeOptions, Server, ServerError};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::TcpStream;
use tokio::time::timeout;
use tokio_tungstenite::tungstenite::Message;

fn options() -> ServeOptions {
    ServeOptions {
        host: "127.0.0.1".into(),
        port: 0,
        http: 0,
        webui_dir: "does-not-exist".into(),
        trace_out: None,
    }
}

async fn server() -> Server {
    start(SimConfig::default(), options()).await.unwrap()
}

struct Client {
    rd: BufReader<OwnedReadHalf>,
    wr: OwnedWriteHalf,
}

impl Client {
    async fn connect(server: &Server) -> Self {
        let (rd, wr) = TcpStream::connect(server.tcp_addr())
            .await
            .unwrap()
            .into_split();
        Self {
            rd: BufReader::new(rd),
            wr,
        }
    }

    async fn send(&mut self, line: &str) {
        self.wr.write_all(line.as_bytes()).await.unwrap();
    }

    async fn line(&mut self) -> String {
        let mut s = String::new();
        timeout(Duration::from_secs(5), self.rd.read_line(&mut s))
            .await
            .expect("reply in time")
            .unwrap();
        s
    }

    async fn ask(&mut self, line: &str) -> String {
        self.send(line).await;
        self.line().await
    }
}

fn status_field<'a>(status: &'a str, key: &str) -> &'a str {
    status
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .unwrap_or_else(|| panic!("{key} missing from {status:?}"))
}

#[tokio::test(flavor = "multi_thread")]
async fn ping_pong_and_errors() {
    let server = server().await;
    let mut c = Client::connect(&server).await;
    assert_eq!(c.ask("PING\n").await, "PONG\n");
    assert_eq!(c.ask("PING\r\n").await, "PONG\n");
    assert_eq!(c.ask("JUMP\n").await, "ERR unknown-command\n");
    assert_eq!(c.ask("PRESS abc\n").await, "ERR bad-arg\n");
    let long = format!("{}\n", "X".repeat(5000));
    assert_eq!(c.ask(&long).await, "ERR unknown-command\n");
    assert_eq!(c.ask("PING\n").await, "PONG\n");
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn press_regulates_in_realtime() {
    let server = server().await;
    let mut c = Client::connect(&server).await;
    assert_eq!(c.ask("PRESS 45\n").await, "OK\n");
    tokio::time::sleep(Duration::from_secs(3)).await;
    let status = c.ask("GET STATUS\n").await;
    assert!(status.starts_with("STATUS "), "{status:?}");
    assert_eq!(status_field(&status, "pressed"), "1");
    let rpm: f64 = status_field(&status, "rpm").parse().unwrap();
    assert!((rpm - 60.0).abs() <= 1.2, "rpm {rpm}");
    let t: f64 = status_field(&status, "t").parse().unwrap();
    assert!(
        (2.5..4.5).contains(&t),
        "sim clock {t} should track wall clock"
    );
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn each_client_gets_its_own_reply() {
    let server = server().await;
    let mut a = Client::connect(&server).await;
    let mut b = Client::connect(&server).await;
    a.send("GET STATUS\n").await;
    b.send("GET STATUS\n").await;
    assert!(a.line().await.starts_with("STATUS "));
    assert!(b.line().await.starts_with("STATUS "));
    // Nothing else is pending for either.
    assert_eq!(a.ask("PING\n").await, "PONG\n");
    assert_eq!(b.ask("PING\n").await, "PONG\n");
    server.shutdown().await.unwrap();
}

async fn frames(c: &mut Client, n: usize) -> Vec<String> {
    let mut out = Vec::new();
    while out.len() < n {
        let line = c.line().await;
        assert!(line.starts_with("T "), "{line:?}");
        out.push(line);
    }
    out
}

#[tokio::test(flavor = "multi_thread")]
async fn streaming_clients_see_identical_frames() {
    let server = server().await;
    let mut a = Client::connect(&server).await;
    let mut b = Client::connect(&server).await;
    a.send("PRESS 45\n").await;
    assert_eq!(a.line().await, "OK\n");
    assert_eq!(a.ask("STREAM ON\n").await, "OK\n");
    assert_eq!(b.ask("STREAM ON\n").await, "OK\n");
    let fa = frames(&mut a, 12).await;
    let fb = frames(&mut b, 12).await;
    // Subscriptions started at slightly different times; compare the overlap.
    let common: Vec<_> = fa.iter().filter(|f| fb.contains(f)).collect();
    assert!(common.len() >= 8, "a={fa:?} b={fb:?}");
    let times: Vec<f64> = fa
        .iter()
        .map(|f| f.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    for w in times.windows(2) {
        assert!(
            (w[1] - w[0] - 0.05).abs() < 1e-6,
            "frames every 50 ms of sim time: {times:?}"
        );
    }

    a.send("STREAM OFF\n").await;
    // Frames already in flight may precede the reply.
    loop {
        let line = a.line().await;
        if !line.starts_with("T ") {
            assert_eq!(line, "OK\n");
            break;
        }
    }
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn websocket_speaks_the_same_protocol() {
    let server = server().await;
    let url = format!("ws://{}/ws", server.http_addr());
    let (mut ws, _) = tokio_tungstenite::connect_async(url).await.unwrap();
    ws.send(Message::Text("PING\n".into())).await.unwrap();
    let reply = timeout(Duration::from_secs(5), ws.next())
        .await
        .unwrap()
        .unwrap()
        .unwrap();
    assert_eq!(reply, Message::Text("PONG\n".into()));
    ws.send(Message::Text("PRESS 45\nGET STATUS\n".into()))
        .await
        .unwrap();
    let ok = ws.next().await.unwrap().unwrap();
    assert_eq!(ok, Message::Text("OK\n".into()));
    let status = ws.next().await.unwrap().unwrap().into_text().unwrap();
    assert!(status.starts_with("STATUS "), "{status:?}");
    ws.send(Message::Text("STREAM ON".into())).await.unwrap();
    assert_eq!(
        ws.next().await.unwrap().unwrap(),
        Message::Text("OK\n".into())
    );
    let frame = timeout(Duration::from_secs(2), ws.next())
        .await
        .unwrap()
        .unwrap()
        .unwrap();
    assert!(frame.into_text().unwrap().starts_with("T "));
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn dashboard_is_served() {
    let server = server().await;
    let mut s = TcpStream::connect(server.http_addr()).await.unwrap();
    s.write_all(b"GET / HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut body = String::new();
    tokio::io::AsyncReadExt::read_to_string(&mut s, &mut body)
        .await
        .unwrap();
    assert!(body.starts_with("HTTP/1.1 200"), "{body}");
    assert!(body.contains("/ws"));
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn port_in_use_is_reported() {
    let first = server().await;
    let mut opts = options();
    opts.port = first.tcp_addr().port();
    match start(SimConfig::default(), opts).await {
        Err(ServerError::PortInUse { port }) => assert_eq!(port, first.tcp_addr().port()),
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("second bind succeeded"),
    }
    first.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn bad_config_fails_before_binding() {
    let mut cfg = SimConfig::default();
    cfg.sim.tick_hz = 1500.0;
    assert!(matches!(
        start(cfg, options()).await,
        Err(ServerError::Sim(_))
    ));
}

#[tokio::test(flavor = "multi_thread")]
async fn shutdown_flushes_scope_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out").join("serve_trace.csv");
    let mut cfg = SimConfig::default();
    cfg.scope.signals = "rpm,duty,pressed_5v".into();
    cfg.scope.serve_history = 0.2;
    let mut opts = options();
    opts.trace_out = Some(path.clone());
    let server = start(cfg, opts).await.unwrap();
    tokio::time::sleep(Duration::from_millis(500)).await;
    let sim = server.shutdown().await.unwrap();
    let trace = simbench_core::scope::scope_import_csv(&path).unwrap();
    // Only the most recent window is kept.
    assert_eq!(trace.len(), 201);
    let last = *trace.t.last().unwrap();
    assert!(last <= sim.time() + 1e-9 && last > sim.time() - 0.002);
}
