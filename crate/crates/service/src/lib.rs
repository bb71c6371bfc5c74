//! Websocket service around a live simulation.
//!
//! A dedicated thread runs the physics loop paced to wall-clock time and
//! drains a command queue once per tick. Snapshots are serialized once and
//! fanned out to every connection through a broadcast channel.
//!
//! ```no_run
//! # async fn demo() -> Result<(), frictionlab_service::ServiceError> {
//! use frictionlab_core::session::ScenarioConfig;
//! use frictionlab_service::{serve, EngineOptions};
//!
//! let handle = serve(ScenarioConfig::default(), "127.0.0.1:8787", EngineOptions::default()).await?;
//! println!("ws://{}/ws", handle.local_addr());
//! handle.shutdown().await;
//! # Ok(())
//! # }
//! ```

pub mod engine;
pub mod protocol;

use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use frictionlab_core::session::ScenarioConfig;
use frictionlab_core::ScenarioError;
use thiserror::Error;
use tokio::net::{TcpListener, ToSocketAddrs};
use tokio::sync::{broadcast, mpsc, oneshot};

pub use engine::{CommandError, Engine, EngineOptions, DEFAULT_BROADCAST_HZ, PARAM_KEYS};
pub use protocol::{Ack, ClientMessage, Command, ErrorKind, ErrorReply, ServerMessage, StateSnapshot};

pub const DEFAULT_ADDR: &str = "127.0.0.1:8787";

/// How far the loop may lag wall-clock time before it skips ahead.
const MAX_CATCH_UP: Duration = Duration::from_millis(100);

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

struct Request {
    command: Command,
    reply: oneshot::Sender<ServerMessage>,
}

#[derive(Clone)]
struct AppState {
    commands: mpsc::UnboundedSender<Request>,
    snapshots: broadcast::Sender<Arc<str>>,
}

/// A running service. Dropping it without calling [`shutdown`](Self::shutdown)
/// leaves the server running in the background.
pub struct ServiceHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    loop_thread: Option<thread::JoinHandle<()>>,
    server: tokio::task::JoinHandle<()>,
    shutdown_tx: Option<oneshot::Sender<()>>,
}

impl ServiceHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting connections and ends the simulation loop.
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown_tx.take() {
            let _ = tx.send(());
        }
        self.stop.store(true, Ordering::Relaxed);
        let _ = (&mut self.server).await;
        if let Some(thread) = self.loop_thread.take() {
            let _ = tokio::task::spawn_blocking(move || thread.join()).await;
        }
    }
}

/// Binds `addr`, starts the simulation loop and serves `/ws`.
pub async fn serve(
    config: ScenarioConfig,
    addr: impl ToSocketAddrs + std::fmt::Display,
    options: EngineOptions,
) -> Result<ServiceHandle, ServiceError> {
    let engine = Engine::new(config, options)?;
    let listener = TcpListener::bind(&addr).await.map_err(|source| ServiceError::Bind {
        addr: addr.to_string(),
        source,
    })?;
    let local = listener.local_addr().map_err(|source| ServiceError::Bind {
        addr: addr.to_string(),
        source,
    })?;

    let (command_tx, command_rx) = mpsc::unbounded_channel();
    let (snapshot_tx, _) = broadcast::channel(64);
    let stop = Arc::new(AtomicBool::new(false));

    let loop_thread = {
        let snapshots = snapshot_tx.clone();
        let stop = stop.clone();
        thread::Builder::new()
            .name("sim-loop".into())
            .spawn(move || run_loop(engine, command_rx, snapshots, stop))
            .expect("spawn simulation thread")
    };

    let app = Router::new().route("/ws", get(upgrade)).with_state(AppState {
        commands: command_tx,
        snapshots: snapshot_tx,
    });
    let (shutdown_tx, shutdown_rx) = oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        let result = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = shutdown_rx.await;
            })
            .await;
        if let Err(e) = result {
            tracing::error!("server stopped: {e}");
        }
    });

    Ok(ServiceHandle {
        addr: local,
        stop,
        loop_thread: Some(loop_thread),
        server,
        shutdown_tx: Some(shutdown_tx),
    })
}

fn run_loop(
    mut engine: Engine,
    mut commands: mpsc::UnboundedReceiver<Request>,
    snapshots: broadcast::Sender<Arc<str>>,
    stop: Arc<AtomicBool>,
) {
    // wall-clock instant that corresponds to simulated time zero
    let mut origin = Instant::now();
    while !stop.load(Ordering::Relaxed) {
        drain(&mut engine, &mut commands);
        let due = origin + Duration::from_secs_f64(engine.time() + engine.dt());
        let now = Instant::now();
        if due > now {
            thread::sleep((due - now).min(Duration::from_millis(1)));
            continue;
        }
        if now - due > MAX_CATCH_UP {
            tracing::warn!("simulation loop fell behind by {:?}; skipping ahead", now - due);
            origin += now - due;
        }
        if let Some(snapshot) = engine.tick() {
            let json: Arc<str> = ServerMessage::State(snapshot).to_json().into();
            // no receivers is fine: nobody is connected
            let _ = snapshots.send(json);
        }
    }
}

fn drain(engine: &mut Engine, commands: &mut mpsc::UnboundedReceiver<Request>) {
    while let Ok(Request { command, reply }) = commands.try_recv() {
        let name = command.name();
        let message = match engine.apply(command) {
            Ok(ack) => ServerMessage::Ack(ack),
            Err(e) => ServerMessage::Error(e.reply(name)),
        };
        let _ = reply.send(message);
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn client(socket: WebSocket, state: AppState) {
    let (mut sink, mut stream) = socket.split();
    let mut snapshots = state.snapshots.subscribe();
    let (reply_tx, mut reply_rx) = mpsc::unbounded_channel::<String>();

    let reader = async move {
        while let Some(Ok(message)) = stream.next().await {
            let text = match message {
                Message::Text(text) => text,
                Message::Close(_) => break,
                _ => continue,
            };
            let reply = match serde_json::from_str::<ClientMessage>(text.as_str()) {
                Ok(ClientMessage::Cmd(command)) => {
                    let (tx, rx) = oneshot::channel();
                    if state.commands.send(Request { command, reply: tx }).is_err() {
                        break;
                    }
                    match rx.await {
                        Ok(reply) => reply,
                        Err(_) => break,
                    }
                }
                Err(e) => ServerMessage::Error(ErrorReply {
                    error: ErrorKind::Malformed,
                    cmd: None,
                    field: None,
                    message: e.to_string(),
                }),
            };
            if reply_tx.send(reply.to_json()).is_err() {
                break;
            }
        }
    };

    let writer = async move {
        loop {
            let text: String = tokio::select! {
                snapshot = snapshots.recv() => match snapshot {
                    Ok(json) => json.to_string(),
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => break,
                },
                reply = reply_rx.recv() => match reply {
                    Some(json) => json,
                    None => break,
                },
            };
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    };

    tokio::select! {
        _ = reader => {}
        _ = writer => {}
    }
}
