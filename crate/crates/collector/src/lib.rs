//! Live human driving sessions over a websocket.
//!
//! Each connection to `/ws` runs one [`Session`]. Frames are streamed at the
//! simulator rate; finished drives are stored under `sessions/` and, once
//! rated, appended to the human shard of the dataset. All disk writes go
//! through one writer task so concurrent sessions never interleave appends.

pub mod session;

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};
use tokio::time::{interval_at, Instant, MissedTickBehavior};
use tower_http::services::ServeDir;

use highway_core::dataset::{ingest_human_session, save_session_log};

pub use session::{ClientMsg, Outcome, Persist, Phase, ServerMsg, Session, SCORE_OPTIONS};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Dataset root receiving session logs and the human shard.
    pub data_dir: PathBuf,
    /// Browser console assets served at `/`.
    pub static_dir: Option<PathBuf>,
    pub frame_interval: Duration,
}

impl ServerConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self { data_dir: data_dir.into(), static_dir: None, frame_interval: Duration::from_millis(100) }
    }
}

struct WriteJob {
    session_id: String,
    persist: Persist,
    done: oneshot::Sender<Result<String, String>>,
}

#[derive(Clone)]
struct AppState {
    writer: mpsc::Sender<WriteJob>,
    frame_interval: Duration,
    counter: Arc<AtomicU64>,
}

fn write_blocking(root: &std::path::Path, id: &str, persist: Persist) -> Result<String, String> {
    match persist {
        Persist::Finished(trace) => save_session_log(root, id, &trace)
            .map(|p| format!("session log saved to {}", p.display()))
            .map_err(|e| e.to_string()),
        Persist::Truncated(trace) => save_session_log(root, &format!("{id}-truncated"), &trace)
            .map(|p| format!("partial session log saved to {}", p.display()))
            .map_err(|e| e.to_string()),
        Persist::Scored(trace, score) => ingest_human_session(root, id, &trace, Some(score))
            .map(|n| format!("{n} samples added"))
            .map_err(|e| e.to_string()),
    }
}

fn spawn_writer(root: PathBuf) -> mpsc::Sender<WriteJob> {
    let (tx, mut rx) = mpsc::channel::<WriteJob>(64);
    tokio::spawn(async move {
        while let Some(job) = rx.recv().await {
            let WriteJob { session_id, persist, done } = job;
            let root = root.clone();
            let id = session_id.clone();
            let result = tokio::task::spawn_blocking(move || write_blocking(&root, &id, persist))
                .await
                .unwrap_or_else(|e| Err(e.to_string()));
            if let Err(e) = &result {
                log::error!("session {session_id}: {e}");
            }
            let _ = done.send(result);
        }
    });
    tx
}

/// Routes: `/ws` for sessions, static assets at `/` when configured.
pub fn router(cfg: &ServerConfig) -> Router {
    let state = AppState {
        writer: spawn_writer(cfg.data_dir.clone()),
        frame_interval: cfg.frame_interval,
        counter: Arc::new(AtomicU64::new(0)),
    };
    let app = Router::new().route("/ws", get(ws_handler)).with_state(state);
    match &cfg.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

pub async fn serve(listener: TcpListener, cfg: ServerConfig) -> std::io::Result<()> {
    std::fs::create_dir_all(&cfg.data_dir)?;
    log::info!("collector listening on {}", listener.local_addr()?);
    axum::serve(listener, router(&cfg)).await
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| run_connection(socket, state))
}

fn session_id(counter: &AtomicU64) -> String {
    let ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis());
    format!("{ms}-{}", counter.fetch_add(1, Ordering::Relaxed))
}

async fn send(socket: &mut WebSocket, msg: &ServerMsg) -> bool {
    let text = serde_json::to_string(msg).expect("server messages serialize");
    socket.send(Message::Text(text.into())).await.is_ok()
}

/// Hand a job to the writer; waits for the result when `wait` is set.
async fn persist(state: &AppState, id: &str, p: Persist, wait: bool) -> Option<Result<String, String>> {
    let (tx, rx) = oneshot::channel();
    let job = WriteJob { session_id: id.to_string(), persist: p, done: tx };
    if state.writer.send(job).await.is_err() {
        return Some(Err("writer stopped".into()));
    }
    if wait {
        Some(rx.await.unwrap_or_else(|_| Err("writer stopped".into())))
    } else {
        None
    }
}

/// Send replies and carry out persistence. Returns false once the socket is gone.
async fn deliver(socket: &mut WebSocket, state: &AppState, session: &Session, out: Outcome) -> bool {
    for msg in &out.replies {
        if !send(socket, msg).await {
            return false;
        }
    }
    match out.persist {
        Some(p @ Persist::Scored(..)) => {
            let reply = match persist(state, &session.id, p, true).await {
                Some(Ok(note)) => ServerMsg::Ack { note },
                Some(Err(message)) => ServerMsg::Error { message },
                None => return true,
            };
            send(socket, &reply).await
        }
        Some(p) => {
            persist(state, &session.id, p, false).await;
            true
        }
        None => true,
    }
}

async fn run_connection(mut socket: WebSocket, state: AppState) {
    let mut session = Session::new(session_id(&state.counter));
    let period = state.frame_interval;
    let mut ticker = interval_at(Instant::now() + period, period);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);

    loop {
        tokio::select! {
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let out = match serde_json::from_str::<ClientMsg>(&text) {
                    Ok(msg) => {
                        let starting = matches!(msg, ClientMsg::Start { .. }) && session.phase() == Phase::Lobby;
                        let out = session.handle(msg);
                        if starting && session.phase() == Phase::Running {
                            ticker.reset_after(period);
                        }
                        out
                    }
                    Err(e) => Outcome { replies: vec![ServerMsg::Error { message: format!("bad message: {e}") }], persist: None },
                };
                if !deliver(&mut socket, &state, &session, out).await || session.phase() == Phase::Closed {
                    break;
                }
            }
            _ = ticker.tick(), if session.phase() == Phase::Running => {
                let out = session.tick();
                if !deliver(&mut socket, &state, &session, out).await {
                    break;
                }
            }
        }
    }
    if let Some(p) = session.disconnect() {
        persist(&state, &session.id, p, false).await;
    }
}
