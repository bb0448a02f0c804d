//! External agents speaking the prompt/answer grammar.
//!
//! Request: the prompt text (three lines), a blank line, then one line holding
//! the BEV image path (`-` when images are disabled). Response: one answer
//! block. Over stdio the block ends at the line containing `<STOP>` or at the
//! first blank line; over HTTP it is the whole response body of a POST.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::{build_prompt, parse_answer, STOP};
use crate::danger::DangerSet;
use crate::policy::{Driver, Mode, PolicyError, PolicyState};
use crate::sim::{render_bev, Action, Pose, Scene};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);
const TRAIL_LEN: usize = 10;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("agent did not answer within {0:?}")]
    Timeout(Duration),
    #[error("agent i/o: {0}")]
    Io(String),
    #[error("agent exited")]
    Closed,
    #[error("http: {0}")]
    Http(String),
    #[error("unsupported agent uri {0:?} (expected stdio:<command> or http://...)")]
    BadUri(String),
}

impl From<std::io::Error> for AgentError {
    fn from(e: std::io::Error) -> Self {
        AgentError::Io(e.to_string())
    }
}

/// One request/response round trip with an agent.
pub trait AgentTransport: Send {
    fn exchange(&mut self, request: &str, timeout: Duration) -> Result<String, AgentError>;
}

impl<F> AgentTransport for F
where
    F: FnMut(&str) -> String + Send,
{
    fn exchange(&mut self, request: &str, _timeout: Duration) -> Result<String, AgentError> {
        Ok(self(request))
    }
}

/// Child process reached through its stdin/stdout.
pub struct StdioTransport {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl StdioTransport {
    pub fn spawn(command: &str) -> Result<Self, AgentError> {
        let mut child =
            Command::new("sh").arg("-c").arg(command).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self { child, stdin, lines: rx })
    }
}

impl AgentTransport for StdioTransport {
    fn exchange(&mut self, request: &str, timeout: Duration) -> Result<String, AgentError> {
        self.stdin.write_all(request.as_bytes())?;
        if !request.ends_with('\n') {
            self.stdin.write_all(b"\n")?;
        }
        self.stdin.flush()?;

        let deadline = Instant::now() + timeout;
        let mut block: Vec<String> = Vec::new();
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(line) if line.trim().is_empty() => {
                    if !block.is_empty() {
                        break;
                    }
                }
                Ok(line) => {
                    let done = line.contains(STOP);
                    block.push(line);
                    if done {
                        break;
                    }
                }
                Err(RecvTimeoutError::Timeout) => return Err(AgentError::Timeout(timeout)),
                Err(RecvTimeoutError::Disconnected) => return Err(AgentError::Closed),
            }
        }
        Ok(block.join("\n"))
    }
}

impl Drop for StdioTransport {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Plain-HTTP endpoint: the request is POSTed, the body is the answer.
pub struct HttpTransport {
    url: String,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>) -> Self {
        Self { url: url.into() }
    }
}

impl AgentTransport for HttpTransport {
    fn exchange(&mut self, request: &str, timeout: Duration) -> Result<String, AgentError> {
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(true).build().into();
        let mut response =
            agent.post(&self.url).content_type("text/plain; charset=utf-8").send(request).map_err(|e| match e {
                ureq::Error::Timeout(_) => AgentError::Timeout(timeout),
                other => AgentError::Http(other.to_string()),
            })?;
        response.body_mut().read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(_) => AgentError::Timeout(timeout),
            other => AgentError::Http(other.to_string()),
        })
    }
}

/// Open a transport from `stdio:<command>` or `http://host[:port]/path`.
pub fn connect(uri: &str) -> Result<Box<dyn AgentTransport>, AgentError> {
    if let Some(cmd) = uri.strip_prefix("stdio:") {
        Ok(Box::new(StdioTransport::spawn(cmd)?))
    } else if uri.starts_with("http://") {
        Ok(Box::new(HttpTransport::new(uri)))
    } else {
        Err(AgentError::BadUri(uri.to_string()))
    }
}

/// Full request text for one frame.
pub fn request_text(prompt: &str, image_path: &str) -> String {
    format!("{prompt}\n\n{image_path}\n")
}

/// Drives the ego with an external agent; its first answered action is used.
pub struct AgentDriver {
    transport: Box<dyn AgentTransport>,
    state: PolicyState,
    seed: u64,
    timeout: Duration,
    image_dir: Option<PathBuf>,
    trail: VecDeque<Pose>,
    fallbacks: usize,
}

impl AgentDriver {
    /// `persona` selects the personalized instruction sent to the agent.
    pub fn new(transport: Box<dyn AgentTransport>, persona: Mode, seed: u64) -> Self {
        Self {
            transport,
            state: PolicyState::new(persona),
            seed,
            timeout: DEFAULT_TIMEOUT,
            image_dir: None,
            trail: VecDeque::new(),
            fallbacks: 0,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Render a BEV PNG per frame under `dir` and send its path.
    pub fn with_images(mut self, dir: PathBuf) -> Self {
        self.image_dir = Some(dir);
        self
    }

    fn image_path(&mut self, scene: &Scene) -> Result<String, PolicyError> {
        let Some(dir) = &self.image_dir else {
            return Ok("-".to_string());
        };
        let dir = dir.join(format!("seed-{:04}", self.seed));
        std::fs::create_dir_all(&dir).map_err(|e| PolicyError::Agent(e.to_string()))?;
        let path = dir.join(format!("frame-{:04}.png", scene.frame));
        let history: Vec<Pose> = self.trail.iter().copied().collect();
        render_bev(scene, &history).save_png(&path).map_err(|e| PolicyError::Agent(e.to_string()))?;
        Ok(path.display().to_string())
    }
}

impl Driver for AgentDriver {
    fn act(&mut self, scene: &Scene, _danger: &DangerSet) -> Result<Action, PolicyError> {
        self.state.observe(scene);
        let prompt = build_prompt(self.state.mode, &self.state.queue, self.seed, scene.frame)
            .map_err(|e| PolicyError::Agent(e.to_string()))?;
        let image = self.image_path(scene)?;
        self.trail.push_front(scene.ego.pose());
        self.trail.truncate(TRAIL_LEN);

        let request = request_text(&prompt.text(), &image);
        let response =
            self.transport.exchange(&request, self.timeout).map_err(|e| PolicyError::Agent(e.to_string()))?;
        let action = match parse_answer(&response) {
            Ok(answer) => answer.first_action(),
            Err(e) => {
                self.fallbacks += 1;
                log::warn!("frame {}: unusable agent answer ({e}); applying KEEP", scene.frame);
                Action::Keep
            }
        };
        self.state.record(action);
        Ok(action)
    }

    fn fallbacks(&self) -> usize {
        self.fallbacks
    }
}
