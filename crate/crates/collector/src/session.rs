//! Per-connection session state machine, free of any I/O.

use serde::{Deserialize, Serialize};

use highway_core::dataset::EVAL_SEEDS;
use highway_core::sim::{spawn_scene, step, EndReason};
use highway_core::{estimate_danger, Action, DangerSet, EpisodeTrace, FrameRecord, Scene, SimConfig};

/// Rating options shown after a drive, for scores 1, 2 and 3.
pub const SCORE_OPTIONS: [&str; 3] =
    ["I just follow the car", "I occasionally take some surpass actions", "I want to get ahead of all other cars"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientMsg {
    Start {
        seed: u64,
        #[serde(default = "default_lanes")]
        lanes: usize,
        #[serde(default = "default_density")]
        density: f64,
        #[serde(default = "default_true")]
        show_danger: bool,
    },
    Action {
        frame: u32,
        token: String,
    },
    Score {
        value: u8,
    },
    Quit,
}

fn default_lanes() -> usize {
    SimConfig::default().lanes
}

fn default_density() -> f64 {
    SimConfig::default().density
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMsg {
    /// The scene after `index` steps.
    Frame {
        index: u32,
        scene: Scene,
        /// Omitted when the session hides danger levels.
        danger: Option<DangerSet>,
        done: bool,
        reason: EndReason,
    },
    Ack {
        note: String,
    },
    /// Sent once the drive is over; `options[i]` is the text for score `i + 1`.
    Scoring {
        options: [String; 3],
    },
    Error {
        message: String,
    },
}

impl ServerMsg {
    fn ack(note: impl Into<String>) -> Self {
        ServerMsg::Ack { note: note.into() }
    }

    fn error(message: impl Into<String>) -> Self {
        ServerMsg::Error { message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Lobby,
    Running,
    Scoring,
    Closed,
}

/// Work the caller has to carry out for the session.
#[derive(Debug, Clone, PartialEq)]
pub enum Persist {
    /// Drive finished; store the log.
    Finished(EpisodeTrace),
    /// Drive finished and was rated; add it to the dataset.
    Scored(EpisodeTrace, u8),
    /// Connection ended mid-drive; keep the partial log without a score.
    Truncated(EpisodeTrace),
}

#[derive(Debug, Default, PartialEq)]
pub struct Outcome {
    pub replies: Vec<ServerMsg>,
    pub persist: Option<Persist>,
}

impl Outcome {
    fn reply(msg: ServerMsg) -> Self {
        Self { replies: vec![msg], persist: None }
    }
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    phase: Phase,
    show_danger: bool,
    scene: Option<Scene>,
    records: Vec<FrameRecord>,
    pending: Option<Action>,
    /// Index of the last frame message sent.
    streamed: u32,
    trace: Option<EpisodeTrace>,
}

impl Session {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            phase: Phase::Lobby,
            show_danger: true,
            scene: None,
            records: vec![],
            pending: None,
            streamed: 0,
            trace: None,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn show_danger(&self) -> bool {
        self.show_danger
    }

    pub fn handle(&mut self, msg: ClientMsg) -> Outcome {
        match msg {
            ClientMsg::Start { seed, lanes, density, show_danger } => self.start(seed, lanes, density, show_danger),
            ClientMsg::Action { frame, token } => self.action(frame, &token),
            ClientMsg::Score { value } => self.score(value),
            ClientMsg::Quit => self.quit(),
        }
    }

    fn start(&mut self, seed: u64, lanes: usize, density: f64, show_danger: bool) -> Outcome {
        if self.phase != Phase::Lobby {
            return Outcome::reply(ServerMsg::error("session already started"));
        }
        if EVAL_SEEDS.contains(&seed) {
            return Outcome::reply(ServerMsg::error(format!(
                "seed {seed} is reserved for evaluation; pick one outside {}..{}",
                EVAL_SEEDS.start, EVAL_SEEDS.end
            )));
        }
        let config = SimConfig { seed, lanes, density, ..SimConfig::default() };
        match spawn_scene(&config) {
            Ok(scene) => {
                self.scene = Some(scene);
                self.show_danger = show_danger;
                self.phase = Phase::Running;
                Outcome::reply(ServerMsg::ack(format!("session {} started", self.id)))
            }
            Err(e) => Outcome::reply(ServerMsg::error(e.to_string())),
        }
    }

    fn action(&mut self, frame: u32, token: &str) -> Outcome {
        if self.phase != Phase::Running {
            return Outcome::reply(ServerMsg::error("no drive in progress"));
        }
        let Ok(action) = token.parse::<Action>() else {
            return Outcome::reply(ServerMsg::error(format!("unknown action {token:?}")));
        };
        if frame != self.streamed {
            return Outcome::reply(ServerMsg::ack(format!(
                "stale action for frame {frame} dropped (current {})",
                self.streamed
            )));
        }
        if self.pending.is_some() {
            return Outcome::reply(ServerMsg::ack(format!("second action for frame {frame} dropped")));
        }
        self.pending = Some(action);
        Outcome::default()
    }

    fn score(&mut self, value: u8) -> Outcome {
        if self.phase != Phase::Scoring {
            return Outcome::reply(ServerMsg::error("nothing to score yet"));
        }
        if !(1..=3).contains(&value) {
            return Outcome::reply(ServerMsg::error(format!("score {value} is outside 1..3")));
        }
        self.phase = Phase::Closed;
        let trace = self.trace.take().expect("scoring sessions hold a trace");
        Outcome {
            replies: vec![ServerMsg::ack(format!("score {value} recorded"))],
            persist: Some(Persist::Scored(trace, value)),
        }
    }

    fn quit(&mut self) -> Outcome {
        let persist = self.disconnect();
        Outcome { replies: vec![ServerMsg::ack("bye")], persist }
    }

    /// Close the session; returns the partial log of an interrupted drive.
    pub fn disconnect(&mut self) -> Option<Persist> {
        let was = self.phase;
        self.phase = Phase::Closed;
        match was {
            Phase::Running if !self.records.is_empty() => Some(Persist::Truncated(self.partial_trace())),
            _ => None,
        }
    }

    fn partial_trace(&self) -> EpisodeTrace {
        let scene = self.scene.as_ref().expect("running sessions hold a scene");
        EpisodeTrace {
            seed: scene.config.seed,
            config: scene.config.clone(),
            records: self.records.clone(),
            final_ego: scene.ego.clone(),
            reason: scene.status,
            fallbacks: 0,
        }
    }

    /// Advance one frame with the pending action (KEEP when there is none).
    pub fn tick(&mut self) -> Outcome {
        if self.phase != Phase::Running {
            return Outcome::default();
        }
        let scene = self.scene.take().expect("running sessions hold a scene");
        let decided = self.pending.take().unwrap_or(Action::Keep);
        let danger = estimate_danger(&scene);
        let result = step(&scene, decided).expect("running scene is not terminal");
        self.records.push(FrameRecord::new(&scene, danger, decided, result.executed, result.collided));
        self.scene = Some(result.next);
        self.streamed += 1;

        let next = self.scene.as_ref().expect("just stored");
        let frame = ServerMsg::Frame {
            index: self.streamed,
            scene: next.clone(),
            danger: self.show_danger.then(|| estimate_danger(next)),
            done: result.done,
            reason: result.reason,
        };
        if !result.done {
            return Outcome::reply(frame);
        }
        let trace = self.partial_trace();
        self.trace = Some(trace.clone());
        self.phase = Phase::Scoring;
        Outcome {
            replies: vec![frame, ServerMsg::Scoring { options: SCORE_OPTIONS.map(String::from) }],
            persist: Some(Persist::Finished(trace)),
        }
    }
}
