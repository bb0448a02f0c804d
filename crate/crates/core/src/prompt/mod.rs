//! Text interface: prompt construction, scene descriptions and the answer
//! grammar shared with external agents.
//!
//! Answer grammar, with single spaces between parts:
//!
//! ```text
//! <description> <keep> is <K>; <left> is <L>; <right> is <R>; <faster> is <F>; <slower> is <S>. <a0> <a1> ... <a10> <STOP>
//! ```

pub mod agent;
pub mod bank;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::danger::{DangerGeometry, DangerLevel, DangerSet};
use crate::policy::{EgoStateQueue, Mode};
use crate::sim::{Action, Scene};

/// Number of actions in an answer: the current frame plus ten future frames.
pub const ANSWER_ACTIONS: usize = 11;
pub const STOP: &str = "<STOP>";
/// How far ahead a vehicle counts as "the vehicle ahead" in descriptions, m.
const LOOKAHEAD: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("ego state queue is empty")]
    EmptyQueue,
    #[error("grammar error at byte {offset}: {message}")]
    Grammar { offset: usize, message: String },
    #[error("answer has no <STOP> terminator")]
    MissingStop,
}

fn grammar(offset: usize, message: impl Into<String>) -> CodecError {
    CodecError::Grammar { offset, message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub personalize: String,
    pub ego_state: String,
}

impl PromptBundle {
    /// System, personalize and ego-state parts, one per line.
    pub fn text(&self) -> String {
        format!("{}\n{}\n{}", self.system, self.personalize, self.ego_state)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerBundle {
    pub description: String,
    pub danger: DangerSet,
    pub actions: Vec<Action>,
}

impl AnswerBundle {
    pub fn first_action(&self) -> Action {
        self.actions.first().copied().unwrap_or(Action::Keep)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Indices into the environment, legend and notice banks for `(seed, frame)`.
pub fn variant_indices(seed: u64, frame: u32) -> [usize; 3] {
    let h = splitmix64(seed ^ splitmix64(u64::from(frame)));
    let n = bank::ENVIRONMENT.len() as u64;
    [(h % n) as usize, ((h / n) % n) as usize, ((h / (n * n)) % n) as usize]
}

/// `(v, x, y)` with two decimals.
pub fn format_ego_triple(v: f64, x: f64, y: f64) -> String {
    format!("({v:.2}, {x:.2}, {y:.2})")
}

pub fn render_ego_state(queue: &EgoStateQueue) -> String {
    let triples: Vec<String> = queue.iter().map(|s| format_ego_triple(s.v, s.x, s.y)).collect();
    format!("The ego states (v, x, y) from the current frame backwards are: {}.", triples.join(", "))
}

pub fn build_prompt(mode: Mode, queue: &EgoStateQueue, seed: u64, frame: u32) -> Result<PromptBundle, CodecError> {
    if queue.is_empty() {
        return Err(CodecError::EmptyQueue);
    }
    let [e, l, n] = variant_indices(seed, frame);
    Ok(PromptBundle {
        system: format!("{} {} {}", bank::ENVIRONMENT[e], bank::LEGEND[l], bank::NOTICE[n]),
        personalize: bank::instruction(mode).to_string(),
        ego_state: render_ego_state(queue),
    })
}

struct Nearby {
    gap: f64,
    closing: f64,
}

/// Closest vehicle ahead whose center lies within half a lane of `lateral`.
fn nearest_ahead(scene: &Scene, lateral: f64) -> Option<Nearby> {
    let cfg = &scene.config;
    let ego = &scene.ego;
    scene
        .others
        .iter()
        .filter(|o| (o.y - lateral).abs() < cfg.lane_width / 2.0)
        .filter(|o| o.x >= ego.x && o.x - ego.x - cfg.vehicle_length <= LOOKAHEAD)
        .map(|o| Nearby { gap: (o.x - ego.x - cfg.vehicle_length).max(0.0), closing: ego.v - o.v })
        .min_by(|a, b| a.gap.total_cmp(&b.gap))
}

fn front_sentence(front: Option<Nearby>, variant: usize) -> String {
    match front {
        None => ["There is no vehicle ahead in the ego lane.", "The ego lane ahead is clear."][variant % 2].to_string(),
        Some(f) => {
            let motion = if f.closing.abs() < 0.05 {
                "at the same speed".to_string()
            } else if f.closing > 0.0 {
                format!("closing at {:.1} m/s", f.closing)
            } else {
                format!("pulling away at {:.1} m/s", -f.closing)
            };
            match variant % 2 {
                0 => format!("There is a vehicle ahead in the ego lane, {:.0} m away, {motion}.", f.gap),
                _ => format!("A vehicle drives {:.0} m ahead in the ego lane, {motion}.", f.gap),
            }
        }
    }
}

fn side_sentence(scene: &Scene, side: Action, level: DangerLevel, variant: usize) -> String {
    let cfg = &scene.config;
    let ego = &scene.ego;
    let name = if side == Action::Left { "left" } else { "right" };
    let edge = match side {
        Action::Left => ego.lane == 0,
        _ => ego.lane + 1 >= cfg.lanes,
    };
    if edge {
        return format!("The ego car is in the {name}most lane, so there is no lane to its {name}.");
    }
    let g = DangerGeometry::from(cfg);
    let sign = if side == Action::Left { -1.0 } else { 1.0 };
    let beside = scene.others.iter().any(|o| (o.y - ego.y) * sign > 0.0 && g.beside_ego(o.x - ego.x, o.y - ego.y));
    if beside {
        return [
            format!("A vehicle is driving beside the ego car in the {name} lane."),
            format!("The {name} lane is occupied right next to the ego car."),
        ][variant % 2]
            .clone();
    }
    let lateral = ego.y + sign * cfg.lane_width;
    match nearest_ahead(scene, lateral) {
        Some(f) => format!("In the {name} lane a vehicle is {:.0} m ahead.", f.gap),
        None if level == DangerLevel::ZERO => {
            [format!("The {name} lane is clear."), format!("Nothing occupies the {name} lane nearby.")][variant % 2]
                .clone()
        }
        None => format!("The {name} lane has traffic approaching from behind."),
    }
}

/// Short templated description of the ego's surroundings.
pub fn describe_scene(scene: &Scene, danger: &DangerSet) -> String {
    let variant = scene.frame as usize;
    let front = nearest_ahead(scene, scene.ego.y);
    [
        front_sentence(front, variant),
        side_sentence(scene, Action::Left, danger.left, variant),
        side_sentence(scene, Action::Right, danger.right, variant / 2),
    ]
    .join(" ")
}

pub fn encode_answer(bundle: &AnswerBundle) -> String {
    let actions: Vec<&str> = bundle.actions.iter().map(|a| a.token()).collect();
    format!("{} {} {} {STOP}", bundle.description, bundle.danger.clause(), actions.join(" "))
}

const DANGER_START: &str = "<keep> is <";

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn expect(&mut self, literal: &str) -> Result<(), CodecError> {
        if self.text[self.pos..].starts_with(literal) {
            self.pos += literal.len();
            Ok(())
        } else {
            Err(grammar(self.pos, format!("expected {literal:?}")))
        }
    }

    fn level(&mut self) -> Result<DangerLevel, CodecError> {
        let rest = &self.text[self.pos..];
        let end = rest
            .find('>')
            .filter(|_| rest.starts_with('<'))
            .ok_or_else(|| grammar(self.pos, "expected a danger level token"))?;
        let token = &rest[..=end];
        let level = DangerLevel::from_token(token)
            .ok_or_else(|| grammar(self.pos, format!("danger level {token} out of range")))?;
        self.pos += token.len();
        Ok(level)
    }
}

/// Inverse of [`encode_answer`]; tolerant of surrounding whitespace.
pub fn parse_answer(text: &str) -> Result<AnswerBundle, CodecError> {
    let stop = text.rfind(STOP).ok_or(CodecError::MissingStop)?;
    let tail = stop + STOP.len();
    if let Some(off) = text[tail..].find(|c: char| !c.is_whitespace()) {
        return Err(grammar(tail + off, "trailing text after <STOP>"));
    }

    let start = text.find(DANGER_START).ok_or_else(|| grammar(0, "missing danger clause"))?;
    let description = text[..start].trim().to_string();

    let mut cur = Cursor { text, pos: start };
    let mut danger = DangerSet::default();
    for (i, action) in DangerSet::ORDER.iter().enumerate() {
        if i > 0 {
            cur.expect("; ")?;
        }
        cur.expect(action.token())?;
        cur.expect(" is ")?;
        *danger.slot(*action) = cur.level()?;
    }
    cur.expect(".")?;

    let body = &text[cur.pos..stop];
    let mut actions = Vec::with_capacity(ANSWER_ACTIONS);
    let mut offset = cur.pos;
    for token in body.split_whitespace() {
        let at = offset + text[offset..].find(token).unwrap_or(0);
        let action = Action::from_token(token).ok_or_else(|| grammar(at, format!("unknown action token {token:?}")))?;
        actions.push(action);
        offset = at + token.len();
    }
    if actions.len() != ANSWER_ACTIONS {
        return Err(grammar(stop, format!("expected {ANSWER_ACTIONS} action tokens, found {}", actions.len())));
    }
    Ok(AnswerBundle { description, danger, actions })
}
