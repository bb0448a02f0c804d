//! Deterministic seeded highway world.
//!
//! Coordinates: `x` grows forward along the road, `y` grows to the right.
//! Lane 0 is the leftmost lane and its center sits at `y = 0`; lane `k` is
//! centered at `k * lane_width`. A vehicle's `lane` is the lane it is in or,
//! during a lane change, the lane it is heading to; `y` then slides toward
//! that lane's center at a constant lateral rate.

mod render;
pub mod traffic;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use render::{render_bev, Pose, RasterImage, BEV_SIZE};

/// Proportional gain of the ego speed controller.
pub const EGO_SPEED_GAIN: f64 = 0.3;
/// Maximum ego longitudinal acceleration, m/s².
pub const EGO_MAX_ACCEL: f64 = 5.0;
/// Time to complete one lane change, s.
pub const LANE_CHANGE_TIME: f64 = 1.0;
/// Speed the ego starts with, m/s.
pub const EGO_START_SPEED: f64 = 25.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    ConfigInvalid(String),
    #[error("step called on a terminal scene (frame {0})")]
    StepAfterDone(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub lanes: usize,
    pub lane_width: f64,
    pub n_vehicles: usize,
    pub density: f64,
    pub v_max: f64,
    pub duration: f64,
    pub tick_hz: u32,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    pub speed_step: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            lanes: 4,
            lane_width: 4.0,
            n_vehicles: 30,
            density: 2.0,
            v_max: 30.0,
            duration: 30.0,
            tick_hz: 10,
            vehicle_length: 5.0,
            vehicle_width: 2.0,
            speed_step: 5.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    // the negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::ConfigInvalid(msg));
        if !(2..=8).contains(&self.lanes) {
            return bad(format!("lanes must be in [2, 8], got {}", self.lanes));
        }
        if self.tick_hz == 0 {
            return bad("tick_hz must be positive".into());
        }
        let frames = self.duration * f64::from(self.tick_hz);
        if !(self.duration > 0.0) || (frames - frames.round()).abs() > 1e-9 {
            return bad(format!("duration x tick_hz must be a positive integer, got {frames}"));
        }
        if !(self.speed_step > 0.0 && self.v_max > self.speed_step) {
            return bad("need v_max > speed_step > 0".into());
        }
        if self.n_vehicles == 0 {
            return bad("n_vehicles must include the ego".into());
        }
        if !(self.density > 0.0) || !self.density.is_finite() {
            return bad(format!("density must be positive, got {}", self.density));
        }
        if !(self.lane_width > 0.0 && self.vehicle_length > 0.0 && self.vehicle_width > 0.0) {
            return bad("geometry must be positive".into());
        }
        if self.vehicle_width >= self.lane_width {
            return bad("vehicle_width must be narrower than a lane".into());
        }
        Ok(())
    }

    pub fn total_frames(&self) -> u32 {
        (self.duration * f64::from(self.tick_hz)).round() as u32
    }

    pub fn dt(&self) -> f64 {
        1.0 / f64::from(self.tick_hz)
    }

    pub fn lane_center(&self, lane: usize) -> f64 {
        lane as f64 * self.lane_width
    }

    /// Lane whose center is closest to `y`, clamped to the road.
    pub fn nearest_lane(&self, y: f64) -> usize {
        let raw = (y / self.lane_width).round();
        raw.clamp(0.0, (self.lanes - 1) as f64) as usize
    }

    /// Lateral interval the vehicle centers must stay inside.
    pub fn road_bounds(&self) -> (f64, f64) {
        let half = self.lane_width / 2.0;
        (-half, self.lanes as f64 * self.lane_width - half)
    }

    /// Hash of everything but the seed; identifies a traffic setup across clips.
    pub fn config_hash(&self) -> String {
        let unseeded = self.with_seed(0);
        let bytes = serde_json::to_vec(&unseeded).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Snap a speed to the nearest multiple of `speed_step` inside `[0, v_max]`.
    pub fn snap_speed(&self, v: f64) -> f64 {
        let snapped = (v / self.speed_step).round() * self.speed_step;
        snapped.clamp(0.0, self.v_max)
    }

    /// Nominal longitudinal spacing between consecutive spawned vehicles.
    fn spawn_spacing(&self, speed: f64) -> f64 {
        (12.0 + speed) * (-5.0 / 40.0 * self.lanes as f64).exp() / self.density
    }
}

/// The five discrete meta-actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Left,
    Keep,
    Right,
    Faster,
    Slower,
}

impl Action {
    pub const ALL: [Action; 5] = [Action::Left, Action::Keep, Action::Right, Action::Faster, Action::Slower];

    pub fn token(self) -> &'static str {
        match self {
            Action::Left => "<left>",
            Action::Keep => "<keep>",
            Action::Right => "<right>",
            Action::Faster => "<faster>",
            Action::Slower => "<slower>",
        }
    }

    pub fn from_token(token: &str) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.token() == token)
    }

    pub fn is_lane_change(self) -> bool {
        matches!(self, Action::Left | Action::Right)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        let t = t.trim_start_matches('<').trim_end_matches('>');
        match t {
            "left" => Ok(Action::Left),
            "keep" => Ok(Action::Keep),
            "right" => Ok(Action::Right),
            "faster" => Ok(Action::Faster),
            "slower" => Ok(Action::Slower),
            _ => Err(format!("unknown action {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub lane: usize,
    pub target_speed: f64,
    pub is_ego: bool,
}

impl VehicleState {
    pub fn pose(&self) -> Pose {
        Pose { x: self.x, y: self.y }
    }

    /// True while sliding toward the center of `lane`.
    pub fn changing_lane(&self, config: &SimConfig) -> bool {
        (self.y - config.lane_center(self.lane)).abs() > 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EndReason {
    #[default]
    Running,
    Crash,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub frame: u32,
    pub t: f64,
    pub ego: VehicleState,
    pub others: Vec<VehicleState>,
    pub config: SimConfig,
    #[serde(default)]
    pub status: EndReason,
}

impl Scene {
    pub fn is_terminal(&self) -> bool {
        self.status != EndReason::Running
    }

    /// Ego first, then the others in id order.
    pub fn vehicles(&self) -> impl Iterator<Item = &VehicleState> {
        std::iter::once(&self.ego).chain(self.others.iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next: Scene,
    /// Action actually applied to the ego after edge-lane coercion.
    pub executed: Action,
    pub collided: bool,
    pub off_road: bool,
    pub done: bool,
    pub reason: EndReason,
}

/// Build the initial scene for `config.seed`.
///
/// The ego starts in lane `lanes / 2` at x = 0. A fifth of the traffic is laid
/// out behind it and the rest ahead, each vehicle advancing a cursor by the
/// nominal spacing times a uniform jitter and landing in a random lane.
pub fn spawn_scene(config: &SimConfig) -> Result<Scene, SimError> {
    config.validate()?;

    let min_headway = config.vehicle_length + traffic::IDM.min_gap;
    let mean_speed = 0.8 * config.v_max;
    let per_lane = config.spawn_spacing(mean_speed) * config.lanes as f64;
    if per_lane < min_headway {
        return Err(SimError::ConfigInvalid(format!(
            "density {} packs {} lanes at {per_lane:.2} m per lane, below the {min_headway:.2} m a vehicle needs",
            config.density, config.lanes
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let ego_lane = config.lanes / 2;
    let ego = VehicleState {
        id: 0,
        x: 0.0,
        y: config.lane_center(ego_lane),
        v: EGO_START_SPEED.min(config.v_max),
        lane: ego_lane,
        target_speed: EGO_START_SPEED.min(config.v_max),
        is_ego: true,
    };

    let n_others = config.n_vehicles - 1;
    let n_behind = n_others / 5;
    let mut front = vec![f64::NEG_INFINITY; config.lanes];
    let mut rear = vec![f64::INFINITY; config.lanes];
    front[ego_lane] = 0.0;
    rear[ego_lane] = 0.0;
    let (mut ahead_cursor, mut behind_cursor) = (0.0_f64, 0.0_f64);

    let mut others = Vec::with_capacity(n_others);
    for i in 0..n_others {
        let speed = config.snap_speed(rng.random_range(0.6 * config.v_max..=config.v_max));
        let lane = rng.random_range(0..config.lanes);
        let jitter = rng.random_range(0.5..1.5);
        let offset = config.spawn_spacing(speed) * jitter;
        let x = if i < n_behind {
            let x = (behind_cursor - offset).min(rear[lane] - min_headway);
            behind_cursor = x;
            rear[lane] = x;
            x
        } else {
            let x = (ahead_cursor + offset).max(front[lane] + min_headway);
            ahead_cursor = x;
            front[lane] = x;
            x
        };
        others.push(VehicleState {
            id: i as u32 + 1,
            x,
            y: config.lane_center(lane),
            v: speed,
            lane,
            target_speed: speed,
            is_ego: false,
        });
    }

    Ok(Scene { frame: 0, t: 0.0, ego, others, config: config.clone(), status: EndReason::Running })
}

/// Replace lane changes that would leave the road with KEEP.
pub fn coerce_action(scene: &Scene, action: Action) -> Action {
    match action {
        Action::Left if scene.ego.lane == 0 => Action::Keep,
        Action::Right if scene.ego.lane + 1 >= scene.config.lanes => Action::Keep,
        other => other,
    }
}

/// Advance the world by one tick with `ego_action` applied to the ego.
pub fn step(scene: &Scene, ego_action: Action) -> Result<StepResult, SimError> {
    if scene.is_terminal() {
        return Err(SimError::StepAfterDone(scene.frame));
    }
    let cfg = &scene.config;
    let dt = cfg.dt();
    let lateral_step = cfg.lane_width / LANE_CHANGE_TIME * dt;

    let executed = coerce_action(scene, ego_action);
    let controls = traffic::other_vehicle_control(scene);

    let mut ego = scene.ego.clone();
    match executed {
        Action::Faster => ego.target_speed = (ego.target_speed + cfg.speed_step).min(cfg.v_max),
        Action::Slower => ego.target_speed = (ego.target_speed - cfg.speed_step).max(0.0),
        Action::Left => ego.lane -= 1,
        Action::Right => ego.lane += 1,
        Action::Keep => {}
    }
    let max_dv = EGO_MAX_ACCEL * dt;
    let dv = (EGO_SPEED_GAIN * (ego.target_speed - ego.v)).clamp(-max_dv, max_dv);
    ego.v = (ego.v + dv).clamp(0.0, cfg.v_max);
    ego.x += ego.v * dt;
    slide_toward_lane(&mut ego, cfg, lateral_step);

    let mut others = scene.others.clone();
    for (vehicle, control) in others.iter_mut().zip(&controls) {
        if let Some(lane) = control.lane_change {
            vehicle.lane = lane;
        }
        vehicle.v = (vehicle.v + control.acceleration * dt).clamp(0.0, cfg.v_max);
        vehicle.x += vehicle.v * dt;
        slide_toward_lane(vehicle, cfg, lateral_step);
    }

    let frame = scene.frame + 1;
    let mut next = Scene {
        frame,
        t: f64::from(frame) / f64::from(cfg.tick_hz),
        ego,
        others,
        config: cfg.clone(),
        status: EndReason::Running,
    };

    let collided = check_collision(&next);
    let (lo, hi) = cfg.road_bounds();
    let off_road = next.ego.y < lo || next.ego.y > hi;
    let reason = if collided || off_road {
        EndReason::Crash
    } else if frame >= cfg.total_frames() {
        EndReason::Timeout
    } else {
        EndReason::Running
    };
    next.status = reason;

    Ok(StepResult { next, executed, collided, off_road, done: reason != EndReason::Running, reason })
}

fn slide_toward_lane(vehicle: &mut VehicleState, cfg: &SimConfig, max_step: f64) {
    let target = cfg.lane_center(vehicle.lane);
    let delta = target - vehicle.y;
    if delta.abs() <= max_step + 1e-9 {
        vehicle.y = target;
    } else {
        vehicle.y += max_step.copysign(delta);
    }
}

/// Open-interval rectangle overlap between two vehicles centered at their poses.
pub fn boxes_overlap(a: &VehicleState, b: &VehicleState, cfg: &SimConfig) -> bool {
    (a.x - b.x).abs() < cfg.vehicle_length && (a.y - b.y).abs() < cfg.vehicle_width
}

/// True iff the ego's footprint intersects any other vehicle's footprint.
pub fn check_collision(scene: &Scene) -> bool {
    scene.others.iter().any(|o| boxes_overlap(&scene.ego, o, &scene.config))
}
