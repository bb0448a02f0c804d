//! Action selection: the three personalized modes, the rule-based collection
//! expert, and the ego-state history they carry.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::danger::{DangerLevel, DangerSet};
use crate::sim::{self, Action, Scene};

/// Default capacity of the ego-state history.
pub const QUEUE_CAPACITY: usize = 10;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("every action is inadmissible")]
    AllBlocked,
    #[error("agent failure: {0}")]
    Agent(String),
    #[error("failed to load policy config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Slow,
    Normal,
    Fast,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Slow, Mode::Normal, Mode::Fast];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Slow => "slow",
            Mode::Normal => "normal",
            Mode::Fast => "fast",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "slow" => Ok(Mode::Slow),
            "normal" => Ok(Mode::Normal),
            "fast" => Ok(Mode::Fast),
            other => Err(format!("unknown mode {other:?} (expected slow, normal or fast)")),
        }
    }
}

/// One ego history entry: speed, x, y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoSample {
    pub v: f64,
    pub x: f64,
    pub y: f64,
}

/// Bounded ego history, newest first.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoStateQueue {
    entries: VecDeque<EgoSample>,
    capacity: usize,
}

impl Default for EgoStateQueue {
    fn default() -> Self {
        Self::new(QUEUE_CAPACITY)
    }
}

impl EgoStateQueue {
    pub fn new(capacity: usize) -> Self {
        Self { entries: VecDeque::with_capacity(capacity + 1), capacity: capacity.max(1) }
    }

    pub fn push(&mut self, v: f64, x: f64, y: f64) {
        self.entries.push_front(EgoSample { v, x, y });
        self.entries.truncate(self.capacity);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Newest first.
    pub fn iter(&self) -> impl Iterator<Item = &EgoSample> {
        self.entries.iter()
    }
}

/// Tunable decision thresholds. Loaded from TOML; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyThresholds {
    /// FAST accelerates while FASTER is at or below this level.
    pub fast_faster: u8,
    /// FAST keeps its lane while KEEP is at or below this level.
    pub fast_keep: u8,
    /// FAST overtakes through a side at or below this level.
    pub fast_overtake: u8,
    /// NORMAL keeps its lane while KEEP is at or below this level.
    pub normal_keep: u8,
    /// NORMAL speeds back up toward this target speed, m/s.
    pub normal_cruise_speed: f64,
    /// NORMAL only speeds up while FASTER is at or below this level.
    pub normal_resume: u8,
    /// SLOW keeps its lane while KEEP is at or below this level.
    pub slow_keep: u8,
    /// Minimum frames between lane changes for NORMAL and SLOW.
    pub lane_change_window: u32,
    /// Minimum frames between lane changes for FAST.
    pub fast_lane_change_window: u32,
    /// Minimum frames between any two maneuvers of the expert.
    pub expert_window: u32,
    /// Time headway below which the expert treats the lead as too close, s.
    pub expert_headway: f64,
    /// Highest side danger the expert accepts for an evasive lane change.
    pub expert_side_max: u8,
    /// Per-frame FASTER probability for calm / moderate / aggressive experts.
    pub expert_faster_prob: [f64; 3],
}

impl Default for PolicyThresholds {
    fn default() -> Self {
        Self {
            fast_faster: 8,
            fast_keep: 8,
            fast_overtake: 6,
            normal_keep: 5,
            normal_cruise_speed: 25.0,
            normal_resume: 2,
            slow_keep: 6,
            lane_change_window: 20,
            fast_lane_change_window: 10,
            expert_window: 15,
            expert_headway: 1.5,
            expert_side_max: 3,
            expert_faster_prob: [0.0, 0.02, 0.1],
        }
    }
}

impl PolicyThresholds {
    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| PolicyError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| PolicyError::Config(format!("{}: {e}", path.display())))
    }
}

/// Per-episode memory of a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    pub queue: EgoStateQueue,
    pub mode: Mode,
    pub frame: u32,
    /// Last frame with a non-KEEP action.
    pub last_maneuver_frame: Option<u32>,
    /// Last frame with LEFT or RIGHT.
    pub last_lane_change_frame: Option<u32>,
    /// The ego is still sliding toward its target lane.
    pub changing_lane: bool,
    pub target_speed: f64,
    pub v_max: f64,
}

impl PolicyState {
    pub fn new(mode: Mode) -> Self {
        Self {
            queue: EgoStateQueue::default(),
            mode,
            frame: 0,
            last_maneuver_frame: None,
            last_lane_change_frame: None,
            changing_lane: false,
            target_speed: 0.0,
            v_max: f64::INFINITY,
        }
    }

    pub fn push_ego_state(&mut self, v: f64, x: f64, y: f64) {
        self.queue.push(v, x, y);
    }

    /// Record the current frame of `scene`; call exactly once per frame.
    pub fn observe(&mut self, scene: &Scene) {
        self.push_ego_state(scene.ego.v, scene.ego.x, scene.ego.y);
        self.frame = scene.frame;
        self.target_speed = scene.ego.target_speed;
        self.changing_lane = scene.ego.changing_lane(&scene.config);
        self.v_max = scene.config.v_max;
    }

    pub fn record(&mut self, action: Action) {
        if action != Action::Keep {
            self.last_maneuver_frame = Some(self.frame);
        }
        if action.is_lane_change() {
            self.last_lane_change_frame = Some(self.frame);
        }
    }

    fn within(last: Option<u32>, frame: u32, window: u32) -> bool {
        last.is_some_and(|f| frame.saturating_sub(f) < window)
    }

    pub fn lane_change_blocked(&self, window: u32) -> bool {
        Self::within(self.last_lane_change_frame, self.frame, window)
    }

    pub fn maneuver_blocked(&self, window: u32) -> bool {
        Self::within(self.last_maneuver_frame, self.frame, window)
    }

    fn can_speed_up(&self) -> bool {
        self.target_speed < self.v_max
    }

    fn can_slow_down(&self) -> bool {
        self.target_speed > 0.0
    }
}

/// Tie-break rank: KEEP > SLOWER > RIGHT > LEFT > FASTER.
fn priority(a: Action) -> u8 {
    match a {
        Action::Keep => 0,
        Action::Slower => 1,
        Action::Right => 2,
        Action::Left => 3,
        Action::Faster => 4,
    }
}

/// Lowest-danger action among `candidates`, ties broken by [`priority`].
fn safest(danger: &DangerSet, candidates: impl IntoIterator<Item = Action>) -> Option<Action> {
    candidates.into_iter().filter(|&a| !danger.get(a).is_not()).min_by_key(|&a| (danger.get(a), priority(a)))
}

/// Action is not `<NOT>` and would change something.
fn admissible(danger: &DangerSet, state: &PolicyState, a: Action) -> bool {
    !danger.get(a).is_not()
        && match a {
            Action::Faster => state.can_speed_up(),
            Action::Slower => state.can_slow_down(),
            _ => true,
        }
}

fn at_most(level: DangerLevel, max: u8) -> bool {
    !level.exceeds(max)
}

/// Pick this frame's action for `mode` from the current danger levels.
///
/// Once KEEP has failed its mode threshold it no longer wins ties: an
/// alternative at the same level is taken instead. A lane change is only
/// taken as an escape when it is strictly safer than staying, and never while
/// the previous lane change is still under way.
pub fn decide(
    mode: Mode,
    danger: &DangerSet,
    state: &PolicyState,
    th: &PolicyThresholds,
) -> Result<Action, PolicyError> {
    let ok = |a: Action| admissible(danger, state, a) && !(mode == Mode::Slow && a == Action::Faster);
    let all: Vec<Action> = Action::ALL.into_iter().filter(|&a| ok(a)).collect();
    if all.is_empty() {
        return Err(PolicyError::AllBlocked);
    }
    let window = match mode {
        Mode::Fast => th.fast_lane_change_window,
        Mode::Normal | Mode::Slow => th.lane_change_window,
    };
    let lanes_open = !state.changing_lane && !state.lane_change_blocked(window);
    let can = |a: Action| ok(a) && (lanes_open || !a.is_lane_change());
    let sides = || [Action::Left, Action::Right].into_iter().filter(|&a| can(a));
    let d = |a: Action| danger.get(a);

    let choice = match mode {
        Mode::Fast => {
            if can(Action::Faster) && at_most(danger.faster, th.fast_faster) {
                Some(Action::Faster)
            } else if at_most(danger.keep, th.fast_keep) {
                Some(Action::Keep)
            } else if let Some(side) = safest(danger, sides().filter(|&a| at_most(d(a), th.fast_overtake))) {
                Some(side)
            } else if can(Action::Slower) {
                Some(Action::Slower)
            } else {
                None
            }
        }
        Mode::Normal => {
            let resume = state.target_speed < th.normal_cruise_speed
                && !state.maneuver_blocked(th.lane_change_window)
                && can(Action::Faster)
                && at_most(danger.faster, th.normal_resume);
            if resume {
                Some(Action::Faster)
            } else if at_most(danger.keep, th.normal_keep) {
                Some(Action::Keep)
            } else {
                let alt = safest(danger, all.iter().copied().filter(|&a| a != Action::Keep && can(a)));
                Some(alt.filter(|&a| d(a) <= danger.keep).unwrap_or(Action::Keep))
            }
        }
        Mode::Slow => {
            let side = safest(danger, sides());
            if at_most(danger.keep, th.slow_keep) {
                Some(Action::Keep)
            } else if can(Action::Slower) && danger.slower < danger.left.min(danger.right) {
                Some(Action::Slower)
            } else if let Some(side) = side.filter(|&a| d(a) < danger.keep) {
                Some(side)
            } else if can(Action::Slower) && danger.slower <= danger.keep {
                Some(Action::Slower)
            } else {
                Some(Action::Keep)
            }
        }
    };
    // whatever remains admissible beats giving up
    choice
        .filter(|&a| ok(a))
        .or_else(|| safest(danger, all.iter().copied().filter(|&a| can(a))))
        .or_else(|| safest(danger, all))
        .ok_or(PolicyError::AllBlocked)
}

/// Anything that can drive the ego in the closed loop.
pub trait Driver {
    /// Choose the action for the current frame. Called exactly once per frame.
    fn act(&mut self, scene: &Scene, danger: &DangerSet) -> Result<Action, PolicyError>;

    /// Responses that could not be used and were replaced by KEEP.
    fn fallbacks(&self) -> usize {
        0
    }
}

/// A personalized-mode rule policy.
#[derive(Debug, Clone)]
pub struct ModePolicy {
    pub state: PolicyState,
    pub thresholds: PolicyThresholds,
}

impl ModePolicy {
    pub fn new(mode: Mode, thresholds: PolicyThresholds) -> Self {
        Self { state: PolicyState::new(mode), thresholds }
    }

    pub fn mode(&self) -> Mode {
        self.state.mode
    }
}

impl Driver for ModePolicy {
    fn act(&mut self, scene: &Scene, danger: &DangerSet) -> Result<Action, PolicyError> {
        self.state.observe(scene);
        let action = decide(self.state.mode, danger, &self.state, &self.thresholds)?;
        self.state.record(action);
        Ok(action)
    }
}

/// The rule-based data-collection expert.
///
/// Too close to the lead vehicle: change to a safe side lane if one exists,
/// otherwise slow down. Otherwise keep, occasionally speeding up at a rate set
/// by a per-episode aggressiveness draw. Maneuvers are spaced apart.
#[derive(Debug, Clone)]
pub struct ExpertPolicy {
    pub state: PolicyState,
    pub thresholds: PolicyThresholds,
    rng: ChaCha8Rng,
    aggressiveness: usize,
}

/// Keeps the expert's stream apart from the simulator's stream for a seed.
const EXPERT_STREAM: u64 = 0x5eed_e4be_47a1_0001;

impl ExpertPolicy {
    pub fn new(seed: u64, thresholds: PolicyThresholds) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ EXPERT_STREAM);
        let aggressiveness = rng.random_range(0..3usize);
        let mode = Mode::ALL[aggressiveness];
        Self { state: PolicyState::new(mode), thresholds, rng, aggressiveness }
    }

    /// Construct with a fixed aggressiveness tier (0 calm .. 2 aggressive).
    pub fn with_aggressiveness(seed: u64, tier: usize, thresholds: PolicyThresholds) -> Self {
        let mut p = Self::new(seed, thresholds);
        p.aggressiveness = tier.min(2);
        p.state.mode = Mode::ALL[p.aggressiveness];
        p
    }

    /// Mode label matching the aggressiveness draw.
    pub fn mode_label(&self) -> Mode {
        self.state.mode
    }

    fn faster_probability(&self) -> f64 {
        self.thresholds.expert_faster_prob[self.aggressiveness]
    }
}

/// Bumper gap to the closest vehicle ahead in the ego lane.
pub fn front_gap(scene: &Scene) -> Option<f64> {
    let cfg = &scene.config;
    scene
        .others
        .iter()
        .filter(|o| (o.y - scene.ego.y).abs() < cfg.lane_width / 2.0 && o.x >= scene.ego.x)
        .map(|o| (o.x - scene.ego.x - cfg.vehicle_length).max(0.0))
        .min_by(f64::total_cmp)
}

/// The expert's decision for the current frame.
pub fn expert_rule(
    scene: &Scene,
    danger: &DangerSet,
    state: &PolicyState,
    th: &PolicyThresholds,
    faster_draw: bool,
) -> Action {
    if state.maneuver_blocked(th.expert_window) {
        return Action::Keep;
    }
    let too_close = front_gap(scene).is_some_and(|gap| gap < th.expert_headway * scene.ego.v);
    if too_close {
        let safe_side = safest(
            danger,
            [Action::Left, Action::Right].into_iter().filter(|&a| at_most(danger.get(a), th.expert_side_max)),
        );
        match safe_side {
            Some(side) => side,
            None if state.can_slow_down() => Action::Slower,
            None => Action::Keep,
        }
    } else if faster_draw && state.can_speed_up() && !danger.faster.is_not() {
        Action::Faster
    } else {
        Action::Keep
    }
}

impl Driver for ExpertPolicy {
    fn act(&mut self, scene: &Scene, danger: &DangerSet) -> Result<Action, PolicyError> {
        self.state.observe(scene);
        // one draw per frame keeps the stream aligned regardless of branch
        let draw: f64 = self.rng.random();
        let faster = draw < self.faster_probability();
        let action = expert_rule(scene, danger, &self.state, &self.thresholds, faster);
        self.state.record(action);
        Ok(action)
    }
}

/// Actions for the current frame and `horizon` future frames, obtained by
/// rolling a copy of `driver` forward against a copy of the simulator.
///
/// Entries past a terminal frame are KEEP. Neither argument is modified.
pub fn action_sequence<D: Driver + Clone>(
    driver: &D,
    scene: &Scene,
    horizon: usize,
) -> Result<Vec<Action>, PolicyError> {
    let mut driver = driver.clone();
    let mut scene = scene.clone();
    let mut out = Vec::with_capacity(horizon + 1);
    for _ in 0..=horizon {
        if scene.is_terminal() {
            out.push(Action::Keep);
            continue;
        }
        let danger = crate::danger::estimate_danger(&scene);
        let action = driver.act(&scene, &danger)?;
        let result = sim::step(&scene, action).expect("scene is not terminal");
        out.push(result.executed);
        scene = result.next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{spawn_scene, EndReason, SimConfig, VehicleState};

    fn lv(v: u8) -> DangerLevel {
        DangerLevel::Level(v)
    }

    fn set(keep: u8, left: u8, right: u8, faster: u8, slower: u8) -> DangerSet {
        DangerSet { keep: lv(keep), left: lv(left), right: lv(right), faster: lv(faster), slower: lv(slower) }
    }

    fn cruising(mode: Mode) -> PolicyState {
        let mut s = PolicyState::new(mode);
        s.target_speed = 25.0;
        s.v_max = 30.0;
        s.frame = 100;
        s
    }

    fn th() -> PolicyThresholds {
        PolicyThresholds::default()
    }

    #[test]
    fn queue_capacity() {
        let mut q = EgoStateQueue::new(10);
        q.push(1.0, 0.0, 0.0);
        assert_eq!(q.len(), 1);
        for i in 2..=11 {
            q.push(i as f64, 0.0, 0.0);
        }
        assert_eq!(q.len(), 10);
        assert_eq!(q.iter().next().unwrap().v, 11.0);
        assert!(q.iter().all(|s| s.v != 1.0));
    }

    #[test]
    fn free_road_choices() {
        let zero = DangerSet::default();
        assert_eq!(decide(Mode::Fast, &zero, &cruising(Mode::Fast), &th()).unwrap(), Action::Faster);
        assert_eq!(decide(Mode::Slow, &zero, &cruising(Mode::Slow), &th()).unwrap(), Action::Keep);
        assert_eq!(decide(Mode::Normal, &zero, &cruising(Mode::Normal), &th()).unwrap(), Action::Keep);
    }

    #[test]
    fn fast_walkthrough_keeps() {
        let d = set(7, 1, 5, 9, 4);
        assert_eq!(decide(Mode::Fast, &d, &cruising(Mode::Fast), &th()).unwrap(), Action::Keep);
    }

    #[test]
    fn fast_at_top_speed_keeps() {
        let mut s = cruising(Mode::Fast);
        s.target_speed = 30.0;
        assert_eq!(decide(Mode::Fast, &DangerSet::default(), &s, &th()).unwrap(), Action::Keep);
    }

    #[test]
    fn fast_overtakes_then_slows() {
        let s = cruising(Mode::Fast);
        assert_eq!(decide(Mode::Fast, &set(9, 2, 4, 9, 6), &s, &th()).unwrap(), Action::Left);
        let mut d = set(9, 7, 0, 9, 6);
        d.right = DangerLevel::Not;
        assert_eq!(decide(Mode::Fast, &d, &s, &th()).unwrap(), Action::Slower);
    }

    #[test]
    fn normal_respects_lane_change_window() {
        let mut s = cruising(Mode::Normal);
        let d = set(7, 1, 5, 9, 4);
        assert_eq!(decide(Mode::Normal, &d, &s, &th()).unwrap(), Action::Left);
        s.last_lane_change_frame = Some(90);
        assert_eq!(decide(Mode::Normal, &d, &s, &th()).unwrap(), Action::Slower);
        s.last_lane_change_frame = Some(80);
        assert_eq!(decide(Mode::Normal, &d, &s, &th()).unwrap(), Action::Left);
    }

    #[test]
    fn slow_prefers_slowing_down() {
        let s = cruising(Mode::Slow);
        assert_eq!(decide(Mode::Slow, &set(7, 5, 6, 9, 4), &s, &th()).unwrap(), Action::Slower);
        assert_eq!(decide(Mode::Slow, &set(7, 1, 6, 9, 4), &s, &th()).unwrap(), Action::Left);
        assert_ne!(decide(Mode::Slow, &set(9, 9, 9, 0, 9), &s, &th()).unwrap(), Action::Faster);
    }

    #[test]
    fn ties_follow_priority() {
        let s = cruising(Mode::Normal);
        // keep above threshold; slower, right, left all tie at 3
        assert_eq!(decide(Mode::Normal, &set(6, 3, 3, 3, 3), &s, &th()).unwrap(), Action::Slower);
    }

    #[test]
    fn thresholds_roundtrip_toml() {
        let text = toml::to_string(&th()).unwrap();
        assert_eq!(toml::from_str::<PolicyThresholds>(&text).unwrap(), th());
        let partial: PolicyThresholds = toml::from_str("normal_keep = 4").unwrap();
        assert_eq!(partial.normal_keep, 4);
        assert_eq!(partial.slow_keep, 6);
    }

    fn expert_scene(lead_gap: Option<f64>, left: Option<f64>) -> Scene {
        let cfg = SimConfig::default();
        let mk = |id, x, lane: usize, v| VehicleState {
            id,
            x,
            y: lane as f64 * 4.0,
            v,
            lane,
            target_speed: v,
            is_ego: id == 0,
        };
        let mut others = vec![mk(1, 0.0, 3, 25.0)];
        if let Some(g) = lead_gap {
            others.push(mk(2, g + 5.0, 2, 20.0));
        }
        if let Some(dx) = left {
            others.push(mk(3, dx, 1, 25.0));
        }
        Scene { frame: 50, t: 5.0, ego: mk(0, 0.0, 2, 25.0), others, config: cfg, status: EndReason::Running }
    }

    fn run_expert(scene: &Scene, faster: bool) -> Action {
        let danger = crate::danger::estimate_danger(scene);
        let mut state = PolicyState::new(Mode::Normal);
        state.observe(scene);
        expert_rule(scene, &danger, &state, &th(), faster)
    }

    #[test]
    fn expert_free_road_keeps() {
        assert_eq!(run_expert(&expert_scene(None, None), false), Action::Keep);
    }

    #[test]
    fn expert_slows_when_boxed_in() {
        // right lane occupied beside (NOT), left lane occupied beside (NOT)
        assert_eq!(run_expert(&expert_scene(Some(10.0), Some(1.0)), false), Action::Slower);
    }

    #[test]
    fn expert_escapes_left() {
        // left lane has a vehicle 55 m behind (bumper gap): ceil(9 * 5/60) = 1
        let scene = expert_scene(Some(10.0), Some(-60.0));
        let danger = crate::danger::estimate_danger(&scene);
        assert_eq!(danger.left, DangerLevel::Level(1));
        assert_eq!(danger.right, DangerLevel::Not);
        assert_eq!(run_expert(&scene, false), Action::Left);
    }

    #[test]
    fn expert_spaces_maneuvers() {
        let scene = expert_scene(Some(10.0), None);
        let danger = crate::danger::estimate_danger(&scene);
        let mut state = PolicyState::new(Mode::Normal);
        state.observe(&scene);
        state.last_maneuver_frame = Some(40);
        assert_eq!(expert_rule(&scene, &danger, &state, &th(), true), Action::Keep);
    }

    #[test]
    fn sequence_of_zero_is_decide() {
        let scene = spawn_scene(&SimConfig::default().with_seed(4)).unwrap();
        let policy = ModePolicy::new(Mode::Normal, th());
        let seq = action_sequence(&policy, &scene, 0).unwrap();
        let mut live = policy.clone();
        let danger = crate::danger::estimate_danger(&scene);
        assert_eq!(seq, vec![live.act(&scene, &danger).unwrap()]);
    }

    #[test]
    fn sequence_saturates_speed_ladder() {
        let cfg = SimConfig { n_vehicles: 1, ..SimConfig::default() };
        let scene = spawn_scene(&cfg).unwrap();
        let policy = ModePolicy::new(Mode::Fast, th());
        let seq = action_sequence(&policy, &scene, 10).unwrap();
        let mut expected = vec![Action::Faster];
        expected.extend([Action::Keep; 10]);
        assert_eq!(seq, expected);
    }

    #[test]
    fn sequence_pads_after_terminal() {
        let cfg = SimConfig { n_vehicles: 1, duration: 0.5, ..SimConfig::default() };
        let scene = spawn_scene(&cfg).unwrap();
        let seq = action_sequence(&ModePolicy::new(Mode::Fast, th()), &scene, 10).unwrap();
        assert_eq!(seq.len(), 11);
        assert!(seq[5..].iter().all(|&a| a == Action::Keep));
    }
}
