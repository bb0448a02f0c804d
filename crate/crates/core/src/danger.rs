//! Per-action danger levels.
//!
//! Every other vehicle is scored independently against the ego and the
//! per-action levels are max-combined. Same-lane traffic drives KEEP, FASTER
//! and SLOWER (the latter two evaluated at the relative speed the ego would
//! have after one speed step); adjacent-lane traffic drives LEFT or RIGHT by
//! side, and a vehicle right beside the ego makes that side `<NOT>`.
//!
//! Sign conventions for the helpers: `dx = x_other - x_ego` (positive when the
//! other vehicle is ahead), `dy = y_other - y_ego` (negative on the left),
//! `dv = v_ego - v_other` (positive when the ego is faster).

use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::sim::{Action, Scene, SimConfig};

/// Gap beyond which distance alone contributes nothing, m.
pub const GAP_HORIZON: f64 = 60.0;
/// Longitudinal margin added to the vehicle length for "beside", m.
pub const BESIDE_MARGIN: f64 = 2.0;

/// `<0>` .. `<9>`, then `<NOT>` which dominates every numeric level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DangerLevel {
    Level(u8),
    Not,
}

impl DangerLevel {
    pub const ZERO: DangerLevel = DangerLevel::Level(0);
    pub const MAX: DangerLevel = DangerLevel::Level(9);

    pub fn new(level: u8) -> Option<Self> {
        (level <= 9).then_some(DangerLevel::Level(level))
    }

    /// Numeric value, `None` for `<NOT>`.
    pub fn value(self) -> Option<u8> {
        match self {
            DangerLevel::Level(v) => Some(v),
            DangerLevel::Not => None,
        }
    }

    pub fn is_not(self) -> bool {
        self == DangerLevel::Not
    }

    pub fn token(self) -> String {
        match self {
            DangerLevel::Level(v) => format!("<{v}>"),
            DangerLevel::Not => "<NOT>".to_string(),
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        let inner = token.strip_prefix('<')?.strip_suffix('>')?;
        if inner == "NOT" {
            return Some(DangerLevel::Not);
        }
        if inner.len() == 1 {
            let d = inner.as_bytes()[0];
            if d.is_ascii_digit() {
                return Some(DangerLevel::Level(d - b'0'));
            }
        }
        None
    }

    /// True if `self` is `<NOT>` or strictly above `level`.
    pub fn exceeds(self, level: u8) -> bool {
        self.value().is_none_or(|v| v > level)
    }
}

impl Default for DangerLevel {
    fn default() -> Self {
        DangerLevel::ZERO
    }
}

impl fmt::Display for DangerLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

impl Serialize for DangerLevel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.token())
    }
}

impl<'de> Deserialize<'de> for DangerLevel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        DangerLevel::from_token(&s).ok_or_else(|| de::Error::custom(format!("bad danger level {s:?}")))
    }
}

/// Danger level for each of the five meta-actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct DangerSet {
    pub keep: DangerLevel,
    pub left: DangerLevel,
    pub right: DangerLevel,
    pub faster: DangerLevel,
    pub slower: DangerLevel,
}

impl DangerSet {
    /// Serialization order of the answer clause.
    pub const ORDER: [Action; 5] = [Action::Keep, Action::Left, Action::Right, Action::Faster, Action::Slower];

    pub fn get(&self, action: Action) -> DangerLevel {
        match action {
            Action::Keep => self.keep,
            Action::Left => self.left,
            Action::Right => self.right,
            Action::Faster => self.faster,
            Action::Slower => self.slower,
        }
    }

    pub fn slot(&mut self, action: Action) -> &mut DangerLevel {
        match action {
            Action::Keep => &mut self.keep,
            Action::Left => &mut self.left,
            Action::Right => &mut self.right,
            Action::Faster => &mut self.faster,
            Action::Slower => &mut self.slower,
        }
    }

    pub fn raise(&mut self, action: Action, level: DangerLevel) {
        let slot = self.slot(action);
        *slot = (*slot).max(level);
    }

    /// `"<keep> is <K>; <left> is <L>; <right> is <R>; <faster> is <F>; <slower> is <S>."`
    pub fn clause(&self) -> String {
        let parts: Vec<String> =
            Self::ORDER.iter().map(|&a| format!("{} is {}", a.token(), self.get(a).token())).collect();
        format!("{}.", parts.join("; "))
    }
}

impl fmt::Display for DangerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.clause())
    }
}

/// Geometry the estimator needs, lifted out of a [`SimConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DangerGeometry {
    pub lane_width: f64,
    pub vehicle_length: f64,
    pub speed_step: f64,
}

impl From<&SimConfig> for DangerGeometry {
    fn from(c: &SimConfig) -> Self {
        Self { lane_width: c.lane_width, vehicle_length: c.vehicle_length, speed_step: c.speed_step }
    }
}

impl DangerGeometry {
    pub fn in_same_lane(&self, dy: f64) -> bool {
        dy.abs() < self.lane_width / 2.0
    }

    /// Adjacent lane and longitudinally overlapping within the margin.
    pub fn beside_ego(&self, dx: f64, dy: f64) -> bool {
        dx.abs() < self.vehicle_length + BESIDE_MARGIN && self.in_adjacent_lane(dy)
    }

    pub fn in_adjacent_lane(&self, dy: f64) -> bool {
        let d = dy.abs();
        d >= self.lane_width / 2.0 && d < 1.5 * self.lane_width
    }

    /// Danger from one vehicle at signed gap `dx` with relative speed `dv`.
    ///
    /// The larger of a distance term (linear ramp over [`GAP_HORIZON`]) and a
    /// time-to-collision term (`9 - floor(gap / closing)`).
    pub fn calculate_danger(&self, dx: f64, dv: f64) -> DangerLevel {
        let gap = (dx.abs() - self.vehicle_length).max(0.0);
        let closing = if dx >= 0.0 { dv } else { -dv };
        let gap_term = if gap < GAP_HORIZON { (9.0 * (1.0 - gap / GAP_HORIZON)).ceil().clamp(0.0, 9.0) } else { 0.0 };
        let ttc_term = if closing <= 0.0 { 0.0 } else { (9.0 - (gap / closing).floor()).clamp(0.0, 9.0) };
        DangerLevel::Level(gap_term.max(ttc_term) as u8)
    }
}

/// Danger levels of all five actions for the ego in `scene`.
pub fn estimate_danger(scene: &Scene) -> DangerSet {
    let g = DangerGeometry::from(&scene.config);
    let ego = &scene.ego;
    let mut d = DangerSet::default();

    for other in &scene.others {
        let dx = other.x - ego.x;
        let dy = other.y - ego.y;
        let dv = ego.v - other.v;

        if g.in_same_lane(dy) {
            let closing = if dx >= 0.0 { dv } else { -dv };
            if dx < 0.0 && closing <= 0.0 {
                continue;
            }
            d.raise(Action::Keep, g.calculate_danger(dx, dv));
            d.raise(Action::Faster, g.calculate_danger(dx, dv + g.speed_step));
            d.raise(Action::Slower, g.calculate_danger(dx, dv - g.speed_step));
        } else if g.in_adjacent_lane(dy) {
            let side = if dy < 0.0 { Action::Left } else { Action::Right };
            let level = if g.beside_ego(dx, dy) { DangerLevel::Not } else { g.calculate_danger(dx, dv) };
            d.raise(side, level);
        }
    }

    if ego.lane == 0 {
        d.left = DangerLevel::Not;
    }
    if ego.lane + 1 >= scene.config.lanes {
        d.right = DangerLevel::Not;
    }
    d
}
