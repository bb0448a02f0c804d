//! Background traffic: IDM car following plus MOBIL lane changes.

use super::{Scene, SimConfig, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmParams {
    /// Jam distance s0, m.
    pub min_gap: f64,
    /// Safe time headway T, s.
    pub time_headway: f64,
    /// Maximum acceleration a, m/s².
    pub max_accel: f64,
    /// Comfortable deceleration b, m/s².
    pub comfort_decel: f64,
    pub exponent: f64,
}

pub const IDM: IdmParams =
    IdmParams { min_gap: 2.0, time_headway: 1.5, max_accel: 3.0, comfort_decel: 5.0, exponent: 4.0 };

/// Hard floor on the IDM output so overlapping gaps stay finite.
const EMERGENCY_DECEL: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilParams {
    pub politeness: f64,
    pub threshold: f64,
    pub safe_braking: f64,
}

pub const MOBIL: MobilParams = MobilParams { politeness: 0.0, threshold: 0.2, safe_braking: 4.0 };

/// Per-vehicle decision for one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleControl {
    pub acceleration: f64,
    pub lane_change: Option<usize>,
}

/// Bumper-to-bumper distance and speed of a vehicle ahead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lead {
    pub gap: f64,
    pub speed: f64,
}

/// IDM acceleration for a vehicle at speed `v` wanting `desired`.
pub fn idm_acceleration(p: &IdmParams, v: f64, desired: f64, lead: Option<Lead>) -> f64 {
    let desired = desired.max(0.1);
    let free = 1.0 - (v / desired).powf(p.exponent);
    let interaction = match lead {
        Some(Lead { gap, speed }) => {
            let closing = v - speed;
            let wanted = p.min_gap
                + (v * p.time_headway + v * closing / (2.0 * (p.max_accel * p.comfort_decel).sqrt())).max(0.0);
            let gap = gap.max(0.01);
            (wanted / gap).powi(2)
        }
        None => 0.0,
    };
    (p.max_accel * (free - interaction)).max(-EMERGENCY_DECEL)
}

/// Read-only view of every vehicle in a scene, ego at index 0.
struct Road<'a> {
    cfg: &'a SimConfig,
    all: Vec<&'a VehicleState>,
}

impl<'a> Road<'a> {
    fn new(scene: &'a Scene) -> Self {
        Self { cfg: &scene.config, all: scene.vehicles().collect() }
    }

    fn occupies(&self, v: &VehicleState, lane: usize) -> bool {
        v.lane == lane || self.cfg.nearest_lane(v.y) == lane
    }

    /// `b` counts as ahead of `a`; equal positions are ordered by index.
    fn is_ahead(&self, a: usize, b: usize) -> bool {
        let (xa, xb) = (self.all[a].x, self.all[b].x);
        xb > xa || (xb == xa && b > a)
    }

    fn leader_in(&self, idx: usize, lane: usize) -> Option<(usize, Lead)> {
        let me = self.all[idx];
        (0..self.all.len())
            .filter(|&j| j != idx && self.occupies(self.all[j], lane) && self.is_ahead(idx, j))
            .map(|j| {
                let other = self.all[j];
                (j, Lead { gap: other.x - me.x - self.cfg.vehicle_length, speed: other.v })
            })
            .min_by(|a, b| a.1.gap.total_cmp(&b.1.gap).then(a.0.cmp(&b.0)))
    }

    fn follower_in(&self, idx: usize, lane: usize) -> Option<usize> {
        let me = self.all[idx];
        (0..self.all.len())
            .filter(|&j| j != idx && self.occupies(self.all[j], lane) && self.is_ahead(j, idx))
            .max_by(|&a, &b| self.all[a].x.total_cmp(&self.all[b].x).then(a.cmp(&b)))
            .filter(|&j| self.all[j].x <= me.x)
    }

    /// Closest leader over the lanes the vehicle currently touches.
    fn current_leader(&self, idx: usize) -> Option<(usize, Lead)> {
        let me = self.all[idx];
        let a = self.leader_in(idx, me.lane);
        let b = self.leader_in(idx, self.cfg.nearest_lane(me.y));
        match (a, b) {
            (Some(a), Some(b)) => Some(if b.1.gap < a.1.gap { b } else { a }),
            (a, b) => a.or(b),
        }
    }

    fn accel_behind(&self, follower: usize, lead: Option<Lead>) -> f64 {
        let v = self.all[follower];
        idm_acceleration(&IDM, v.v, v.target_speed, lead)
    }

    fn lead_of(&self, follower: usize, leader: usize) -> Lead {
        let (f, l) = (self.all[follower], self.all[leader]);
        Lead { gap: l.x - f.x - self.cfg.vehicle_length, speed: l.v }
    }

    /// MOBIL: best adjacent lane whose incentive clears the threshold.
    fn mobil(&self, idx: usize, own_accel: f64) -> Option<usize> {
        let me = self.all[idx];
        let lanes = self.cfg.lanes;
        let old_follower = self.follower_in(idx, me.lane);
        let mut best: Option<(usize, f64)> = None;
        let candidates = [me.lane.checked_sub(1), Some(me.lane + 1).filter(|&l| l < lanes)];
        for lane in candidates.into_iter().flatten() {
            let new_leader = self.leader_in(idx, lane);
            let new_follower = self.follower_in(idx, lane);
            if new_leader.is_some_and(|(_, lead)| lead.gap <= 0.0) {
                continue;
            }
            if let Some(f) = new_follower {
                if self.lead_of(f, idx).gap <= 0.0 {
                    continue;
                }
            }

            let follower_gain = match new_follower {
                Some(f) => {
                    let after = self.accel_behind(f, Some(self.lead_of(f, idx)));
                    if after < -MOBIL.safe_braking {
                        continue;
                    }
                    let before = self.accel_behind(f, new_leader.map(|(l, _)| self.lead_of(f, l)));
                    after - before
                }
                None => 0.0,
            };
            let old_follower_gain = match old_follower {
                Some(f) => {
                    let before = self.accel_behind(f, Some(self.lead_of(f, idx)));
                    let after = self.accel_behind(f, self.leader_in(idx, me.lane).map(|(l, _)| self.lead_of(f, l)));
                    after - before
                }
                None => 0.0,
            };

            let own_after = idm_acceleration(&IDM, me.v, me.target_speed, new_leader.map(|(_, l)| l));
            let incentive = own_after - own_accel + MOBIL.politeness * (follower_gain + old_follower_gain);
            if incentive > MOBIL.threshold && best.is_none_or(|(_, b)| incentive > b) {
                best = Some((lane, incentive));
            }
        }
        best.map(|(lane, _)| lane)
    }
}

/// Controls for every non-ego vehicle, in the order of `scene.others`.
///
/// Lane changes are considered once per second per vehicle, staggered by id,
/// and never while a previous change is still in progress.
pub fn other_vehicle_control(scene: &Scene) -> Vec<VehicleControl> {
    let road = Road::new(scene);
    let hz = scene.config.tick_hz.max(1);
    (1..road.all.len())
        .map(|idx| {
            let me = road.all[idx];
            let acceleration = road.accel_behind(idx, road.current_leader(idx).map(|(_, l)| l));
            let may_change = !me.changing_lane(road.cfg) && (scene.frame + me.id).is_multiple_of(hz);
            let lane_change = if may_change { road.mobil(idx, acceleration) } else { None };
            VehicleControl { acceleration, lane_change }
        })
        .collect()
}
