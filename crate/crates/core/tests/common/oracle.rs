//! Brute-force danger levels written independently of `estimate_danger`.

use highway_core::danger::{DangerLevel, DangerSet};
use highway_core::{Action, Scene, SimConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Highest level L in 1..=9 whose distance band or time-to-collision band
/// contains the gap; 0 when none does.
pub fn oracle_level(gap: f64, closing: f64) -> u8 {
    (1..=9u8)
        .rev()
        .find(|&l| {
            let by_gap = gap < 60.0 * (1.0 - f64::from(l - 1) / 9.0);
            let by_ttc = closing > 0.0 && gap < f64::from(10 - l) * closing;
            by_gap || by_ttc
        })
        .unwrap_or(0)
}

pub fn oracle(scene: &Scene) -> [DangerLevel; 5] {
    let c = &scene.config;
    let e = &scene.ego;
    // keep, left, right, faster, slower
    let mut out = [0u8; 5];
    let mut not = [false; 5];
    for o in &scene.others {
        let ahead = o.x >= e.x;
        let gap = ((o.x - e.x).abs() - c.vehicle_length).max(0.0);
        let lateral = (o.y - e.y).abs();
        let closing_at = |ego_speed: f64| if ahead { ego_speed - o.v } else { o.v - ego_speed };
        if lateral < c.lane_width / 2.0 {
            if !ahead && closing_at(e.v) <= 0.0 {
                continue;
            }
            for (slot, ego_speed) in [(0, e.v), (3, e.v + c.speed_step), (4, e.v - c.speed_step)] {
                out[slot] = out[slot].max(oracle_level(gap, closing_at(ego_speed)));
            }
        } else if lateral < 1.5 * c.lane_width {
            let slot = if o.y < e.y { 1 } else { 2 };
            if (o.x - e.x).abs() < c.vehicle_length + 2.0 {
                not[slot] = true;
            } else {
                out[slot] = out[slot].max(oracle_level(gap, closing_at(e.v)));
            }
        }
    }
    if e.lane == 0 {
        not[1] = true;
    }
    if e.lane == c.lanes - 1 {
        not[2] = true;
    }
    std::array::from_fn(|i| if not[i] { DangerLevel::Not } else { DangerLevel::Level(out[i]) })
}

pub fn as_array(d: &DangerSet) -> [DangerLevel; 5] {
    [d.get(Action::Keep), d.get(Action::Left), d.get(Action::Right), d.get(Action::Faster), d.get(Action::Slower)]
}

pub fn random_scene(rng: &mut ChaCha8Rng) -> Scene {
    let lanes = rng.random_range(2..=6usize);
    let config = SimConfig { lanes, ..SimConfig::default() };
    let w = config.lane_width;
    let ego_lane = rng.random_range(0..lanes);
    // ego sometimes mid lane change
    let ego_y = ego_lane as f64 * w + if rng.random_bool(0.2) { rng.random_range(-w / 2.0..w / 2.0) } else { 0.0 };
    let ego = super::vehicle(0, rng.random_range(-50.0..50.0), ego_y, rng.random_range(0.0..30.0), ego_lane);
    let n = rng.random_range(0..12u32);
    let others = (1..=n)
        .map(|id| {
            let lane = rng.random_range(0..lanes);
            let y = lane as f64 * w + if rng.random_bool(0.3) { rng.random_range(-w..w) } else { 0.0 };
            super::vehicle(id, ego.x + rng.random_range(-90.0..90.0), y, rng.random_range(0.0..30.0), lane)
        })
        .collect();
    super::scene(config, ego, others)
}
