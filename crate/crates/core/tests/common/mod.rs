#![allow(dead_code)]

pub mod codec;
pub mod oracle;

use highway_core::sim::EndReason;
use highway_core::{Scene, SimConfig, VehicleState};

pub fn vehicle(id: u32, x: f64, y: f64, v: f64, lane: usize) -> VehicleState {
    VehicleState { id, x, y, v, lane, target_speed: v, is_ego: id == 0 }
}

pub fn scene(config: SimConfig, ego: VehicleState, others: Vec<VehicleState>) -> Scene {
    Scene { frame: 0, t: 0.0, ego, others, config, status: EndReason::Running }
}
