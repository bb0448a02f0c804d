//! Per-frame logs of closed-loop episodes.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::danger::DangerSet;
use crate::sim::{Action, EndReason, Scene, SimConfig, VehicleState};

/// Compact pose of a non-ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtherPose {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub v: f64,
}

/// What happened at one decision frame.
///
/// `ego` and `others` are the state the decision was made on; `collided` tells
/// whether applying `executed_action` from here ended in a crash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: u32,
    pub ego: VehicleState,
    pub others: Vec<OtherPose>,
    pub decided_action: Action,
    pub executed_action: Action,
    pub danger: DangerSet,
    /// Bumper gap to the vehicle ahead in the ego lane; `None` when the lane is empty.
    pub front_gap: Option<f64>,
    pub collided: bool,
}

impl FrameRecord {
    pub fn new(scene: &Scene, danger: DangerSet, decided: Action, executed: Action, collided: bool) -> Self {
        Self {
            frame: scene.frame,
            ego: scene.ego.clone(),
            others: scene.others.iter().map(|o| OtherPose { id: o.id, x: o.x, y: o.y, v: o.v }).collect(),
            decided_action: decided,
            executed_action: executed,
            danger,
            front_gap: crate::policy::front_gap(scene),
            collided,
        }
    }

    pub fn front_gap_or_inf(&self) -> f64 {
        self.front_gap.unwrap_or(f64::INFINITY)
    }

    /// Rebuild the scene this record was taken from. Background lanes and
    /// target speeds are not logged, so they are inferred from the poses.
    pub fn scene(&self, config: &SimConfig) -> Scene {
        Scene {
            frame: self.frame,
            t: f64::from(self.frame) * config.dt(),
            ego: self.ego.clone(),
            others: self
                .others
                .iter()
                .map(|o| VehicleState {
                    id: o.id,
                    x: o.x,
                    y: o.y,
                    v: o.v,
                    lane: config.nearest_lane(o.y),
                    target_speed: o.v,
                    is_ego: false,
                })
                .collect(),
            config: config.clone(),
            status: EndReason::Running,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub config: SimConfig,
    pub records: Vec<FrameRecord>,
    /// Ego state after the last step.
    pub final_ego: VehicleState,
    pub reason: EndReason,
    #[serde(default)]
    pub fallbacks: usize,
}

impl EpisodeTrace {
    pub fn is_complete(&self) -> bool {
        self.reason != EndReason::Running && !self.records.is_empty()
    }

    pub fn collided(&self) -> bool {
        self.reason == EndReason::Crash
    }

    /// Ego states at every frame boundary: one per record plus the final one.
    pub fn ego_states(&self) -> impl Iterator<Item = &VehicleState> {
        self.records.iter().map(|r| &r.ego).chain(std::iter::once(&self.final_ego))
    }

    pub fn executed_actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.records.iter().map(|r| r.executed_action)
    }

    /// One JSON object per record.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// SHA-256 over the record lines and the final ego state.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for r in &self.records {
            h.update(serde_json::to_vec(r).expect("record serializes"));
            h.update(b"\n");
        }
        h.update(serde_json::to_vec(&self.final_ego).expect("state serializes"));
        hex::encode(h.finalize())
    }
}
