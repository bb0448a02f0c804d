//! Per-episode benchmark metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::Action;
use crate::trace::EpisodeTrace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("trace is incomplete: {0}")]
    IncompleteTrace(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    /// Minimum bumper gap to the front vehicle that counts as safe, m.
    pub safe_distance: f64,
    /// Half-width of the longitudinal window for local density, m.
    pub density_window: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { safe_distance: 5.0, density_window: 50.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub success: bool,
    pub frames: usize,
    /// m
    pub distance: f64,
    /// km/h
    pub mean_speed: f64,
    pub saf: f64,
    pub kep: f64,
    pub den: f64,
    pub a_x: f64,
    pub j_x: f64,
    pub a_y: f64,
    pub j_y: f64,
    /// Mean numeric danger level of the actions the driver selected.
    pub mean_action_danger: f64,
    /// s
    pub wall_runtime_per_frame: f64,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Backward differences divided by `dt`.
pub fn finite_difference(series: &[f64], dt: f64) -> Vec<f64> {
    series.windows(2).map(|w| (w[1] - w[0]) / dt).collect()
}

fn fraction(n: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        n as f64 / total as f64
    }
}

pub fn evaluate_episode(trace: &EpisodeTrace, cfg: &MetricsConfig) -> Result<EpisodeMetrics, MetricsError> {
    if trace.records.is_empty() {
        return Err(MetricsError::IncompleteTrace("no frames".into()));
    }
    if !trace.is_complete() {
        return Err(MetricsError::IncompleteTrace(format!(
            "episode stopped at frame {} without reaching a terminal state",
            trace.final_ego_frame()
        )));
    }

    let sim = &trace.config;
    let dt = sim.dt();
    let n = trace.records.len();
    let success = !trace.collided() && n == sim.total_frames() as usize;

    let xs: Vec<f64> = trace.ego_states().map(|s| s.x).collect();
    let ys: Vec<f64> = trace.ego_states().map(|s| s.y).collect();
    let vs: Vec<f64> = trace.ego_states().map(|s| s.v).collect();

    let distance = xs[xs.len() - 1] - xs[0];
    let mean_speed = 3.6 * mean(&vs[..n]);

    let safe = trace.records.iter().filter(|r| r.front_gap_or_inf() >= cfg.safe_distance).count();
    let keep = trace.executed_actions().filter(|&a| a == Action::Keep).count();
    let densities: Vec<f64> = trace
        .records
        .iter()
        .map(|r| {
            let near = r.others.iter().filter(|o| (o.x - r.ego.x).abs() <= cfg.density_window).count();
            near as f64 / sim.lanes as f64
        })
        .collect();

    let a_x = finite_difference(&vs, dt);
    let j_x = finite_difference(&a_x, dt);
    let v_y = finite_difference(&ys, dt);
    let a_y = finite_difference(&v_y, dt);
    let j_y = finite_difference(&a_y, dt);

    let selected: Vec<f64> =
        trace.records.iter().filter_map(|r| r.danger.get(r.decided_action).value().map(f64::from)).collect();

    Ok(EpisodeMetrics {
        success,
        frames: n,
        distance,
        mean_speed,
        saf: fraction(safe, n),
        kep: fraction(keep, n),
        den: mean(&densities),
        a_x: mean(&a_x),
        j_x: mean(&j_x),
        a_y: mean(&a_y),
        j_y: mean(&j_y),
        mean_action_danger: mean(&selected),
        wall_runtime_per_frame: 0.0,
    })
}

impl EpisodeTrace {
    fn final_ego_frame(&self) -> u32 {
        self.records.last().map_or(0, |r| r.frame + 1)
    }
}
