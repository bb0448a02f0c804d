//! Closed-loop highway driving: a deterministic seeded simulator, per-action
//! danger estimation, personalized rule policies, a text prompt/answer codec,
//! benchmark metrics and dataset generation.
//!
//! The closed loop for one frame is
//! [`danger::estimate_danger`] → [`policy::Driver::act`] → [`sim::step`].
//! [`bench::run_episode`] wires it together and produces an
//! [`trace::EpisodeTrace`], which is what metrics and datasets consume.

pub mod bench;
pub mod danger;
pub mod dataset;
pub mod metrics;
pub mod policy;
pub mod prompt;
pub mod sim;
pub mod trace;

pub use danger::{estimate_danger, DangerLevel, DangerSet};
pub use policy::{Driver, Mode};
pub use sim::{spawn_scene, step, Action, Scene, SimConfig, StepResult, VehicleState};
pub use trace::{EpisodeTrace, FrameRecord};
