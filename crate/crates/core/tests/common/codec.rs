//! Answer strategies and scripted agents shared by the codec suites.

use proptest::prelude::*;

use highway_core::policy::{Driver, Mode, ModePolicy, PolicyThresholds};
use highway_core::prompt::{encode_answer, format_ego_triple, AnswerBundle};
use highway_core::sim::{spawn_scene, step};
use highway_core::{estimate_danger, Action, DangerLevel, DangerSet, SimConfig};

pub fn level() -> impl Strategy<Value = DangerLevel> {
    prop_oneof![9 => (0u8..=9).prop_map(DangerLevel::Level), 1 => Just(DangerLevel::Not)]
}

pub fn danger_set() -> impl Strategy<Value = DangerSet> {
    (level(), level(), level(), level(), level()).prop_map(|(keep, left, right, faster, slower)| DangerSet {
        keep,
        left,
        right,
        faster,
        slower,
    })
}

pub fn action() -> impl Strategy<Value = Action> {
    prop::sample::select(Action::ALL.to_vec())
}

pub fn description() -> impl Strategy<Value = String> {
    // free text, but never a '<' so it cannot contain a grammar marker
    "[A-Za-z0-9 ,.;:'()-]{0,160}".prop_map(|s| s.trim().to_string())
}

pub fn bundle() -> impl Strategy<Value = AnswerBundle> {
    (description(), danger_set(), prop::collection::vec(action(), 11))
        .prop_map(|(description, danger, actions)| AnswerBundle { description, danger, actions })
}

/// A valid answer choosing `first`, then KEEP.
pub fn answer(first: Action) -> String {
    let mut actions = vec![Action::Keep; 11];
    actions[0] = first;
    encode_answer(&AnswerBundle { description: "Mock.".into(), danger: DangerSet::default(), actions })
}

/// An agent that runs its own copy of the simulator and answers with the FAST
/// rule policy, checking that each prompt describes the state it expects.
pub fn mirrored_fast_agent(cfg: SimConfig) -> impl FnMut(&str) -> String + Send {
    let mut scene = spawn_scene(&cfg).unwrap();
    let mut policy = ModePolicy::new(Mode::Fast, PolicyThresholds::default());
    move |req: &str| {
        let ego = &scene.ego;
        let triple = format_ego_triple(ego.v, ego.x, ego.y);
        assert!(req.contains(&format!("backwards are: {triple}")), "agent out of step at frame {}", scene.frame);
        let danger = estimate_danger(&scene);
        let action = policy.act(&scene, &danger).unwrap();
        scene = step(&scene, action).unwrap().next;
        answer(action)
    }
}
