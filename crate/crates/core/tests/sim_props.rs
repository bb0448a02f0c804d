use proptest::prelude::*;

use highway_core::sim::{boxes_overlap, spawn_scene, step, EndReason};
use highway_core::{Action, SimConfig};

fn config() -> impl Strategy<Value = SimConfig> {
    (any::<u64>(), 2usize..=6, 0.5f64..=2.5, 2usize..=40).prop_map(|(seed, lanes, density, n_vehicles)| SimConfig {
        seed,
        lanes,
        density,
        n_vehicles,
        ..SimConfig::default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn spawned_vehicles_never_overlap(cfg in config()) {
        let scene = spawn_scene(&cfg).unwrap();
        let all: Vec<_> = scene.vehicles().collect();
        prop_assert_eq!(all.len(), cfg.n_vehicles);
        for (i, a) in all.iter().enumerate() {
            prop_assert!(a.lane < cfg.lanes);
            prop_assert!(a.v >= 0.0 && a.v <= cfg.v_max);
            for b in &all[i + 1..] {
                prop_assert!(!boxes_overlap(a, b, &cfg), "{:?} overlaps {:?}", a, b);
            }
        }
    }

    #[test]
    fn spawn_is_a_function_of_the_config(cfg in config()) {
        prop_assert_eq!(spawn_scene(&cfg).unwrap(), spawn_scene(&cfg).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stepping_keeps_state_valid(
        seed in any::<u64>(),
        actions in prop::collection::vec(prop::sample::select(Action::ALL.to_vec()), 300),
    ) {
        let cfg = SimConfig { seed, ..SimConfig::default() };
        let (lo, hi) = cfg.road_bounds();
        let mut scene = spawn_scene(&cfg).unwrap();
        for (i, &a) in actions.iter().enumerate() {
            let r = step(&scene, a).unwrap();
            prop_assert_eq!(r.next.frame, i as u32 + 1);
            prop_assert!(r.next.ego.x >= scene.ego.x);
            for v in r.next.vehicles() {
                prop_assert!(v.v >= 0.0 && v.v <= cfg.v_max);
                prop_assert!(v.lane < cfg.lanes);
                prop_assert!(v.y >= lo && v.y <= hi);
            }
            prop_assert_eq!(r.done, r.reason != EndReason::Running);
            prop_assert_eq!(r.collided || r.off_road, r.reason == EndReason::Crash);
            scene = r.next;
            if r.done {
                prop_assert!(step(&scene, Action::Keep).is_err());
                break;
            }
        }
        prop_assert!(scene.is_terminal());
    }
}
