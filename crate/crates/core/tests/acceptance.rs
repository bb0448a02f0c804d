//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always printed:
//! `cargo test -p highway-core --test acceptance`.

mod common;

use std::time::{Duration, Instant};

use proptest::test_runner::{Config, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::codec::{bundle, mirrored_fast_agent};
use common::oracle::{as_array, oracle, random_scene};
use highway_core::bench::{run_benchmark_with_traces, run_episode, seed_range, BenchOptions, BenchReport, DriverSpec};
use highway_core::dataset::{collect_rule_based, dataset_stats, CollectOptions, EVAL_SEEDS};
use highway_core::metrics::{evaluate_episode, MetricsConfig};
use highway_core::policy::{ModePolicy, PolicyThresholds};
use highway_core::prompt::agent::AgentDriver;
use highway_core::prompt::{encode_answer, parse_answer, AnswerBundle};
use highway_core::sim::EndReason;
use highway_core::trace::FrameRecord;
use highway_core::{estimate_danger, Action, DangerLevel, DangerSet, EpisodeTrace, Mode, SimConfig, VehicleState};

const MODES: [Mode; 3] = [Mode::Slow, Mode::Normal, Mode::Fast];
const BATCH_BUDGET: Duration = Duration::from_secs(60);

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// One benchmark batch per mode over the evaluation seeds.
struct Batch {
    reports: Vec<BenchReport>,
    traces: Vec<Vec<EpisodeTrace>>,
    elapsed: Duration,
}

impl Batch {
    fn run() -> Self {
        let seeds = seed_range(EVAL_SEEDS);
        let started = Instant::now();
        let (reports, traces) = MODES
            .iter()
            .map(|&m| {
                run_benchmark_with_traces(&DriverSpec::Mode(m), &seeds, &SimConfig::default(), &BenchOptions::default())
                    .expect("benchmark runs")
            })
            .unzip();
        Self { reports, traces, elapsed: started.elapsed() }
    }

    fn report(&self, mode: Mode) -> &BenchReport {
        &self.reports[MODES.iter().position(|&m| m == mode).unwrap()]
    }
}

fn determinism(first: &Batch, second: &Batch) -> Outcome {
    let mut problems = vec![];
    for (i, mode) in MODES.iter().enumerate() {
        let (a, b) = (&first.reports[i], &second.reports[i]);
        if a.without_runtime() != b.without_runtime() {
            problems.push(format!("{mode:?} reports differ"));
        }
        let hashes = |r: &BenchReport| r.per_seed.iter().map(|s| s.trace_hash.clone()).collect::<Vec<_>>();
        if hashes(a).iter().any(Option::is_none) || hashes(a) != hashes(b) {
            problems.push(format!("{mode:?} trace hashes differ"));
        }
    }
    let detail = format!(
        "90 episodes x2 identical; batch {:.2}s (budget {}s)",
        first.elapsed.as_secs_f64(),
        BATCH_BUDGET.as_secs()
    );
    if first.elapsed >= BATCH_BUDGET {
        problems.push("batch over budget".into());
    }
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", problems.join(", ")))
    }
}

fn danger_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let n = 10_000;
    let mismatches = (0..n)
        .filter(|_| {
            let s = random_scene(&mut rng);
            as_array(&estimate_danger(&s)) != oracle(&s)
        })
        .count();
    check(mismatches == 0, format!("{mismatches} mismatches over {n} random scenes"))
}

fn ego(x: f64, v: f64) -> VehicleState {
    VehicleState { id: 0, x, y: 4.0, v, lane: 1, target_speed: v, is_ego: true }
}

fn synthetic(speeds: &[f64], gaps: &[Option<f64>], actions: &[Action]) -> EpisodeTrace {
    let dt = SimConfig::default().dt();
    let mut x = 0.0;
    let mut states = vec![];
    for &v in speeds {
        states.push(ego(x, v));
        x += v * dt;
    }
    let final_ego = states.pop().unwrap();
    let records = states
        .into_iter()
        .enumerate()
        .map(|(i, s)| FrameRecord {
            frame: i as u32,
            ego: s,
            others: vec![],
            decided_action: actions[i],
            executed_action: actions[i],
            danger: DangerSet::default(),
            front_gap: gaps[i],
            collided: false,
        })
        .collect();
    EpisodeTrace { seed: 0, config: SimConfig::default(), records, final_ego, reason: EndReason::Timeout, fallbacks: 0 }
}

fn metric_identities(batch: &Batch) -> Outcome {
    let cfg = MetricsConfig::default();
    let constant = evaluate_episode(&synthetic(&[20.0; 301], &[None; 300], &[Action::Keep; 300]), &cfg).unwrap();
    let mut problems = vec![];
    if (constant.distance - 600.0).abs() > 1e-9 || (constant.mean_speed - 72.0).abs() > 1e-9 {
        problems.push(format!("constant trace gave {} m, {} km/h", constant.distance, constant.mean_speed));
    }

    // 75 of 300 frames under 5 m, 100 non-KEEP
    let gaps: Vec<Option<f64>> = (0..300).map(|i| Some(if i % 4 == 0 { 4.9 } else { 5.0 })).collect();
    let actions: Vec<Action> = (0..300).map(|i| if i % 3 == 0 { Action::Left } else { Action::Keep }).collect();
    let fractions = evaluate_episode(&synthetic(&[20.0; 301], &gaps, &actions), &cfg).unwrap();
    if fractions.saf != 0.75 || fractions.kep != 200.0 / 300.0 {
        problems.push(format!("fractions saf {} kep {}", fractions.saf, fractions.kep));
    }

    let mut worst = 0.0f64;
    for trace in batch.traces.iter().flatten() {
        let m = evaluate_episode(trace, &cfg).unwrap();
        let integrated = m.a_x * trace.records.len() as f64 * trace.config.dt();
        worst = worst.max((integrated - (trace.final_ego.v - trace.records[0].ego.v)).abs());
    }
    if worst > 1e-9 {
        problems.push(format!("telescoping error {worst:e}"));
    }
    let detail = format!("600 m / 72.00 km/h, saf/kep exact, telescoping error {worst:.1e} over 90 traces");
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(problems.join("; "))
    }
}

fn spe(batch: &Batch, m: Mode) -> f64 {
    batch.report(m).aggregates.spe.unwrap_or(f64::NAN)
}

fn mode_ordering(batch: &Batch) -> Outcome {
    let (s, n, f) = (spe(batch, Mode::Slow), spe(batch, Mode::Normal), spe(batch, Mode::Fast));
    let kep = |m| batch.report(m).aggregates.kep.unwrap_or(f64::NAN);
    let (kn, kf) = (kep(Mode::Normal), kep(Mode::Fast));
    check(
        f - n >= 2.0 && n - s >= 2.0 && kn >= kf,
        format!("Spe fast {f:.2} > normal {n:.2} > slow {s:.2} km/h; Kep normal {kn:.3} >= fast {kf:.3}"),
    )
}

fn safety_ordering(batch: &Batch) -> Outcome {
    let saf = |m| batch.report(m).aggregates.saf.unwrap_or(f64::NAN);
    let (s, f) = (saf(Mode::Slow), saf(Mode::Fast));
    check(s >= f, format!("Saf slow {s:.3} >= fast {f:.3}"))
}

fn danger_correlation(batch: &Batch) -> Outcome {
    let d = |m| batch.report(m).aggregates.action_danger.unwrap_or(f64::NAN);
    let (s, n, f) = (d(Mode::Slow), d(Mode::Normal), d(Mode::Fast));
    check(f > n && n > s, format!("mean selected danger fast {f:.3} > normal {n:.3} > slow {s:.3}"))
}

fn codec() -> Outcome {
    let mut runner = TestRunner::new(Config { cases: 10_000, failure_persistence: None, ..Config::default() });
    runner
        .run(&bundle(), |b| {
            let back = parse_answer(&encode_answer(&b));
            proptest::prop_assert_eq!(back, Ok(b));
            Ok(())
        })
        .map_err(|e| format!("round trip: {e}"))?;

    let lv = DangerLevel::Level;
    let worked = AnswerBundle {
        description: String::new(),
        danger: DangerSet { keep: lv(7), left: lv(1), right: lv(5), faster: lv(9), slower: lv(4) },
        actions: vec![Action::Keep; 11],
    };
    let golden = "<keep> is <7>; <left> is <1>; <right> is <5>; <faster> is <9>; <slower> is <4>.";
    if worked.danger.clause() != golden || !encode_answer(&worked).contains(golden) {
        return Err(format!("clause {:?}", worked.danger.clause()));
    }

    for seed in seed_range(EVAL_SEEDS) {
        let cfg = SimConfig { seed, ..SimConfig::default() };
        let direct = run_episode(&cfg, &mut ModePolicy::new(Mode::Fast, PolicyThresholds::default()))
            .map_err(|e| e.to_string())?;
        let mut agent = AgentDriver::new(Box::new(mirrored_fast_agent(cfg.clone())), Mode::Fast, seed);
        let via_text = run_episode(&cfg, &mut agent).map_err(|e| e.to_string())?;
        if via_text.hash() != direct.hash() || via_text.fallbacks != 0 {
            return Err(format!("differential trace mismatch on seed {seed}"));
        }
    }
    Ok("10000 round trips, worked-example clause byte-exact, FAST via text identical on 30 seeds".into())
}

fn dataset() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let started = Instant::now();
    let manifest = collect_rule_based(&SimConfig::default(), 1000, 100, dir.path(), &CollectOptions::default())
        .map_err(|e| e.to_string())?;
    let stats = dataset_stats(dir.path()).map_err(|e| format!("self-verification: {e}"))?;
    let b = &stats.breakdown;
    let keep = b.keep as f64 / b.frames as f64;
    let eval = manifest.shards.iter().flat_map(|s| &s.seeds).filter(|s| EVAL_SEEDS.contains(s)).count();
    check(
        manifest.shards.len() == 100 && manifest.skipped.is_empty() && keep > 0.5 && eval == 0,
        format!(
            "{} clips, {} frames, KEEP {:.2}%, {} eval seeds, {:.1}s",
            manifest.shards.len(),
            b.frames,
            100.0 * keep,
            eval,
            started.elapsed().as_secs_f64()
        ),
    )
}

fn transfer() -> Outcome {
    let seeds = seed_range(EVAL_SEEDS);
    let mut cells = vec![];
    for (lanes, density) in [(4, 2.0), (5, 2.0), (6, 2.0), (6, 3.0)] {
        let cfg = SimConfig { lanes, density, ..SimConfig::default() };
        for mode in MODES {
            let (report, _) =
                run_benchmark_with_traces(&DriverSpec::Mode(mode), &seeds, &cfg, &BenchOptions::default())
                    .map_err(|e| format!("({lanes},{density}) {mode:?}: {e}"))?;
            if let Some(s) = report.per_seed.iter().find(|s| s.error.is_some()) {
                return Err(format!("({lanes},{density}) {mode:?} seed {}: {}", s.seed, s.error.as_deref().unwrap()));
            }
        }
        cells.push(format!("({lanes},{density})"));
    }
    Ok(format!("{} x 3 modes x 30 seeds completed", cells.join(" ")))
}

fn main() {
    let first = Batch::run();
    let second = Batch::run();
    let results: Vec<(&str, Outcome)> = vec![
        ("determinism", determinism(&first, &second)),
        ("danger-oracle", danger_oracle()),
        ("metric-identities", metric_identities(&first)),
        ("mode-ordering", mode_ordering(&first)),
        ("safety-ordering", safety_ordering(&first)),
        ("danger-mode-correlation", danger_correlation(&first)),
        ("codec", codec()),
        ("dataset", dataset()),
        ("transfer-configs", transfer()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
