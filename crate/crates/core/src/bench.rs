//! Closed-loop benchmark runner and result tables.

use std::fmt::{self, Write as _};
use std::ops::Range;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::danger::estimate_danger;
use crate::metrics::{evaluate_episode, EpisodeMetrics, MetricsConfig};
use crate::policy::{Driver, ExpertPolicy, Mode, ModePolicy, PolicyError, PolicyThresholds};
use crate::prompt::agent::{self, AgentDriver, DEFAULT_TIMEOUT};
use crate::sim::{spawn_scene, step, SimConfig, SimError};
use crate::trace::{EpisodeTrace, FrameRecord};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no seeds to run")]
    NoSeeds,
    #[error("bad seed range {0:?}")]
    BadSeeds(String),
    #[error("bad driver spec {0:?}")]
    BadDriver(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Which driver to benchmark.
#[derive(Debug, Clone, PartialEq)]
pub enum DriverSpec {
    Mode(Mode),
    Expert,
    /// External agent at `uri`, prompted with `persona`.
    Agent {
        uri: String,
        persona: Mode,
    },
}

impl fmt::Display for DriverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriverSpec::Mode(m) => write!(f, "{}", m.name().to_lowercase()),
            DriverSpec::Expert => f.write_str("expert"),
            DriverSpec::Agent { uri, .. } => write!(f, "agent:{uri}"),
        }
    }
}

impl FromStr for DriverSpec {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(uri) = s.strip_prefix("agent:") {
            if uri.is_empty() {
                return Err(BenchError::BadDriver(s.to_string()));
            }
            return Ok(DriverSpec::Agent { uri: uri.to_string(), persona: Mode::Normal });
        }
        if s.eq_ignore_ascii_case("expert") {
            return Ok(DriverSpec::Expert);
        }
        s.parse::<Mode>().map(DriverSpec::Mode).map_err(|_| BenchError::BadDriver(s.to_string()))
    }
}

/// Parse `a..b` (half-open), `a..=b`, a single seed, or a comma list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, BenchError> {
    let bad = || BenchError::BadSeeds(s.to_string());
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(BenchError::NoSeeds);
    }
    Ok(seeds)
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub thresholds: PolicyThresholds,
    pub metrics: MetricsConfig,
    pub parallel: bool,
    pub agent_timeout: Duration,
    /// Where agent runs write their BEV frames; `None` sends `-` instead.
    pub image_dir: Option<PathBuf>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            thresholds: PolicyThresholds::default(),
            metrics: MetricsConfig::default(),
            parallel: true,
            agent_timeout: DEFAULT_TIMEOUT,
            image_dir: None,
        }
    }
}

/// Build a fresh driver for one episode.
pub fn make_driver(spec: &DriverSpec, seed: u64, opts: &BenchOptions) -> Result<Box<dyn Driver + Send>, BenchError> {
    Ok(match spec {
        DriverSpec::Mode(m) => Box::new(ModePolicy::new(*m, opts.thresholds.clone())),
        DriverSpec::Expert => Box::new(ExpertPolicy::new(seed, opts.thresholds.clone())),
        DriverSpec::Agent { uri, persona } => {
            let transport = agent::connect(uri).map_err(|e| PolicyError::Agent(e.to_string()))?;
            let mut d = AgentDriver::new(transport, *persona, seed).with_timeout(opts.agent_timeout);
            if let Some(dir) = &opts.image_dir {
                d = d.with_images(dir.clone());
            }
            Box::new(d)
        }
    })
}

/// Run one closed-loop episode from `config` (its seed included) to termination.
pub fn run_episode(config: &SimConfig, driver: &mut dyn Driver) -> Result<EpisodeTrace, BenchError> {
    let mut scene = spawn_scene(config)?;
    let mut records = Vec::with_capacity(config.total_frames() as usize);
    loop {
        let danger = estimate_danger(&scene);
        let decided = driver.act(&scene, &danger)?;
        let result = step(&scene, decided)?;
        records.push(FrameRecord::new(&scene, danger, decided, result.executed, result.collided));
        scene = result.next;
        if result.done {
            return Ok(EpisodeTrace {
                seed: config.seed,
                config: config.clone(),
                records,
                final_ego: scene.ego.clone(),
                reason: result.reason,
                fallbacks: driver.fallbacks(),
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub metrics: Option<EpisodeMetrics>,
    pub trace_hash: Option<String>,
    pub fallbacks: usize,
    pub error: Option<String>,
}

/// Aggregates over an episode population. Everything except `suc`,
/// `episodes`, `runtime` and `action_danger` is averaged over successful
/// episodes only and is `None` when there are none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub episodes: usize,
    pub suc: usize,
    pub dis: Option<f64>,
    pub spe: Option<f64>,
    pub saf: Option<f64>,
    pub kep: Option<f64>,
    pub den: Option<f64>,
    pub a_x: Option<f64>,
    pub j_x: Option<f64>,
    pub a_y: Option<f64>,
    pub j_y: Option<f64>,
    /// Mean wall-clock seconds per frame over all finished episodes.
    pub runtime: Option<f64>,
    /// Mean danger level of the selected action over all finished episodes.
    pub action_danger: Option<f64>,
}

impl Aggregates {
    pub fn from_results(results: &[SeedResult]) -> Self {
        let finished: Vec<&EpisodeMetrics> = results.iter().filter_map(|r| r.metrics.as_ref()).collect();
        let ok: Vec<&EpisodeMetrics> = finished.iter().copied().filter(|m| m.success).collect();
        let avg = |pop: &[&EpisodeMetrics], f: fn(&EpisodeMetrics) -> f64| {
            (!pop.is_empty()).then(|| pop.iter().map(|m| f(m)).sum::<f64>() / pop.len() as f64)
        };
        Self {
            episodes: results.len(),
            suc: ok.len(),
            dis: avg(&ok, |m| m.distance),
            spe: avg(&ok, |m| m.mean_speed),
            saf: avg(&ok, |m| m.saf),
            kep: avg(&ok, |m| m.kep),
            den: avg(&ok, |m| m.den),
            a_x: avg(&ok, |m| m.a_x),
            j_x: avg(&ok, |m| m.j_x),
            a_y: avg(&ok, |m| m.a_y),
            j_y: avg(&ok, |m| m.j_y),
            runtime: avg(&finished, |m| m.wall_runtime_per_frame),
            action_danger: avg(&finished, |m| m.mean_action_danger),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub driver: String,
    pub config: SimConfig,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedResult>,
    pub aggregates: Aggregates,
}

impl BenchReport {
    pub fn empty(driver: impl Into<String>, config: SimConfig) -> Self {
        Self {
            driver: driver.into(),
            config,
            seeds: vec![],
            per_seed: vec![],
            aggregates: Aggregates::from_results(&[]),
        }
    }

    /// Copy with every wall-clock field zeroed, for comparing runs.
    pub fn without_runtime(&self) -> Self {
        let mut r = self.clone();
        for s in &mut r.per_seed {
            if let Some(m) = &mut s.metrics {
                m.wall_runtime_per_frame = 0.0;
            }
        }
        r.aggregates.runtime = r.aggregates.runtime.map(|_| 0.0);
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

fn run_seed(
    spec: &DriverSpec,
    seed: u64,
    config: &SimConfig,
    opts: &BenchOptions,
) -> (SeedResult, Option<EpisodeTrace>) {
    let attempt = || -> Result<(EpisodeMetrics, EpisodeTrace), BenchError> {
        let mut driver = make_driver(spec, seed, opts)?;
        let start = Instant::now();
        let trace = run_episode(&config.with_seed(seed), driver.as_mut())?;
        let elapsed = start.elapsed().as_secs_f64();
        let mut m = evaluate_episode(&trace, &opts.metrics).expect("finished episodes are complete");
        m.wall_runtime_per_frame = elapsed / trace.records.len() as f64;
        Ok((m, trace))
    };
    match attempt() {
        Ok((m, trace)) => (
            SeedResult {
                seed,
                metrics: Some(m),
                trace_hash: Some(trace.hash()),
                fallbacks: trace.fallbacks,
                error: None,
            },
            Some(trace),
        ),
        Err(e) => {
            log::warn!("seed {seed}: {e}");
            (SeedResult { seed, metrics: None, trace_hash: None, fallbacks: 0, error: Some(e.to_string()) }, None)
        }
    }
}

/// Run every seed and also return the finished traces (in seed order).
pub fn run_benchmark_with_traces(
    spec: &DriverSpec,
    seeds: &[u64],
    config: &SimConfig,
    opts: &BenchOptions,
) -> Result<(BenchReport, Vec<EpisodeTrace>), BenchError> {
    if seeds.is_empty() {
        return Err(BenchError::NoSeeds);
    }
    config.validate()?;
    let outcomes: Vec<(SeedResult, Option<EpisodeTrace>)> = if opts.parallel {
        seeds.par_iter().map(|&s| run_seed(spec, s, config, opts)).collect()
    } else {
        seeds.iter().map(|&s| run_seed(spec, s, config, opts)).collect()
    };
    let (per_seed, traces): (Vec<SeedResult>, Vec<Option<EpisodeTrace>>) = outcomes.into_iter().unzip();
    let aggregates = Aggregates::from_results(&per_seed);
    let report = BenchReport {
        driver: spec.to_string(),
        config: config.with_seed(0),
        seeds: seeds.to_vec(),
        per_seed,
        aggregates,
    };
    Ok((report, traces.into_iter().flatten().collect()))
}

pub fn run_benchmark(
    spec: &DriverSpec,
    seeds: &[u64],
    config: &SimConfig,
    opts: &BenchOptions,
) -> Result<BenchReport, BenchError> {
    run_benchmark_with_traces(spec, seeds, config, opts).map(|(r, _)| r)
}

/// Seeds `range` as a vector.
pub fn seed_range(range: Range<u64>) -> Vec<u64> {
    range.collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Text,
    Json,
}

pub const TABLE_COLUMNS: [&str; 11] =
    ["Dis.", "Spe.", "Saf.", "Kep.", "Den.", "Suc.", "Runtime", "a_x", "J_x", "a_y", "J_y"];

fn cell(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.decimals$}"))
}

fn row_cells(a: &Aggregates) -> Vec<String> {
    vec![
        cell(a.dis, 2),
        cell(a.spe, 2),
        cell(a.saf, 3),
        cell(a.kep, 3),
        cell(a.den, 3),
        a.suc.to_string(),
        cell(a.runtime.map(|s| s * 1e3), 4), // ms per frame
        cell(a.a_x, 4),
        cell(a.j_x, 4),
        cell(a.a_y, 4),
        cell(a.j_y, 4),
    ]
}

/// Render one or more reports as a table. Reports with no episodes add no row.
pub fn render_table(reports: &[&BenchReport], format: TableFormat) -> String {
    match format {
        TableFormat::Json => {
            let rows: Vec<serde_json::Value> = reports
                .iter()
                .filter(|r| r.aggregates.episodes > 0)
                .map(|r| serde_json::json!({ "driver": r.driver, "aggregates": r.aggregates }))
                .collect();
            serde_json::to_string_pretty(&serde_json::json!({ "columns": TABLE_COLUMNS, "rows": rows }))
                .expect("table serializes")
        }
        TableFormat::Text => {
            let mut rows: Vec<Vec<String>> = vec![std::iter::once("Driver".to_string())
                .chain(TABLE_COLUMNS.iter().map(|c| c.to_string()))
                .collect()];
            for r in reports.iter().filter(|r| r.aggregates.episodes > 0) {
                rows.push(std::iter::once(r.driver.clone()).chain(row_cells(&r.aggregates)).collect());
            }
            let widths: Vec<usize> =
                (0..rows[0].len()).map(|i| rows.iter().map(|row| row[i].len()).max().unwrap_or(0)).collect();
            let mut out = String::new();
            for row in &rows {
                let line: Vec<String> = row
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                    .collect();
                writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
            }
            out
        }
    }
}

pub fn report_table(report: &BenchReport, format: TableFormat) -> String {
    render_table(&[report], format)
}

/// Parse the JSON table back into (driver, aggregates) rows.
pub fn parse_json_table(s: &str) -> serde_json::Result<Vec<(String, Aggregates)>> {
    #[derive(Deserialize)]
    struct Row {
        driver: String,
        aggregates: Aggregates,
    }
    #[derive(Deserialize)]
    struct Table {
        rows: Vec<Row>,
    }
    let t: Table = serde_json::from_str(s)?;
    Ok(t.rows.into_iter().map(|r| (r.driver, r.aggregates)).collect())
}
