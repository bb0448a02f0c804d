//! Training shards: rule-based clip collection, human session ingestion and
//! shard statistics.
//!
//! Directory layout under the dataset root:
//!
//! ```text
//! manifest.json                      written last
//! rule/clip-001000.jsonl             one Sample per line, one file per clip
//! human/human.jsonl                  appended per scored session
//! images/clip-001000/frame-0000.png  only with images enabled
//! sessions/<id>.json                 raw human session logs
//! ```

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::danger::estimate_danger;
use crate::policy::{action_sequence, Driver, EgoStateQueue, ExpertPolicy, Mode, PolicyError, PolicyThresholds};
use crate::prompt::{build_prompt, describe_scene, encode_answer, parse_answer, AnswerBundle, ANSWER_ACTIONS};
use crate::sim::{render_bev, spawn_scene, step, Action, EndReason, Pose, SimConfig, SimError};
use crate::trace::EpisodeTrace;

/// Seeds reserved for evaluation; never used for training shards.
pub const EVAL_SEEDS: Range<u64> = 0..30;
pub const MANIFEST: &str = "manifest.json";
pub const HUMAN_SHARD: &str = "human/human.jsonl";
const TRAIL_LEN: usize = 10;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("seed {0} is reserved for evaluation")]
    EvalSeed(u64),
    #[error("session has no score")]
    ScoreMissing,
    #[error("score {0} is outside 1..=3")]
    ScoreInvalid(u8),
    #[error("session log ends before a terminal frame")]
    TruncatedSession,
    #[error("manifest does not match shards: {}", .0.join(", "))]
    ManifestMismatch(Vec<String>),
    #[error("{path}:{line}: {message}")]
    BadSample { path: PathBuf, line: usize, message: String },
    #[error("label {label} disagrees with executed {executed} at frame {frame}")]
    LabelMismatch { frame: u32, label: Action, executed: Action },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Rule,
    Human,
}

/// One prompt/answer training pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub clip_id: String,
    pub seed: u64,
    pub frame: u32,
    pub prompt: String,
    /// Relative to the dataset root.
    pub image_path: Option<String>,
    pub answer: String,
    pub mode: Option<Mode>,
    /// Human rating 1..=3; only on human samples.
    pub score: Option<u8>,
    pub provenance: Provenance,
    /// The episode ended in a crash or was cut short.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardEntry {
    /// Relative to the dataset root.
    pub file: String,
    pub provenance: Provenance,
    pub clips: usize,
    pub frames: usize,
    pub seeds: Vec<u64>,
    /// First-action label counts, keyed by token.
    pub action_histogram: BTreeMap<String, usize>,
    pub mode_histogram: BTreeMap<String, usize>,
    pub score_histogram: BTreeMap<String, usize>,
    pub config_hashes: Vec<String>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DatasetManifest {
    pub shards: Vec<ShardEntry>,
    /// Clips that failed and were left out, with the reason.
    #[serde(default)]
    pub skipped: Vec<(u64, String)>,
}

impl DatasetManifest {
    pub fn frames(&self) -> usize {
        self.shards.iter().map(|s| s.frames).sum()
    }

    pub fn action_histogram(&self) -> BTreeMap<String, usize> {
        let mut h = BTreeMap::new();
        for s in &self.shards {
            for (k, v) in &s.action_histogram {
                *h.entry(k.clone()).or_default() += v;
            }
        }
        h
    }

    pub fn load(root: &Path) -> Result<Option<Self>, DatasetError> {
        let path = root.join(MANIFEST);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(Some(serde_json::from_str(&text)?)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    fn upsert(&mut self, entry: ShardEntry) {
        self.shards.retain(|s| s.file != entry.file);
        self.shards.push(entry);
        self.shards.sort_by(|a, b| a.file.cmp(&b.file));
    }

    fn save(&self, root: &Path) -> Result<(), DatasetError> {
        let text = serde_json::to_string_pretty(self)?;
        write_atomic(&root.join(MANIFEST), text.as_bytes())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn sample_line(s: &Sample) -> String {
    serde_json::to_string(s).expect("sample serializes")
}

/// Build a shard entry from the raw bytes of a JSONL shard.
fn summarize(file: &str, bytes: &[u8], config_hashes: Vec<String>) -> Result<ShardEntry, DatasetError> {
    let mut entry = ShardEntry {
        file: file.to_string(),
        provenance: Provenance::Rule,
        clips: 0,
        frames: 0,
        seeds: vec![],
        action_histogram: BTreeMap::new(),
        mode_histogram: BTreeMap::new(),
        score_histogram: BTreeMap::new(),
        config_hashes,
        sha256: hex::encode(Sha256::digest(bytes)),
    };
    let mut clips = BTreeSet::new();
    let mut seeds = BTreeSet::new();
    for (i, line) in bytes.split(|&b| b == b'\n').enumerate() {
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| DatasetError::BadSample { path: file.into(), line: i + 1, message };
        let s: Sample = serde_json::from_slice(line).map_err(|e| bad(e.to_string()))?;
        let answer = parse_answer(&s.answer).map_err(|e| bad(e.to_string()))?;
        entry.provenance = s.provenance;
        entry.frames += 1;
        clips.insert(s.clip_id.clone());
        seeds.insert(s.seed);
        *entry.action_histogram.entry(answer.first_action().token().to_string()).or_default() += 1;
        if let Some(m) = s.mode {
            *entry.mode_histogram.entry(m.name().to_string()).or_default() += 1;
        }
        if let Some(sc) = s.score {
            *entry.score_histogram.entry(sc.to_string()).or_default() += 1;
        }
    }
    entry.clips = clips.len();
    entry.seeds = seeds.into_iter().collect();
    Ok(entry)
}

pub fn clip_id(seed: u64) -> String {
    format!("clip-{seed:06}")
}

#[derive(Debug, Clone, Default)]
pub struct CollectOptions {
    pub images: bool,
    pub thresholds: PolicyThresholds,
}

/// Samples of one expert-driven clip, in frame order.
pub fn rule_clip_samples(
    config: &SimConfig,
    root: Option<&Path>,
    thresholds: &PolicyThresholds,
) -> Result<Vec<Sample>, DatasetError> {
    let seed = config.seed;
    let id = clip_id(seed);
    let mut driver = ExpertPolicy::new(seed, thresholds.clone());
    let mode = driver.mode_label();
    let mut scene = spawn_scene(config)?;
    let mut queue = EgoStateQueue::default();
    let mut trail: VecDeque<Pose> = VecDeque::new();
    let mut samples = Vec::with_capacity(config.total_frames() as usize);
    let mut pending: Vec<(u32, String, String, Option<String>)> = vec![];

    loop {
        queue.push(scene.ego.v, scene.ego.x, scene.ego.y);
        let danger = estimate_danger(&scene);
        let labels = action_sequence(&driver, &scene, ANSWER_ACTIONS - 1)?;
        let prompt = build_prompt(mode, &queue, seed, scene.frame).expect("queue is not empty");
        let answer = AnswerBundle { description: describe_scene(&scene, &danger), danger, actions: labels };

        let image_path = match root {
            Some(root) => {
                let rel = format!("images/{id}/frame-{:04}.png", scene.frame);
                let history: Vec<Pose> = trail.iter().copied().collect();
                let path = root.join(&rel);
                if let Some(dir) = path.parent() {
                    fs::create_dir_all(dir).map_err(io_err(dir))?;
                }
                render_bev(&scene, &history)
                    .save_png(&path)
                    .map_err(|e| DatasetError::Io { path: path.clone(), source: io::Error::other(e.to_string()) })?;
                Some(rel)
            }
            None => None,
        };
        trail.push_front(scene.ego.pose());
        trail.truncate(TRAIL_LEN);

        let decided = driver.act(&scene, &answer.danger)?;
        let result = step(&scene, decided)?;
        if result.executed != answer.actions[0] {
            return Err(DatasetError::LabelMismatch {
                frame: scene.frame,
                label: answer.actions[0],
                executed: result.executed,
            });
        }
        pending.push((scene.frame, prompt.text(), encode_answer(&answer), image_path));
        scene = result.next;
        if result.done {
            break;
        }
    }

    let truncated = scene.status == EndReason::Crash;
    for (frame, prompt, answer, image_path) in pending {
        samples.push(Sample {
            clip_id: id.clone(),
            seed,
            frame,
            prompt,
            image_path,
            answer,
            mode: Some(mode),
            score: None,
            provenance: Provenance::Rule,
            truncated,
        });
    }
    Ok(samples)
}

fn collect_clip(config: &SimConfig, root: &Path, opts: &CollectOptions) -> Result<ShardEntry, DatasetError> {
    let image_root = opts.images.then_some(root);
    let samples = rule_clip_samples(config, image_root, &opts.thresholds)?;
    let mut body = String::new();
    for s in &samples {
        body.push_str(&sample_line(s));
        body.push('\n');
    }
    let rel = format!("rule/{}.jsonl", clip_id(config.seed));
    write_atomic(&root.join(&rel), body.as_bytes())?;
    summarize(&rel, body.as_bytes(), vec![config.config_hash()])
}

/// Collect `n_clips` expert clips starting at `seed_start` into `root`.
///
/// Clips run in parallel and each lands in its own file. A clip that fails is
/// logged, recorded under `skipped` and left out of the manifest, which is
/// written last.
pub fn collect_rule_based(
    config: &SimConfig,
    seed_start: u64,
    n_clips: usize,
    root: &Path,
    opts: &CollectOptions,
) -> Result<DatasetManifest, DatasetError> {
    config.validate()?;
    let seeds: Vec<u64> = (seed_start..seed_start + n_clips as u64).collect();
    if let Some(&s) = seeds.iter().find(|s| EVAL_SEEDS.contains(s)) {
        return Err(DatasetError::EvalSeed(s));
    }
    fs::create_dir_all(root.join("rule")).map_err(io_err(root))?;

    let results: Vec<(u64, Result<ShardEntry, DatasetError>)> =
        seeds.par_iter().map(|&seed| (seed, collect_clip(&config.with_seed(seed), root, opts))).collect();

    let mut manifest = DatasetManifest::load(root)?.unwrap_or_default();
    for (seed, result) in results {
        match result {
            Ok(entry) => {
                manifest.skipped.retain(|(s, _)| *s != seed);
                manifest.upsert(entry);
            }
            Err(e) => {
                log::error!("clip {seed}: {e}");
                let partial = root.join(format!("rule/{}.jsonl", clip_id(seed)));
                let _ = fs::remove_file(&partial);
                manifest.shards.retain(|s| !s.seeds.contains(&seed) || s.provenance != Provenance::Rule);
                manifest.skipped.push((seed, e.to_string()));
            }
        }
    }
    manifest.save(root)?;
    Ok(manifest)
}

/// Mode used for the personalized prompt of a human sample with `score`.
pub fn score_mode(score: u8) -> Result<Mode, DatasetError> {
    match score {
        1 => Ok(Mode::Slow),
        2 => Ok(Mode::Normal),
        3 => Ok(Mode::Fast),
        other => Err(DatasetError::ScoreInvalid(other)),
    }
}

/// Samples for a finished human session. Future-action labels come from the
/// actions the human actually executed, padded with KEEP past the end.
pub fn human_session_samples(
    session_id: &str,
    trace: &EpisodeTrace,
    score: Option<u8>,
) -> Result<Vec<Sample>, DatasetError> {
    let score = score.ok_or(DatasetError::ScoreMissing)?;
    let mode = score_mode(score)?;
    if !trace.is_complete() {
        return Err(DatasetError::TruncatedSession);
    }
    if EVAL_SEEDS.contains(&trace.seed) {
        return Err(DatasetError::EvalSeed(trace.seed));
    }
    let truncated = trace.collided() || trace.records.len() < trace.config.total_frames() as usize;
    let executed: Vec<Action> = trace.executed_actions().collect();
    let mut queue = EgoStateQueue::default();
    let mut out = Vec::with_capacity(trace.records.len());
    for (i, r) in trace.records.iter().enumerate() {
        queue.push(r.ego.v, r.ego.x, r.ego.y);
        let scene = r.scene(&trace.config);
        let actions: Vec<Action> =
            (i..i + ANSWER_ACTIONS).map(|j| executed.get(j).copied().unwrap_or(Action::Keep)).collect();
        let answer = AnswerBundle { description: describe_scene(&scene, &r.danger), danger: r.danger, actions };
        let prompt = build_prompt(mode, &queue, trace.seed, r.frame).expect("queue is not empty");
        out.push(Sample {
            clip_id: format!("human-{session_id}"),
            seed: trace.seed,
            frame: r.frame,
            prompt: prompt.text(),
            image_path: None,
            answer: encode_answer(&answer),
            mode: Some(mode),
            score: Some(score),
            provenance: Provenance::Human,
            truncated,
        });
    }
    Ok(out)
}

/// Append a scored session to the human shard and refresh the manifest.
/// Callers must serialize ingestion into one root.
pub fn ingest_human_session(
    root: &Path,
    session_id: &str,
    trace: &EpisodeTrace,
    score: Option<u8>,
) -> Result<usize, DatasetError> {
    let samples = human_session_samples(session_id, trace, score)?;
    let path = root.join(HUMAN_SHARD);
    let dir = path.parent().expect("shard has a parent");
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut body = String::new();
    for s in &samples {
        body.push_str(&sample_line(s));
        body.push('\n');
    }
    let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
    f.write_all(body.as_bytes()).map_err(io_err(&path))?;
    f.sync_all().map_err(io_err(&path))?;
    drop(f);

    let mut manifest = DatasetManifest::load(root)?.unwrap_or_default();
    let mut hashes: BTreeSet<String> = manifest
        .shards
        .iter()
        .find(|s| s.file == HUMAN_SHARD)
        .map(|s| s.config_hashes.iter().cloned().collect())
        .unwrap_or_default();
    hashes.insert(trace.config.config_hash());
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    manifest.upsert(summarize(HUMAN_SHARD, &bytes, hashes.into_iter().collect())?);
    manifest.save(root)?;
    Ok(samples.len())
}

/// Store a raw session log under `sessions/`.
pub fn save_session_log(root: &Path, session_id: &str, trace: &EpisodeTrace) -> Result<PathBuf, DatasetError> {
    let path = root.join("sessions").join(format!("{session_id}.json"));
    write_atomic(&path, serde_json::to_string(trace)?.as_bytes())?;
    Ok(path)
}

/// Read every sample of a JSONL shard.
pub fn read_samples(path: &Path) -> Result<Vec<Sample>, DatasetError> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut out = vec![];
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DatasetError::BadSample {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// The three distribution breakdowns of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub frames: usize,
    pub keep: usize,
    pub non_keep: usize,
    /// Share of each non-KEEP action among all non-KEEP labels.
    pub non_keep_shares: BTreeMap<String, f64>,
    /// Human non-KEEP label counts per score.
    pub human_non_keep_by_score: BTreeMap<String, BTreeMap<String, usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub manifest: DatasetManifest,
    pub breakdown: Breakdown,
}

impl DatasetStats {
    pub fn render_text(&self) -> String {
        let b = &self.breakdown;
        let pct = |n: usize| if b.frames == 0 { 0.0 } else { 100.0 * n as f64 / b.frames as f64 };
        let mut out = String::new();
        writeln!(out, "shards: {}  frames: {}", self.manifest.shards.len(), b.frames).unwrap();
        writeln!(out, "\nKEEP vs rest").unwrap();
        writeln!(out, "  <keep>  {:>8}  {:6.2}%", b.keep, pct(b.keep)).unwrap();
        writeln!(out, "  other   {:>8}  {:6.2}%", b.non_keep, pct(b.non_keep)).unwrap();
        writeln!(out, "\nnon-KEEP actions").unwrap();
        for (action, share) in &b.non_keep_shares {
            writeln!(out, "  {action:<9} {:6.2}%", 100.0 * share).unwrap();
        }
        if !b.human_non_keep_by_score.is_empty() {
            writeln!(out, "\nhuman non-KEEP actions by score").unwrap();
            for (score, hist) in &b.human_non_keep_by_score {
                let cells: Vec<String> = hist.iter().map(|(a, n)| format!("{a} {n}")).collect();
                writeln!(out, "  score {score}: {}", cells.join(", ")).unwrap();
            }
        }
        out
    }
}

/// Recompute every shard from its raw JSONL and compare with the manifest.
pub fn dataset_stats(root: &Path) -> Result<DatasetStats, DatasetError> {
    let manifest = DatasetManifest::load(root)?
        .ok_or_else(|| DatasetError::ManifestMismatch(vec![format!("{} missing", MANIFEST)]))?;

    let mut bad = vec![];
    let mut on_disk: BTreeSet<String> = BTreeSet::new();
    for sub in ["rule", "human"] {
        let Ok(entries) = fs::read_dir(root.join(sub)) else { continue };
        for e in entries.flatten() {
            let name = e.file_name().to_string_lossy().into_owned();
            if name.ends_with(".jsonl") {
                on_disk.insert(format!("{sub}/{name}"));
            }
        }
    }
    let listed: BTreeSet<String> = manifest.shards.iter().map(|s| s.file.clone()).collect();
    bad.extend(on_disk.difference(&listed).map(|f| format!("{f} (not in manifest)")));

    let mut breakdown = Breakdown {
        frames: 0,
        keep: 0,
        non_keep: 0,
        non_keep_shares: BTreeMap::new(),
        human_non_keep_by_score: BTreeMap::new(),
    };
    let mut non_keep_counts: BTreeMap<String, usize> = BTreeMap::new();
    for entry in &manifest.shards {
        let path = root.join(&entry.file);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(_) => {
                bad.push(format!("{} (missing)", entry.file));
                continue;
            }
        };
        let recomputed = match summarize(&entry.file, &bytes, entry.config_hashes.clone()) {
            Ok(r) => r,
            Err(e) => {
                bad.push(format!("{} ({e})", entry.file));
                continue;
            }
        };
        if &recomputed != entry {
            bad.push(entry.file.clone());
            continue;
        }
        if entry.provenance == Provenance::Rule && entry.seeds.iter().any(|s| EVAL_SEEDS.contains(s)) {
            bad.push(format!("{} (contains evaluation seeds)", entry.file));
            continue;
        }
        for s in read_samples(&path)? {
            let first = parse_answer(&s.answer).expect("validated above").first_action();
            breakdown.frames += 1;
            if first == Action::Keep {
                breakdown.keep += 1;
                continue;
            }
            breakdown.non_keep += 1;
            *non_keep_counts.entry(first.token().to_string()).or_default() += 1;
            if let (Provenance::Human, Some(score)) = (s.provenance, s.score) {
                *breakdown
                    .human_non_keep_by_score
                    .entry(score.to_string())
                    .or_default()
                    .entry(first.token().to_string())
                    .or_default() += 1;
            }
        }
    }
    if !bad.is_empty() {
        return Err(DatasetError::ManifestMismatch(bad));
    }
    breakdown.non_keep_shares =
        non_keep_counts.into_iter().map(|(a, n)| (a, n as f64 / breakdown.non_keep as f64)).collect();
    Ok(DatasetStats { manifest, breakdown })
}
