use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use highway_core::bench::{self, BenchOptions, DriverSpec, TableFormat};
use highway_core::dataset::{self, CollectOptions};
use highway_core::policy::{Mode, PolicyThresholds};
use highway_core::SimConfig;

#[derive(Parser)]
#[command(name = "highway", version, about = "Highway driving benchmark, dataset and collection tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-loop benchmark runs
    #[command(subcommand)]
    Bench(BenchCmd),
    /// Training shard generation and inspection
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Human driving session server
    #[command(subcommand)]
    Collect(CollectCmd),
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 4)]
    lanes: usize,
    #[arg(long, default_value_t = 2.0)]
    density: f64,
    /// Number of vehicles including the ego
    #[arg(long, default_value_t = 30)]
    vehicles: usize,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        SimConfig { lanes: self.lanes, density: self.density, n_vehicles: self.vehicles, ..SimConfig::default() }
    }
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Run one driver over a seed range and write a JSON report
    Run {
        /// slow, normal, fast, expert or agent:<uri> (stdio:<command> or http://...)
        #[arg(long)]
        mode: String,
        /// Seeds as a..b (end excluded), a..=b, or a comma list
        #[arg(long, default_value = "0..30")]
        seeds: String,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the aggregate table
        #[arg(long)]
        table: bool,
        /// TOML file overriding policy thresholds
        #[arg(long)]
        policy_config: Option<PathBuf>,
        /// Personalized instruction sent to agents
        #[arg(long, default_value = "normal")]
        persona: Mode,
        /// Agent answer timeout in seconds
        #[arg(long, default_value_t = 10.0)]
        timeout: f64,
        /// Write BEV frames for agents under this directory
        #[arg(long)]
        images: Option<PathBuf>,
        /// Run episodes one at a time
        #[arg(long)]
        serial: bool,
    },
    /// Render saved reports side by side
    Table {
        reports: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Generate expert clips
    Collect {
        #[arg(long)]
        clips: usize,
        #[arg(long, default_value_t = 1000)]
        seed_start: u64,
        #[arg(long, value_enum, default_value_t = Switch::Off)]
        images: Switch,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        policy_config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify shards against the manifest and print distributions
    Stats {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Subcommand)]
enum CollectCmd {
    /// Serve the session websocket at /ws and the console at /
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

fn thresholds(path: &Option<PathBuf>) -> Result<PolicyThresholds> {
    match path {
        Some(p) => Ok(PolicyThresholds::load(p)?),
        None => Ok(PolicyThresholds::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bench(BenchCmd::Run {
            mode,
            seeds,
            sim,
            out,
            table,
            policy_config,
            persona,
            timeout,
            images,
            serial,
        }) => {
            let mut spec: DriverSpec = mode.parse()?;
            if let DriverSpec::Agent { persona: p, .. } = &mut spec {
                *p = persona;
            }
            let seeds = bench::parse_seeds(&seeds)?;
            let opts = BenchOptions {
                thresholds: thresholds(&policy_config)?,
                parallel: !serial,
                agent_timeout: Duration::from_secs_f64(timeout),
                image_dir: images,
                ..BenchOptions::default()
            };
            let report = bench::run_benchmark(&spec, &seeds, &sim.config(), &opts)?;
            for s in report.per_seed.iter().filter(|s| s.error.is_some()) {
                eprintln!("seed {}: {}", s.seed, s.error.as_deref().unwrap_or_default());
            }
            match &out {
                Some(path) => {
                    fs::write(path, report.to_json()).with_context(|| format!("writing {}", path.display()))?
                }
                None if !table => println!("{}", report.to_json()),
                None => {}
            }
            if table {
                print!("{}", bench::report_table(&report, TableFormat::Text));
            }
            if report.per_seed.iter().any(|s| s.error.is_some()) {
                bail!("some episodes failed");
            }
        }
        Command::Bench(BenchCmd::Table { reports, format }) => {
            let loaded = reports
                .iter()
                .map(|p| {
                    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    bench::BenchReport::from_json(&text).with_context(|| format!("parsing {}", p.display()))
                })
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&bench::BenchReport> = loaded.iter().collect();
            let format = match format {
                Format::Text => TableFormat::Text,
                Format::Json => TableFormat::Json,
            };
            print!("{}", bench::render_table(&refs, format));
        }
        Command::Dataset(DatasetCmd::Collect { clips, seed_start, images, sim, policy_config, out }) => {
            let opts = CollectOptions { images: matches!(images, Switch::On), thresholds: thresholds(&policy_config)? };
            let manifest = dataset::collect_rule_based(&sim.config(), seed_start, clips, &out, &opts)?;
            println!(
                "{} shards, {} frames, {} skipped clips -> {}",
                manifest.shards.len(),
                manifest.frames(),
                manifest.skipped.len(),
                out.display()
            );
            if !manifest.skipped.is_empty() {
                bail!("{} clips failed", manifest.skipped.len());
            }
        }
        Command::Dataset(DatasetCmd::Stats { dir, format }) => {
            let stats = dataset::dataset_stats(&dir)?;
            match format {
                Format::Text => print!("{}", stats.render_text()),
                Format::Json => println!("{}", serde_json::to_string_pretty(&stats)?),
            }
        }
        Command::Collect(CollectCmd::Serve { bind, out, static_dir }) => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&bind).await.with_context(|| format!("binding {bind}"))?;
                let mut cfg = highway_collector::ServerConfig::new(out);
                cfg.static_dir = static_dir;
                highway_collector::serve(listener, cfg).await?;
                Ok::<_, anyhow::Error>(())
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
