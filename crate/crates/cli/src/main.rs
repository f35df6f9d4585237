//! `proact`: run scenarios, sweeps, metrics, diagrams and the golden replay.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use proact_core::config::{Condition, Config, PolicyKind, ScriptFile, TaskConfig};
use proact_core::harness::golden::{self, frozen_log};
use proact_core::harness::sweep::{self, grid, summarize, summary_csv};
use proact_core::harness::{diagram, ethogram_svg, metrics, run_with, RunOptions};
use proact_core::log::EventLog;
use proact_core::reactive::DriveKind;

/// `println!` that tolerates a closed stdout, as when piped into `head`.
macro_rules! emit {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "proact", version, about = "Drive-regulated robot simulation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run(RunArgs),
    /// Run a seeded grid of conditions and partner policies.
    Sweep(SweepArgs),
    /// Compute metrics from an event log.
    Metrics(MetricsArgs),
    /// Render the interaction diagram and ethogram of an event log.
    Render(RenderArgs),
    /// Replay the shipped golden scenario and check its event sequence.
    ReplayGolden(GoldenArgs),
}

#[derive(Args, Clone)]
struct Overrides {
    /// Scenario config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    condition: Option<Condition>,
    /// cooperative, task_driven, silent or script:PATH
    #[arg(long)]
    human: Option<String>,
    #[arg(long)]
    ticks: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    over: Overrides,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Pace ticks against the wall clock.
    #[arg(long)]
    realtime: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Base config; the study setup when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Restrict to one condition.
    #[arg(long)]
    condition: Option<Condition>,
    /// Partner policies, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "cooperative,silent")]
    human: Vec<PolicyKind>,
    /// Number of seeds per cell, starting at 0.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long)]
    ticks: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run cells one after another.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct MetricsArgs {
    /// events.jsonl file.
    log: PathBuf,
    /// Write metrics.json here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    log: PathBuf,
    /// Config whose acquisition threshold is drawn on the ethogram.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct GoldenArgs {
    /// Replace the shipped config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the replayed log as the new frozen log.
    #[arg(long, value_name = "PATH", num_args = 0..=1, default_missing_value = "")]
    bless: Option<PathBuf>,
    /// Save the replayed log here.
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Render(a) => cmd_render(a),
        Command::ReplayGolden(a) => cmd_replay_golden(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Ok(Config::load(p)?),
        None => Ok(Config::default()),
    }
}

fn apply(cfg: &mut Config, o: &Overrides) -> Result<()> {
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(c) = o.condition {
        cfg.condition = c;
    }
    if let Some(t) = o.ticks {
        cfg.ticks = t;
    }
    if let Some(h) = &o.human {
        if let Some(path) = h.strip_prefix("script:") {
            let script = ScriptFile::load(Path::new(path))?;
            cfg.policy.kind = PolicyKind::Script;
            cfg.policy.script = script.inputs;
        } else {
            cfg.policy.kind = h.parse().map_err(anyhow::Error::msg)?;
        }
    }
    if cfg.policy.kind == PolicyKind::TaskDriven && cfg.task.is_none() {
        let task = TaskConfig::default();
        if task.goal.keys().all(|l| cfg.objects.iter().any(|o| &o.label == l)) {
            info!("task_driven partner without a task; using the default goal");
            cfg.task = Some(task);
        }
    }
    Ok(())
}

fn read_log(path: &Path) -> Result<EventLog> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    EventLog::from_jsonl(&text).with_context(|| format!("{}", path.display()))
}

fn cmd_run(a: RunArgs) -> Result<u8> {
    let mut cfg = load_config(a.over.config.as_deref())?;
    apply(&mut cfg, &a.over)?;
    let out = run_with(&cfg, RunOptions { realtime: a.realtime })?;
    out.write_artifacts(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    info!("wrote artifacts to {}", a.out.display());
    emit!(
        "{}: {:?} after {} ticks, {} events",
        cfg.name,
        out.status,
        out.ticks,
        out.log.len()
    );
    emit!("{}", out.metrics.to_json());
    Ok(out.status.exit_code() as u8)
}

fn cmd_sweep(a: SweepArgs) -> Result<u8> {
    let mut base = match &a.config {
        Some(p) => Config::load(p)?,
        None => sweep::study_config(),
    };
    if let Some(t) = a.ticks {
        base.ticks = t;
    }
    if a.human.contains(&PolicyKind::Script) && base.policy.script.is_empty() {
        bail!("the script policy needs a base config with [[policy.script]] entries");
    }
    let conditions = match a.condition {
        Some(c) => vec![c],
        None => vec![Condition::Slow, Condition::Medium, Condition::Fast],
    };
    let cells = grid(&conditions, &a.human, 0..a.seeds);
    info!("running {} cells", cells.len());
    let results = if a.sequential {
        sweep::sweep_sequential(&base, &cells)
    } else {
        sweep::sweep(&base, &cells)
    };
    std::fs::create_dir_all(&a.out)?;
    let mut lines = String::new();
    for r in &results {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    std::fs::write(a.out.join("cells.jsonl"), lines)?;
    let csv = summary_csv(&summarize(&results));
    std::fs::write(a.out.join("summary.csv"), &csv)?;
    emit!("{}", csv.trim_end());
    Ok(0)
}

fn cmd_metrics(a: MetricsArgs) -> Result<u8> {
    let log = read_log(&a.log)?;
    let json = metrics(&log).to_json();
    match a.out {
        Some(p) => std::fs::write(&p, json).with_context(|| format!("writing {}", p.display()))?,
        None => emit!("{json}"),
    }
    Ok(0)
}

fn cmd_render(a: RenderArgs) -> Result<u8> {
    let log = read_log(&a.log)?;
    let cfg = load_config(a.config.as_deref())?;
    let threshold = cfg.drive_spec(DriveKind::KnowledgeAcquisition).threshold;
    std::fs::create_dir_all(&a.out)?;
    let d = diagram(&log);
    std::fs::write(a.out.join("diagram.csv"), d.to_csv())?;
    std::fs::write(a.out.join("diagram.svg"), d.to_svg())?;
    std::fs::write(a.out.join("ethogram.svg"), ethogram_svg(&log, threshold))?;
    emit!("{} bars written to {}", d.bars.len(), a.out.display());
    Ok(0)
}

fn default_golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets/golden.jsonl")
}

fn cmd_replay_golden(a: GoldenArgs) -> Result<u8> {
    let mut cfg = match &a.config {
        Some(p) => Config::load(p)?,
        None => golden::golden_config(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let frozen = frozen_log();
    let compare = a.config.is_none() && a.seed.is_none() && a.bless.is_none();
    let report = golden::replay(&cfg, compare.then_some(&frozen))?;
    for s in &report.steps {
        emit!("step {} ok at {:.1} s: {}", s.step, s.time_s, s.name);
    }
    if let Some(p) = &a.out {
        std::fs::write(p, report.log.to_jsonl())?;
    }
    if let Some(f) = &report.failure {
        emit!("FAIL {f}");
        return Ok(1);
    }
    if let Some(d) = &report.divergence {
        emit!("FAIL frozen log: {d}");
        return Ok(1);
    }
    if let Some(p) = a.bless {
        let path = if p.as_os_str().is_empty() {
            default_golden_path()
        } else {
            p
        };
        std::fs::write(&path, report.log.to_jsonl())?;
        emit!("blessed {}", path.display());
    }
    emit!("PASS in {:.2?}", report.elapsed);
    Ok(0)
}
