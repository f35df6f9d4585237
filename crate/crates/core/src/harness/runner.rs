//! Runs one scenario: an engine, a partner policy and a tick budget.

use std::io;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::engine::{Engine, EngineError};
use crate::log::EventLog;
use crate::reactive::DriveKind;

use super::diagram::{diagram, ethogram_svg};
use super::metrics::{metrics, Metrics};
use super::policy::{self, Policy, PolicyView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// The task goal configuration was reached.
    Completed,
    /// The budget ran out with the task unmet.
    BudgetExhausted,
    /// No task configured; the budget ran out as planned.
    Finished,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Completed | RunStatus::Finished => 0,
            RunStatus::BudgetExhausted => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: EventLog,
    pub metrics: Metrics,
    pub status: RunStatus,
    pub ticks: u64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Sleep so that one tick takes `tick_length` of wall time.
    pub realtime: bool,
}

/// Advance `engine` under `policy` for at most `ticks` ticks.
pub fn drive(engine: &mut Engine, policy: &mut dyn Policy, ticks: u64, opts: RunOptions) -> RunStatus {
    let stop = engine.config().task.as_ref().is_some_and(|t| t.stop_on_complete);
    let period = Duration::from_secs_f64(engine.config().tick_length);
    let started = Instant::now();
    for n in 0..ticks {
        let fresh = engine.step().to_vec();
        let view = PolicyView {
            tick: engine.tick(),
            tick_length: engine.config().tick_length,
            world: engine.world(),
            robot_idle: engine.is_idle(),
            idle_since: engine.idle_since(),
            pending_goals: engine.has_pending_goals(),
            task_completed: engine.task_completed(),
        };
        for input in policy.poll(&view, &fresh) {
            engine.submit(input);
        }
        if stop && engine.task_completed() {
            break;
        }
        if opts.realtime {
            let due = period * (n as u32 + 1);
            if let Some(wait) = due.checked_sub(started.elapsed()) {
                std::thread::sleep(wait);
            }
        }
    }
    match (engine.has_task(), engine.task_completed()) {
        (true, true) => RunStatus::Completed,
        (true, false) => RunStatus::BudgetExhausted,
        (false, _) => RunStatus::Finished,
    }
}

pub fn run(cfg: &Config) -> Result<RunOutput, EngineError> {
    run_with(cfg, RunOptions::default())
}

pub fn run_with(cfg: &Config, opts: RunOptions) -> Result<RunOutput, EngineError> {
    let mut engine = Engine::new(cfg.clone())?;
    let mut p = policy::from_config(cfg);
    let status = drive(&mut engine, p.as_mut(), cfg.ticks, opts);
    let ticks = engine.tick();
    let log = engine.into_log();
    Ok(RunOutput {
        metrics: metrics(&log),
        log,
        status,
        ticks,
        threshold: cfg.drive_spec(DriveKind::KnowledgeAcquisition).threshold,
    })
}

impl RunOutput {
    /// Writes `events.jsonl`, `metrics.json`, `diagram.csv`, `diagram.svg`
    /// and `ethogram.svg` into `dir`.
    pub fn write_artifacts(&self, dir: &Path) -> io::Result<()> {
        write_artifacts(&self.log, self.threshold, dir)
    }
}

pub fn write_artifacts(log: &EventLog, threshold: f64, dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("events.jsonl"), log.to_jsonl())?;
    std::fs::write(dir.join("metrics.json"), metrics(log).to_json())?;
    let d = diagram(log);
    std::fs::write(dir.join("diagram.csv"), d.to_csv())?;
    std::fs::write(dir.join("diagram.svg"), d.to_svg())?;
    std::fs::write(dir.join("ethogram.svg"), ethogram_svg(log, threshold))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_tick_budget_gives_empty_log() {
        let cfg = Config {
            ticks: 0,
            ..Default::default()
        };
        let out = run(&cfg).unwrap();
        assert!(out.log.is_empty());
        assert_eq!(out.status, RunStatus::Finished);
        assert_eq!(out.status.exit_code(), 0);
    }
}
