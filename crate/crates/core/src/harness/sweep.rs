//! Seeded policy sweeps over proactivity conditions.
//!
//! Every cell owns its own engine, so cells run independently. With the
//! `parallel` feature cells are spread over a rayon pool; the sequential
//! path is always available and gives identical results.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::{Condition, Config, PolicyKind, TaskConfig};

use super::metrics::Metrics;
use super::runner::{run, RunStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub condition: Condition,
    pub policy: PolicyKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    pub status: RunStatus,
    pub metrics: Metrics,
}

/// The tagging-and-manipulation study setup: three unknown objects, a
/// partner the robot already knows, no body parts.
pub fn study_config() -> Config {
    let mut cfg = Config {
        name: "study".into(),
        task: Some(TaskConfig::default()),
        ..Default::default()
    };
    cfg.human.known = true;
    cfg
}

pub fn grid(
    conditions: &[Condition],
    policies: &[PolicyKind],
    seeds: impl IntoIterator<Item = u64> + Clone,
) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &policy in policies {
        for &condition in conditions {
            for seed in seeds.clone() {
                cells.push(Cell {
                    condition,
                    policy,
                    seed,
                });
            }
        }
    }
    cells
}

pub fn cell_config(base: &Config, cell: Cell) -> Config {
    let mut cfg = base.clone();
    cfg.condition = cell.condition;
    cfg.policy.kind = cell.policy;
    cfg.seed = cell.seed;
    cfg.abm.dir = None;
    cfg
}

pub fn run_cell(base: &Config, cell: Cell) -> CellResult {
    let out = run(&cell_config(base, cell)).expect("sweep base config is valid");
    CellResult {
        cell,
        status: out.status,
        metrics: out.metrics,
    }
}

pub fn sweep_sequential(base: &Config, cells: &[Cell]) -> Vec<CellResult> {
    cells.iter().map(|c| run_cell(base, *c)).collect()
}

#[cfg(feature = "parallel")]
pub fn sweep_parallel(base: &Config, cells: &[Cell]) -> Vec<CellResult> {
    use rayon::prelude::*;
    cells.par_iter().map(|c| run_cell(base, *c)).collect()
}

/// Parallel when built with the `parallel` feature, sequential otherwise.
pub fn sweep(base: &Config, cells: &[Cell]) -> Vec<CellResult> {
    #[cfg(feature = "parallel")]
    {
        sweep_parallel(base, cells)
    }
    #[cfg(not(feature = "parallel"))]
    {
        sweep_sequential(base, cells)
    }
}

// ---------------------------------------------------------------------------
// Summary
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub condition: Condition,
    pub policy: PolicyKind,
    pub runs: usize,
    pub median_time_all_names_known: Option<f64>,
    pub median_task_completion_time: Option<f64>,
    pub completed: usize,
    pub mean_robot_initiated: f64,
    pub mean_human_initiated: f64,
}

/// Median of the defined values; `None` if fewer than half are defined,
/// since undefined runs sort after every defined one.
pub fn median(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let mut v: Vec<Option<f64>> = values.into_iter().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        Some((v[n / 2 - 1]? + v[n / 2]?) / 2.0)
    }
}

pub fn summarize(results: &[CellResult]) -> Vec<SummaryRow> {
    let mut keys: Vec<(PolicyKind, Condition)> = Vec::new();
    for r in results {
        let k = (r.cell.policy, r.cell.condition);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(policy, condition)| {
            let rs: Vec<&CellResult> = results
                .iter()
                .filter(|r| r.cell.policy == policy && r.cell.condition == condition)
                .collect();
            let n = rs.len();
            SummaryRow {
                condition,
                policy,
                runs: n,
                median_time_all_names_known: median(rs.iter().map(|r| r.metrics.time_all_names_known)),
                median_task_completion_time: median(rs.iter().map(|r| r.metrics.task_completion_time)),
                completed: rs.iter().filter(|r| r.status == RunStatus::Completed).count(),
                mean_robot_initiated: rs.iter().map(|r| r.metrics.robot_initiated as f64).sum::<f64>() / n as f64,
                mean_human_initiated: rs.iter().map(|r| r.metrics.human_initiated as f64).sum::<f64>() / n as f64,
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.2}"));
    let mut s = String::from(
        "policy,condition,runs,median_time_all_names_known,median_task_completion_time,completed,mean_robot_initiated,mean_human_initiated\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:.2},{:.2}",
            r.policy.as_str(),
            r.condition.as_str(),
            r.runs,
            opt(r.median_time_all_names_known),
            opt(r.median_task_completion_time),
            r.completed,
            r.mean_robot_initiated,
            r.mean_human_initiated
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_handles_undefined() {
        assert_eq!(median([Some(3.0), Some(1.0), Some(2.0)]), Some(2.0));
        assert_eq!(median([Some(1.0), Some(3.0)]), Some(2.0));
        assert_eq!(median([Some(1.0), None, None]), None);
        assert_eq!(median([Some(1.0), Some(2.0), None]), Some(2.0));
        assert_eq!(median(std::iter::empty()), None);
    }

    #[test]
    fn grid_is_policy_major() {
        let g = grid(&[Condition::Slow, Condition::Fast], &[PolicyKind::Silent], 0..2);
        assert_eq!(g.len(), 4);
        assert_eq!(g[1].seed, 1);
        assert_eq!(g[2].condition, Condition::Fast);
    }
}
