use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::{read_trace_csv, TraceRow, TRACES_DIR};
use super::write_atomic;
use crate::error::{Error, Result};
use crate::metrics::{mean_rank_table, quartiles, CellMedian, Quartiles, RankTable};

pub const SUMMARY_FILE: &str = "summary.json";
pub const RANK_TABLE_FILE: &str = "rank_table.csv";

/// Incumbent quartiles across trials at each evaluation count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub evaluations: Vec<u64>,
    pub q1: Vec<f64>,
    pub median: Vec<f64>,
    pub q3: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub problem: String,
    pub algorithm: String,
    pub trials: usize,
    pub trial_ids: Vec<String>,
    pub final_incumbent: Quartiles,
    /// Mean over trials of the summed per-iteration wall-clock time.
    pub mean_runtime_seconds: f64,
    pub curve: CurveSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cells: Vec<CellSummary>,
    pub rank_table: RankTable,
}

impl Summary {
    pub fn cell(&self, problem: &str, algorithm: &str) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.problem == problem && c.algorithm == algorithm)
    }

    pub fn problems(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.problem.as_str()) {
                out.push(&c.problem);
            }
        }
        out
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(SUMMARY_FILE))?)?)
    }
}

/// Split `problem__algorithm__tNN`.
pub fn parse_trial_id(id: &str) -> Result<(String, String, usize)> {
    let parts: Vec<&str> = id.split("__").collect();
    let bad = || Error::InvalidSize(format!("malformed trial id `{id}`"));
    match parts.as_slice() {
        [p, a, t] => {
            let t = t.strip_prefix('t').and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            Ok((p.to_string(), a.to_string(), t))
        }
        _ => Err(bad()),
    }
}

/// Incumbent after `evals` evaluations: the last row at or below that count.
fn incumbent_at(rows: &[TraceRow], evals: u64) -> Option<f64> {
    rows.iter()
        .take_while(|r| r.evals_cumulative <= evals)
        .last()
        .map(|r| r.incumbent_y)
}

fn summarize_cell(problem: &str, algorithm: &str, trials: &[(&str, &[TraceRow])]) -> CellSummary {
    let mut grid: Vec<u64> = trials
        .iter()
        .flat_map(|(_, rows)| rows.iter().map(|r| r.evals_cumulative))
        .collect();
    grid.sort_unstable();
    grid.dedup();
    let mut curve = CurveSummary {
        evaluations: Vec::new(),
        q1: Vec::new(),
        median: Vec::new(),
        q3: Vec::new(),
    };
    for &e in &grid {
        let values: Vec<f64> = trials.iter().filter_map(|(_, rows)| incumbent_at(rows, e)).collect();
        if values.len() < trials.len() {
            continue;
        }
        let q = quartiles(&values);
        curve.evaluations.push(e);
        curve.q1.push(q.q1);
        curve.median.push(q.median);
        curve.q3.push(q.q3);
    }
    let finals: Vec<f64> = trials
        .iter()
        .map(|(_, rows)| rows.last().map_or(f64::NAN, |r| r.incumbent_y))
        .collect();
    let runtime: f64 = trials
        .iter()
        .map(|(_, rows)| rows.iter().map(|r| r.iter_seconds).sum::<f64>())
        .sum::<f64>()
        / trials.len() as f64;
    CellSummary {
        problem: problem.to_owned(),
        algorithm: algorithm.to_owned(),
        trials: trials.len(),
        trial_ids: trials.iter().map(|(id, _)| id.to_string()).collect(),
        final_incumbent: quartiles(&finals),
        mean_runtime_seconds: runtime,
        curve,
    }
}

/// Aggregate traces keyed by trial id.
pub fn summarize_traces(traces: &BTreeMap<String, Vec<TraceRow>>) -> Result<Summary> {
    let mut cells: BTreeMap<(String, String), Vec<(&str, &[TraceRow])>> = BTreeMap::new();
    for (id, rows) in traces {
        if rows.is_empty() {
            continue;
        }
        let (problem, algorithm, _) = parse_trial_id(id)?;
        cells.entry((problem, algorithm)).or_default().push((id, rows));
    }
    let cells: Vec<CellSummary> = cells
        .iter()
        .map(|((p, a), trials)| summarize_cell(p, a, trials))
        .collect();
    let medians: Vec<CellMedian> = cells
        .iter()
        .map(|c| CellMedian {
            problem: c.problem.clone(),
            algorithm: c.algorithm.clone(),
            median: c.final_incumbent.median,
        })
        .collect();
    let mut runtime: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for c in &cells {
        let e = runtime.entry(c.algorithm.clone()).or_default();
        e.0 += c.mean_runtime_seconds * c.trials as f64;
        e.1 += c.trials;
    }
    let tavg = runtime.into_iter().map(|(a, (s, n))| (a, s / n as f64)).collect();
    let rank_table = mean_rank_table(&medians, &tavg)?;
    Ok(Summary { cells, rank_table })
}

pub fn load_traces(dir: &Path) -> Result<BTreeMap<String, Vec<TraceRow>>> {
    let mut out = BTreeMap::new();
    let traces = dir.join(TRACES_DIR);
    if !traces.is_dir() {
        return Ok(out);
    }
    for entry in std::fs::read_dir(traces)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let id = path.file_stem().expect("file has a name").to_string_lossy().into_owned();
            out.insert(id, read_trace_csv(&path)?);
        }
    }
    Ok(out)
}

/// Summarize an output directory from its trace files and write
/// `summary.json` and `rank_table.csv` next to them.
pub fn summarize(dir: &Path) -> Result<Summary> {
    let traces = load_traces(dir)?;
    if traces.is_empty() {
        return Err(Error::InvalidSize(format!("no trace files under {}", dir.join(TRACES_DIR).display())));
    }
    let summary = summarize_traces(&traces)?;
    write_atomic(&dir.join(SUMMARY_FILE), &serde_json::to_vec_pretty(&summary)?)?;
    write_atomic(&dir.join(RANK_TABLE_FILE), summary.rank_table.to_csv_string()?.as_bytes())?;
    Ok(summary)
}
