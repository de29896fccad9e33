use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, TrialSpec};
use super::{write_atomic, VERSION};
use crate::error::{Error, Result};
use crate::optimizer::{run, OptimizationTrace, RunConfig, SurrogateStats};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.json";
pub const TRACES_DIR: &str = "traces";
pub const RESULTS_DIR: &str = "results";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_id: String,
    pub problem: String,
    pub algorithm: String,
    pub trial: usize,
    pub seed: u64,
    pub config: RunConfig,
    pub trace: OptimizationTrace,
    pub final_incumbent: f64,
    pub runtime_seconds: f64,
    pub version: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Completed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub trial_id: String,
    pub problem: String,
    pub algorithm: String,
    pub trial: usize,
    pub seed: u64,
    pub status: TrialStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub trace_file: String,
    pub result_file: String,
}

/// Index of every trial in an output directory, sorted by trial id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub experiment: String,
    pub trials: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(serde_json::from_str(&std::fs::read_to_string(path)?)?))
    }

    pub fn completed(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.trials.iter().filter(|e| e.status == TrialStatus::Completed)
    }
}

/// What one call to [`run_experiment`] did.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub executed: Vec<String>,
    pub skipped: Vec<String>,
    pub failed: Vec<(String, String)>,
}

/// One row of a trace CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub trial_id: String,
    pub iteration: usize,
    pub evals_cumulative: u64,
    pub suggested_count: usize,
    pub batch_best_y: f64,
    pub incumbent_y: f64,
    pub fit_seconds: f64,
    pub iter_seconds: f64,
    #[serde(rename = "trust_region_L")]
    pub trust_region_l: Option<f64>,
    pub restarted: bool,
    pub gp_lengthscale: Option<f64>,
    pub gp_signal_variance: Option<f64>,
    pub gp_noise_variance: Option<f64>,
    pub gp_log_marginal_likelihood: Option<f64>,
    pub final_train_loss: Option<f64>,
}

pub fn trace_rows(trial_id: &str, trace: &OptimizationTrace) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| {
            let (mut ls, mut sv, mut nv, mut lml, mut loss) = (None, None, None, None, None);
            match &r.surrogate {
                Some(SurrogateStats::Gp {
                    lengthscale,
                    signal_variance,
                    noise_variance,
                    log_marginal_likelihood,
                }) => {
                    ls = Some(*lengthscale);
                    sv = Some(*signal_variance);
                    nv = Some(*noise_variance);
                    lml = Some(*log_marginal_likelihood);
                }
                Some(SurrogateStats::Network { loss_trace }) => loss = loss_trace.last().copied(),
                None => {}
            }
            TraceRow {
                trial_id: trial_id.to_owned(),
                iteration: r.iteration,
                evals_cumulative: r.evals_cumulative,
                suggested_count: r.observed.len(),
                batch_best_y: r.batch_best,
                incumbent_y: r.incumbent,
                fit_seconds: r.fit_seconds,
                iter_seconds: r.iter_seconds,
                trust_region_l: r.trust_region_length,
                restarted: r.restarted,
                gp_lengthscale: ls,
                gp_signal_variance: sv,
                gp_noise_variance: nv,
                gp_log_marginal_likelihood: lml,
                final_train_loss: loss,
            }
        })
        .collect()
}

pub fn write_trace_csv(rows: &[TraceRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn execute(spec: &TrialSpec, record_points: bool) -> Result<TrialResult> {
    let started = Instant::now();
    let mut trace = run(&spec.config)?;
    if !record_points {
        for r in &mut trace.records {
            r.suggested.clear();
        }
    }
    Ok(TrialResult {
        trial_id: spec.trial_id.clone(),
        problem: spec.problem.clone(),
        algorithm: spec.algorithm.clone(),
        trial: spec.trial,
        seed: spec.seed,
        config: spec.config.clone(),
        final_incumbent: trace.best_value,
        trace,
        runtime_seconds: started.elapsed().as_secs_f64(),
        version: VERSION.to_owned(),
    })
}

fn relative(kind: &str, id: &str, ext: &str) -> String {
    format!("{kind}/{id}.{ext}")
}

fn entry(spec: &TrialSpec, status: TrialStatus, error: Option<String>) -> ManifestEntry {
    ManifestEntry {
        trial_id: spec.trial_id.clone(),
        problem: spec.problem.clone(),
        algorithm: spec.algorithm.clone(),
        trial: spec.trial,
        seed: spec.seed,
        status,
        error,
        trace_file: relative(TRACES_DIR, &spec.trial_id, "csv"),
        result_file: relative(RESULTS_DIR, &spec.trial_id, "json"),
    }
}

/// Run one trial and persist its trace and result.
fn run_and_store(dir: &Path, spec: &TrialSpec, record_points: bool) -> ManifestEntry {
    let outcome = execute(spec, record_points).and_then(|result| {
        let rows = trace_rows(&spec.trial_id, &result.trace);
        let e = entry(spec, TrialStatus::Completed, None);
        write_atomic(&dir.join(&e.result_file), &serde_json::to_vec(&result)?)?;
        write_atomic(&dir.join(&e.trace_file), &write_trace_csv(&rows)?)?;
        Ok(e)
    });
    match outcome {
        Ok(e) => e,
        Err(err) => {
            let err = Error::TrialFailed {
                trial: spec.trial_id.clone(),
                message: err.to_string(),
            };
            log::warn!("{err}");
            entry(spec, TrialStatus::Failed, Some(err.to_string()))
        }
    }
}

fn write_manifest(dir: &Path, experiment: &str, entries: &BTreeMap<String, ManifestEntry>) -> Result<()> {
    let manifest = Manifest {
        version: VERSION.to_owned(),
        experiment: experiment.to_owned(),
        trials: entries.values().cloned().collect(),
    };
    write_atomic(&dir.join(MANIFEST_FILE), &serde_json::to_vec_pretty(&manifest)?)
}

/// Execute every trial of the matrix into `config.output_dir`.
///
/// Trials already marked completed in the manifest, with their trace and
/// result files present, are skipped. Failed trials are recorded and the
/// remaining trials still run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let config = config.resolved();
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(dir.join(TRACES_DIR))?;
    std::fs::create_dir_all(dir.join(RESULTS_DIR))?;
    write_atomic(&dir.join(RESOLVED_CONFIG_FILE), &serde_json::to_vec_pretty(&config)?)?;

    let trials = config.trials();
    let previous: BTreeMap<String, ManifestEntry> = Manifest::load(&dir)?
        .map(|m| m.trials.into_iter().map(|e| (e.trial_id.clone(), e)).collect())
        .unwrap_or_default();
    let mut entries = BTreeMap::new();
    let mut report = RunReport {
        output_dir: dir.clone(),
        ..RunReport::default()
    };
    let mut pending = Vec::new();
    for spec in &trials {
        match previous.get(&spec.trial_id) {
            Some(e)
                if e.status == TrialStatus::Completed
                    && e.seed == spec.seed
                    && dir.join(&e.trace_file).exists()
                    && dir.join(&e.result_file).exists() =>
            {
                entries.insert(spec.trial_id.clone(), e.clone());
                report.skipped.push(spec.trial_id.clone());
            }
            _ => pending.push(spec),
        }
    }
    write_manifest(&dir, &config.name, &entries)?;
    log::info!(
        "{} trials: {} to run, {} already complete",
        trials.len(),
        pending.len(),
        report.skipped.len()
    );

    let workers = config.parallelism.min(pending.len()).max(1);
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<ManifestEntry>();
    let record_points = config.defaults.record_points;
    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, pending, dir) = (&next, &pending, &dir);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(spec) = pending.get(i) else { break };
                log::info!("running {}", spec.trial_id);
                if tx.send(run_and_store(dir, spec, record_points)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for e in rx {
            match e.status {
                TrialStatus::Completed => report.executed.push(e.trial_id.clone()),
                TrialStatus::Failed => report
                    .failed
                    .push((e.trial_id.clone(), e.error.clone().unwrap_or_default())),
            }
            entries.insert(e.trial_id.clone(), e);
            write_manifest(&dir, &config.name, &entries)?;
        }
        Ok(())
    })?;
    report.executed.sort();
    report.failed.sort();
    Ok(report)
}
