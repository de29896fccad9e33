//! Experiment runner: seeded trial matrices, persisted traces, summaries,
//! plots and curve diagnostics.
//!
//! An output directory holds `config.resolved.json`, `manifest.json`,
//! `traces/<trial>.csv`, `results/<trial>.json` and, after summarizing,
//! `summary.json`, `rank_table.csv` and `plots/<problem>.svg`.

pub mod config;
pub mod diagnose;
pub mod plot;
pub mod run;
pub mod summary;

use std::io::Write;
use std::path::Path;

pub use config::{trial_id, trial_seed, AlgorithmSpec, ExperimentConfig, Preset, RunDefaults, TrialSpec};
pub use diagnose::{diagnose, diagnose_values, gaussian_bump, holdout_spearman, DiagnoseConfig, DiagnoseTarget, OpcReport};
pub use plot::{export_plots, render_problem_svg};
pub use run::{run_experiment, Manifest, ManifestEntry, RunReport, TraceRow, TrialResult, TrialStatus};
pub use summary::{summarize, summarize_traces, CellSummary, CurveSummary, Summary};

use crate::error::Result;

pub const VERSION: &str = concat!("opbo ", env!("CARGO_PKG_VERSION"));

/// Write through a sibling temp file and rename into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.{:?}.tmp", std::process::id(), std::thread::current().id()));
    let mut f = std::fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    std::fs::rename(&tmp, path)?;
    Ok(())
}
