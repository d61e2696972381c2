//! Batch experiment runner: JSON configs in, deterministic CSV/JSON reports out.

pub mod config;
pub mod experiments;
pub mod golden;
pub mod pool;
pub mod report;

use std::path::{Path, PathBuf};

use config::ExperimentConfig;
use report::Report;

/// Output directory for a config: `output.dir` resolved against the config's
/// directory, or the config's directory itself.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    match &cfg.output.dir {
        Some(d) if d.is_absolute() => d.clone(),
        Some(d) => cfg.base_dir.join(d),
        None => cfg.base_dir.clone(),
    }
}

/// Writes `<stem>.csv`, `<stem>.json` and `<stem>.timing.json` under `dir`.
pub fn write_report(report: &Report, dir: &Path, stem: &str) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let files = [
        (dir.join(format!("{stem}.csv")), report.to_csv()),
        (dir.join(format!("{stem}.json")), pretty(&report.to_json())),
        (dir.join(format!("{stem}.timing.json")), pretty(&report.timing_json())),
    ];
    let mut out = Vec::new();
    for (path, text) in files {
        std::fs::write(&path, text)?;
        out.push(path);
    }
    Ok(out)
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap_or_default();
    s.push('\n');
    s
}
