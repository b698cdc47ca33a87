//! On-disk formats: PFM rasters, JSON scene documents and manifests, and
//! plain-text report rendering. All writers are deterministic functions of
//! their inputs, so identical data always produces identical bytes.

pub mod pfm;
pub mod scene;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::loss::LossReport;
use crate::metrics::{DepthMetrics, MetricReport};
use crate::radar::stages::StageRecord;

pub use scene::{load_manifest, load_scene, save_manifest, save_scene, Manifest, SceneFile};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
}

/// Renders a loss report as flat `key = value` lines.
pub fn format_loss_report(report: &LossReport) -> String {
    let mut out = String::new();
    for (key, value) in [
        ("photometric", report.photometric),
        ("smoothness", report.smoothness),
        ("velocity", report.velocity),
        ("radar", report.radar),
        ("lambda_smoothness", report.lambda_smoothness),
        ("lambda_velocity", report.lambda_velocity),
        ("lambda_radar", report.lambda_radar),
        ("total", report.total),
    ] {
        writeln!(out, "{key} = {value}").expect("string write");
    }
    out
}

fn metric_row(out: &mut String, scope: &str, m: &DepthMetrics) {
    writeln!(
        out,
        "{scope:<14}{:>10.6}{:>10.6}{:>10.6}{:>10.6}{:>10.2}{:>10.2}{:>10.2}{:>10}",
        m.abs_rel, m.sq_rel, m.rmse, m.rmse_log, m.delta1, m.delta2, m.delta3, m.count
    )
    .expect("string write");
}

/// Renders a metric report as a fixed-width table, one row per scope, with
/// labeled per-class summary lines underneath.
pub fn format_metric_report(report: &MetricReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<14}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}",
        "scope", "AbsRel", "SqRel", "RMSE", "RMSElog", "delta1", "delta2", "delta3", "samples"
    )
    .expect("string write");
    metric_row(&mut out, "overall", &report.overall);
    for (class, m) in &report.per_class {
        metric_row(&mut out, class.as_str(), m);
    }
    if report.dropped > 0 {
        writeln!(out, "dropped = {}", report.dropped).expect("string write");
    }
    if !report.per_class.is_empty() {
        out.push('\n');
        for (class, m) in &report.per_class {
            writeln!(out, "AbsRel_{} = {:.6}", class.as_str(), m.abs_rel).expect("string write");
        }
    }
    out
}

/// Writes filter-stage survival counts as a JSON provenance log.
pub fn save_stage_records(path: &Path, records: &[StageRecord]) -> Result<(), IoError> {
    let mut json = serde_json::to_string_pretty(records).map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    json.push('\n');
    std::fs::write(path, json).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_stage_records(path: &Path) -> Result<Vec<StageRecord>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}
