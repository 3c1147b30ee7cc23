//! Machine-readable artifacts: `changes.json`, per-segment profile TSVs,
//! per-window event counts and optional intermediate JSON.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::changepoint::CpReport;
use crate::cumulants::CumulantSet;
use crate::geometry::SnapshotRecord;
use crate::nphc::KernelMatrix;
use crate::pipeline::{PipelineConfig, PipelineOutput, WindowResult};
use crate::Result;

#[derive(Debug, Serialize)]
struct ChangesJson<'a> {
    changes: &'a [usize],
    #[serde(skip_serializing_if = "Option::is_none")]
    change_windows: Option<Vec<ChangeWindow>>,
    threshold: f64,
    n: usize,
    depth_exhausted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    half_width: Option<Value>,
    config: &'a Value,
    report: &'a CpReport,
}

#[derive(Debug, Serialize)]
struct ChangeWindow {
    index: usize,
    start: f64,
    end: f64,
}

/// Per-window fit record as emitted by `--emit-intermediate`.
#[derive(Debug, Serialize)]
pub struct KernelRecord<'a> {
    pub window_index: usize,
    #[serde(flatten)]
    pub kernel: &'a KernelMatrix,
}

#[derive(Debug, Serialize)]
pub struct CumulantRecord<'a> {
    pub window_index: usize,
    #[serde(flatten)]
    pub cumulants: &'a CumulantSet,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `changes.json` and `profile_<segment>.tsv` for every scanned
/// segment. `config` is embedded verbatim.
pub fn render_cp_report(report: &CpReport, config: &Value, dir: &Path) -> Result<Vec<PathBuf>> {
    render(report, config, None, None, dir)
}

fn render(
    report: &CpReport,
    config: &Value,
    change_windows: Option<Vec<ChangeWindow>>,
    half_width: Option<Value>,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let changes = ChangesJson {
        changes: &report.change_indices,
        change_windows,
        threshold: report.threshold,
        n: report.n,
        depth_exhausted: report.depth_exhausted,
        half_width,
        config,
        report,
    };
    let path = dir.join("changes.json");
    write_json(&path, &changes)?;
    written.push(path);

    for seg in report.tested_segments() {
        let mut tsv = String::from("window_index\tnTn\tthreshold\n");
        for p in &seg.profile {
            tsv.push_str(&format!("{}\t{}\t{}\n", p.index, p.value, seg.threshold));
        }
        let path = dir.join(format!("profile_{}.tsv", seg.id));
        fs::write(&path, tsv)?;
        written.push(path);
    }
    Ok(written)
}

/// All artifacts of a pipeline run.
pub fn render_report(output: &PipelineOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    let config = serde_json::to_value(&output.config)?;
    let change_windows = output
        .change_windows()
        .into_iter()
        .map(|(index, start, end)| ChangeWindow { index, start, end })
        .collect();
    let half_width = serde_json::to_value(&output.half_width)?;
    let mut written = render(
        &output.report,
        &config,
        Some(change_windows),
        Some(half_width),
        dir,
    )?;

    written.push(write_events_per_window(&output.windows, dir)?);
    Ok(written)
}

pub fn write_events_per_window(windows: &[WindowResult], dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut tsv = String::from("window_index\tstart\tend\tevents\n");
    for w in windows {
        tsv.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            w.index, w.start, w.end, w.events
        ));
    }
    let path = dir.join("events_per_window.tsv");
    fs::write(&path, tsv)?;
    Ok(path)
}

/// Reads the `snapshots.json` written by [`write_intermediate`].
pub fn read_snapshots(path: &Path) -> Result<Vec<SnapshotRecord>> {
    #[derive(serde::Deserialize)]
    struct File {
        windows: Vec<SnapshotRecord>,
    }
    let file: File = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(file.windows)
}

/// `cumulants.json`, `kernels.json` and `snapshots.json`.
pub fn write_intermediate(
    config: &PipelineConfig,
    windows: &[WindowResult],
    dir: &Path,
    include_log: bool,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let config = serde_json::to_value(config)?;
    let cumulants: Vec<_> = windows
        .iter()
        .map(|w| CumulantRecord {
            window_index: w.index,
            cumulants: &w.cumulants,
        })
        .collect();
    let kernels: Vec<_> = windows
        .iter()
        .map(|w| KernelRecord {
            window_index: w.index,
            kernel: &w.kernel,
        })
        .collect();
    let snapshots: Vec<SnapshotRecord> = windows
        .iter()
        .map(|w| w.snapshot.record(include_log))
        .collect();
    let mut written = Vec::new();
    for (name, value) in [
        ("cumulants.json", serde_json::to_value(&cumulants)?),
        ("kernels.json", serde_json::to_value(&kernels)?),
        ("snapshots.json", serde_json::to_value(&snapshots)?),
    ] {
        let path = dir.join(name);
        write_json(
            &path,
            &serde_json::json!({"config": config, "windows": value}),
        )?;
        written.push(path);
    }
    Ok(written)
}
