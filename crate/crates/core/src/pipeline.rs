//! End-to-end run: window → cumulants → NPHC → snapshot → detection.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::changepoint::{CpConfig, CpReport, Detector};
use crate::cumulants::{self, estimate_cumulants, CumulantSet, WSelection};
use crate::events::{slice_windows, EventStream, WindowSpec};
use crate::geometry::{causal_snapshot, CausalSnapshot, SpdPoint, SPD_FLOOR_REL};
use crate::nphc::{fit_r, KernelMatrix, NphcConfig};
use crate::{Error, Result};

/// How the cumulant half-width `W` is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum WMode {
    Fixed {
        value: f64,
    },
    /// Chosen once on the whole recording from the covariance density.
    /// `delta` defaults to the pooled mean inter-event time.
    Auto {
        #[serde(default)]
        delta: Option<f64>,
        #[serde(default = "default_multiple")]
        multiple: f64,
    },
}

fn default_multiple() -> f64 {
    cumulants::DEFAULT_W_MULTIPLE
}

impl Default for WMode {
    fn default() -> Self {
        WMode::Auto {
            delta: None,
            multiple: default_multiple(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub window: WindowSpec,
    #[serde(rename = "W")]
    pub w: WMode,
    pub nphc: NphcConfig,
    pub cp: CpConfig,
    /// Seeds the Brownian-bridge calibration.
    pub seed: u64,
    #[serde(rename = "symmetrize_C")]
    pub symmetrize_c: bool,
    pub spd_floor_rel: f64,
    /// Worker threads for the per-window stage; `None` uses every core.
    /// Not serialized: it never changes results.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window: WindowSpec {
                length: 10_000.0,
                stride: 5_000.0,
                origin: 0.0,
            },
            w: WMode::default(),
            nphc: NphcConfig::default(),
            cp: CpConfig::default(),
            seed: 0,
            symmetrize_c: false,
            spd_floor_rel: SPD_FLOOR_REL,
            workers: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        self.nphc.validate()?;
        self.cp.validate()?;
        if let WMode::Fixed { value } = self.w {
            if !(value > 0.0 && value < self.window.length / 2.0) {
                return Err(Error::invalid("fixed W must lie in (0, window length / 2)"));
            }
        }
        if !(self.spd_floor_rel > 0.0) {
            return Err(Error::invalid("spd_floor_rel must be positive"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfWidth {
    #[serde(rename = "W")]
    pub w: f64,
    pub selection: Option<WSelection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub events: usize,
    pub cumulants: CumulantSet,
    pub kernel: KernelMatrix,
    pub snapshot: CausalSnapshot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub config: PipelineConfig,
    pub half_width: HalfWidth,
    pub windows: Vec<WindowResult>,
    pub report: CpReport,
}

impl PipelineOutput {
    pub fn points(&self) -> Vec<SpdPoint> {
        self.windows
            .iter()
            .map(|w| w.snapshot.point.clone())
            .collect()
    }

    /// `[start, end)` times of each reported change window.
    pub fn change_windows(&self) -> Vec<(usize, f64, f64)> {
        self.report
            .change_indices
            .iter()
            .map(|&k| (k, self.windows[k].start, self.windows[k].end))
            .collect()
    }
}

pub fn resolve_half_width(config: &PipelineConfig, events: &EventStream) -> Result<HalfWidth> {
    match &config.w {
        WMode::Fixed { value } => Ok(HalfWidth {
            w: *value,
            selection: None,
        }),
        WMode::Auto { delta, multiple } => {
            let delta = match delta {
                Some(d) => *d,
                None => cumulants::mean_inter_event_time(events)
                    .ok_or_else(|| Error::invalid("cannot select W on an empty recording"))?,
            };
            let sel = cumulants::select_w(events, delta, *multiple)?;
            if sel.w >= config.window.length / 2.0 {
                return Err(Error::invalid(format!(
                    "selected W = {} is not below half the window length {}",
                    sel.w, config.window.length
                )));
            }
            Ok(HalfWidth {
                w: sel.w,
                selection: Some(sel),
            })
        }
    }
}

/// Cumulants, kernel fit and snapshot for one window.
pub fn analyse_window(
    index: usize,
    window: &EventStream,
    w: f64,
    config: &PipelineConfig,
) -> Result<(CumulantSet, KernelMatrix, CausalSnapshot)> {
    let mut cumulants = estimate_cumulants(window, w)?;
    if config.symmetrize_c {
        cumulants = cumulants.symmetrized();
    }
    let kernel = fit_r(&cumulants, &config.nphc)?;
    let snapshot = causal_snapshot(index, &kernel.h, config.spd_floor_rel)?;
    Ok((cumulants, kernel, snapshot))
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Per-window estimation without the detection step.
pub fn estimate_windows(
    config: &PipelineConfig,
    events: &EventStream,
) -> Result<(HalfWidth, Vec<WindowResult>)> {
    config.validate()?;
    let windows = slice_windows(events, &config.window)?;
    let half_width = resolve_half_width(config, events)?;
    let w = half_width.w;
    let results = with_pool(config.workers, || {
        windows
            .par_iter()
            .enumerate()
            .map(|(k, win)| {
                let (cumulants, kernel, snapshot) =
                    analyse_window(k, win, w, config).map_err(|e| e.in_window(k))?;
                let start = config.window.start(k);
                Ok(WindowResult {
                    index: k,
                    start,
                    end: start + config.window.length,
                    events: win.total_events(),
                    cumulants,
                    kernel,
                    snapshot,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok((half_width, results))
}

pub fn run_pipeline(config: &PipelineConfig, events: &EventStream) -> Result<PipelineOutput> {
    config.validate()?;
    let n = config.window.count(events.horizon());
    if n < config.cp.min_segment {
        return Err(Error::TooFewWindows {
            windows: n,
            min_segment: config.cp.min_segment,
        });
    }
    let (half_width, windows) = estimate_windows(config, events)?;
    let report = with_pool(config.workers, || {
        let detector = Detector::new(config.cp.clone(), config.seed)?;
        let points: Vec<SpdPoint> = windows.iter().map(|r| r.snapshot.point.clone()).collect();
        detector.detect_multiple(&points)
    })??;
    Ok(PipelineOutput {
        config: config.clone(),
        half_width,
        windows,
        report,
    })
}
