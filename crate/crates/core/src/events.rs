//! Event streams, windowing and price-threshold event extraction.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-subject event timestamps over an observation horizon `[0, horizon]`.
///
/// Each subject's sequence is strictly increasing. Ties across subjects are
/// allowed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventStream {
    horizon: f64,
    events: Vec<Vec<f64>>,
}

impl EventStream {
    pub fn new(horizon: f64, events: Vec<Vec<f64>>) -> Result<Self> {
        if events.is_empty() {
            return Err(Error::invalid("event stream needs at least one subject"));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        for (i, seq) in events.iter().enumerate() {
            for (k, &t) in seq.iter().enumerate() {
                if !t.is_finite() || t < 0.0 || t > horizon {
                    return Err(Error::invalid(format!(
                        "subject {i}: timestamp {t} outside [0, {horizon}]"
                    )));
                }
                if k > 0 && t <= seq[k - 1] {
                    return Err(Error::invalid(format!(
                        "subject {i}: non-increasing timestamps ({} then {t})",
                        seq[k - 1]
                    )));
                }
            }
        }
        Ok(Self { horizon, events })
    }

    /// A stream of `dim` subjects with no events.
    pub fn empty(dim: usize, horizon: f64) -> Result<Self> {
        Self::new(horizon, vec![Vec::new(); dim])
    }

    pub fn dim(&self) -> usize {
        self.events.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn events(&self) -> &[Vec<f64>] {
        &self.events
    }

    pub fn subject(&self, i: usize) -> &[f64] {
        &self.events[i]
    }

    pub fn counts(&self) -> Vec<usize> {
        self.events.iter().map(Vec::len).collect()
    }

    pub fn total_events(&self) -> usize {
        self.events.iter().map(Vec::len).sum()
    }

    /// Events of every subject in `[start, end)`, shifted so `start` maps to 0.
    pub fn restrict(&self, start: f64, end: f64) -> Result<EventStream> {
        let events = self
            .events
            .iter()
            .map(|seq| {
                let lo = seq.partition_point(|&t| t < start);
                let hi = seq.partition_point(|&t| t < end);
                seq[lo..hi].iter().map(|&t| t - start).collect()
            })
            .collect();
        EventStream::new(end - start, events)
    }
}

/// Sliding-window layout: windows `[origin + k·stride, origin + k·stride + length)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub length: f64,
    pub stride: f64,
    #[serde(default)]
    pub origin: f64,
}

impl WindowSpec {
    pub fn new(length: f64, stride: f64) -> Result<Self> {
        let spec = Self {
            length,
            stride,
            origin: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_origin(mut self, origin: f64) -> Result<Self> {
        self.origin = origin;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::invalid("window length must be positive"));
        }
        if !(self.stride.is_finite() && self.stride > 0.0 && self.stride <= self.length) {
            return Err(Error::invalid(
                "window stride must satisfy 0 < stride <= length",
            ));
        }
        if !(self.origin.is_finite() && self.origin >= 0.0) {
            return Err(Error::invalid("window origin must be nonnegative"));
        }
        Ok(())
    }

    pub fn overlap(&self) -> f64 {
        self.length - self.stride
    }

    /// Number of windows that fit entirely inside `[origin, horizon]`.
    pub fn count(&self, horizon: f64) -> usize {
        let span = horizon - self.origin - self.length;
        if span < -1e-9 * self.length {
            return 0;
        }
        let slack = 1e-9 * (span.abs() / self.stride).max(1.0);
        (span.max(0.0) / self.stride + slack).floor() as usize + 1
    }

    pub fn start(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.stride
    }

    /// Start times of every window that fits inside `horizon`.
    pub fn starts(&self, horizon: f64) -> Vec<f64> {
        (0..self.count(horizon)).map(|k| self.start(k)).collect()
    }

    /// Window index whose centre is the first at or after time `t`.
    pub fn index_of_time(&self, t: f64) -> usize {
        let k = (t - self.origin - 0.5 * self.length) / self.stride;
        k.ceil().max(0.0) as usize
    }
}

/// Cuts a stream into windows; each window is re-based to local time 0 with
/// horizon `spec.length`. Membership is half-open, `[start, start + length)`.
pub fn slice_windows(stream: &EventStream, spec: &WindowSpec) -> Result<Vec<EventStream>> {
    spec.validate()?;
    if spec.origin + spec.length > stream.horizon() * (1.0 + 1e-12) {
        return Err(Error::WindowTooLong);
    }
    spec.starts(stream.horizon())
        .into_iter()
        .map(|start| stream.restrict(start, start + spec.length))
        .collect()
}

/// Per-instrument `(timestamp, price)` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    samples: Vec<Vec<(f64, f64)>>,
}

impl PriceSeries {
    pub fn new(samples: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("price series needs at least one instrument"));
        }
        for (i, series) in samples.iter().enumerate() {
            for (k, &(t, p)) in series.iter().enumerate() {
                if !t.is_finite() || t < 0.0 {
                    return Err(Error::invalid(format!("instrument {i}: bad timestamp {t}")));
                }
                if !(p.is_finite() && p > 0.0) {
                    return Err(Error::invalid(format!(
                        "instrument {i}: nonpositive price {p} at t={t}"
                    )));
                }
                if k > 0 && t < series[k - 1].0 {
                    return Err(Error::invalid(format!(
                        "instrument {i}: decreasing timestamps ({} then {t})",
                        series[k - 1].0
                    )));
                }
            }
        }
        Ok(Self { samples })
    }

    pub fn dim(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[Vec<(f64, f64)>] {
        &self.samples
    }

    /// Shifts every timestamp so the earliest sample sits at time 0.
    pub fn rebased(&self) -> PriceSeries {
        let t0 = self
            .samples
            .iter()
            .filter_map(|s| s.first().map(|x| x.0))
            .fold(f64::INFINITY, f64::min);
        if !t0.is_finite() {
            return self.clone();
        }
        PriceSeries {
            samples: self
                .samples
                .iter()
                .map(|s| s.iter().map(|&(t, p)| (t - t0, p)).collect())
                .collect(),
        }
    }
}

/// Emits an event whenever an instrument's price has moved by at least
/// `threshold` (relative, either direction) from its reference price. The
/// reference starts at the first sample and resets to the price at every
/// emitted event.
pub fn prices_to_events(series: &PriceSeries, threshold: f64) -> Result<EventStream> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::invalid("threshold must be positive"));
    }
    let mut horizon = 0.0_f64;
    let mut events = Vec::with_capacity(series.dim());
    for s in series.samples() {
        let mut out: Vec<f64> = Vec::new();
        if let Some(&(t_last, _)) = s.last() {
            horizon = horizon.max(t_last);
        }
        let mut iter = s.iter();
        if let Some(&(_, first)) = iter.next() {
            let mut reference = first;
            for &(t, p) in iter {
                if (p - reference).abs() / reference >= threshold {
                    reference = p;
                    // two crossings inside one timestamp collapse into one event
                    if out.last().is_none_or(|&last| t > last) {
                        out.push(t);
                    }
                }
            }
        }
        events.push(out);
    }
    if horizon <= 0.0 {
        return Err(Error::invalid("price series spans no time"));
    }
    EventStream::new(horizon, events)
}
