//! Event and price file formats.
//!
//! Event CSV:
//!
//! ```text
//! # dim=2 horizon=10
//! subject,time
//! 0,0.5
//! 1,0.7
//! 0,1.5
//! ```
//!
//! The comment line is optional. Rows of different subjects may interleave
//! freely, but each subject's own rows must appear in increasing time order.
//!
//! Event JSONL: one `{"subject": 0, "time": 0.5}` object per line, with an
//! optional leading `{"meta": {"dim": 2, "horizon": 10}}` line.
//!
//! Price CSV: header `instrument,time,price`.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::events::{EventStream, PriceSeries};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventFormat {
    Csv,
    Jsonl,
}

impl EventFormat {
    /// Guesses the format from a file extension; anything but `.jsonl`/`.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => EventFormat::Jsonl,
            _ => EventFormat::Csv,
        }
    }
}

impl FromStr for EventFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(EventFormat::Csv),
            "jsonl" => Ok(EventFormat::Jsonl),
            other => Err(Error::invalid(format!("unknown event format {other:?}"))),
        }
    }
}

/// Header-declared stream metadata.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub dim: Option<usize>,
    pub horizon: Option<f64>,
}

pub fn load_events(path: impl AsRef<Path>, format: EventFormat) -> Result<EventStream> {
    let text = fs::read_to_string(path)?;
    match format {
        EventFormat::Csv => parse_events_csv(&text),
        EventFormat::Jsonl => parse_events_jsonl(&text),
    }
}

/// Accumulates `(line, subject, time)` rows into a stream.
#[derive(Default)]
struct Collector {
    events: Vec<Vec<f64>>,
    max_time: f64,
}

impl Collector {
    fn push(&mut self, line: usize, subject: usize, time: f64, meta: &StreamMeta) -> Result<()> {
        if !time.is_finite() {
            return Err(Error::parse(line, "non-finite timestamp"));
        }
        if time < 0.0 {
            return Err(Error::parse(line, "negative timestamp"));
        }
        if let Some(dim) = meta.dim {
            if subject >= dim {
                return Err(Error::parse(
                    line,
                    format!("subject {subject} >= declared dim {dim}"),
                ));
            }
        }
        if let Some(h) = meta.horizon {
            if time > h {
                return Err(Error::parse(
                    line,
                    format!("timestamp {time} beyond declared horizon {h}"),
                ));
            }
        }
        if self.events.len() <= subject {
            self.events.resize(subject + 1, Vec::new());
        }
        let seq = &mut self.events[subject];
        if seq.last().is_some_and(|&last| time <= last) {
            return Err(Error::parse(line, "non-increasing timestamps"));
        }
        seq.push(time);
        self.max_time = self.max_time.max(time);
        Ok(())
    }

    fn finish(mut self, meta: StreamMeta) -> Result<EventStream> {
        let dim = match meta.dim {
            Some(d) => d,
            None if !self.events.is_empty() => self.events.len(),
            None => {
                return Err(Error::invalid(
                    "cannot infer dimension of an empty event file",
                ))
            }
        };
        self.events.resize(dim, Vec::new());
        let horizon = match meta.horizon {
            Some(h) => h,
            None if self.max_time > 0.0 => self.max_time,
            None => {
                return Err(Error::invalid(
                    "cannot infer horizon; declare it in the header",
                ))
            }
        };
        EventStream::new(horizon, self.events)
    }
}

fn parse_meta_comment(line_no: usize, comment: &str) -> Result<StreamMeta> {
    let mut meta = StreamMeta::default();
    for token in comment.split_whitespace() {
        if let Some((key, value)) = token.split_once('=') {
            match key {
                "dim" => {
                    meta.dim = Some(
                        value
                            .parse()
                            .map_err(|_| Error::parse(line_no, "bad dim"))?,
                    )
                }
                "horizon" => {
                    meta.horizon = Some(
                        value
                            .parse()
                            .map_err(|_| Error::parse(line_no, "bad horizon"))?,
                    )
                }
                _ => {}
            }
        }
    }
    Ok(meta)
}

pub fn parse_events_csv(text: &str) -> Result<EventStream> {
    let mut meta = StreamMeta::default();
    let mut collector = Collector::default();
    let mut seen_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if !seen_header {
                let m = parse_meta_comment(line_no, comment)?;
                meta.dim = m.dim.or(meta.dim);
                meta.horizon = m.horizon.or(meta.horizon);
            }
            continue;
        }
        if !seen_header {
            let cols: Vec<_> = line.split(',').map(str::trim).collect();
            if cols != ["subject", "time"] {
                return Err(Error::parse(line_no, "expected header `subject,time`"));
            }
            seen_header = true;
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let (Some(s), Some(t), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(Error::parse(line_no, "expected two columns"));
        };
        let subject: usize = s
            .parse()
            .map_err(|_| Error::parse(line_no, "bad subject"))?;
        let time: f64 = t.parse().map_err(|_| Error::parse(line_no, "bad time"))?;
        collector.push(line_no, subject, time, &meta)?;
    }
    collector.finish(meta)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonlLine {
    Meta { meta: StreamMeta },
    Event { subject: usize, time: f64 },
}

pub fn parse_events_jsonl(text: &str) -> Result<EventStream> {
    let mut meta = StreamMeta::default();
    let mut collector = Collector::default();
    let mut first = true;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: JsonlLine =
            serde_json::from_str(line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        match parsed {
            JsonlLine::Meta { meta: m } if first => meta = m,
            JsonlLine::Meta { .. } => {
                return Err(Error::parse(line_no, "meta object must be the first line"))
            }
            JsonlLine::Event { subject, time } => collector.push(line_no, subject, time, &meta)?,
        }
        first = false;
    }
    collector.finish(meta)
}

/// All events merged in time order (ties broken by subject).
fn merged(stream: &EventStream) -> Vec<(usize, f64)> {
    let mut rows: Vec<(usize, f64)> = stream
        .events()
        .iter()
        .enumerate()
        .flat_map(|(i, seq)| seq.iter().map(move |&t| (i, t)))
        .collect();
    rows.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    rows
}

pub fn write_events_csv(stream: &EventStream, mut out: impl Write) -> Result<()> {
    writeln!(out, "# dim={} horizon={}", stream.dim(), stream.horizon())?;
    writeln!(out, "subject,time")?;
    for (s, t) in merged(stream) {
        writeln!(out, "{s},{t}")?;
    }
    Ok(())
}

pub fn write_events_jsonl(stream: &EventStream, mut out: impl Write) -> Result<()> {
    let meta = serde_json::json!({"meta": {"dim": stream.dim(), "horizon": stream.horizon()}});
    writeln!(out, "{meta}")?;
    for (s, t) in merged(stream) {
        writeln!(out, "{}", serde_json::json!({"subject": s, "time": t}))?;
    }
    Ok(())
}

pub fn save_events(
    stream: &EventStream,
    path: impl AsRef<Path>,
    format: EventFormat,
) -> Result<()> {
    let mut buf = Vec::new();
    match format {
        EventFormat::Csv => write_events_csv(stream, &mut buf)?,
        EventFormat::Jsonl => write_events_jsonl(stream, &mut buf)?,
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn parse_prices_csv(text: &str) -> Result<PriceSeries> {
    let mut samples: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut seen_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            let cols: Vec<_> = line.split(',').map(str::trim).collect();
            if cols != ["instrument", "time", "price"] {
                return Err(Error::parse(
                    line_no,
                    "expected header `instrument,time,price`",
                ));
            }
            seen_header = true;
            continue;
        }
        let cols: Vec<_> = line.split(',').map(str::trim).collect();
        let [i, t, p] = cols[..] else {
            return Err(Error::parse(line_no, "expected three columns"));
        };
        let instrument: usize = i
            .parse()
            .map_err(|_| Error::parse(line_no, "bad instrument"))?;
        let time: f64 = t.parse().map_err(|_| Error::parse(line_no, "bad time"))?;
        let price: f64 = p.parse().map_err(|_| Error::parse(line_no, "bad price"))?;
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::parse(line_no, "nonpositive price"));
        }
        if samples.len() <= instrument {
            samples.resize(instrument + 1, Vec::new());
        }
        let series = &mut samples[instrument];
        if series.last().is_some_and(|&(last, _)| time < last) {
            return Err(Error::parse(line_no, "decreasing timestamps"));
        }
        series.push((time, price));
    }
    PriceSeries::new(samples)
}

pub fn load_prices(path: impl AsRef<Path>) -> Result<PriceSeries> {
    parse_prices_csv(&fs::read_to_string(path)?)
}
