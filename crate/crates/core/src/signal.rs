//! Glucose/voltage conversion, the reading ring buffer, least-squares slope
//! estimation, and the CGM trace file format.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Upper sanity bound for a glucose value in mg/dL.
pub const GLUCOSE_MAX_MGDL: f64 = 1000.0;
/// Top of the internal voltage range.
pub const VOLTAGE_MAX: f64 = 3.0;
/// mg/dL per volt of the affine mapping.
pub const MGDL_PER_VOLT: f64 = 100.0;
/// Glucose at 0 V.
pub const MGDL_AT_ZERO_VOLT: f64 = 50.0;
/// Default ring capacity: 60 readings, five hours at a 5-minute cadence.
pub const DEFAULT_BUFFER_CAPACITY: usize = 60;
/// Readings used by the slope estimator unless configured otherwise.
pub const DEFAULT_SLOPE_WINDOW: usize = 10;

/// A glucose concentration in mg/dL.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct GlucoseValue(f64);

impl GlucoseValue {
    pub fn new(mgdl: f64) -> Result<Self> {
        if !mgdl.is_finite() {
            return Err(Error::NonFinite("glucose"));
        }
        if !(0.0..=GLUCOSE_MAX_MGDL).contains(&mgdl) {
            return Err(Error::OutOfRange {
                what: "glucose mg/dL",
                value: mgdl,
            });
        }
        Ok(Self(mgdl))
    }

    pub fn mgdl(self) -> f64 {
        self.0
    }
}

/// Maps glucose onto the 0–3 V scale: `v = (g − 50) / 100`, clipped.
///
/// Readings below 50 mg/dL all map to 0 V and readings above 350 mg/dL to 3 V.
pub fn glucose_to_voltage(g: GlucoseValue) -> f64 {
    ((g.0 - MGDL_AT_ZERO_VOLT) / MGDL_PER_VOLT).clamp(0.0, VOLTAGE_MAX)
}

/// Inverse of [`glucose_to_voltage`] on the unclipped range.
pub fn voltage_to_glucose(v: f64) -> Result<GlucoseValue> {
    if !v.is_finite() {
        return Err(Error::NonFinite("voltage"));
    }
    if !(0.0..=VOLTAGE_MAX).contains(&v) {
        return Err(Error::OutOfRange {
            what: "voltage",
            value: v,
        });
    }
    GlucoseValue::new(MGDL_PER_VOLT * v + MGDL_AT_ZERO_VOLT)
}

/// One timestamped sensor sample. `t` is minutes since stream start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageReading {
    pub t: f64,
    pub v: f64,
}

impl VoltageReading {
    pub fn new(t: f64, v: f64) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::NonFinite("timestamp"));
        }
        if !v.is_finite() {
            return Err(Error::NonFinite("voltage"));
        }
        if !(0.0..=VOLTAGE_MAX).contains(&v) {
            return Err(Error::OutOfRange {
                what: "voltage",
                value: v,
            });
        }
        Ok(Self { t, v })
    }

    pub fn from_glucose(t: f64, g: GlucoseValue) -> Result<Self> {
        Self::new(t, glucose_to_voltage(g))
    }
}

/// Fixed-capacity ring of the most recent readings, oldest first.
#[derive(Debug, Clone)]
pub struct VoltageBuffer {
    capacity: usize,
    entries: VecDeque<VoltageReading>,
}

impl Default for VoltageBuffer {
    fn default() -> Self {
        Self::new(DEFAULT_BUFFER_CAPACITY)
    }
}

impl VoltageBuffer {
    /// Panics if `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> Option<&VoltageReading> {
        self.entries.back()
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &VoltageReading> + ExactSizeIterator {
        self.entries.iter()
    }

    pub fn get(&self, i: usize) -> Option<&VoltageReading> {
        self.entries.get(i)
    }

    /// Appends `r`, evicting the oldest entry when full.
    pub fn push(&mut self, r: VoltageReading) -> Result<()> {
        if let Some(last) = self.entries.back() {
            if !(r.t > last.t) {
                return Err(Error::NonMonotoneTimestamp {
                    prev: last.t,
                    t: r.t,
                });
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(r);
        Ok(())
    }

    /// The `n` most recent readings (fewer if the buffer is shorter), oldest first.
    pub fn recent(&self, n: usize) -> impl Iterator<Item = &VoltageReading> {
        let skip = self.entries.len().saturating_sub(n);
        self.entries.iter().skip(skip)
    }

    /// Least-squares slope in V/min over the `min(n, len)` most recent readings.
    ///
    /// `None` when fewer than two readings are available.
    pub fn lsq_slope(&self, n: usize) -> Option<f64> {
        let (ts, vs): (Vec<f64>, Vec<f64>) = self.recent(n).map(|r| (r.t, r.v)).unzip();
        lsq_slope(&ts, &vs)
    }
}

/// Ordinary least-squares slope of `ys` against `xs`.
///
/// Centres both series first, so the result does not depend on the origin of
/// `xs`. Returns `None` with fewer than two points or a degenerate `xs`.
pub fn lsq_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs[..n].iter().zip(&ys[..n]) {
        let dx = x - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    if sxx <= 0.0 || !sxx.is_finite() {
        return None;
    }
    Some(sxy / sxx)
}

/// One row of a CGM trace file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_min: f64,
    pub glucose_mgdl: f64,
    #[serde(default)]
    pub hypo_event: bool,
}

#[derive(Deserialize)]
struct RawTraceRow {
    t_min: f64,
    glucose_mgdl: f64,
    #[serde(default)]
    hypo_event: Option<u8>,
}

const TRACE_HEADER: [&str; 2] = ["t_min", "glucose_mgdl"];

/// Parses a trace CSV (`t_min,glucose_mgdl[,hypo_event]`).
pub fn read_trace<R: Read>(reader: R) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let ok = match names.as_slice() {
        [a, b] => [*a, *b] == TRACE_HEADER,
        [a, b, c] => [*a, *b] == TRACE_HEADER && *c == "hypo_event",
        _ => false,
    };
    if !ok {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header t_min,glucose_mgdl[,hypo_event], got {names:?}"),
        });
    }
    let mut rows: Vec<TraceRow> = Vec::new();
    for (i, rec) in rdr.deserialize::<RawTraceRow>().enumerate() {
        let line = i as u64 + 2;
        let raw = rec.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        let hypo_event = match raw.hypo_event {
            None | Some(0) => false,
            Some(1) => true,
            Some(other) => {
                return Err(Error::Parse {
                    line,
                    msg: format!("hypo_event must be 0 or 1, got {other}"),
                })
            }
        };
        if !raw.t_min.is_finite() {
            return Err(Error::Parse {
                line,
                msg: "non-finite t_min".into(),
            });
        }
        GlucoseValue::new(raw.glucose_mgdl).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if let Some(prev) = rows.last() {
            if !(raw.t_min > prev.t_min) {
                return Err(Error::Parse {
                    line,
                    msg: format!("t_min {} does not follow {}", raw.t_min, prev.t_min),
                });
            }
        }
        rows.push(TraceRow {
            t_min: raw.t_min,
            glucose_mgdl: raw.glucose_mgdl,
            hypo_event,
        });
    }
    Ok(rows)
}

pub fn read_trace_file(path: impl AsRef<Path>) -> Result<Vec<TraceRow>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_trace(std::io::BufReader::new(f))
}

/// Writes a trace with the annotation column included.
pub fn write_trace<W: Write>(writer: W, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t_min", "glucose_mgdl", "hypo_event"])?;
    for r in rows {
        w.write_record([
            r.t_min.to_string(),
            r.glucose_mgdl.to_string(),
            u8::from(r.hypo_event).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(path: impl AsRef<Path>, rows: &[TraceRow]) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    write_trace(std::io::BufWriter::new(f), rows)
}
