use serde::{Deserialize, Serialize};

use crate::signal::{GlucoseValue, TraceRow};
use crate::{Error, Result};

/// Readings per window (50 minutes at a 5-minute cadence).
pub const WINDOW_LEN: usize = 10;
/// Nominal CGM sampling interval, minutes.
pub const CADENCE_MIN: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    glucose: [f64; WINDOW_LEN],
    timestamps: [f64; WINDOW_LEN],
    pub hypo_event: bool,
}

impl Window {
    pub fn new(
        glucose: [f64; WINDOW_LEN],
        timestamps: [f64; WINDOW_LEN],
        hypo_event: bool,
    ) -> Result<Self> {
        for &g in &glucose {
            GlucoseValue::new(g).map_err(|e| Error::Window(e.to_string()))?;
        }
        if timestamps.iter().any(|t| !t.is_finite()) {
            return Err(Error::Window("non-finite timestamp".into()));
        }
        if timestamps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Window("timestamps must strictly increase".into()));
        }
        Ok(Self {
            glucose,
            timestamps,
            hypo_event,
        })
    }

    /// Convenience: readings at `t0, t0+5, …`.
    pub fn regular(glucose: [f64; WINDOW_LEN], t0: f64, hypo_event: bool) -> Result<Self> {
        let ts = std::array::from_fn(|i| t0 + i as f64 * CADENCE_MIN);
        Self::new(glucose, ts, hypo_event)
    }

    pub fn glucose(&self) -> &[f64; WINDOW_LEN] {
        &self.glucose
    }

    pub fn timestamps(&self) -> &[f64; WINDOW_LEN] {
        &self.timestamps
    }

    pub fn last(&self) -> f64 {
        self.glucose[WINDOW_LEN - 1]
    }
}

/// Stride-1 windows over a trace. A gap of more than one missed reading
/// splits the trace; no window spans it. Each window is flagged if any of
/// its readings is annotated.
///
/// Returns `(start_index, window)` pairs, `start_index` into `rows`.
pub fn slide_windows(rows: &[TraceRow]) -> Result<Vec<(usize, Window)>> {
    let mut out = Vec::new();
    let mut seg_start = 0;
    for i in 0..=rows.len() {
        let boundary = i == rows.len() || (i > 0 && is_gap(rows[i - 1].t_min, rows[i].t_min));
        if !boundary {
            continue;
        }
        let seg = &rows[seg_start..i];
        if seg.len() >= WINDOW_LEN {
            for s in 0..=seg.len() - WINDOW_LEN {
                let w = &seg[s..s + WINDOW_LEN];
                let glucose = std::array::from_fn(|k| w[k].glucose_mgdl);
                let ts = std::array::from_fn(|k| w[k].t_min);
                let hypo = w.iter().any(|r| r.hypo_event);
                out.push((seg_start + s, Window::new(glucose, ts, hypo)?));
            }
        }
        seg_start = i;
    }
    Ok(out)
}

fn is_gap(prev: f64, next: f64) -> bool {
    let missed = ((next - prev) / CADENCE_MIN).round() - 1.0;
    missed > 1.0
}
