//! Lag-compensated emergency descent detection and the edge-triggered
//! threshold bell.

use serde::{Deserialize, Serialize};

use crate::signal::{VoltageBuffer, DEFAULT_SLOPE_WINDOW};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmergencyConfig {
    /// Interstitial lag the projection compensates for, minutes.
    pub lag_minutes: f64,
    /// Slope (V/min) at or below which an emergency is declared.
    pub slope_threshold: f64,
    /// Readings used for the least-squares slope.
    pub window: usize,
}

impl Default for EmergencyConfig {
    fn default() -> Self {
        Self {
            lag_minutes: 15.0,
            slope_threshold: -0.25,
            window: DEFAULT_SLOPE_WINDOW,
        }
    }
}

impl EmergencyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lag_minutes > 0.0 && self.lag_minutes.is_finite()) {
            return Err(Error::Config("lag_minutes must be positive".into()));
        }
        if !(self.slope_threshold < 0.0) {
            return Err(Error::Config("slope_threshold must be negative".into()));
        }
        if self.window < 2 {
            return Err(Error::Config("window must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmergencyVerdict {
    pub is_emergency: bool,
    /// V/min; 0 when fewer than two readings are buffered.
    pub slope: f64,
    /// Current voltage projected forward by the lag.
    pub projected_v: f64,
}

/// `v_cur + slope · lag`. Not clipped: the result is a risk estimate.
#[inline]
pub fn project_lag(v_cur: f64, slope: f64, lag: f64) -> f64 {
    v_cur + slope * lag
}

/// Runs on every reading. Never fails; a short buffer is never an emergency.
pub fn detect_emergency(buf: &VoltageBuffer, cfg: &EmergencyConfig) -> EmergencyVerdict {
    let v_cur = buf.last().map_or(0.0, |r| r.v);
    match buf.lsq_slope(cfg.window) {
        Some(slope) => EmergencyVerdict {
            is_emergency: slope <= cfg.slope_threshold,
            slope,
            projected_v: project_lag(v_cur, slope, cfg.lag_minutes),
        },
        None => EmergencyVerdict {
            is_emergency: false,
            slope: 0.0,
            projected_v: v_cur,
        },
    }
}

/// Upper bound for a raised bell threshold, volts.
pub const BELL_THRESHOLD_MAX: f64 = 3.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellConfig {
    /// Initial wake threshold; 1.3 V is 180 mg/dL.
    pub threshold: f64,
    pub epsilon: f64,
    pub tau_base: f64,
    pub alpha: f64,
    pub delta_max: f64,
}

impl Default for BellConfig {
    fn default() -> Self {
        Self {
            threshold: 1.3,
            epsilon: 1e-9,
            tau_base: 0.1,
            alpha: 0.5,
            delta_max: 0.3,
        }
    }
}

/// Edge-triggered comparator: fires once when the signal rises above the
/// threshold, then stays quiet until the signal falls back below it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdBell {
    cfg: BellConfig,
    threshold: f64,
    armed: bool,
}

impl Default for ThresholdBell {
    fn default() -> Self {
        Self::new(BellConfig::default())
    }
}

impl ThresholdBell {
    pub fn new(cfg: BellConfig) -> Self {
        Self {
            threshold: cfg.threshold.clamp(0.0, BELL_THRESHOLD_MAX),
            cfg,
            armed: true,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn is_armed(&self) -> bool {
        self.armed
    }

    pub fn config(&self) -> &BellConfig {
        &self.cfg
    }

    /// Evaluates one reading. Returns whether the bell fired.
    ///
    /// A disarmed bell re-arms (without firing) once `v_cur` drops below
    /// `threshold − ε`.
    pub fn check(&mut self, v_cur: f64) -> bool {
        let eps = self.cfg.epsilon;
        if self.armed {
            if v_cur > self.threshold + eps {
                self.armed = false;
                return true;
            }
        } else if v_cur < self.threshold - eps {
            self.armed = true;
        }
        false
    }

    /// Raises the threshold after a wake: `v_cur + min(τ_base + α·|slope|, Δ_max)`.
    pub fn rearm(&mut self, v_cur: f64, slope: f64) -> f64 {
        self.threshold = (v_cur + self.increment(slope)).clamp(0.0, BELL_THRESHOLD_MAX);
        self.threshold
    }

    /// The threshold increment for a given slope; always in `[τ_base, Δ_max]`
    /// for the default constants.
    pub fn increment(&self, slope: f64) -> f64 {
        let slope = if slope.is_finite() { slope } else { 0.0 };
        (self.cfg.tau_base + self.cfg.alpha * slope.abs()).min(self.cfg.delta_max)
    }
}
