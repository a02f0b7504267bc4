//! Severity-shifted sigmoidal dose calculation with a hard 5 U cap.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Severity};

/// Maximum dose the calculator may ever return, in units.
pub const DOSE_CAP_UNITS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseConfig {
    /// Baseline voltage with zero excess (0.5 V = 100 mg/dL).
    pub v_base: f64,
    /// Excess per volt above baseline.
    pub s_vg: f64,
    pub d_base: f64,
    /// Gain on the rising part of the slope, per V/min.
    pub lambda: f64,
    /// Sigmoid steepness.
    pub k: f64,
    /// Sigmoid midpoint at severity LOW.
    pub m_base: f64,
    /// Midpoint shift per severity step.
    pub delta_m: f64,
}

impl Default for DoseConfig {
    fn default() -> Self {
        Self {
            v_base: 0.5,
            s_vg: 1.0,
            d_base: 1.0,
            lambda: 2.0,
            k: 10.0,
            m_base: 0.5,
            delta_m: 0.15,
        }
    }
}

impl DoseConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.v_base,
            self.s_vg,
            self.d_base,
            self.lambda,
            self.k,
            self.m_base,
            self.delta_m,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("dose constants must be finite".into()));
        }
        if self.k <= 0.0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if self.delta_m < 0.0 {
            return Err(Error::Config("delta_m must be non-negative".into()));
        }
        if self.d_base <= 0.0 {
            return Err(Error::Config("d_base must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseResult {
    pub units: f64,
    pub excess: f64,
    pub sigmoid_gate: f64,
}

/// Dose for voltage `v`, slope `slope` (V/min) and a severity class index.
pub fn compute_dose(v: f64, slope: f64, severity: u8, cfg: &DoseConfig) -> Result<DoseResult> {
    let severity = Severity::from_index(severity as usize)?;
    compute_dose_for(v, slope, severity, cfg)
}

pub fn compute_dose_for(
    v: f64,
    slope: f64,
    severity: Severity,
    cfg: &DoseConfig,
) -> Result<DoseResult> {
    if !v.is_finite() {
        return Err(Error::NonFinite("voltage"));
    }
    if !slope.is_finite() {
        return Err(Error::NonFinite("slope"));
    }
    let excess = (v - cfg.v_base) * cfg.s_vg;
    let d0 = cfg.d_base * excess * (1.0 + cfg.lambda * slope.max(0.0));
    let m_eff = cfg.m_base - severity.index() as f64 * cfg.delta_m;
    let gate = 1.0 / (1.0 + (-cfg.k * (excess - m_eff)).exp());
    let units = (d0 * gate).clamp(0.0, DOSE_CAP_UNITS);
    Ok(DoseResult {
        units,
        excess,
        sigmoid_gate: gate,
    })
}
