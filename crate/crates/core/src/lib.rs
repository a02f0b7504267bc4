//! Event-driven glucose severity classification and insulin dose calculation.
//!
//! Every CGM reading flows through the same safety-first path:
//!
//! 1. the reading is converted to the internal 0–3 V representation and pushed
//!    into a fixed-capacity [`signal::VoltageBuffer`];
//! 2. the [`safety`] emergency detector runs on every reading and, when the
//!    least-squares descent slope is steep enough, raises an alert and exits
//!    before anything can be dosed;
//! 3. otherwise the edge-triggered [`safety::ThresholdBell`] decides whether
//!    the expensive path wakes at all;
//! 4. on a wake, the last 50-minute window is featurised, Poisson-encoded and
//!    classified by a three-layer LIF spiking network ([`snn`]), and the
//!    severity shifts the sigmoidal [`dosing`] curve (hard-capped at 5 U).
//!
//! [`training`] holds the surrogate-gradient trainer, [`dataset`] the window
//! extraction, labelling and the synthetic trace generator, [`baselines`] the
//! rule, MLP and energy comparisons, and [`pipeline`] the orchestrator, the
//! telemetry sync protocol and the 15-scenario validation suite.

#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose so NaN is rejected along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod dataset;
pub mod dosing;
pub mod error;
pub mod linalg;
pub mod pipeline;
pub mod safety;
pub mod signal;
pub mod snn;
pub mod training;

pub use error::{Error, Result};

/// Glucose severity class produced by the classifiers.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "UPPERCASE")]
pub enum Severity {
    Low = 0,
    Medium = 1,
    High = 2,
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::Low, Severity::Medium, Severity::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Severity::Low),
            1 => Ok(Severity::Medium),
            2 => Ok(Severity::High),
            other => Err(Error::InvalidSeverity(other as i64)),
        }
    }
}

impl std::fmt::Display for Severity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Severity::Low => "LOW",
            Severity::Medium => "MEDIUM",
            Severity::High => "HIGH",
        })
    }
}
