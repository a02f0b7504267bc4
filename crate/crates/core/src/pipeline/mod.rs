//! Per-reading orchestration: emergency check, threshold bell, severity
//! classification, then dose (diabetic) or notification (prediabetic).

mod scenarios;
mod sync;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::baselines::rule_assess;
use crate::dataset::{extract_features, Window, WINDOW_LEN};
use crate::dosing::{compute_dose_for, DoseConfig};
use crate::safety::{detect_emergency, BellConfig, EmergencyConfig, ThresholdBell};
use crate::signal::{
    voltage_to_glucose, GlucoseValue, TraceRow, VoltageBuffer, VoltageReading,
    DEFAULT_BUFFER_CAPACITY,
};
use crate::snn::{classify, encode_seeded, EncoderConfig, SpikingNet};
use crate::{Error, Result, Severity};

pub use scenarios::{run_scenarios, run_scenarios_with, Mutation, ScenarioResult, SCENARIO_NAMES};
pub use sync::{
    sync, BatchState, CloudClient, CloudError, ConfirmToken, FailurePoint, SimulatedCloud,
    SyncOutcome, SyncQueue, TelemetryRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mode {
    Diabetic,
    /// Same stack, but doses are computed and discarded.
    Prediabetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Tier {
    Nudge,
    Alert,
    Urgent,
}

impl From<Severity> for Tier {
    fn from(s: Severity) -> Self {
        match s {
            Severity::Low => Tier::Nudge,
            Severity::Medium => Tier::Alert,
            Severity::High => Tier::Urgent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum PipelineEvent {
    EmergencyAlert {
        slope: f64,
        projected_v: f64,
    },
    BellWake {
        v: f64,
        new_threshold: f64,
    },
    Classified {
        severity: Severity,
        /// Output spike counts; absent for rule-based decisions.
        counts: Option<[u32; 3]>,
        /// True when the buffer was too short for a full window.
        fallback: bool,
    },
    Injection {
        units: f64,
        excess: f64,
        gate: f64,
    },
    Notification {
        tier: Tier,
        severity: Severity,
    },
    NoOp,
}

/// A severity decision for one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub severity: Severity,
    pub counts: Option<[u32; 3]>,
}

pub trait SeverityClassifier {
    fn classify(&mut self, window: &Window) -> Result<Decision>;
    /// Whether calls run the spiking network (counted as SNN invocations).
    fn is_snn(&self) -> bool {
        false
    }
}

/// Spiking-net classifier. Each call uses a fresh encoder stream so a replay
/// of the same trace gives the same decisions.
#[derive(Debug, Clone)]
pub struct SnnClassifier {
    pub net: SpikingNet,
    pub encoder: EncoderConfig,
    calls: u64,
}

impl SnnClassifier {
    pub fn new(net: SpikingNet, encoder: EncoderConfig) -> Result<Self> {
        net.validate()?;
        encoder.validate()?;
        Ok(Self {
            net,
            encoder,
            calls: 0,
        })
    }
}

impl SeverityClassifier for SnnClassifier {
    fn classify(&mut self, window: &Window) -> Result<Decision> {
        let f = extract_features(window)?;
        let x = encode_seeded(&f.0, &self.encoder, self.calls)?;
        self.calls += 1;
        let counts = self.net.forward(&x)?.counts3();
        Ok(Decision {
            severity: classify(counts),
            counts: Some(counts),
        })
    }

    fn is_snn(&self) -> bool {
        true
    }
}

/// Static ADA-threshold rules on the window.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleClassifier;

impl SeverityClassifier for RuleClassifier {
    fn classify(&mut self, window: &Window) -> Result<Decision> {
        Ok(Decision {
            severity: crate::baselines::rule_assess_window(window),
            counts: None,
        })
    }
}

/// Always returns the same class. For tests and scenario encodings.
#[derive(Debug, Clone, Copy)]
pub struct FixedClassifier(pub Severity);

impl SeverityClassifier for FixedClassifier {
    fn classify(&mut self, _: &Window) -> Result<Decision> {
        Ok(Decision {
            severity: self.0,
            counts: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub capacity: usize,
    pub emergency: EmergencyConfig,
    pub bell: BellConfig,
    pub dose: DoseConfig,
    /// Disabling the detector exists only for counterfactual tests.
    pub emergency_enabled: bool,
    pub telemetry: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Diabetic,
            capacity: DEFAULT_BUFFER_CAPACITY,
            emergency: EmergencyConfig::default(),
            bell: BellConfig::default(),
            dose: DoseConfig::default(),
            emergency_enabled: true,
            telemetry: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.capacity < WINDOW_LEN.max(self.emergency.window) {
            return Err(Error::Config(format!(
                "buffer capacity {} is smaller than the analysis window",
                self.capacity
            )));
        }
        self.emergency.validate()?;
        self.dose.validate()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub readings: u64,
    pub emergencies: u64,
    pub wakes: u64,
    pub snn_invocations: u64,
    pub fallbacks: u64,
    pub injections: u64,
    pub notifications: u64,
    pub sync_attempts: u64,
    pub sync_failures: u64,
}

/// One line of the JSON-lines run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub t: f64,
    #[serde(flatten)]
    pub event: PipelineEvent,
}

pub struct Pipeline<C: CloudClient> {
    cfg: PipelineConfig,
    buffer: VoltageBuffer,
    bell: ThresholdBell,
    classifier: Box<dyn SeverityClassifier>,
    client: C,
    queue: SyncQueue,
    stats: PipelineStats,
}

impl<C: CloudClient> Pipeline<C> {
    pub fn new(
        cfg: PipelineConfig,
        classifier: Box<dyn SeverityClassifier>,
        client: C,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            buffer: VoltageBuffer::new(cfg.capacity),
            bell: ThresholdBell::new(cfg.bell),
            cfg,
            classifier,
            client,
            queue: SyncQueue::new(),
            stats: PipelineStats::default(),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn buffer(&self) -> &VoltageBuffer {
        &self.buffer
    }

    pub fn bell(&self) -> &ThresholdBell {
        &self.bell
    }

    pub fn queue(&self) -> &SyncQueue {
        &self.queue
    }

    pub fn client(&self) -> &C {
        &self.client
    }

    pub fn client_mut(&mut self) -> &mut C {
        &mut self.client
    }

    pub fn stats(&self) -> &PipelineStats {
        &self.stats
    }

    /// Preloads readings (e.g. from before a restart) without evaluating them.
    pub fn restore_history(&mut self, readings: &[VoltageReading]) -> Result<()> {
        for &r in readings {
            self.buffer.push(r)?;
        }
        Ok(())
    }

    pub fn on_glucose(&mut self, t: f64, mgdl: f64) -> Result<Vec<PipelineEvent>> {
        self.on_reading(VoltageReading::from_glucose(t, GlucoseValue::new(mgdl)?)?)
    }

    pub fn on_reading(&mut self, r: VoltageReading) -> Result<Vec<PipelineEvent>> {
        self.buffer.push(r)?;
        self.stats.readings += 1;

        if self.cfg.emergency_enabled {
            let verdict = detect_emergency(&self.buffer, &self.cfg.emergency);
            if verdict.is_emergency {
                self.stats.emergencies += 1;
                self.stats.notifications += 1;
                let events = vec![
                    PipelineEvent::EmergencyAlert {
                        slope: verdict.slope,
                        projected_v: verdict.projected_v,
                    },
                    PipelineEvent::Notification {
                        tier: Tier::Urgent,
                        severity: Severity::High,
                    },
                ];
                self.record(r.t, &events);
                return Ok(events);
            }
        }

        if !self.bell.check(r.v) {
            return Ok(vec![PipelineEvent::NoOp]);
        }
        self.stats.wakes += 1;
        let slope = self
            .buffer
            .lsq_slope(self.cfg.emergency.window)
            .unwrap_or(0.0);
        let new_threshold = self.bell.rearm(r.v, slope);
        let mut events = vec![PipelineEvent::BellWake {
            v: r.v,
            new_threshold,
        }];

        let (decision, fallback) = match self.window() {
            Some(w) => {
                if self.classifier.is_snn() {
                    self.stats.snn_invocations += 1;
                }
                (self.classifier.classify(&w)?, false)
            }
            None => {
                self.stats.fallbacks += 1;
                let g = voltage_to_glucose(r.v)?.mgdl();
                let d = Decision {
                    severity: rule_assess(g, slope * crate::signal::MGDL_PER_VOLT),
                    counts: None,
                };
                (d, true)
            }
        };
        events.push(PipelineEvent::Classified {
            severity: decision.severity,
            counts: decision.counts,
            fallback,
        });

        let dose = compute_dose_for(r.v, slope, decision.severity, &self.cfg.dose)?;
        match self.cfg.mode {
            Mode::Diabetic => {
                self.stats.injections += 1;
                events.push(PipelineEvent::Injection {
                    units: dose.units,
                    excess: dose.excess,
                    gate: dose.sigmoid_gate,
                });
            }
            Mode::Prediabetic => {
                self.stats.notifications += 1;
                events.push(PipelineEvent::Notification {
                    tier: decision.severity.into(),
                    severity: decision.severity,
                });
            }
        }
        self.record(r.t, &events);
        if self.cfg.telemetry {
            self.sync()?;
        }
        Ok(events)
    }

    /// The last full window in mg/dL, if the buffer holds one.
    fn window(&self) -> Option<Window> {
        if self.buffer.len() < WINDOW_LEN {
            return None;
        }
        let recent: Vec<&VoltageReading> = self.buffer.recent(WINDOW_LEN).collect();
        let mut g = [0.0; WINDOW_LEN];
        let mut ts = [0.0; WINDOW_LEN];
        for (i, r) in recent.iter().enumerate() {
            g[i] = voltage_to_glucose(r.v).ok()?.mgdl();
            ts[i] = r.t;
        }
        Window::new(g, ts, false).ok()
    }

    fn record(&mut self, t: f64, events: &[PipelineEvent]) {
        if self.cfg.telemetry {
            for e in events {
                self.queue.enqueue(t, e.clone());
            }
        }
    }

    /// Pushes queued telemetry. A no-op when telemetry is disabled.
    pub fn sync(&mut self) -> Result<SyncOutcome> {
        if !self.cfg.telemetry {
            return Ok(SyncOutcome::Empty);
        }
        let out = sync(&mut self.queue, &mut self.client)?;
        match out {
            SyncOutcome::Empty => {}
            SyncOutcome::Synced { .. } => self.stats.sync_attempts += 1,
            SyncOutcome::Retryable { .. } => {
                self.stats.sync_attempts += 1;
                self.stats.sync_failures += 1;
            }
        }
        Ok(out)
    }

    /// Feeds a whole trace, then runs the end-of-run sync.
    pub fn run_trace(&mut self, rows: &[TraceRow]) -> Result<Vec<LoggedEvent>> {
        let mut log = Vec::new();
        for row in rows {
            let r = VoltageReading::from_glucose(row.t_min, GlucoseValue::new(row.glucose_mgdl)?)?;
            for event in self.on_reading(r)? {
                log.push(LoggedEvent {
                    t: row.t_min,
                    event,
                });
            }
        }
        self.sync()?;
        Ok(log)
    }
}

pub fn write_event_log<W: Write>(mut writer: W, log: &[LoggedEvent]) -> Result<()> {
    for e in log {
        serde_json::to_writer(&mut writer, e)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pipe(mode: Mode, cls: Box<dyn SeverityClassifier>) -> Pipeline<SimulatedCloud> {
        let cfg = PipelineConfig {
            mode,
            ..PipelineConfig::default()
        };
        Pipeline::new(cfg, cls, SimulatedCloud::new()).unwrap()
    }

    fn feed(p: &mut Pipeline<SimulatedCloud>, vs: &[f64], dt: f64) -> Vec<Vec<PipelineEvent>> {
        vs.iter()
            .enumerate()
            .map(|(i, &v)| {
                p.on_reading(VoltageReading::new(i as f64 * dt, v).unwrap())
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn below_threshold_is_noop() {
        let mut p = pipe(Mode::Diabetic, Box::new(RuleClassifier));
        for ev in feed(&mut p, &[1.0; 20], 5.0) {
            assert_eq!(ev, vec![PipelineEvent::NoOp]);
        }
    }

    #[test]
    fn short_buffer_uses_rule_fallback() {
        let mut p = pipe(Mode::Diabetic, Box::new(FixedClassifier(Severity::Low)));
        let ev = feed(&mut p, &[1.0, 1.4], 60.0).pop().unwrap();
        // 190 mg/dL rising slowly: MEDIUM under the static rules
        assert!(ev.contains(&PipelineEvent::Classified {
            severity: Severity::Medium,
            counts: None,
            fallback: true
        }));
        assert_eq!(p.stats().fallbacks, 1);
    }

    #[test]
    fn full_window_uses_classifier() {
        let mut p = pipe(Mode::Diabetic, Box::new(FixedClassifier(Severity::Low)));
        let mut vs = vec![1.0; 9];
        vs.push(1.4);
        let ev = feed(&mut p, &vs, 5.0).pop().unwrap();
        assert!(ev.contains(&PipelineEvent::Classified {
            severity: Severity::Low,
            counts: None,
            fallback: false
        }));
    }

    #[test]
    fn event_order_on_wake() {
        let mut p = pipe(Mode::Diabetic, Box::new(RuleClassifier));
        let ev = feed(&mut p, &[1.0, 1.5], 5.0).pop().unwrap();
        assert!(matches!(ev[0], PipelineEvent::BellWake { .. }));
        assert!(matches!(ev[1], PipelineEvent::Classified { .. }));
        assert!(matches!(ev[2], PipelineEvent::Injection { .. }));
        assert_eq!(ev.len(), 3);
    }

    #[test]
    fn snn_classifier_runs_and_counts() {
        let net = SpikingNet::random(crate::snn::DEFAULT_DIMS, 3);
        let cls = SnnClassifier::new(net, EncoderConfig::default()).unwrap();
        let mut p = pipe(Mode::Diabetic, Box::new(cls));
        let mut vs = vec![1.0; 9];
        vs.push(1.5);
        let ev = feed(&mut p, &vs, 5.0).pop().unwrap();
        assert!(ev.iter().any(|e| matches!(
            e,
            PipelineEvent::Classified {
                counts: Some(_),
                ..
            }
        )));
        assert_eq!(p.stats().snn_invocations, 1);
    }

    #[test]
    fn log_lines_round_trip() {
        let log = vec![
            LoggedEvent {
                t: 5.0,
                event: PipelineEvent::Notification {
                    tier: Tier::Alert,
                    severity: Severity::Medium,
                },
            },
            LoggedEvent {
                t: 10.0,
                event: PipelineEvent::NoOp,
            },
        ];
        let mut buf = Vec::new();
        write_event_log(&mut buf, &log).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"t":5.0,"type":"Notification","tier":"ALERT","severity":"MEDIUM"}"#
        );
        let back: Vec<LoggedEvent> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(back, log);
    }

    #[test]
    fn tier_mapping_is_ordinal() {
        let tiers: Vec<Tier> = Severity::ALL.iter().map(|&s| s.into()).collect();
        assert_eq!(tiers, vec![Tier::Nudge, Tier::Alert, Tier::Urgent]);
    }
}
