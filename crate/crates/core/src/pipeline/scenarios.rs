//! Data-driven encodings of the 15 validation scenarios.

use super::sync::{sync, FailurePoint, SimulatedCloud, SyncOutcome, SyncQueue, TelemetryRecord};
use super::{
    CloudClient, FixedClassifier, Mode, Pipeline, PipelineConfig, PipelineEvent, RuleClassifier,
    SeverityClassifier, Tier,
};
use crate::dosing::DOSE_CAP_UNITS;
use crate::signal::VoltageReading;
use crate::{Error, Result, Severity};

pub const SCENARIO_NAMES: [&str; 15] = [
    "Threshold exceeded (happy path)",
    "All readings below threshold (no wake)",
    "Re-trigger prevention (epsilon guard)",
    "Second spike after recovery",
    "Steady gradual incline",
    "Rapid spike + 5.0 U safety cap",
    "Cloud sync (UPLOAD → CONFIRM → WIPE)",
    "Sync failure (no data loss)",
    "SNN severity affects dose magnitude",
    "Buffer full (ring eviction)",
    "Azure Insights disabled (no-op)",
    "Azure Insights enabled (telemetry)",
    "Emergency descent (injection suppressed)",
    "PREDIABETIC mode (notifications only)",
    "Floating-point boundary (ε guard)",
];

/// Deliberate defects used to check that the suite notices them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutation {
    #[default]
    None,
    /// Bell compares without the ε margin.
    BellEpsilonZero,
    /// Sync drops the batch as soon as it is snapshotted.
    WipeBeforeConfirm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn run_scenarios() -> Vec<ScenarioResult> {
    run_scenarios_with(Mutation::None)
}

pub fn run_scenarios_with(mutation: Mutation) -> Vec<ScenarioResult> {
    let h = Harness { mutation };
    let checks: [fn(&Harness) -> Result<String>; 15] = [
        Harness::happy_path,
        Harness::no_wake,
        Harness::retrigger,
        Harness::second_spike,
        Harness::gradual_incline,
        Harness::dose_cap,
        Harness::sync_ok,
        Harness::sync_fail,
        Harness::severity_dose,
        Harness::ring_eviction,
        Harness::telemetry_off,
        Harness::telemetry_on,
        Harness::emergency,
        Harness::prediabetic,
        Harness::epsilon_boundary,
    ];
    checks
        .iter()
        .zip(SCENARIO_NAMES)
        .enumerate()
        .map(|(i, (check, name))| {
            let (passed, detail) = match check(&h) {
                Ok(d) => (true, d),
                Err(e) => (false, e.to_string()),
            };
            ScenarioResult {
                id: i + 1,
                name,
                passed,
                detail,
            }
        })
        .collect()
}

const HAPPY: [f64; 4] = [1.0, 1.1, 1.2, 1.4];

fn fail(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(fail(msg()))
    }
}

fn count(events: &[Vec<PipelineEvent>], pred: impl Fn(&PipelineEvent) -> bool) -> usize {
    events.iter().flatten().filter(|e| pred(e)).count()
}

fn is_wake(e: &PipelineEvent) -> bool {
    matches!(e, PipelineEvent::BellWake { .. })
}

fn injections(events: &[Vec<PipelineEvent>]) -> Vec<f64> {
    events
        .iter()
        .flatten()
        .filter_map(|e| match e {
            PipelineEvent::Injection { units, .. } => Some(*units),
            _ => None,
        })
        .collect()
}

/// The last full window ends on a 1.4 V reading after a flat 1.0 V run.
fn flat_then_jump() -> Vec<f64> {
    let mut vs = vec![1.0; 9];
    vs.push(1.4);
    vs
}

struct Harness {
    mutation: Mutation,
}

impl Harness {
    fn config(&self) -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        if self.mutation == Mutation::BellEpsilonZero {
            cfg.bell.epsilon = 0.0;
        }
        cfg
    }

    fn pipeline(
        &self,
        cfg: PipelineConfig,
        cls: Box<dyn SeverityClassifier>,
    ) -> Result<Pipeline<SimulatedCloud>> {
        Pipeline::new(cfg, cls, SimulatedCloud::new())
    }

    fn feed<C: CloudClient>(
        p: &mut Pipeline<C>,
        vs: &[f64],
        dt: f64,
    ) -> Result<Vec<Vec<PipelineEvent>>> {
        vs.iter()
            .enumerate()
            .map(|(i, &v)| p.on_reading(VoltageReading::new(i as f64 * dt, v)?))
            .collect()
    }

    fn run(&self, vs: &[f64], dt: f64) -> Result<Vec<Vec<PipelineEvent>>> {
        let mut p = self.pipeline(self.config(), Box::new(RuleClassifier))?;
        Self::feed(&mut p, vs, dt)
    }

    fn sync(&self, q: &mut SyncQueue, c: &mut SimulatedCloud) -> Result<SyncOutcome> {
        if self.mutation != Mutation::WipeBeforeConfirm {
            return sync(q, c);
        }
        let Some(batch) = q.begin()? else {
            return Ok(SyncOutcome::Empty);
        };
        q.discard_in_flight();
        Ok(match c.upload(&batch) {
            Ok(_) => SyncOutcome::Synced { wiped: batch.len() },
            Err(e) => {
                q.fail();
                SyncOutcome::Retryable { reason: e.0 }
            }
        })
    }

    /// Happy-path events loaded into a standalone queue.
    fn loaded_queue(&self) -> Result<SyncQueue> {
        let mut q = SyncQueue::new();
        for (i, evs) in self.run(&HAPPY, 5.0)?.into_iter().enumerate() {
            for e in evs {
                q.enqueue(i as f64 * 5.0, e);
            }
        }
        Ok(q)
    }

    fn happy_path(&self) -> Result<String> {
        let ev = self.run(&HAPPY, 5.0)?;
        let wakes = count(&ev, is_wake);
        let doses = injections(&ev);
        ensure(wakes == 1 && ev[3].iter().any(is_wake), || {
            format!("{wakes} wakes")
        })?;
        ensure(
            doses.len() == 1 && doses[0] > 0.0 && doses[0] <= DOSE_CAP_UNITS,
            || format!("injections {doses:?}"),
        )?;
        Ok(format!("wake at 1.4 V, {:.3} U", doses[0]))
    }

    fn no_wake(&self) -> Result<String> {
        let vs: Vec<f64> = (0..24)
            .map(|i| 1.0 + 0.25 * ((i as f64) * 0.5).sin())
            .collect();
        let ev = self.run(&vs, 5.0)?;
        let noops = count(&ev, |e| *e == PipelineEvent::NoOp);
        ensure(noops == vs.len() && ev.iter().all(|e| e.len() == 1), || {
            format!("{noops}/{} NoOp", vs.len())
        })?;
        Ok(format!("{} readings, all NoOp", vs.len()))
    }

    fn retrigger(&self) -> Result<String> {
        let ev = self.run(&[1.0, 1.4, 1.45], 5.0)?;
        let wakes = count(&ev, is_wake);
        ensure(wakes == 1, || format!("{wakes} wakes"))?;
        Ok("1.45 V after a wake at 1.4 V stays quiet".into())
    }

    fn second_spike(&self) -> Result<String> {
        let ev = self.run(&[1.0, 1.5, 1.2, 0.9, 1.3, 2.0], 5.0)?;
        let at: Vec<usize> = (0..ev.len())
            .filter(|&i| ev[i].iter().any(is_wake))
            .collect();
        ensure(at == [1, 5], || format!("wakes at {at:?}"))?;
        Ok("wakes at readings 2 and 6".into())
    }

    /// The bell ratchets: every wake lifts the threshold by at least
    /// τ_base, so wakes on a monotone incline are spaced and bounded.
    fn gradual_incline(&self) -> Result<String> {
        let vs: Vec<f64> = (0..=50).map(|i| 1.0 + 0.02 * i as f64).collect();
        let ev = self.run(&vs, 5.0)?;
        let cfg = self.config().bell;
        let thresholds: Vec<f64> = ev
            .iter()
            .flatten()
            .filter_map(|e| match e {
                PipelineEvent::BellWake { new_threshold, .. } => Some(*new_threshold),
                _ => None,
            })
            .collect();
        let at: Vec<usize> = (0..ev.len())
            .filter(|&i| ev[i].iter().any(is_wake))
            .collect();
        let bound = 1 + ((vs[vs.len() - 1] - cfg.threshold) / cfg.tau_base).floor() as usize;
        ensure(!thresholds.is_empty() && thresholds.len() <= bound, || {
            format!("{} wakes, bound {bound}", thresholds.len())
        })?;
        ensure(
            thresholds
                .windows(2)
                .all(|w| w[1] >= w[0] + cfg.tau_base - 1e-12),
            || format!("thresholds {thresholds:?}"),
        )?;
        ensure(at.windows(2).all(|w| w[1] > w[0] + 1), || {
            format!("wakes at {at:?}")
        })?;
        Ok(format!(
            "{} wakes over {} readings (bound {bound})",
            at.len(),
            vs.len()
        ))
    }

    fn dose_cap(&self) -> Result<String> {
        let ev = self.run(&[0.5, 3.0], 1.0)?;
        let doses = injections(&ev);
        ensure(doses == [DOSE_CAP_UNITS], || {
            format!("injections {doses:?}")
        })?;
        Ok("0.5 → 3.0 V in 1 min, capped at 5.0 U".into())
    }

    fn sync_ok(&self) -> Result<String> {
        let mut q = self.loaded_queue()?;
        let sent: Vec<TelemetryRecord> = q.records().into_iter().cloned().collect();
        let mut cloud = SimulatedCloud::new();
        let out = self.sync(&mut q, &mut cloud)?;
        ensure(out == SyncOutcome::Synced { wiped: sent.len() }, || {
            format!("{out:?}")
        })?;
        ensure(q.is_empty() && cloud.received == sent, || {
            "queue not drained".into()
        })?;
        Ok(format!("{} records uploaded and wiped", sent.len()))
    }

    fn sync_fail(&self) -> Result<String> {
        let mut q = self.loaded_queue()?;
        let before: Vec<TelemetryRecord> = q.records().into_iter().cloned().collect();
        let mut cloud = SimulatedCloud::failing_on([(0, FailurePoint::BeforeUpload)]);
        let out = self.sync(&mut q, &mut cloud)?;
        ensure(matches!(out, SyncOutcome::Retryable { .. }), || {
            format!("{out:?}")
        })?;
        let after: Vec<TelemetryRecord> = q.records().into_iter().cloned().collect();
        ensure(after == before, || {
            format!("{} of {} records left", after.len(), before.len())
        })?;
        let retry = self.sync(&mut q, &mut cloud)?;
        ensure(
            retry
                == SyncOutcome::Synced {
                    wiped: before.len(),
                }
                && cloud.received == before,
            || format!("retry {retry:?}"),
        )?;
        Ok(format!(
            "{} records kept through the failure, delivered on retry",
            before.len()
        ))
    }

    fn severity_dose(&self) -> Result<String> {
        let mut doses = [0.0; 3];
        for s in Severity::ALL {
            let mut p = self.pipeline(self.config(), Box::new(FixedClassifier(s)))?;
            let d = injections(&Self::feed(&mut p, &flat_then_jump(), 5.0)?);
            ensure(d.len() == 1, || format!("{s}: {} injections", d.len()))?;
            doses[s.index()] = d[0];
        }
        ensure(
            doses[0] <= doses[1] && doses[1] <= doses[2] && doses[2] > doses[0],
            || format!("doses {doses:?}"),
        )?;
        Ok(format!(
            "LOW {:.3} / MEDIUM {:.3} / HIGH {:.3} U",
            doses[0], doses[1], doses[2]
        ))
    }

    fn ring_eviction(&self) -> Result<String> {
        let mut p = self.pipeline(self.config(), Box::new(RuleClassifier))?;
        Self::feed(&mut p, &[1.0; 61], 5.0)?;
        let b = p.buffer();
        let first = b.iter().next().map(|r| r.t);
        ensure(b.len() == 60 && first == Some(5.0), || {
            format!("len {} first {first:?}", b.len())
        })?;
        Ok("61 readings, oldest evicted".into())
    }

    fn telemetry_off(&self) -> Result<String> {
        let mut p = self.pipeline(self.config(), Box::new(RuleClassifier))?;
        Self::feed(&mut p, &HAPPY, 5.0)?;
        p.sync()?;
        ensure(p.client().calls() == 0 && p.queue().is_empty(), || {
            format!("{} client calls", p.client().calls())
        })?;
        Ok("0 client calls".into())
    }

    fn telemetry_on(&self) -> Result<String> {
        let cfg = PipelineConfig {
            telemetry: true,
            ..self.config()
        };
        let mut p = self.pipeline(cfg, Box::new(RuleClassifier))?;
        Self::feed(&mut p, &HAPPY, 5.0)?;
        p.sync()?;
        let got = &p.client().received;
        let has_wake = got.iter().any(|r| is_wake(&r.event));
        let has_dose = got
            .iter()
            .any(|r| matches!(r.event, PipelineEvent::Injection { .. }));
        ensure(
            p.client().calls() >= 1 && has_wake && has_dose && p.queue().is_empty(),
            || format!("{} calls, {} records", p.client().calls(), got.len()),
        )?;
        Ok(format!(
            "{} records delivered in {} call(s)",
            got.len(),
            p.client().calls()
        ))
    }

    fn emergency(&self) -> Result<String> {
        let history = [(0.0, 3.0), (1.0, 2.7), (2.0, 2.4)];
        let run = |enabled: bool| -> Result<Vec<PipelineEvent>> {
            let cfg = PipelineConfig {
                emergency_enabled: enabled,
                ..self.config()
            };
            let mut p = self.pipeline(cfg, Box::new(FixedClassifier(Severity::High)))?;
            let h: Vec<VoltageReading> = history
                .iter()
                .map(|&(t, v)| VoltageReading::new(t, v))
                .collect::<Result<_>>()?;
            p.restore_history(&h)?;
            p.on_reading(VoltageReading::new(3.0, 2.1)?)
        };
        let ev = run(true)?;
        let alert = matches!(ev.first(), Some(PipelineEvent::EmergencyAlert { .. }));
        let urgent = ev.contains(&PipelineEvent::Notification {
            tier: Tier::Urgent,
            severity: Severity::High,
        });
        let dosed = ev
            .iter()
            .any(|e| matches!(e, PipelineEvent::Injection { .. }));
        ensure(alert && urgent && !dosed && !ev.iter().any(is_wake), || {
            format!("{ev:?}")
        })?;
        let counterfactual = run(false)?;
        ensure(
            counterfactual
                .iter()
                .any(|e| matches!(e, PipelineEvent::Injection { .. })),
            || "detector off should have dosed".into(),
        )?;
        Ok("alert raised, injection suppressed (would dose without the detector)".into())
    }

    fn prediabetic(&self) -> Result<String> {
        let cfg = PipelineConfig {
            mode: Mode::Prediabetic,
            ..self.config()
        };
        let mut p = self.pipeline(cfg, Box::new(FixedClassifier(Severity::High)))?;
        let ev = Self::feed(&mut p, &flat_then_jump(), 5.0)?;
        let n_inj = injections(&ev).len();
        let urgent = count(&ev, |e| {
            *e == PipelineEvent::Notification {
                tier: Tier::Urgent,
                severity: Severity::High,
            }
        });
        ensure(n_inj == 0 && urgent == 1, || {
            format!("{n_inj} injections, {urgent} URGENT")
        })?;
        Ok("HIGH → URGENT notification, no injection".into())
    }

    fn epsilon_boundary(&self) -> Result<String> {
        let thr = self.config().bell.threshold;
        for v in [thr, thr + 1e-12] {
            let wakes = count(&self.run(&[1.0, v], 5.0)?, is_wake);
            ensure(wakes == 0, || format!("fired at threshold + {:e}", v - thr))?;
        }
        let wakes = count(&self.run(&[1.0, thr + 1e-6], 5.0)?, is_wake);
        ensure(wakes == 1, || "no fire at threshold + 1e-6".into())?;
        Ok("threshold + 1e-12 quiet, threshold + 1e-6 fires".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_pass() {
        for r in run_scenarios() {
            assert!(r.passed, "{} {}: {}", r.id, r.name, r.detail);
        }
    }

    #[test]
    fn epsilon_mutation_flips_only_15() {
        let failed: Vec<usize> = run_scenarios_with(Mutation::BellEpsilonZero)
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.id)
            .collect();
        assert_eq!(failed, vec![15]);
    }

    #[test]
    fn wipe_mutation_flips_only_8() {
        let failed: Vec<usize> = run_scenarios_with(Mutation::WipeBeforeConfirm)
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.id)
            .collect();
        assert_eq!(failed, vec![8]);
    }
}
