use std::collections::BTreeSet;
use std::path::PathBuf;

use pdds_core::pipeline::{
    sync, CloudClient, ConfirmToken, FailurePoint, FixedClassifier, LoggedEvent, Mode, Pipeline,
    PipelineConfig, PipelineEvent, RuleClassifier, SimulatedCloud, SnnClassifier, SyncOutcome,
    SyncQueue,
};
use pdds_core::signal::{lsq_slope, read_trace_file, TraceRow, VoltageReading};
use pdds_core::snn::{EncoderConfig, SpikingNet, DEFAULT_DIMS};
use pdds_core::Severity;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn pipeline(mode: Mode, telemetry: bool, cloud: SimulatedCloud) -> Pipeline<SimulatedCloud> {
    let cfg = PipelineConfig {
        mode,
        telemetry,
        ..PipelineConfig::default()
    };
    Pipeline::new(cfg, Box::new(RuleClassifier), cloud).unwrap()
}

fn is_dose_path(e: &PipelineEvent) -> bool {
    matches!(
        e,
        PipelineEvent::Injection { .. }
            | PipelineEvent::BellWake { .. }
            | PipelineEvent::Classified { .. }
    )
}

#[test]
fn safety_ordering_over_all_three_step_classes() {
    // per-minute step for each class, volts
    let classes = [("rising", 0.3), ("flat", 0.0), ("crashing", -0.5)];
    // one prior reading, so the slope is driven by the three steps alone
    let history = [VoltageReading::new(0.0, 1.6).unwrap()];
    let mut emergencies = 0;
    for a in classes {
        for b in classes {
            for c in classes {
                for mode in [Mode::Diabetic, Mode::Prediabetic] {
                    let mut p = pipeline(mode, false, SimulatedCloud::new());
                    p.restore_history(&history).unwrap();
                    let mut ts: Vec<f64> = history.iter().map(|r| r.t).collect();
                    let mut vs: Vec<f64> = history.iter().map(|r| r.v).collect();
                    let mut v = 1.6;
                    for (step, (name, dv)) in [a, b, c].into_iter().enumerate() {
                        v = f64::clamp(v + dv, 0.0, 3.0);
                        let t = (1 + step) as f64;
                        ts.push(t);
                        vs.push(v);
                        let ev = p.on_reading(VoltageReading::new(t, v).unwrap()).unwrap();
                        let n = ts.len();
                        let k = n.saturating_sub(10);
                        let slope = lsq_slope(&ts[k..], &vs[k..]).unwrap();
                        let alert = ev
                            .iter()
                            .position(|e| matches!(e, PipelineEvent::EmergencyAlert { .. }));
                        assert_eq!(
                            alert.is_some(),
                            slope <= -0.25,
                            "{name} step {step}: slope {slope}"
                        );
                        if let Some(i) = alert {
                            emergencies += 1;
                            assert_eq!(i, 0, "alert must come first");
                            assert!(!ev.iter().any(is_dose_path), "{ev:?}");
                        }
                        if mode == Mode::Prediabetic {
                            assert!(!ev
                                .iter()
                                .any(|e| matches!(e, PipelineEvent::Injection { .. })));
                        }
                    }
                }
            }
        }
    }
    assert!(emergencies > 0);
}

fn log_without_actions(log: &[LoggedEvent]) -> Vec<&LoggedEvent> {
    log.iter()
        .filter(|e| {
            !matches!(
                e.event,
                PipelineEvent::Injection { .. } | PipelineEvent::Notification { .. }
            )
        })
        .collect()
}

#[test]
fn modes_share_everything_but_the_action() {
    for trace in ["reference_day.csv", "crash_trace.csv"] {
        let rows = read_trace_file(fixture(trace)).unwrap();
        let mut d = pipeline(Mode::Diabetic, false, SimulatedCloud::new());
        let mut p = pipeline(Mode::Prediabetic, false, SimulatedCloud::new());
        let ld = d.run_trace(&rows).unwrap();
        let lp = p.run_trace(&rows).unwrap();
        assert_eq!(
            log_without_actions(&ld),
            log_without_actions(&lp),
            "{trace}"
        );
        let inj = ld
            .iter()
            .filter(|e| matches!(e.event, PipelineEvent::Injection { .. }))
            .count();
        assert!(lp
            .iter()
            .all(|e| !matches!(e.event, PipelineEvent::Injection { .. })));
        // every diabetic injection is a prediabetic notification
        let wake_notes = lp
            .iter()
            .filter(|e| matches!(e.event, PipelineEvent::Notification { .. }))
            .count()
            - p.stats().emergencies as usize;
        assert_eq!(inj, wake_notes, "{trace}");
    }
}

#[test]
fn reference_day_activation_ratio() {
    let rows = read_trace_file(fixture("reference_day.csv")).unwrap();
    let cls = SnnClassifier::new(
        SpikingNet::random(DEFAULT_DIMS, 11),
        EncoderConfig::default(),
    )
    .unwrap();
    let mut p = Pipeline::new(
        PipelineConfig::default(),
        Box::new(cls),
        SimulatedCloud::new(),
    )
    .unwrap();
    p.run_trace(&rows).unwrap();
    let s = p.stats();
    let ratio = s.snn_invocations as f64 / s.readings as f64;
    assert_eq!(s.readings, 288);
    assert!(s.snn_invocations > 0);
    assert!(ratio <= 0.12, "ratio {ratio}");
}

#[test]
fn emergency_payload_is_the_lag_projection() {
    let mut p = pipeline(Mode::Diabetic, false, SimulatedCloud::new());
    let vs = [2.5, 2.2, 1.9, 1.6];
    let mut last = Vec::new();
    for (i, v) in vs.iter().enumerate() {
        last = p
            .on_reading(VoltageReading::new(i as f64, *v).unwrap())
            .unwrap();
    }
    match last[0] {
        PipelineEvent::EmergencyAlert { slope, projected_v } => {
            assert!((slope + 0.3).abs() < 1e-12);
            assert!((projected_v - (1.6 - 15.0 * 0.3)).abs() < 1e-12);
        }
        ref e => panic!("expected an alert, got {e:?}"),
    }
}

#[test]
fn slow_crash_is_below_the_trigger_rate() {
    // the bundled crash falls at 2.5 mg/dL/min; the trigger needs 25
    let rows = read_trace_file(fixture("crash_trace.csv")).unwrap();
    let mut p = pipeline(Mode::Diabetic, false, SimulatedCloud::new());
    p.run_trace(&rows).unwrap();
    assert_eq!(p.stats().emergencies, 0);
}

fn excursion_trace() -> Vec<TraceRow> {
    (0..120)
        .map(|i| {
            let g = 150.0 + 90.0 * ((i as f64) / 6.0).sin();
            TraceRow {
                t_min: 5.0 * i as f64,
                glucose_mgdl: g.round(),
                hypo_event: false,
            }
        })
        .collect()
}

/// Ids of every record the cloud has seen.
fn all_records(p: &Pipeline<SimulatedCloud>) -> BTreeSet<u64> {
    p.client().received.iter().map(|r| r.id).collect()
}

#[test]
fn sync_survives_any_single_upload_failure() {
    let rows = excursion_trace();
    let mut clean = pipeline(Mode::Diabetic, true, SimulatedCloud::new());
    clean.run_trace(&rows).unwrap();
    let expected = all_records(&clean);
    let total = expected.len() as u64;
    assert!(total > 0 && clean.queue().is_empty());

    let calls = clean.client().calls();
    for call in 0..calls {
        for fp in [FailurePoint::BeforeUpload, FailurePoint::DuringUpload] {
            let mut p = pipeline(
                Mode::Diabetic,
                true,
                SimulatedCloud::failing_on([(call, fp)]),
            );
            p.run_trace(&rows).unwrap();
            // a failure on the last call leaves records queued until the next sync
            p.sync().unwrap();
            assert!(p.queue().is_empty(), "call {call} {fp:?}");
            assert_eq!(p.queue().wiped(), total, "every record wiped exactly once");
            assert_eq!(
                all_records(&p),
                expected,
                "no record lost, call {call} {fp:?}"
            );
            let dups = p.client().received.len() as u64 - total;
            if fp == FailurePoint::BeforeUpload {
                assert_eq!(dups, 0);
            }
        }
    }
}

#[test]
fn interrupted_wipe_is_completed_once() {
    let mut q = SyncQueue::new();
    for i in 0..5 {
        q.enqueue(i as f64, PipelineEvent::NoOp);
    }
    let mut cloud = SimulatedCloud::new();
    let batch = q.begin().unwrap().unwrap();
    let token = cloud.upload(&batch).unwrap();
    q.confirm(token).unwrap();
    // crash here: the wipe never ran
    q.enqueue(9.0, PipelineEvent::NoOp);
    assert_eq!(
        sync(&mut q, &mut cloud).unwrap(),
        SyncOutcome::Synced { wiped: 1 }
    );
    assert_eq!(q.wiped(), 6);
    assert!(q.is_empty());
    assert_eq!(q.wipe(token).unwrap(), 0);
    assert!(q.wipe(ConfirmToken(999)).is_err());
    assert_eq!(cloud.received.len(), 6);
}

#[test]
fn telemetry_off_never_calls_the_client() {
    let rows = excursion_trace();
    let mut p = pipeline(Mode::Diabetic, false, SimulatedCloud::new());
    p.run_trace(&rows).unwrap();
    assert!(p.stats().wakes > 0);
    assert_eq!(p.client().calls(), 0);
}

#[test]
fn prediabetic_tiers_follow_severity() {
    for (sev, tier) in [
        (Severity::Low, "NUDGE"),
        (Severity::Medium, "ALERT"),
        (Severity::High, "URGENT"),
    ] {
        let cfg = PipelineConfig {
            mode: Mode::Prediabetic,
            ..PipelineConfig::default()
        };
        let mut p =
            Pipeline::new(cfg, Box::new(FixedClassifier(sev)), SimulatedCloud::new()).unwrap();
        let mut last = Vec::new();
        for i in 0..10 {
            let v = if i == 9 { 1.5 } else { 1.0 };
            last = p
                .on_reading(VoltageReading::new(5.0 * i as f64, v).unwrap())
                .unwrap();
        }
        let note = last
            .iter()
            .find(|e| matches!(e, PipelineEvent::Notification { .. }))
            .unwrap();
        assert!(serde_json::to_string(note).unwrap().contains(tier));
    }
}

#[test]
fn replay_is_deterministic() {
    let rows = read_trace_file(fixture("reference_day.csv")).unwrap();
    let run = || {
        let cls = SnnClassifier::new(
            SpikingNet::random(DEFAULT_DIMS, 2),
            EncoderConfig::default(),
        )
        .unwrap();
        let mut p = Pipeline::new(
            PipelineConfig::default(),
            Box::new(cls),
            SimulatedCloud::new(),
        )
        .unwrap();
        p.run_trace(&rows).unwrap()
    };
    assert_eq!(run(), run());
}
