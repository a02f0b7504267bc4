use std::path::Path;
use std::process::{Command, Output};

fn pdds(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdds"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = pdds(args);
    assert!(
        out.status.success(),
        "pdds {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scenarios_exit_zero_and_list_fifteen() {
    let out = ok(&["scenarios"]);
    assert_eq!(out.lines().filter(|l| l.contains(" PASS ")).count(), 15);
    assert!(out.contains("15/15 passed"));
}

#[test]
fn end_to_end_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let synth_cfg = d.join("synth.toml");
    std::fs::write(&synth_cfg, "n_patients = 4\ndays = 1\nseed = 5\n").unwrap();
    let train_cfg = d.join("train.toml");
    std::fs::write(
        &train_cfg,
        "epochs_max = 2\npatience = 1\nbatch_size = 64\nseed = 2\n",
    )
    .unwrap();
    let traces = d.join("traces");
    let gold = d.join("gold.csv");
    let weights = d.join("w.bin");

    ok(&["synth", "--config", s(&synth_cfg), "--out", s(&traces)]);
    assert!(traces.join("patient_000.csv").exists());
    let msg = ok(&[
        "ingest",
        "--traces",
        s(&traces),
        "--out",
        s(&gold),
        "--source",
        "synthetic",
    ]);
    assert!(msg.contains("windows"));

    ok(&[
        "train",
        "--gold",
        s(&gold),
        "--out",
        s(&weights),
        "--config",
        s(&train_cfg),
    ]);
    assert!(d.join("w.bin.json").exists());
    let hist = std::fs::read_to_string(d.join("w.bin.history.csv")).unwrap();
    assert_eq!(hist.lines().next(), Some("epoch,lr,train_loss,val_acc"));
    assert_eq!(hist.lines().count(), 3);

    let report: serde_json::Value = serde_json::from_str(&ok(&[
        "eval",
        "--gold",
        s(&gold),
        "--weights",
        s(&weights),
        "--json",
    ]))
    .unwrap();
    assert!(report["accuracy"].as_f64().unwrap() >= 0.0);

    let energy: serde_json::Value = serde_json::from_str(&ok(&[
        "energy",
        "--weights",
        s(&weights),
        "--gold",
        s(&gold),
        "--calibrate",
        "--json",
    ]))
    .unwrap();
    assert_eq!(energy["worst_case_synops"].as_u64(), Some(483_200));
    assert_eq!(energy["mlp_macs"].as_u64(), Some(9_664));

    let log = d.join("run.jsonl");
    let trace = traces.join("patient_001.csv");
    for mode in ["diabetic", "prediabetic"] {
        ok(&[
            "run",
            "--trace",
            s(&trace),
            "--mode",
            mode,
            "--weights",
            s(&weights),
            "--log",
            s(&log),
        ]);
        let text = std::fs::read_to_string(&log).unwrap();
        let readings = std::fs::read_to_string(&trace).unwrap().lines().count() - 1;
        let events: Vec<serde_json::Value> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert!(events.len() >= readings);
        assert!(events
            .iter()
            .all(|e| e["t"].is_number() && e["type"].is_string()));
        if mode == "prediabetic" {
            assert!(events.iter().all(|e| e["type"] != "Injection"));
        }
    }
}

#[test]
fn rule_fallback_run_without_weights() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    std::fs::write(&trace, "t_min,glucose_mgdl\n0,120\n5,150\n10,190\n15,230\n").unwrap();
    let out = ok(&["run", "--trace", s(&trace), "--telemetry"]);
    assert!(out.contains("bell wakes     1"));
    assert!(out.contains("injections     1"));
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    std::fs::write(&trace, "t_min,glucose_mgdl\n0,120\n0,130\n").unwrap();
    let out = pdds(&["run", "--trace", s(&trace)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert!(!pdds(&["run", "--trace", s(&trace), "--mode", "other"])
        .status
        .success());
}
