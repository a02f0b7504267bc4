use pdds_core::dataset::{
    build_gold, read_gold_file, slide_windows, synth_generate, write_gold_file, Source, SynthConfig,
};
use pdds_core::signal::{read_trace, read_trace_file, write_trace_file};
use pdds_core::snn::{
    read_weights_file, write_weights_file, EncoderConfig, SpikingNet, TrainingSidecar, DEFAULT_DIMS,
};
use pdds_core::Error;

fn small_cohort() -> SynthConfig {
    SynthConfig {
        n_patients: 3,
        days: 1,
        seed: 17,
        ..SynthConfig::default()
    }
}

#[test]
fn synth_traces_and_gold_survive_disk() {
    let dir = tempfile::tempdir().unwrap();
    let traces = synth_generate(&small_cohort()).unwrap();
    for t in &traces {
        let path = dir.path().join(format!("p{}.csv", t.patient));
        write_trace_file(&path, &t.rows).unwrap();
        assert_eq!(read_trace_file(&path).unwrap(), t.rows);
    }
    let gold = build_gold(&traces, Source::Synthetic).unwrap();
    // one window per reading after the first nine, no gaps in synthetic data
    assert_eq!(
        gold.len(),
        traces.iter().map(|t| t.rows.len() - 9).sum::<usize>()
    );
    let path = dir.path().join("gold.csv");
    write_gold_file(&path, &gold).unwrap();
    let back = read_gold_file(&path).unwrap();
    assert_eq!(back.len(), gold.len());
    for (a, b) in back.iter().zip(&gold) {
        assert_eq!(
            (a.label, a.source, a.window_id),
            (b.label, b.source, b.window_id)
        );
        for (x, y) in a.features.0.iter().zip(&b.features.0) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn generator_is_deterministic_per_seed() {
    let a = synth_generate(&small_cohort()).unwrap();
    let b = synth_generate(&small_cohort()).unwrap();
    assert_eq!(a, b);
    let c = synth_generate(&SynthConfig {
        seed: 18,
        ..small_cohort()
    })
    .unwrap();
    assert_ne!(a, c);
}

#[test]
fn gaps_split_windows() {
    let mut csv = String::from("t_min,glucose_mgdl\n");
    for i in 0..12 {
        csv += &format!("{},{}\n", 5 * i, 100 + i);
    }
    // 20-minute hole, then another 12 readings
    for i in 0..12 {
        csv += &format!("{},{}\n", 75 + 5 * i, 130 + i);
    }
    let rows = read_trace(csv.as_bytes()).unwrap();
    assert_eq!(slide_windows(&rows).unwrap().len(), 3 + 3);
}

#[test]
fn weights_and_sidecar_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.bin");
    let net = SpikingNet::random(DEFAULT_DIMS, 4);
    let enc = EncoderConfig {
        seed: 12,
        ..EncoderConfig::default()
    };
    write_weights_file(&path, &net, &TrainingSidecar::from(&enc)).unwrap();
    let (back, side) = read_weights_file(&path).unwrap();
    assert_eq!(side.unwrap().encoder(), enc);
    // weights are stored as f32
    for (la, lb) in net.layers.iter().zip(&back.layers) {
        for (x, y) in la.w.as_slice().iter().zip(lb.w.as_slice()) {
            assert_eq!(*x as f32, *y as f32);
        }
    }
    std::fs::remove_file(dir.path().join("w.bin.json")).unwrap();
    assert!(read_weights_file(&path).unwrap().1.is_none());
}

#[test]
fn missing_file_names_the_path() {
    let err = read_trace_file("/nonexistent/trace.csv").unwrap_err();
    assert!(matches!(err, Error::File { .. }));
    assert!(err.to_string().contains("/nonexistent/trace.csv"));
}
