use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use pdds_core::baselines::{
    count_macs, energy_report, measure_synops, rule_assess, EnergyModel, DEFAULT_E_MAC,
    DEFAULT_E_SYNOP,
};
use pdds_core::dataset::{
    build_gold, read_gold_file, slide_windows, split_by_patient, synth_generate, write_gold_file,
    PatientTrace, Source, SynthConfig, DEFAULT_SPLIT_FRACTIONS,
};
use pdds_core::pipeline::{
    run_scenarios, write_event_log, Mode, Pipeline, PipelineConfig, RuleClassifier,
    SeverityClassifier, SimulatedCloud, SnnClassifier,
};
use pdds_core::signal::{read_trace_file, write_trace_file};
use pdds_core::snn::{
    max_synops, read_weights_file, sidecar_path, write_weights_file, EncoderConfig, TrainingSidecar,
};
use pdds_core::training::{evaluate, fit, init_net, write_history_csv, EvalReport, TrainConfig};
use pdds_core::Severity;

#[derive(Parser)]
#[command(
    name = "pdds",
    version,
    about = "Event-driven glucose severity classification and dosing"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Diabetic,
    Prediabetic,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Synthetic,
    External,
}

#[derive(Subcommand)]
enum Cmd {
    /// Replay a CGM trace through the pipeline.
    Run {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value = "diabetic")]
        mode: ModeArg,
        /// Spiking-net weights; the static rules are used when omitted.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// JSON-lines event log.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Queue telemetry and sync it to the simulated cloud.
        #[arg(long)]
        telemetry: bool,
    },
    /// Train the spiking classifier on a Gold file.
    Train {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// TrainConfig as TOML; unset keys keep their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// History CSV, default `<out>.history.csv`.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Seed of the patient split.
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
    },
    /// Window, featurise and label every trace CSV in a directory.
    Ingest {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "external")]
        source: SourceArg,
    },
    /// Generate synthetic patient traces.
    Synth {
        /// SynthConfig as TOML; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the labelled Gold file here.
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Evaluate weights on a Gold file.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        /// Encodings per window, majority vote.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long)]
        json: bool,
    },
    /// Run the 15-scenario validation suite. Exits non-zero on any failure.
    Scenarios,
    /// SynOps and energy estimate for trained weights.
    Energy {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Back-solve per-op energies from the reference figures.
        #[arg(long)]
        calibrate: bool,
        #[arg(long, default_value_t = DEFAULT_E_SYNOP)]
        e_synop: f64,
        #[arg(long, default_value_t = DEFAULT_E_MAC)]
        e_mac: f64,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Run {
            trace,
            mode,
            weights,
            log,
            telemetry,
        } => cmd_run(&trace, mode, weights.as_deref(), log.as_deref(), telemetry)?,
        Cmd::Train {
            gold,
            out,
            config,
            history,
            split_seed,
        } => cmd_train(&gold, &out, config.as_deref(), history, split_seed)?,
        Cmd::Ingest {
            traces,
            out,
            source,
        } => cmd_ingest(&traces, &out, source)?,
        Cmd::Synth { config, out, gold } => cmd_synth(config.as_deref(), &out, gold.as_deref())?,
        Cmd::Eval {
            gold,
            weights,
            repeats,
            json,
        } => cmd_eval(&gold, &weights, repeats, json)?,
        Cmd::Scenarios => return Ok(cmd_scenarios()),
        Cmd::Energy {
            weights,
            gold,
            calibrate,
            e_synop,
            e_mac,
            json,
        } => cmd_energy(
            &weights,
            &gold,
            calibrate,
            EnergyModel { e_synop, e_mac },
            json,
        )?,
    }
    Ok(ExitCode::SUCCESS)
}

fn load_weights(path: &Path) -> Result<(pdds_core::snn::SpikingNet, EncoderConfig)> {
    let (net, side) =
        read_weights_file(path).with_context(|| format!("reading {}", path.display()))?;
    let enc = match side {
        Some(s) => s.encoder(),
        None => {
            eprintln!(
                "warning: no {} sidecar, using default encoder",
                sidecar_path(path).display()
            );
            EncoderConfig::default()
        }
    };
    Ok((net, enc))
}

fn cmd_run(
    trace: &Path,
    mode: ModeArg,
    weights: Option<&Path>,
    log: Option<&Path>,
    telemetry: bool,
) -> Result<()> {
    let rows = read_trace_file(trace)?;
    let classifier: Box<dyn SeverityClassifier> = match weights {
        Some(w) => {
            let (net, enc) = load_weights(w)?;
            Box::new(SnnClassifier::new(net, enc)?)
        }
        None => Box::new(RuleClassifier),
    };
    let cfg = PipelineConfig {
        mode: match mode {
            ModeArg::Diabetic => Mode::Diabetic,
            ModeArg::Prediabetic => Mode::Prediabetic,
        },
        telemetry,
        ..PipelineConfig::default()
    };
    let mut p = Pipeline::new(cfg, classifier, SimulatedCloud::new())?;
    let events = p.run_trace(&rows)?;
    if let Some(path) = log {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_event_log(BufWriter::new(f), &events)?;
    }
    let s = p.stats();
    println!("readings       {}", s.readings);
    println!("emergencies    {}", s.emergencies);
    println!(
        "bell wakes     {} ({:.1}% of readings)",
        s.wakes,
        100.0 * s.wakes as f64 / s.readings.max(1) as f64
    );
    println!("snn calls      {}", s.snn_invocations);
    println!("rule fallbacks {}", s.fallbacks);
    println!("injections     {}", s.injections);
    println!("notifications  {}", s.notifications);
    if telemetry {
        println!(
            "telemetry      {} uploaded, {} pending, {} failed syncs",
            p.client().received.len(),
            p.queue().len(),
            s.sync_failures
        );
    }
    Ok(())
}

fn cmd_train(
    gold: &Path,
    out: &Path,
    config: Option<&Path>,
    history: Option<PathBuf>,
    split_seed: u64,
) -> Result<()> {
    let cfg = match config {
        Some(p) => TrainConfig::from_toml_str(
            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => TrainConfig::default(),
    };
    let records = read_gold_file(gold)?;
    let split = split_by_patient(&records, DEFAULT_SPLIT_FRACTIONS, split_seed)?;
    eprintln!(
        "train {} / val {} / test {} windows",
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    let enc = EncoderConfig {
        seed: cfg.seed,
        ..EncoderConfig::default()
    };
    let net = init_net(pdds_core::snn::DEFAULT_DIMS, cfg.seed);
    let res = fit(net, &split.train, &split.val, &enc, &cfg, |r| {
        eprintln!(
            "epoch {:>3}  lr {:.2e}  loss {:.4}  val_acc {:.4}",
            r.epoch, r.lr, r.train_loss, r.val_acc
        );
    })?;
    write_weights_file(out, &res.net, &TrainingSidecar::from(&enc))?;
    let hist = history.unwrap_or_else(|| {
        let mut s = out.as_os_str().to_owned();
        s.push(".history.csv");
        PathBuf::from(s)
    });
    let f = File::create(&hist).with_context(|| format!("creating {}", hist.display()))?;
    write_history_csv(BufWriter::new(f), &res.history)?;
    println!(
        "best epoch {} (val_acc {:.4}), {} skipped steps",
        res.best_epoch, res.best_val_acc, res.skipped_steps
    );
    let rep = evaluate(&res.net, &split.test, &enc, 1)?;
    println!("test split:\n{}", rep.table());
    Ok(())
}

/// Patient id from a `patient_<n>.csv` name, else the file's position.
fn patient_id(path: &Path, fallback: u32) -> u32 {
    path.file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.rsplit('_').next())
        .and_then(|n| n.parse().ok())
        .unwrap_or(fallback)
}

fn cmd_ingest(dir: &Path, out: &Path, source: SourceArg) -> Result<()> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .csv traces in {}", dir.display());
    }
    let mut traces = Vec::with_capacity(files.len());
    for (i, f) in files.iter().enumerate() {
        let rows = read_trace_file(f)?;
        let n = slide_windows(&rows)?.len();
        eprintln!("{}: {} readings, {} windows", f.display(), rows.len(), n);
        traces.push(PatientTrace {
            patient: patient_id(f, i as u32),
            rows,
        });
    }
    let source = match source {
        SourceArg::Synthetic => Source::Synthetic,
        SourceArg::External => Source::External,
    };
    let gold = build_gold(&traces, source)?;
    write_gold_file(out, &gold)?;
    print_label_mix(&gold.iter().map(|r| r.label).collect::<Vec<_>>());
    Ok(())
}

fn print_label_mix(labels: &[Severity]) {
    let mut c = [0usize; 3];
    for l in labels {
        c[l.index()] += 1;
    }
    let n = labels.len().max(1) as f64;
    println!(
        "{} windows: LOW {:.1}%  MEDIUM {:.1}%  HIGH {:.1}%",
        labels.len(),
        100.0 * c[0] as f64 / n,
        100.0 * c[1] as f64 / n,
        100.0 * c[2] as f64 / n
    );
}

fn cmd_synth(config: Option<&Path>, out: &Path, gold: Option<&Path>) -> Result<()> {
    let cfg = match config {
        Some(p) => SynthConfig::from_toml_str(
            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => SynthConfig::default(),
    };
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let traces = synth_generate(&cfg)?;
    for t in &traces {
        write_trace_file(out.join(format!("patient_{:03}.csv", t.patient)), &t.rows)?;
    }
    println!(
        "{} traces, {} readings each, in {}",
        traces.len(),
        cfg.readings_per_patient(),
        out.display()
    );
    if let Some(g) = gold {
        let records = build_gold(&traces, Source::Synthetic)?;
        write_gold_file(g, &records)?;
        print_label_mix(&records.iter().map(|r| r.label).collect::<Vec<_>>());
    }
    Ok(())
}

fn cmd_eval(gold: &Path, weights: &Path, repeats: usize, json: bool) -> Result<()> {
    let (net, enc) = load_weights(weights)?;
    let records = read_gold_file(gold)?;
    let rep = evaluate(&net, &records, &enc, repeats)?;
    if json {
        let mut out = std::io::stdout().lock();
        serde_json::to_writer_pretty(&mut out, &rep)?;
        writeln!(out)?;
    } else {
        println!("{}", rep.table());
        println!("rule baseline (no annotation input) on the same windows:");
        println!("{}", rule_report(&records).table());
    }
    Ok(())
}

/// The static rules see only the features, so annotated hypo windows are
/// judged on glucose and slope alone.
fn rule_report(records: &[pdds_core::dataset::GoldRecord]) -> EvalReport {
    let truth: Vec<Severity> = records.iter().map(|r| r.label).collect();
    let pred: Vec<Severity> = records
        .iter()
        .map(|r| {
            rule_assess(
                r.features.last_glucose_mgdl(),
                r.features.slope_mgdl_per_min(),
            )
        })
        .collect();
    EvalReport::from_predictions(&truth, &pred)
}

fn cmd_scenarios() -> ExitCode {
    let t0 = std::time::Instant::now();
    let results = run_scenarios();
    for r in &results {
        println!(
            "{:>2}  {:<44} {}  {}",
            r.id,
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} passed in {:.2?}", results.len(), t0.elapsed());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn cmd_energy(
    weights: &Path,
    gold: &Path,
    calibrate: bool,
    model: EnergyModel,
    json: bool,
) -> Result<()> {
    let (net, enc) = load_weights(weights)?;
    let records = read_gold_file(gold)?;
    let synops = measure_synops(&net, &records, &enc)?;
    let macs = count_macs(&net.dims());
    let model = if calibrate {
        EnergyModel::calibrated(synops, macs)
    } else {
        model
    };
    let rep = energy_report(
        synops,
        max_synops(&net, enc.timesteps),
        macs,
        model,
        calibrate,
    );
    if json {
        let mut out = std::io::stdout().lock();
        serde_json::to_writer_pretty(&mut out, &rep)?;
        writeln!(out)?;
    } else {
        print!("{}", rep.table());
    }
    Ok(())
}
