//! Command-line surface of the two-camera tool-use pipeline.
//!
//! Subcommands: `simulate`, `label`, `fuse`, `featurize-cache`,
//! `train`, `evaluate`, `report`. Exit codes: 0 on success, 2 for
//! usage/validation problems, 3 for runtime failures. The worker count
//! for parallel sections can be pinned with `MULTICAM_WORKERS`.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use multicam_core::error::Error;
use multicam_core::eval::report::{
    render_per_class_csv, render_per_class_table, render_summary_csv, render_summary_table,
    validate_report,
};
use multicam_core::eval::{run_experiment, EvalVariant, ExperimentConfig, ExperimentReport};
use multicam_core::features::FeatureTable;
use multicam_core::ingest::{
    serialize_detections, serialize_intervals, serialize_labels, SessionEntry, SessionManifest,
};
use multicam_core::naive::{classify_session_naive, CameraSelection};
use multicam_core::neural::{checkpoint, train, OptimizerKind, TrainConfig, Variant};
use multicam_core::sim::{generate_batch, ScenarioConfig};
use multicam_core::Result;

#[derive(Parser)]
#[command(
    name = "multicam",
    about = "Two-camera surgical tool-use classification pipeline",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic sessions and a manifest from a scenario config.
    Simulate(SimulateArgs),
    /// Write ground-truth label CSVs for annotated sessions.
    Label(IoArgs),
    /// Classify sessions with the rule-based baseline.
    Fuse(FuseArgs),
    /// Precompute binary feature caches for each session.
    FeaturizeCache(IoArgs),
    /// Train a classifier variant on all sessions of a manifest.
    Train(TrainArgs),
    /// Run the cross-validated comparison of classifier variants.
    Evaluate(EvaluateArgs),
    /// Render tables from a saved experiment report.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in scenario name (fullvis-clean, occluded-noisy).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Scenario config JSON file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of sessions to generate.
    #[arg(short = 'n', long, default_value_t = 1)]
    sessions: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config frame count.
    #[arg(long)]
    frames: Option<usize>,
}

#[derive(Args)]
struct IoArgs {
    /// Session manifest JSON.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Camera subset: top, close or both.
    #[arg(long, default_value = "both")]
    cameras: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct TrainOpts {
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.3)]
    dropout: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    /// (hand, frame) samples drawn from each video per epoch.
    #[arg(long, default_value_t = 256)]
    samples_per_video: usize,
    /// Optimizer: adam or sgd.
    #[arg(long, default_value = "adam")]
    optimizer: String,
}

impl TrainOpts {
    fn to_config(&self, seed: u64) -> Result<TrainConfig> {
        let optimizer = match self.optimizer.as_str() {
            "adam" => OptimizerKind::Adam,
            "sgd" => OptimizerKind::Sgd,
            other => {
                return Err(Error::field(
                    "optimizer",
                    format!("unknown optimizer `{other}` (expected adam or sgd)"),
                ))
            }
        };
        let cfg = TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            dropout_p: self.dropout,
            batch_size: self.batch_size,
            seed,
            optimizer,
            samples_per_video_per_epoch: self.samples_per_video,
            class_weights: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Model variant: high-fps, low-fps or mcc.
    #[arg(long, default_value = "mcc")]
    variant: String,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-epoch loss CSV.
    #[arg(long)]
    loss_history: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    opts: TrainOpts,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Comma-separated variants (top-naive, close-naive, both-naive,
    /// low-fps, high-fps, mcc).
    #[arg(long, default_value = "both-naive,mcc")]
    variants: String,
    #[arg(long, default_value_t = 4)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    opts: TrainOpts,
}

#[derive(Args)]
struct ReportArgs {
    /// Experiment report JSON produced by `evaluate`.
    #[arg(long)]
    input: PathBuf,
    /// Add comparison rows; accepted value: published.
    #[arg(long)]
    compare: Option<String>,
    /// Optional directory for rendered table files.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    if let Ok(workers) = std::env::var("MULTICAM_WORKERS") {
        match workers.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: MULTICAM_WORKERS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(io) if io.kind() == ErrorKind::NotFound => 2,
        e if e.is_validation() => 2,
        _ => 3,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Label(args) => cmd_label(args),
        Command::Fuse(args) => cmd_fuse(args),
        Command::FeaturizeCache(args) => cmd_featurize_cache(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn load_manifest(path: &Path) -> Result<(SessionManifest, PathBuf)> {
    SessionManifest::load(path)
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = match (&args.preset, &args.config) {
        (Some(name), None) => ScenarioConfig::preset(name)?,
        (None, Some(path)) => ScenarioConfig::from_json(&fs::read_to_string(path)?)?,
        (None, None) => {
            return Err(Error::domain(
                "one of --preset or --config is required",
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap enforces exclusivity"),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(frames) = args.frames {
        cfg.n_frames = frames;
    }
    cfg.validate()?;

    let sessions_dir = args.out.join("sessions");
    fs::create_dir_all(&sessions_dir)?;
    let mut entries = Vec::new();
    for session in generate_batch(&cfg, args.sessions) {
        let id = session.bundle.session_id.clone();
        let dir = sessions_dir.join(&id);
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("top.jsonl"), serialize_detections(&session.bundle.top))?;
        fs::write(
            dir.join("close.jsonl"),
            serialize_detections(&session.bundle.close),
        )?;
        let truth = session.bundle.truth.as_ref().expect("synthetic truth");
        fs::write(
            dir.join("intervals.csv"),
            serialize_intervals(&truth.to_intervals(), cfg.fps),
        )?;
        entries.push(SessionEntry {
            session_id: id.clone(),
            top_path: format!("sessions/{id}/top.jsonl"),
            close_path: format!("sessions/{id}/close.jsonl"),
            intervals_path: Some(format!("sessions/{id}/intervals.csv")),
        });
    }
    let manifest = SessionManifest { sessions: entries };
    manifest.save(&args.out.join("manifest.json"))?;
    fs::write(args.out.join("scenario.json"), cfg.to_json() + "\n")?;
    println!(
        "wrote {} sessions to {}",
        args.sessions,
        args.out.display()
    );
    Ok(())
}

fn cmd_label(args: IoArgs) -> Result<()> {
    let (manifest, base) = load_manifest(&args.manifest)?;
    fs::create_dir_all(&args.out)?;
    for entry in &manifest.sessions {
        let bundle = multicam_core::ingest::load_session(entry, &base)?;
        let truth = bundle.truth.as_ref().ok_or_else(|| {
            Error::domain(format!(
                "session `{}` has no intervals to derive labels from",
                entry.session_id
            ))
        })?;
        fs::write(
            args.out.join(format!("{}_truth.csv", entry.session_id)),
            serialize_labels(truth),
        )?;
    }
    println!(
        "wrote {} label files to {}",
        manifest.sessions.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_fuse(args: FuseArgs) -> Result<()> {
    let cameras = match args.cameras.as_str() {
        "top" => CameraSelection::Top,
        "close" => CameraSelection::Close,
        "both" => CameraSelection::Both,
        other => {
            return Err(Error::field(
                "cameras",
                format!("expected top, close or both, got `{other}`"),
            ))
        }
    };
    let (manifest, base) = load_manifest(&args.manifest)?;
    fs::create_dir_all(&args.out)?;
    for entry in &manifest.sessions {
        let bundle = multicam_core::ingest::load_session(entry, &base)?;
        let labels = classify_session_naive(&bundle, cameras);
        fs::write(
            args.out.join(format!("{}_labels.csv", entry.session_id)),
            serialize_labels(&labels),
        )?;
    }
    println!(
        "fused {} sessions to {}",
        manifest.sessions.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_featurize_cache(args: IoArgs) -> Result<()> {
    let (manifest, base) = load_manifest(&args.manifest)?;
    fs::create_dir_all(&args.out)?;
    for entry in &manifest.sessions {
        let bundle = multicam_core::ingest::load_session(entry, &base)?;
        let table = FeatureTable::build(&bundle);
        let file = fs::File::create(
            args.out.join(format!("{}_features.bin", entry.session_id)),
        )?;
        table.write_cache(std::io::BufWriter::new(file))?;
    }
    println!(
        "cached features for {} sessions to {}",
        manifest.sessions.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let variant = Variant::parse(&args.variant)?;
    let cfg = args.opts.to_config(args.seed)?;
    let (manifest, base) = load_manifest(&args.manifest)?;
    let sessions = manifest.load_sessions(&base)?;
    let outcome = train(&sessions, variant, &cfg)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    checkpoint::save_to_path(&outcome.params, &args.out)?;
    if let Some(path) = &args.loss_history {
        let mut csv = String::from("epoch,loss\n");
        for (epoch, loss) in outcome.loss_history.iter().enumerate() {
            csv.push_str(&format!("{epoch},{loss}\n"));
        }
        fs::write(path, csv)?;
    }
    println!(
        "trained {} for {} epochs; checkpoint at {}",
        variant.name(),
        cfg.epochs,
        args.out.display()
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let mut variants = Vec::new();
    for tok in args.variants.split(',').filter(|t| !t.is_empty()) {
        variants.push(EvalVariant::parse(tok.trim())?);
    }
    let needs_training = variants.iter().any(|v| v.neural().is_some());
    let train_cfg = if needs_training {
        Some(args.opts.to_config(0)?)
    } else {
        None
    };
    let (manifest, base) = load_manifest(&args.manifest)?;
    let sessions = manifest.load_sessions(&base)?;
    let cfg = ExperimentConfig {
        k_folds: args.folds,
        seed: args.seed,
        variants,
        train: train_cfg,
    };
    let report = run_experiment(&sessions, &cfg)?;
    fs::create_dir_all(&args.out)?;
    write_report_files(&report, &args.out, false)?;
    print!("{}", render_summary_table(&report, false)?);
    println!("report written to {}", args.out.display());
    Ok(())
}

fn write_report_files(report: &ExperimentReport, out: &Path, compare: bool) -> Result<()> {
    fs::write(out.join("report.json"), report.to_json())?;
    fs::write(out.join("summary.txt"), render_summary_table(report, compare)?)?;
    fs::write(out.join("summary.csv"), render_summary_csv(report, compare)?)?;
    fs::write(out.join("per_class.txt"), render_per_class_table(report)?)?;
    fs::write(out.join("per_class.csv"), render_per_class_csv(report)?)?;
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let compare = match args.compare.as_deref() {
        None => false,
        Some("published") => true,
        Some(other) => {
            return Err(Error::field(
                "compare",
                format!("unknown comparison `{other}` (expected: published)"),
            ))
        }
    };
    let report = ExperimentReport::from_json(&fs::read_to_string(&args.input)?)?;
    validate_report(&report)?;
    print!("{}", render_summary_table(&report, compare)?);
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        write_report_files(&report, out, compare)?;
        println!("tables written to {}", out.display());
    }
    Ok(())
}
