//! Command-line front end: corpus generation, training, evaluation,
//! prediction, annotator comparison and confusion-matrix export.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use ecgnet::checkpoint::load_checkpoint;
use ecgnet::data::synth::{generate_corpus, SynthConfig};
use ecgnet::data::{
    annotations_to_grid, read_dataset, read_manifest, read_signal_file, write_dataset, RhythmClass, LABEL_STRIDE,
    MANIFEST_FILE,
};
use ecgnet::metrics::{
    annotator_comparison, comparison_csv, confusion_csv, confusion_svg, evaluate, parse_confusion_csv, scores_csv,
    Annotator, Labeling,
};
use ecgnet::model::{Network, NetworkConfig};
use ecgnet::rng::stream;
use ecgnet::run::{RunManifest, RUN_MANIFEST_FILE};
use ecgnet::train::{fit, split_by_patient, Control, TrainConfig, BEST_CHECKPOINT};

#[derive(Parser)]
#[command(name = "ecgnet", version, about = "Residual CNN for ECG rhythm sequence labeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic annotated corpus.
    Generate(GenerateArgs),
    /// Train on a dataset and keep the checkpoint with the lowest validation loss.
    Train(TrainArgs),
    /// Score a checkpoint's predictions against a dataset's annotations.
    Evaluate(EvaluateArgs),
    /// Label one raw signal file.
    Predict(PredictArgs),
    /// Score annotator datasets against a consensus dataset.
    CompareAnnotators(CompareArgs),
    /// Render a confusion CSV as an SVG heatmap.
    ExportConfusion(ExportArgs),
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    per_class: u64,
    /// Comma-separated class names; all 14 when omitted.
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<RhythmClass>>,
    #[arg(long, default_value_t = 30.0)]
    duration_s: f64,
    /// Probability that a record switches rhythm part-way.
    #[arg(long, default_value_t = 0.0)]
    transition_prob: f64,
    #[arg(long, default_value_t = 1)]
    records_per_patient: usize,
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: u64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 16)]
    blocks: usize,
    #[arg(long, default_value_t = 64)]
    base_filters: usize,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    #[arg(long, default_value_t = 0.1)]
    val_fraction: f64,
    #[arg(long, default_value_t = 3)]
    patience: usize,
    #[arg(long, default_value_t = ecgnet::train::DEFAULT_LR)]
    lr: f64,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

#[derive(clap::Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Raw little-endian f32 samples at the network's input rate.
    #[arg(long)]
    record: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct CompareArgs {
    #[arg(long)]
    consensus: PathBuf,
    /// One dataset directory per annotator; only the manifests are read.
    #[arg(long, num_args = 1.., required = true)]
    annotators: Vec<PathBuf>,
    #[arg(long)]
    report: PathBuf,
}

#[derive(clap::Args)]
struct ExportArgs {
    /// Confusion CSV written by `evaluate`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    svg: PathBuf,
}

/// A configuration problem discovered after argument parsing; exits with 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ECGNET_LOG", "info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let usage = err.downcast_ref::<UsageError>().is_some()
                || matches!(err.downcast_ref::<ecgnet::Error>(), Some(ecgnet::Error::Config(_)));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    let start = Instant::now();
    let (mut manifest, path) = match command {
        Command::Generate(a) => generate(a)?,
        Command::Train(a) => train(a)?,
        Command::Evaluate(a) => evaluate_cmd(a)?,
        Command::Predict(a) => predict(a)?,
        Command::CompareAnnotators(a) => compare(a)?,
        Command::ExportConfusion(a) => export(a)?,
    };
    manifest.wall_clock_s = start.elapsed().as_secs_f64();
    manifest.write(&path)?;
    Ok(())
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Run manifest beside a single output file: `<file>.run.json`.
fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".");
    name.push(RUN_MANIFEST_FILE);
    PathBuf::from(name)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn generate(a: GenerateArgs) -> Result<(RunManifest, PathBuf)> {
    let mut synth = SynthConfig {
        seed: a.seed,
        records_per_class: a.per_class as usize,
        duration_s: a.duration_s,
        transition_prob: a.transition_prob,
        records_per_patient: a.records_per_patient,
        ..SynthConfig::default()
    };
    if let Some(classes) = &a.classes {
        synth = synth.with_classes(classes);
    }
    synth.validate()?;
    let records = generate_corpus(&synth)?;
    write_dataset(&records, &a.out)?;
    log::info!("wrote {} records to {}", records.len(), a.out.display());
    let mut m = RunManifest::new("generate", serde_json::to_value(&synth)?, Some(a.seed));
    m.outputs.push(display(&a.out));
    Ok((m, a.out.join(RUN_MANIFEST_FILE)))
}

fn train(a: TrainArgs) -> Result<(RunManifest, PathBuf)> {
    let network_config = NetworkConfig {
        residual_blocks: a.blocks,
        base_filters: a.base_filters,
        dropout_rate: a.dropout,
        ..NetworkConfig::default()
    };
    network_config.validate()?;
    let config = TrainConfig {
        batch_size: a.batch,
        max_epochs: a.epochs as usize,
        plateau_patience: a.patience,
        learning_rate: a.lr,
        seed: a.seed,
        checkpoint_dir: Some(a.out.clone()),
        ..TrainConfig::default()
    };
    config.validate()?;
    if !(a.val_fraction > 0.0 && a.val_fraction < 1.0) {
        return Err(UsageError(format!("--val-fraction must lie in (0, 1), got {}", a.val_fraction)).into());
    }
    let records = read_dataset(&a.data)?;
    let patients: Vec<&str> = records.iter().map(|r| r.patient_id.as_str()).collect();
    let split = split_by_patient(&patients, a.val_fraction, a.seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    let (train_set, val_set) = (pick(&split.train), pick(&split.val));
    log::info!("{} training and {} validation records", train_set.len(), val_set.len());
    let network = Network::build(&network_config, &mut stream(a.seed, "init"))?;
    create_dir(&a.out)?;
    let outcome = fit(&config, network, &train_set, &val_set, |_, _| Control::Continue).map_err(|abort| {
        anyhow::Error::new(abort.error).context(format!("training aborted after {} epochs", abort.history.len()))
    })?;
    log::info!(
        "best epoch {} with validation loss {:.6}",
        outcome.best.epoch,
        outcome.best.best_val_loss
    );
    let mut m = RunManifest::new(
        "train",
        json!({
            "network": network_config,
            "training": config,
            "val_fraction": a.val_fraction,
            "train_records": split.train.len(),
            "val_records": split.val.len(),
        }),
        Some(a.seed),
    );
    m.inputs.push(display(&a.data));
    m.outputs.push(display(&a.out.join(BEST_CHECKPOINT)));
    Ok((m, a.out.join(RUN_MANIFEST_FILE)))
}

fn load_network(path: &Path) -> Result<Network<f32>> {
    Ok(load_checkpoint(path)?.network()?)
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<(RunManifest, PathBuf)> {
    let network = load_network(&a.checkpoint)?;
    let records = read_dataset(&a.data)?;
    if records.is_empty() {
        bail!("dataset {} holds no records", a.data.display());
    }
    let (mut truth, mut pred) = (Labeling::new(), Labeling::new());
    for r in &records {
        if r.sample_rate != network.config().input_hz {
            bail!(
                "record {} is sampled at {} Hz, the network expects {} Hz",
                r.record_id,
                r.sample_rate,
                network.config().input_hz
            );
        }
        truth.insert(r.record_id.clone(), annotations_to_grid(r, LABEL_STRIDE)?.labels);
        pred.insert(r.record_id.clone(), network.predict_record(&r.samples)?.labels);
    }
    let report = evaluate(&pred, &truth)?;
    create_dir(&a.report)?;
    write_file(&a.report.join("scores.csv"), &scores_csv(&report))?;
    write_file(&a.report.join("confusion.csv"), &confusion_csv(&report.confusion))?;
    let mut summary = String::from("metric,precision,recall,f1\n");
    for (name, table) in [("sequence", &report.sequence), ("set", &report.set)] {
        let g = table.aggregate;
        let _ = writeln!(summary, "{name},{},{},{}", g.precision, g.recall, g.f1);
    }
    let _ = writeln!(summary, "accuracy,,,{}", report.accuracy);
    write_file(&a.report.join("summary.csv"), &summary)?;
    log::info!(
        "sequence F1 {:.4}, set F1 {:.4}, accuracy {:.4}",
        report.sequence.aggregate.f1,
        report.set.aggregate.f1,
        report.accuracy
    );
    let mut m = RunManifest::new("evaluate", json!({ "records": records.len() }), None);
    m.inputs.extend([display(&a.checkpoint), display(&a.data)]);
    m.outputs.push(display(&a.report));
    Ok((m, a.report.join(RUN_MANIFEST_FILE)))
}

fn predict(a: PredictArgs) -> Result<(RunManifest, PathBuf)> {
    let network = load_network(&a.checkpoint)?;
    let samples = read_signal_file(&a.record)?;
    let grid = network.predict_record(&samples)?;
    let seconds_per_label = LABEL_STRIDE as f64 / network.config().input_hz as f64;
    let mut out = String::from("position,onset_s,label\n");
    for (i, label) in grid.labels.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{label}", i as f64 * seconds_per_label);
    }
    write_file(&a.out, &out)?;
    let mut m = RunManifest::new(
        "predict",
        json!({ "samples": samples.len(), "positions": grid.len() }),
        None,
    );
    m.inputs.extend([display(&a.checkpoint), display(&a.record)]);
    m.outputs.push(display(&a.out));
    Ok((m, sidecar(&a.out)))
}

/// Reference labels of every record in a dataset manifest.
fn manifest_labels(dir: &Path) -> Result<Labeling> {
    let manifest = read_manifest(dir)?;
    let path = dir.join(MANIFEST_FILE);
    manifest
        .records
        .iter()
        .map(|e| Ok((e.record_id.clone(), e.label_grid(&path, LABEL_STRIDE)?.labels)))
        .collect()
}

fn compare(a: CompareArgs) -> Result<(RunManifest, PathBuf)> {
    let consensus = manifest_labels(&a.consensus)?;
    let mut names = BTreeSet::new();
    let annotators = a
        .annotators
        .iter()
        .map(|dir| {
            let name = dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| display(dir));
            if !names.insert(name.clone()) {
                return Err(UsageError(format!("two annotator directories are both named `{name}`")).into());
            }
            Ok(Annotator {
                name,
                labels: manifest_labels(dir)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cmp = annotator_comparison(&annotators, &consensus)?;
    create_dir(&a.report)?;
    write_file(&a.report.join("comparison.csv"), &comparison_csv(&cmp))?;
    log::info!(
        "mean sequence F1 {:.4}, mean set F1 {:.4}, mean accuracy {:.4}",
        cmp.sequence.aggregate.f1,
        cmp.set.aggregate.f1,
        cmp.accuracy
    );
    let mut m = RunManifest::new("compare-annotators", json!({ "annotators": annotators.len() }), None);
    m.inputs.push(display(&a.consensus));
    m.inputs.extend(a.annotators.iter().map(|p| display(p)));
    m.outputs.push(display(&a.report));
    Ok((m, a.report.join(RUN_MANIFEST_FILE)))
}

fn export(a: ExportArgs) -> Result<(RunManifest, PathBuf)> {
    let text = std::fs::read_to_string(&a.report).with_context(|| format!("reading {}", a.report.display()))?;
    let confusion = parse_confusion_csv(&text, &a.report)?;
    write_file(&a.svg, &confusion_svg(&confusion))?;
    let mut m = RunManifest::new("export-confusion", json!({}), None);
    m.inputs.push(display(&a.report));
    m.outputs.push(display(&a.svg));
    Ok((m, sidecar(&a.svg)))
}
