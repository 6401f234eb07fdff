//! Acceptance suite. Every criterion runs in order and prints one PASS or
//! FAIL line with its measurements; the binary exits non-zero if any fails.
//! A substring argument runs only the matching criteria.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ecgnet::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use ecgnet::data::synth::{generate_corpus, SynthConfig};
use ecgnet::data::{annotations_to_grid, EcgRecord, RhythmClass, LABEL_STRIDE};
use ecgnet::metrics::{
    annotator_comparison, corrupt_labels, evaluate, sequence_scores, set_scores, Annotator, Labeling, RecordPair,
};
use ecgnet::model::{composite_grad_check, Network, NetworkConfig};
use ecgnet::rng::stream;
use ecgnet::run::{RunManifest, RUN_MANIFEST_FILE};
use ecgnet::tensor::gradcheck::{grad_check, LayerUnderTest};
use ecgnet::tensor::{softmax_xent, Shape3, Tensor};
use ecgnet::train::{
    evaluate_loss, fit, normalize_records, recalibrate, split_by_patient, train_epoch, AdamState, Control,
    PlateauScheduler, TrainConfig, BEST_CHECKPOINT,
};
use rand::Rng;

mod common;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn architecture_ledger() -> Outcome {
    let start = Instant::now();
    let config = NetworkConfig::default();
    let net = Network::<f32>::build(&config, &mut stream(0, "init")).map_err(err)?;
    let arrays = net.params().arrays();
    let convs = arrays
        .iter()
        .filter(|a| a.name.ends_with(".weight") && a.shape.len() == 3)
        .count();
    let dense = arrays.iter().filter(|a| a.name == "head.dense.weight").count();
    ensure(convs == 33 && dense == 1, || {
        format!("{convs} conv layers, {dense} dense heads")
    })?;
    ensure(config.residual_blocks == 16, || {
        format!("{} blocks", config.residual_blocks)
    })?;
    let expected: Vec<usize> = [64, 128, 192, 256].iter().flat_map(|&c| [c; 4]).collect();
    ensure(config.channel_schedule() == expected, || {
        format!("schedule {:?}", config.channel_schedule())
    })?;
    ensure(config.output_stride() == 256, || {
        format!("stride {}", config.output_stride())
    })?;
    let params = net.params().learnable_count();
    ensure(params == 15_158_990, || format!("{params} learnable parameters"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "33 conv + 1 dense, stride 256, {params} parameters, {elapsed:.2?}"
    ))
}

fn shape_contract() -> Outcome {
    let net = Network::<f32>::build(&NetworkConfig::default(), &mut stream(1, "init")).map_err(err)?;
    let mut rng = stream(1, "shape");
    for windows in 1..=32 {
        let time = 256 * windows;
        let x = Tensor::from_fn(Shape3::new(1, 1, time), |_, _, _| rng.random_range(-2.0..2.0));
        let logits = net.forward(&x).map_err(err)?;
        ensure(logits.positions == windows && logits.values.cols() == 14, || {
            format!("{time} samples gave {} x {}", logits.positions, logits.values.cols())
        })?;
    }
    let grid = net.predict_record(&vec![0.1; 6000]).map_err(err)?;
    ensure(grid.len() == 24, || {
        format!("30 s record gave {} positions", grid.len())
    })?;
    Ok("all 32 lengths 256..8192 map to length/256 positions x 14; 6000 samples -> 24".into())
}

fn gradient_integrity() -> Outcome {
    let start = Instant::now();
    let cases = [
        (
            LayerUnderTest::Conv1d {
                out_channels: 4,
                filter_len: 5,
                stride: 1,
            },
            Shape3::new(2, 3, 16),
            1e-3,
        ),
        (
            LayerUnderTest::Conv1d {
                out_channels: 4,
                filter_len: 5,
                stride: 2,
            },
            Shape3::new(2, 3, 16),
            1e-3,
        ),
        (
            LayerUnderTest::Conv1d {
                out_channels: 3,
                filter_len: 16,
                stride: 2,
            },
            Shape3::new(1, 2, 13),
            1e-6,
        ),
        (LayerUnderTest::BatchNorm, Shape3::new(4, 2, 8), 1e-3),
        (LayerUnderTest::Relu, Shape3::new(2, 3, 10), 1e-6),
        (LayerUnderTest::Dropout { rate: 0.3 }, Shape3::new(2, 3, 10), 1e-6),
        (
            LayerUnderTest::MaxPool { pool: 2, stride: 2 },
            Shape3::new(2, 4, 17),
            1e-6,
        ),
        (LayerUnderTest::Dense { out_features: 14 }, Shape3::new(2, 8, 5), 1e-6),
        (LayerUnderTest::SoftmaxXent, Shape3::new(1, 14, 24), 1e-3),
    ];
    let mut worst: f64 = 0.0;
    for (layer, shape, tolerance) in cases {
        for seed in 0..3 {
            let report = grad_check(layer, shape, tolerance, seed);
            ensure(report.passed(), || format!("{layer:?} seed {seed}\n{report}"))?;
            worst = worst.max(report.max_rel_error());
        }
    }
    let tiny = NetworkConfig {
        residual_blocks: 2,
        base_filters: 8,
        filter_len: 3,
        widen_every: 1,
        ..NetworkConfig::default()
    };
    let mut checked = 0;
    for seed in 0..2 {
        let report = composite_grad_check(&tiny, 2, 16, 1e-3, seed).map_err(err)?;
        ensure(report.passed(), || format!("composite seed {seed}\n{report}"))?;
        ensure(report.skipped() * 20 < report.checked(), || {
            format!("composite seed {seed}: too many skips")
        })?;
        checked += report.checked();
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "9 primitives x 3 seeds (worst rel {worst:.1e}), 2-block network {checked} elements, {elapsed:.1?}"
    ))
}

fn initialization_sanity() -> Outcome {
    let net = Network::<f32>::build(&NetworkConfig::default(), &mut stream(4, "init")).map_err(err)?;
    let mut rng = stream(4, "init-data");
    let x = Tensor::from_fn(Shape3::new(4, 1, 6144), |_, _, _| rng.random_range(-3.0..3.0));
    let logits = net.forward(&x).map_err(err)?;
    let targets: Vec<usize> = (0..logits.values.rows()).map(|_| rng.random_range(0..14)).collect();
    let (loss, _) = softmax_xent(&logits.values, &targets, 14).map_err(err)?;
    let ln14 = 14f64.ln();
    ensure((loss - ln14).abs() <= 0.3, || {
        format!("mean loss {loss:.4}, ln 14 = {ln14:.4}")
    })?;
    Ok(format!("mean loss {loss:.4} (ln 14 = {ln14:.4})"))
}

/// Eval-mode position labels at the label cadence, keyed by record id.
fn predict_all(net: &Network<f32>, records: &[EcgRecord]) -> Result<(Labeling, Labeling), String> {
    let (mut pred, mut truth) = (Labeling::new(), Labeling::new());
    for r in records {
        pred.insert(r.record_id.clone(), net.predict_record(&r.samples).map_err(err)?.labels);
        truth.insert(
            r.record_id.clone(),
            annotations_to_grid(r, LABEL_STRIDE).map_err(err)?.labels,
        );
    }
    Ok((pred, truth))
}

const OVERFIT_RECORDS: usize = 16;
const OVERFIT_BATCH: usize = 4;
const OVERFIT_BUDGET: Duration = Duration::from_secs(30 * 60);

fn optimizability() -> Outcome {
    let start = Instant::now();
    let synth = SynthConfig {
        seed: 11,
        records_per_class: 2,
        ..SynthConfig::default()
    };
    let records: Vec<EcgRecord> = generate_corpus(&synth)
        .map_err(err)?
        .into_iter()
        .take(OVERFIT_RECORDS)
        .collect();
    let net = Network::build(&NetworkConfig::default(), &mut stream(11, "init")).map_err(err)?;
    let config = TrainConfig {
        batch_size: OVERFIT_BATCH,
        max_epochs: 300,
        seed: 11,
        ..TrainConfig::default()
    };
    let mut reached = None;
    let out = fit(&config, net, &records, &records, |s, _| {
        println!("    overfit {}  t={:.0}s", s.log_line(), start.elapsed().as_secs_f64());
        if s.val_accuracy >= 0.99 {
            reached = Some(s.epoch);
            Control::Stop
        } else if start.elapsed() > OVERFIT_BUDGET {
            Control::Stop
        } else {
            Control::Continue
        }
    })
    .map_err(err)?;
    let elapsed = start.elapsed();
    let (pred, truth) = predict_all(&out.last, &records)?;
    let report = evaluate(&pred, &truth).map_err(err)?;
    let summary = format!(
        "{} epochs, {elapsed:.0?}, train sequence accuracy {:.4}, sequence F1 {:.4}",
        out.history.len(),
        report.accuracy,
        report.sequence.aggregate.f1
    );
    ensure(
        reached.is_some()
            && report.accuracy >= 0.99
            && report.sequence.aggregate.f1 >= 0.99
            && elapsed < OVERFIT_BUDGET,
        || summary.clone(),
    )?;
    Ok(summary)
}

fn desk_config() -> NetworkConfig {
    NetworkConfig {
        residual_blocks: 4,
        base_filters: 16,
        ..NetworkConfig::default()
    }
}

const DESK_BUDGET: Duration = Duration::from_secs(15 * 60);

fn desk_scale_learning() -> Outcome {
    let start = Instant::now();
    let synth = SynthConfig {
        seed: 21,
        records_per_class: 60,
        ..SynthConfig::default()
    }
    .with_classes(&[
        RhythmClass::Sinus,
        RhythmClass::Afib,
        RhythmClass::Vt,
        RhythmClass::Noise,
    ]);
    let records = generate_corpus(&synth).map_err(err)?;
    let patients: Vec<&str> = records.iter().map(|r| r.patient_id.as_str()).collect();
    let split = split_by_patient(&patients, 40.0 / 240.0, 21).map_err(err)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    let (train, val) = (pick(&split.train), pick(&split.val));
    ensure(train.len() == 200 && val.len() == 40, || {
        format!("split {}/{}", train.len(), val.len())
    })?;
    let train_patients: std::collections::HashSet<&str> = train.iter().map(|r| r.patient_id.as_str()).collect();
    ensure(
        val.iter().all(|r| !train_patients.contains(r.patient_id.as_str())),
        || "patient overlap".into(),
    )?;
    let net = Network::build(&desk_config(), &mut stream(21, "init")).map_err(err)?;
    let config = TrainConfig {
        batch_size: 16,
        max_epochs: 300,
        seed: 21,
        ..TrainConfig::default()
    };
    // Training stops once the budget for the final evaluation is exhausted.
    let train_budget = DESK_BUDGET - Duration::from_secs(60);
    let out = fit(&config, net, &train, &val, |s, _| {
        println!("    desk {}  t={:.0}s", s.log_line(), start.elapsed().as_secs_f64());
        if start.elapsed() > train_budget {
            Control::Stop
        } else {
            Control::Continue
        }
    })
    .map_err(err)?;
    let best = out.best.network().map_err(err)?;
    let (pred, truth) = predict_all(&best, &val)?;
    let report = evaluate(&pred, &truth).map_err(err)?;
    let elapsed = start.elapsed();
    let (seq, set) = (report.sequence.aggregate.f1, report.set.aggregate.f1);
    let summary = format!(
        "best epoch {} of {}, held-out sequence F1 {seq:.4}, set F1 {set:.4}, {elapsed:.0?}",
        out.best.epoch,
        out.history.len()
    );
    ensure(seq >= 0.90 && set >= 0.95 && elapsed < DESK_BUDGET, || summary.clone())?;
    Ok(summary)
}

fn metric_oracle() -> Outcome {
    let mut rng = stream(2024, "acceptance/metric-oracle");
    for _ in 0..1000 {
        let records = common::random_instance(&mut rng);
        let seq: Vec<_> = RhythmClass::ALL
            .iter()
            .map(|&c| common::brute_sequence(&records, c))
            .collect();
        let set: Vec<_> = RhythmClass::ALL
            .iter()
            .map(|&c| common::brute_set(&records, c))
            .collect();
        catch_unwind(|| {
            common::assert_matches(&sequence_scores(&common::pairs(&records)).unwrap(), &seq, "sequence");
            common::assert_matches(&set_scores(&common::pairs(&records)).unwrap(), &set, "set");
        })
        .map_err(|_| format!("mismatch on instance {records:?}"))?;
    }
    use RhythmClass::{Afib, Sinus, Vt};
    static TRUTH: [RhythmClass; 4] = [Sinus, Sinus, Afib, Afib];
    static PRED: [RhythmClass; 4] = [Sinus, Afib, Afib, Afib];
    let pair = |p: &'static [RhythmClass], t: &'static [RhythmClass]| RecordPair {
        record: "fixture",
        pred: p,
        truth: t,
    };
    let seq = sequence_scores(&[pair(&PRED, &TRUTH)]).map_err(err)?.aggregate.f1;
    ensure((seq - 0.7333).abs() < 1e-4, || format!("sequence fixture {seq}"))?;
    let set = set_scores(&[pair(&[Sinus, Vt], &[Sinus, Afib])])
        .map_err(err)?
        .aggregate
        .f1;
    ensure(set == 0.5, || format!("set fixture {set}"))?;
    Ok(format!("1000 random instances exact; fixtures {seq:.4} and {set}"))
}

fn aggregation_identity() -> Outcome {
    let mut rng = stream(77, "acceptance/identity");
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let records = common::random_instance(&mut rng);
        let table = sequence_scores(&common::pairs(&records)).map_err(err)?;
        let (hits, total) = records
            .iter()
            .flat_map(|(p, t)| p.iter().zip(t))
            .fold((0u32, 0u32), |(h, n), (p, t)| (h + (p == t) as u32, n + 1));
        worst = worst.max((table.aggregate.recall - hits as f64 / total as f64).abs());
    }
    ensure(worst <= 1e-12, || format!("largest gap {worst:e}"))?;
    Ok(format!("1000 batches, largest gap {worst:.1e}"))
}

fn plateau_trace() -> Outcome {
    let mut s = PlateauScheduler::new(2, 10.0, 1e-6).map_err(err)?;
    let mut lr = 1e-3;
    let mut trace = Vec::new();
    for loss in [1.0, 0.9, 0.91, 0.92] {
        trace.push(lr);
        lr = s.update(loss, lr);
    }
    trace.push(lr);
    // trace[e] is the rate used in epoch e+1; the last entry follows epoch 4
    ensure(trace == [1e-3, 1e-3, 1e-3, 1e-3, 1e-4], || format!("{trace:?}"))?;
    Ok(format!("rates {trace:?}"))
}

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_ecgnet")
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(binary())
        .args(args)
        .env("ECGNET_LOG", "warn")
        .output()
        .map_err(err)?;
    ensure(out.status.success(), || {
        format!(
            "`ecgnet {}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

/// Every file under `dir` with its bytes; run manifests lose their timing.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(dir).unwrap().to_path_buf();
            let bytes = if path
                .file_name()
                .is_some_and(|n| n.to_string_lossy().ends_with(RUN_MANIFEST_FILE))
            {
                let m = RunManifest::read(&path).unwrap().without_timing();
                serde_json::to_vec(&m).unwrap()
            } else {
                std::fs::read(&path).unwrap()
            };
            out.push((rel, bytes));
        }
    }
    out.sort();
    out
}

/// Runs a command twice into the same directory and compares the artifacts.
fn same_artifacts(dir: &Path, args: &[&str], what: &str) -> Result<usize, String> {
    let mut runs = Vec::new();
    for _ in 0..2 {
        if dir.exists() {
            std::fs::remove_dir_all(dir).map_err(err)?;
        }
        cli(args)?;
        runs.push(snapshot(dir));
    }
    let (x, y) = (&runs[0], &runs[1]);
    let names = |s: &[(PathBuf, Vec<u8>)]| s.iter().map(|(p, _)| p.clone()).collect::<Vec<_>>();
    ensure(names(x) == names(y), || format!("{what}: file lists differ"))?;
    for ((p, u), (_, v)) in x.iter().zip(y) {
        ensure(u == v, || format!("{what}: {} differs", p.display()))?;
    }
    Ok(x.len())
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(err)?;
    let root = tmp.path();
    let p = |name: &str| root.join(name).to_string_lossy().into_owned();
    let (data, run, report) = (p("data"), p("train"), p("eval"));
    let generated = same_artifacts(
        &root.join("data"),
        &[
            "generate",
            "--out",
            &data,
            "--seed",
            "7",
            "--per-class",
            "3",
            "--classes",
            "SINUS,AFIB,VT,NOISE",
            "--duration-s",
            "10.24",
        ],
        "generate",
    )?;
    let trained = same_artifacts(
        &root.join("train"),
        &[
            "train",
            "--data",
            &data,
            "--out",
            &run,
            "--seed",
            "7",
            "--epochs",
            "3",
            "--batch",
            "4",
            "--blocks",
            "4",
            "--base-filters",
            "8",
            "--val-fraction",
            "0.25",
        ],
        "train",
    )?;
    let ckpt = root.join("train").join(BEST_CHECKPOINT).to_string_lossy().into_owned();
    let evaluated = same_artifacts(
        &root.join("eval"),
        &["evaluate", "--checkpoint", &ckpt, "--data", &data, "--report", &report],
        "evaluate",
    )?;

    // checkpoint round trip after real optimizer steps
    let records = normalize_records(
        &generate_corpus(
            &SynthConfig {
                seed: 3,
                records_per_class: 1,
                duration_s: 10.24,
                ..SynthConfig::default()
            }
            .with_classes(&[RhythmClass::Sinus, RhythmClass::Vt]),
        )
        .map_err(err)?,
    )
    .map_err(err)?;
    let mut net = Network::build(&desk_config(), &mut stream(3, "init")).map_err(err)?;
    let mut opt = AdamState::new(net.params());
    train_epoch(&mut net, &records, 2, &mut opt, 3, 1).map_err(err)?;
    recalibrate(&mut net, &records, 2).map_err(err)?;
    let path = root.join("round.ckpt");
    let original = Checkpoint::new(&net, Some(&opt), 1, 0.5);
    save_checkpoint(&original, &path).map_err(err)?;
    let loaded = load_checkpoint(&path).map_err(err)?;
    ensure(loaded == original && loaded.to_bytes() == original.to_bytes(), || {
        "checkpoint bytes differ".into()
    })?;
    let restored = loaded.network().map_err(err)?;
    let (before, after) = (
        evaluate_loss(&net, &records, 2).map_err(err)?,
        evaluate_loss(&restored, &records, 2).map_err(err)?,
    );
    ensure(before == after, || format!("eval loss {before:?} vs {after:?}"))?;
    let x = Tensor::from_fn(Shape3::new(1, 1, 2048), |_, _, t| ((t as f32) * 0.01).sin());
    ensure(
        net.forward(&x).map_err(err)?.values == restored.forward(&x).map_err(err)?.values,
        || "forward outputs differ after reload".into(),
    )?;
    Ok(format!(
        "generate {generated} files, train {trained} files, evaluate {evaluated} files identical; checkpoint bit-exact"
    ))
}

fn annotator_harness() -> Outcome {
    let tmp = tempfile::tempdir().map_err(err)?;
    let data = tmp.path().join("consensus");
    cli(&[
        "generate",
        "--out",
        &data.to_string_lossy(),
        "--seed",
        "5",
        "--per-class",
        "2",
        "--duration-s",
        "10.24",
        "--transition-prob",
        "0.5",
    ])?;
    let report = tmp.path().join("report");
    cli(&[
        "compare-annotators",
        "--consensus",
        &data.to_string_lossy(),
        "--annotators",
        &data.to_string_lossy(),
        "--report",
        &report.to_string_lossy(),
    ])?;
    let csv = std::fs::read_to_string(report.join("comparison.csv")).map_err(err)?;
    for metric in ["sequence", "set"] {
        let row = csv
            .lines()
            .find(|l| l.starts_with(&format!("mean,{metric},aggregate,")))
            .ok_or_else(|| format!("no mean {metric} row"))?;
        ensure(row.ends_with(",1"), || format!("consensus-as-annotator row `{row}`"))?;
    }
    let truth = common::consensus(31, 400);
    let annotators: Vec<Annotator> = (0..6)
        .map(|k| Annotator {
            name: format!("cardiologist{k}"),
            labels: corrupt_labels(&truth, 0.2, &mut stream(31 + k, "acceptance/annotator")).unwrap(),
        })
        .collect();
    let cmp = annotator_comparison(&annotators, &truth).map_err(err)?;
    ensure((cmp.accuracy - 0.80).abs() <= 0.02, || {
        format!("mean accuracy {:.4}", cmp.accuracy)
    })?;
    Ok(format!(
        "consensus as annotator: mean F1 1; six annotators at p=0.2: mean accuracy {:.4}",
        cmp.accuracy
    ))
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 11] = [
        ("architecture ledger", architecture_ledger),
        ("shape contract", shape_contract),
        ("gradient integrity", gradient_integrity),
        ("initialization sanity", initialization_sanity),
        ("optimizability (16-record overfit)", optimizability),
        ("desk-scale learning", desk_scale_learning),
        ("metric oracle equivalence", metric_oracle),
        ("aggregation identity", aggregation_identity),
        ("plateau scheduler trace", plateau_trace),
        ("determinism", determinism),
        ("annotator harness", annotator_harness),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
