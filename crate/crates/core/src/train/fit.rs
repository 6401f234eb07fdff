//! Minibatching, the epoch loop and best-model checkpointing.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use super::adam::{adam_step, AdamState, DEFAULT_LR};
use super::schedule::PlateauScheduler;
use crate::checkpoint::{save_checkpoint, Checkpoint};
use crate::data::{annotations_to_grid_with_len, robust_normalize, EcgRecord, LABEL_STRIDE};
use crate::error::{Error, Result};
use crate::model::Network;
use crate::rng::stream;
use crate::tensor::{softmax_xent, Shape3, Tensor};

pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const STATS_FILE: &str = "stats.csv";
pub const LOG_FILE: &str = "train.log";

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub plateau_patience: usize,
    pub lr_factor: f64,
    pub min_lr: f64,
    pub learning_rate: f64,
    pub seed: u64,
    /// Re-estimate batch-norm population statistics on the training set
    /// before each evaluation.
    #[serde(default = "default_true")]
    pub recalibrate_batchnorm: bool,
    /// Receives `best.ckpt`, `stats.csv` and `train.log` when set.
    pub checkpoint_dir: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            max_epochs: 100,
            plateau_patience: 3,
            lr_factor: 10.0,
            min_lr: 1e-6,
            learning_rate: DEFAULT_LR,
            seed: 0,
            recalibrate_batchnorm: true,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config(
                "max_epochs must be >= 1; nothing would be trained".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        PlateauScheduler::new(self.plateau_patience, self.lr_factor, self.min_lr).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Position accuracy on the validation records at the network's stride.
    pub val_accuracy: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
    pub is_best: bool,
}

impl EpochStats {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,val_loss,val_accuracy,lr,is_best";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.9},{:.9},{:.6},{:e},{}",
            self.epoch, self.train_loss, self.val_loss, self.val_accuracy, self.lr, self.is_best as u8
        )
    }

    pub fn log_line(&self) -> String {
        format!(
            "epoch {:>4}  train_loss {:.6}  val_loss {:.6}  val_acc {:.4}  lr {:.1e}{}",
            self.epoch,
            self.train_loss,
            self.val_loss,
            self.val_accuracy,
            self.lr,
            if self.is_best { "  *best" } else { "" }
        )
    }
}

/// Returned by the per-epoch observer of [`fit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Checkpoint of the epoch with the lowest validation loss.
    pub best: Checkpoint,
    pub history: Vec<EpochStats>,
    /// Network state after the final epoch.
    pub last: Network<f32>,
}

#[derive(Debug, thiserror::Error)]
#[error("training aborted after {} completed epochs: {error}", history.len())]
pub struct FitAbort {
    #[source]
    pub error: Error,
    pub history: Vec<EpochStats>,
}

/// Replaces each record's samples with their robust-normalized values.
pub fn normalize_records(records: &[EcgRecord]) -> Result<Vec<EcgRecord>> {
    records
        .iter()
        .map(|r| {
            r.validate()?;
            Ok(EcgRecord {
                samples: robust_normalize(&r.samples)?,
                ..r.clone()
            })
        })
        .collect()
}

/// Zero-pads normalized records to a common length (a multiple of both the
/// label stride and the network stride) and builds per-position targets at
/// the network stride.
pub fn make_batch(records: &[&EcgRecord], output_stride: usize) -> Result<(Tensor<f32>, Vec<usize>)> {
    if records.is_empty() {
        return Err(Error::InvalidInput("cannot build an empty batch".into()));
    }
    let unit = LABEL_STRIDE.max(output_stride);
    if !unit.is_multiple_of(output_stride) || !unit.is_multiple_of(LABEL_STRIDE) {
        return Err(Error::Config(format!(
            "output stride {output_stride} is incompatible with the {LABEL_STRIDE}-sample label grid"
        )));
    }
    let time = records
        .iter()
        .map(|r| r.len().div_ceil(unit).max(1) * unit)
        .max()
        .unwrap_or(unit);
    let mut data = vec![0.0f32; records.len() * time];
    let mut targets = Vec::with_capacity(records.len() * time / output_stride);
    for (b, r) in records.iter().enumerate() {
        data[b * time..b * time + r.len()].copy_from_slice(&r.samples);
        targets.extend(annotations_to_grid_with_len(r, output_stride, time / output_stride)?.indices());
    }
    Ok((Tensor::new(Shape3::new(records.len(), 1, time), data)?, targets))
}

/// One shuffled pass with Adam updates; returns the mean per-position loss.
pub fn train_epoch(
    network: &mut Network<f32>,
    records: &[EcgRecord],
    batch_size: usize,
    optimizer: &mut AdamState<f32>,
    seed: u64,
    epoch: usize,
) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be >= 1".into()));
    }
    let mut rng = stream(seed, &format!("train/epoch/{epoch}"));
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut rng);
    let stride = network.config().output_stride();
    let classes = network.config().class_count;
    let (mut total, mut positions) = (0.0f64, 0usize);
    for chunk in order.chunks(batch_size) {
        let batch: Vec<&EcgRecord> = chunk.iter().map(|&i| &records[i]).collect();
        let (x, targets) = make_batch(&batch, stride)?;
        let (logits, tape) = network.forward_train(&x, &mut rng)?;
        let (loss, dlogits) = softmax_xent(&logits.values, &targets, classes)?;
        let grads = network.backward(&tape, &dlogits)?;
        drop(tape);
        adam_step(network.params_mut(), &grads, optimizer)?;
        total += loss * targets.len() as f64;
        positions += targets.len();
    }
    Ok(total / positions as f64)
}

/// Sets every batch-norm layer's running statistics to population estimates
/// over `records`, taken in file order in batches of `batch_size`.
pub fn recalibrate(network: &mut Network<f32>, records: &[EcgRecord], batch_size: usize) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidInput("calibration set is empty".into()));
    }
    let stride = network.config().output_stride();
    let refs: Vec<&EcgRecord> = records.iter().collect();
    let batches = refs
        .chunks(batch_size.max(1))
        .map(|chunk| make_batch(chunk, stride).map(|(x, _)| x))
        .collect::<Result<Vec<_>>>()?;
    network.recalibrate_batchnorm(&batches)
}

/// Eval-mode mean per-position loss and position accuracy.
pub fn evaluate_loss(network: &Network<f32>, records: &[EcgRecord], batch_size: usize) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::InvalidInput("evaluation set is empty".into()));
    }
    let stride = network.config().output_stride();
    let classes = network.config().class_count;
    let (mut total, mut positions, mut correct) = (0.0f64, 0usize, 0usize);
    let refs: Vec<&EcgRecord> = records.iter().collect();
    for chunk in refs.chunks(batch_size.max(1)) {
        let (x, targets) = make_batch(chunk, stride)?;
        let logits = network.forward(&x)?;
        let (loss, _) = softmax_xent(&logits.values, &targets, classes)?;
        total += loss * targets.len() as f64;
        positions += targets.len();
        for (r, &t) in targets.iter().enumerate() {
            let row = logits.values.row(r);
            let best = (0..classes).fold(0, |b, k| if row[k] > row[b] { k } else { b });
            correct += (best == t) as usize;
        }
    }
    Ok((total / positions as f64, correct as f64 / positions as f64))
}

fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))
}

/// Trains for up to `max_epochs`, evaluating the validation loss in eval mode
/// after every epoch and keeping the checkpoint with the lowest one. The
/// observer may stop training early.
pub fn fit<F>(
    config: &TrainConfig,
    mut network: Network<f32>,
    train: &[EcgRecord],
    val: &[EcgRecord],
    mut observer: F,
) -> std::result::Result<FitOutcome, FitAbort>
where
    F: FnMut(&EpochStats, &Network<f32>) -> Control,
{
    let mut history = Vec::new();
    let abort = |error: Error, history: &Vec<EpochStats>| FitAbort {
        error,
        history: history.clone(),
    };
    config.validate().map_err(|e| abort(e, &history))?;
    if train.is_empty() || val.is_empty() {
        return Err(abort(
            Error::InvalidInput("train and validation sets must be non-empty".into()),
            &history,
        ));
    }
    let train = normalize_records(train).map_err(|e| abort(e, &history))?;
    let val = normalize_records(val).map_err(|e| abort(e, &history))?;
    let mut scheduler = PlateauScheduler::new(config.plateau_patience, config.lr_factor, config.min_lr)
        .map_err(|e| abort(e, &history))?;
    let mut optimizer = AdamState::new(network.params());
    optimizer.lr = config.learning_rate;
    let files = match &config.checkpoint_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| abort(Error::io(dir, e), &history))?;
            let stats = dir.join(STATS_FILE);
            std::fs::write(&stats, format!("{}\n", EpochStats::CSV_HEADER))
                .map_err(|e| abort(Error::io(&stats, e), &history))?;
            let log = dir.join(LOG_FILE);
            std::fs::write(&log, "").map_err(|e| abort(Error::io(&log, e), &history))?;
            Some((dir.join(BEST_CHECKPOINT), stats, log))
        }
        None => None,
    };
    let mut best: Option<Checkpoint> = None;
    for epoch in 1..=config.max_epochs {
        let lr = optimizer.lr;
        let train_loss = train_epoch(
            &mut network,
            &train,
            config.batch_size,
            &mut optimizer,
            config.seed,
            epoch,
        )
        .map_err(|e| abort(e, &history))?;
        if config.recalibrate_batchnorm {
            recalibrate(&mut network, &train, config.batch_size).map_err(|e| abort(e, &history))?;
        }
        let (val_loss, val_accuracy) =
            evaluate_loss(&network, &val, config.batch_size).map_err(|e| abort(e, &history))?;
        if !val_loss.is_finite() {
            return Err(abort(
                Error::State(format!("validation loss became {val_loss} at epoch {epoch}")),
                &history,
            ));
        }
        let is_best = best.as_ref().is_none_or(|b| val_loss < b.best_val_loss);
        let stats = EpochStats {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
            lr,
            is_best,
        };
        if is_best {
            let ckpt = Checkpoint::new(&network, Some(&optimizer), epoch as u64, val_loss);
            if let Some((path, _, _)) = &files {
                save_checkpoint(&ckpt, path).map_err(|e| abort(e, &history))?;
            }
            best = Some(ckpt);
        }
        if let Some((_, stats_path, log_path)) = &files {
            append_line(stats_path, &stats.csv_row()).map_err(|e| abort(e, &history))?;
            append_line(log_path, &stats.log_line()).map_err(|e| abort(e, &history))?;
        }
        log::info!("{}", stats.log_line());
        optimizer.lr = scheduler.update(val_loss, lr);
        history.push(stats);
        if observer(history.last().expect("just pushed"), &network) == Control::Stop {
            break;
        }
    }
    Ok(FitOutcome {
        best: best.expect("at least one epoch ran"),
        history,
        last: network,
    })
}
