//! Optimization: Adam, the plateau schedule, patient-disjoint splits and the
//! epoch loop with best-model checkpointing.

mod adam;
mod fit;
mod schedule;
mod split;

pub use adam::{adam_step, AdamState, ADAM_EPSILON, BETA1, BETA2, DEFAULT_LR};
pub use fit::{
    evaluate_loss, fit, make_batch, normalize_records, recalibrate, train_epoch, Control, EpochStats, FitAbort,
    FitOutcome, TrainConfig, BEST_CHECKPOINT, LOG_FILE, STATS_FILE,
};
pub use schedule::{PlateauScheduler, PLATEAU_TOLERANCE};
pub use split::{split_by_patient, Split};
