//! Sequence- and set-level F1 scoring, confusion matrices, the
//! annotator-versus-consensus harness and report export.

mod annotators;
mod export;
mod scores;

pub use annotators::{annotator_comparison, corrupt_labels, Annotator, AnnotatorComparison, MeanTable};
pub use export::{
    comparison_csv, confusion_csv, confusion_svg, parse_confusion_csv, scores_csv, COMPARISON_CSV_HEADER,
    SCORES_CSV_HEADER,
};
pub use scores::{
    confusion, evaluate, evaluate_pairs, pair_up, sequence_scores, set_scores, ClassScores, Confusion, EvalReport,
    Labeling, Prf, RecordPair, ScoreTable,
};
