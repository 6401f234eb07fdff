use std::collections::{BTreeMap, BTreeSet};

use crate::data::{RhythmClass, CLASS_COUNT};
use crate::error::{Error, Result};

/// Per-position labels of every record, keyed by record id.
pub type Labeling = BTreeMap<String, Vec<RhythmClass>>;

/// Prediction and ground truth for one record.
#[derive(Debug, Clone, Copy)]
pub struct RecordPair<'a> {
    pub record: &'a str,
    pub pred: &'a [RhythmClass],
    pub truth: &'a [RhythmClass],
}

/// Pairs every truth record with its prediction; a record the prediction
/// lacks is a coverage error. Extra predicted records are ignored.
pub fn pair_up<'a>(pred: &'a Labeling, truth: &'a Labeling) -> Result<Vec<RecordPair<'a>>> {
    truth
        .iter()
        .map(|(id, t)| {
            let p = pred
                .get(id)
                .ok_or_else(|| Error::Coverage(format!("no prediction for record `{id}`")))?;
            Ok(RecordPair {
                record: id,
                pred: p,
                truth: t,
            })
        })
        .collect()
}

/// Precision, recall and F1.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Prf {
    /// Scores from counts, with every 0/0 taken as 0.
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores {
    pub class: RhythmClass,
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    /// Ground-truth frequency: positions (sequence) or records (set).
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassScores {
    pub fn prf(&self) -> Prf {
        Prf {
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
        }
    }
}

/// Scores of all 14 classes plus their support-weighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub classes: Vec<ClassScores>,
    pub aggregate: Prf,
}

impl ScoreTable {
    fn from_counts(tp: &[u64; CLASS_COUNT], fp: &[u64; CLASS_COUNT], fn_: &[u64; CLASS_COUNT]) -> Result<Self> {
        let classes: Vec<ClassScores> = RhythmClass::ALL
            .iter()
            .map(|&class| {
                let k = class.index();
                let prf = Prf::from_counts(tp[k], fp[k], fn_[k]);
                ClassScores {
                    class,
                    true_pos: tp[k],
                    false_pos: fp[k],
                    false_neg: fn_[k],
                    support: tp[k] + fn_[k],
                    precision: prf.precision,
                    recall: prf.recall,
                    f1: prf.f1,
                }
            })
            .collect();
        let total: u64 = classes.iter().map(|c| c.support).sum();
        if total == 0 {
            return Err(Error::InvalidInput("no ground-truth labels to score".into()));
        }
        let weighted =
            |f: fn(&ClassScores) -> f64| classes.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / total as f64;
        let aggregate = Prf {
            precision: weighted(|c| c.precision),
            recall: weighted(|c| c.recall),
            f1: weighted(|c| c.f1),
        };
        Ok(ScoreTable { classes, aggregate })
    }

    pub fn class(&self, class: RhythmClass) -> &ClassScores {
        &self.classes[class.index()]
    }

    pub fn total_support(&self) -> u64 {
        self.classes.iter().map(|c| c.support).sum()
    }
}

fn check_lengths(pairs: &[RecordPair<'_>]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no records to score".into()));
    }
    for p in pairs {
        if p.pred.len() != p.truth.len() {
            return Err(Error::Contract(format!(
                "record `{}`: {} predicted positions for {} ground-truth positions",
                p.record,
                p.pred.len(),
                p.truth.len()
            )));
        }
    }
    Ok(())
}

/// Position-wise multi-class tally over all records.
pub fn sequence_scores(pairs: &[RecordPair<'_>]) -> Result<ScoreTable> {
    check_lengths(pairs)?;
    let (mut tp, mut fp, mut fn_) = ([0u64; CLASS_COUNT], [0u64; CLASS_COUNT], [0u64; CLASS_COUNT]);
    for p in pairs {
        for (&pred, &truth) in p.pred.iter().zip(p.truth) {
            if pred == truth {
                tp[truth.index()] += 1;
            } else {
                fn_[truth.index()] += 1;
                fp[pred.index()] += 1;
            }
        }
    }
    ScoreTable::from_counts(&tp, &fp, &fn_)
}

/// Per-record tally over the sets of classes present; order and length of
/// the grids are irrelevant.
pub fn set_scores(pairs: &[RecordPair<'_>]) -> Result<ScoreTable> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no records to score".into()));
    }
    let (mut tp, mut fp, mut fn_) = ([0u64; CLASS_COUNT], [0u64; CLASS_COUNT], [0u64; CLASS_COUNT]);
    for p in pairs {
        let pred: BTreeSet<RhythmClass> = p.pred.iter().copied().collect();
        let truth: BTreeSet<RhythmClass> = p.truth.iter().copied().collect();
        for c in pred.union(&truth) {
            match (pred.contains(c), truth.contains(c)) {
                (true, true) => tp[c.index()] += 1,
                (true, false) => fp[c.index()] += 1,
                _ => fn_[c.index()] += 1,
            }
        }
    }
    ScoreTable::from_counts(&tp, &fp, &fn_)
}

/// Position counts indexed `[truth][prediction]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Confusion {
    pub counts: [[u64; CLASS_COUNT]; CLASS_COUNT],
}

impl Default for Confusion {
    fn default() -> Self {
        Confusion {
            counts: [[0; CLASS_COUNT]; CLASS_COUNT],
        }
    }
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..CLASS_COUNT).map(|k| self.counts[k][k]).sum()
    }

    pub fn row_sums(&self) -> [u64; CLASS_COUNT] {
        self.counts.map(|row| row.iter().sum())
    }

    /// Fraction of positions on the diagonal; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        ratio(self.trace(), self.total())
    }
}

pub fn confusion(pairs: &[RecordPair<'_>]) -> Result<Confusion> {
    check_lengths(pairs)?;
    let mut out = Confusion::default();
    for p in pairs {
        for (&pred, &truth) in p.pred.iter().zip(p.truth) {
            out.counts[truth.index()][pred.index()] += 1;
        }
    }
    Ok(out)
}

/// Both F1 metrics, the confusion matrix and position accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub sequence: ScoreTable,
    pub set: ScoreTable,
    pub confusion: Confusion,
    pub accuracy: f64,
}

pub fn evaluate_pairs(pairs: &[RecordPair<'_>]) -> Result<EvalReport> {
    let confusion = confusion(pairs)?;
    Ok(EvalReport {
        sequence: sequence_scores(pairs)?,
        set: set_scores(pairs)?,
        accuracy: confusion.accuracy(),
        confusion,
    })
}

/// Scores `pred` against `truth` over every record of `truth`.
pub fn evaluate(pred: &Labeling, truth: &Labeling) -> Result<EvalReport> {
    evaluate_pairs(&pair_up(pred, truth)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use RhythmClass::{Afib, Sinus, Vt};

    fn pair<'a>(pred: &'a [RhythmClass], truth: &'a [RhythmClass]) -> RecordPair<'a> {
        RecordPair {
            record: "r0",
            pred,
            truth,
        }
    }

    #[test]
    fn hand_tallied_sequence_case() {
        let truth = [Sinus, Sinus, Afib, Afib];
        let pred = [Sinus, Afib, Afib, Afib];
        let t = sequence_scores(&[pair(&pred, &truth)]).unwrap();
        let s = t.class(Sinus);
        assert_eq!((s.precision, s.recall), (1.0, 0.5));
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-15);
        let a = t.class(Afib);
        assert!((a.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.recall, 1.0);
        assert!((a.f1 - 0.8).abs() < 1e-15);
        assert!((t.aggregate.f1 - (2.0 * (2.0 / 3.0) + 2.0 * 0.8) / 4.0).abs() < 1e-15);
        assert!((t.aggregate.f1 - 0.7333).abs() < 1e-4);
    }

    #[test]
    fn hand_tallied_set_case() {
        let t = set_scores(&[pair(&[Sinus, Vt], &[Sinus, Afib])]).unwrap();
        assert_eq!(t.class(Sinus).f1, 1.0);
        assert_eq!((t.class(Afib).f1, t.class(Afib).support), (0.0, 1));
        assert_eq!(
            (t.class(Vt).f1, t.class(Vt).support, t.class(Vt).false_pos),
            (0.0, 0, 1)
        );
        assert_eq!(t.aggregate.f1, 0.5);
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let labels = [Sinus, Afib, Vt, Vt];
        let r = evaluate_pairs(&[pair(&labels, &labels)]).unwrap();
        assert_eq!(r.sequence.aggregate.f1, 1.0);
        assert_eq!(r.set.aggregate.f1, 1.0);
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.confusion.trace(), 4);
    }

    #[test]
    fn degenerate_inputs_are_errors() {
        assert!(matches!(sequence_scores(&[]), Err(Error::InvalidInput(_))));
        assert!(matches!(set_scores(&[]), Err(Error::InvalidInput(_))));
        let err = sequence_scores(&[RecordPair {
            record: "rec-9",
            pred: &[Sinus],
            truth: &[Sinus, Afib],
        }])
        .unwrap_err();
        assert!(matches!(&err, Error::Contract(m) if m.contains("rec-9")), "{err}");
        assert!(matches!(
            sequence_scores(&[pair(&[], &[])]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn single_off_diagonal_cell() {
        let c = confusion(&[pair(&[Afib; 24], &[Sinus; 24])]).unwrap();
        assert_eq!(c.counts[Sinus.index()][Afib.index()], 24);
        assert_eq!(c.total(), 24);
        assert_eq!(c.accuracy(), 0.0);
    }

    #[test]
    fn missing_prediction_is_a_coverage_error() {
        let truth: Labeling = [("a".to_string(), vec![Sinus])].into();
        let pred = Labeling::new();
        assert!(matches!(evaluate(&pred, &truth), Err(Error::Coverage(_))));
    }
}
