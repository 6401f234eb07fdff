use rand::Rng;

use super::scores::{evaluate, EvalReport, Labeling, Prf, ScoreTable};
use crate::data::{RhythmClass, CLASS_COUNT};
use crate::error::{Error, Result};

/// One annotator's labels for every record.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotator {
    pub name: String,
    pub labels: Labeling,
}

/// Unweighted mean over annotators of each per-class and aggregate score.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanTable {
    pub classes: Vec<(RhythmClass, Prf)>,
    pub aggregate: Prf,
}

impl MeanTable {
    fn of(tables: &[&ScoreTable]) -> Self {
        let n = tables.len() as f64;
        let mean = |scores: Vec<Prf>| Prf {
            precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
            recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
            f1: scores.iter().map(|s| s.f1).sum::<f64>() / n,
        };
        MeanTable {
            classes: RhythmClass::ALL
                .iter()
                .map(|&c| (c, mean(tables.iter().map(|t| t.class(c).prf()).collect())))
                .collect(),
            aggregate: mean(tables.iter().map(|t| t.aggregate).collect()),
        }
    }

    pub fn class(&self, class: RhythmClass) -> Prf {
        self.classes[class.index()].1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatorComparison {
    pub per_annotator: Vec<(String, EvalReport)>,
    pub sequence: MeanTable,
    pub set: MeanTable,
    pub accuracy: f64,
}

/// Scores every annotator against the consensus and averages the scores.
pub fn annotator_comparison(annotators: &[Annotator], consensus: &Labeling) -> Result<AnnotatorComparison> {
    if annotators.is_empty() {
        return Err(Error::InvalidInput("no annotators to compare".into()));
    }
    let per_annotator = annotators
        .iter()
        .map(|a| {
            let report = evaluate(&a.labels, consensus).map_err(|e| match e {
                Error::Coverage(m) => Error::Coverage(format!("annotator `{}`: {m}", a.name)),
                other => other,
            })?;
            Ok((a.name.clone(), report))
        })
        .collect::<Result<Vec<_>>>()?;
    let seq: Vec<&ScoreTable> = per_annotator.iter().map(|(_, r)| &r.sequence).collect();
    let set: Vec<&ScoreTable> = per_annotator.iter().map(|(_, r)| &r.set).collect();
    let accuracy = per_annotator.iter().map(|(_, r)| r.accuracy).sum::<f64>() / per_annotator.len() as f64;
    Ok(AnnotatorComparison {
        sequence: MeanTable::of(&seq),
        set: MeanTable::of(&set),
        accuracy,
        per_annotator,
    })
}

/// Copies `consensus`, replacing each label with probability `rate` by a
/// different class drawn uniformly, so expected accuracy is `1 − rate`.
pub fn corrupt_labels<R: Rng>(consensus: &Labeling, rate: f64, rng: &mut R) -> Result<Labeling> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Config(format!("corruption rate must lie in [0, 1], got {rate}")));
    }
    Ok(consensus
        .iter()
        .map(|(id, labels)| {
            let noisy = labels
                .iter()
                .map(|&c| {
                    if rng.random_bool(rate) {
                        let shift = rng.random_range(1..CLASS_COUNT);
                        RhythmClass::ALL[(c.index() + shift) % CLASS_COUNT]
                    } else {
                        c
                    }
                })
                .collect();
            (id.clone(), noisy)
        })
        .collect())
}
