//! Helpers shared by integration test binaries.
#![allow(dead_code)]

use ecgnet::data::{RhythmClass, CLASS_COUNT};
use ecgnet::metrics::{Labeling, RecordPair, ScoreTable};
use ecgnet::rng::stream;
use rand::seq::SliceRandom;
use rand::Rng;

pub type Instance = Vec<(Vec<RhythmClass>, Vec<RhythmClass>)>;

/// Counts and scores recomputed class by class with explicit filters.
pub struct Tally {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn tally(tp: u64, fp: u64, fn_: u64) -> Tally {
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    // 2PR/(P+R) rewritten over counts
    let f1 = if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    };
    Tally {
        tp,
        fp,
        fn_,
        precision,
        recall,
        f1,
    }
}

pub fn brute_sequence(records: &Instance, class: RhythmClass) -> Tally {
    let positions = || records.iter().flat_map(|(p, t)| p.iter().zip(t));
    let tp = positions().filter(|(p, t)| **p == class && **t == class).count() as u64;
    let fp = positions().filter(|(p, t)| **p == class && **t != class).count() as u64;
    let fn_ = positions().filter(|(p, t)| **p != class && **t == class).count() as u64;
    tally(tp, fp, fn_)
}

pub fn brute_set(records: &Instance, class: RhythmClass) -> Tally {
    let has = |v: &Vec<RhythmClass>| v.contains(&class);
    let tp = records.iter().filter(|(p, t)| has(p) && has(t)).count() as u64;
    let fp = records.iter().filter(|(p, t)| has(p) && !has(t)).count() as u64;
    let fn_ = records.iter().filter(|(p, t)| !has(p) && has(t)).count() as u64;
    tally(tp, fp, fn_)
}

pub fn brute_weighted_f1(tallies: &[Tally]) -> f64 {
    let support: u64 = tallies.iter().map(|t| t.tp + t.fn_).sum();
    tallies.iter().map(|t| t.f1 * (t.tp + t.fn_) as f64).sum::<f64>() / support as f64
}

pub fn assert_matches(table: &ScoreTable, oracle: &[Tally], what: &str) {
    for (c, o) in table.classes.iter().zip(oracle) {
        assert_eq!(
            (c.true_pos, c.false_pos, c.false_neg),
            (o.tp, o.fp, o.fn_),
            "{what} {}",
            c.class
        );
        assert_eq!(c.support, o.tp + o.fn_);
        assert!((c.precision - o.precision).abs() <= 1e-12, "{what} {}", c.class);
        assert!((c.recall - o.recall).abs() <= 1e-12, "{what} {}", c.class);
        assert!((c.f1 - o.f1).abs() <= 1e-12, "{what} {}", c.class);
    }
    assert!(
        (table.aggregate.f1 - brute_weighted_f1(oracle)).abs() <= 1e-12,
        "{what} aggregate"
    );
}

pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let mut palette = RhythmClass::ALL.to_vec();
    palette.shuffle(rng);
    palette.truncate(rng.random_range(1..=4));
    let records = rng.random_range(1..=5);
    (0..records)
        .map(|_| {
            let len = rng.random_range(1..=8);
            let mut draw = || {
                (0..len)
                    .map(|_| palette[rng.random_range(0..palette.len())])
                    .collect::<Vec<_>>()
            };
            (draw(), draw())
        })
        .collect()
}

pub fn pairs(records: &Instance) -> Vec<RecordPair<'_>> {
    records
        .iter()
        .map(|(p, t)| RecordPair {
            record: "r",
            pred: p,
            truth: t,
        })
        .collect()
}

/// Two-rhythm consensus labels of 24 positions per record.
pub fn consensus(seed: u64, records: usize) -> Labeling {
    let mut rng = stream(seed, "consensus");
    (0..records)
        .map(|i| {
            let len = 24;
            let a = RhythmClass::ALL[rng.random_range(0..CLASS_COUNT)];
            let b = RhythmClass::ALL[rng.random_range(0..CLASS_COUNT)];
            let cut = rng.random_range(0..len);
            let labels = (0..len).map(|t| if t < cut { a } else { b }).collect();
            (format!("rec{i:03}"), labels)
        })
        .collect()
}
