//! Scorers against an independent brute-force tally, metric identities and
//! golden report files.

use std::path::{Path, PathBuf};

use ecgnet::data::{RhythmClass, CLASS_COUNT};
use ecgnet::metrics::{
    annotator_comparison, confusion, confusion_csv, confusion_svg, corrupt_labels, evaluate, parse_confusion_csv,
    scores_csv, sequence_scores, set_scores, Annotator, Labeling,
};
use ecgnet::rng::stream;
use rand::seq::SliceRandom;
use rand::Rng;

mod common;
use common::{assert_matches, brute_sequence, brute_set, consensus, pairs, random_instance, Tally};

#[test]
fn scorers_match_brute_force_on_1000_instances() {
    let mut rng = stream(2024, "metric-oracle");
    for _ in 0..1000 {
        let records = random_instance(&mut rng);
        let seq_oracle: Vec<Tally> = RhythmClass::ALL.iter().map(|&c| brute_sequence(&records, c)).collect();
        let set_oracle: Vec<Tally> = RhythmClass::ALL.iter().map(|&c| brute_set(&records, c)).collect();
        assert_matches(&sequence_scores(&pairs(&records)).unwrap(), &seq_oracle, "sequence");
        assert_matches(&set_scores(&pairs(&records)).unwrap(), &set_oracle, "set");
    }
}

#[test]
fn weighted_sequence_recall_is_position_accuracy() {
    let mut rng = stream(5, "identity");
    for _ in 0..500 {
        let records = random_instance(&mut rng);
        let table = sequence_scores(&pairs(&records)).unwrap();
        let (hits, total) = records
            .iter()
            .flat_map(|(p, t)| p.iter().zip(t))
            .fold((0, 0), |(h, n), (p, t)| (h + (p == t) as u32, n + 1));
        assert!((table.aggregate.recall - hits as f64 / total as f64).abs() <= 1e-12);
        let positions: u64 = table.classes.iter().map(|c| c.true_pos + c.false_neg).sum();
        assert_eq!(positions, total);
        for c in &table.classes {
            assert!((0.0..=1.0).contains(&c.f1) && (0.0..=1.0).contains(&c.precision));
        }
    }
}

#[test]
fn set_scores_ignore_time_order_and_record_order() {
    let mut rng = stream(6, "shuffle");
    for _ in 0..200 {
        let mut records = random_instance(&mut rng);
        let before = set_scores(&pairs(&records)).unwrap();
        for (p, _) in &mut records {
            p.shuffle(&mut rng);
        }
        assert_eq!(set_scores(&pairs(&records)).unwrap(), before);
        records.shuffle(&mut rng);
        assert_eq!(set_scores(&pairs(&records)).unwrap(), before);
    }
}

#[test]
fn record_order_does_not_change_sequence_scores() {
    let mut rng = stream(8, "order");
    let mut records = random_instance(&mut rng);
    let before = sequence_scores(&pairs(&records)).unwrap();
    records.reverse();
    let after = sequence_scores(&pairs(&records)).unwrap();
    for (a, b) in before.classes.iter().zip(&after.classes) {
        assert_eq!(
            (a.true_pos, a.false_pos, a.false_neg),
            (b.true_pos, b.false_pos, b.false_neg)
        );
    }
}

#[test]
fn confusion_rows_match_truth_counts() {
    let mut rng = stream(9, "confusion");
    let records: Vec<(Vec<RhythmClass>, Vec<RhythmClass>)> = (0..50)
        .map(|_| {
            let len = rng.random_range(1..40);
            let mut draw = || {
                (0..len)
                    .map(|_| RhythmClass::ALL[rng.random_range(0..CLASS_COUNT)])
                    .collect::<Vec<_>>()
            };
            (draw(), draw())
        })
        .collect();
    let m = confusion(&pairs(&records)).unwrap();
    let mut truth_counts = [0u64; CLASS_COUNT];
    for (_, t) in &records {
        for c in t {
            truth_counts[c.index()] += 1;
        }
    }
    assert_eq!(m.row_sums(), truth_counts);
    let hits = records
        .iter()
        .flat_map(|(p, t)| p.iter().zip(t))
        .filter(|(p, t)| p == t)
        .count();
    assert_eq!(m.trace(), hits as u64);
}

#[test]
fn corrupted_annotators_average_one_minus_rate() {
    let truth = consensus(1, 300);
    let annotators: Vec<Annotator> = (0..6)
        .map(|k| Annotator {
            name: format!("annotator{k}"),
            labels: corrupt_labels(&truth, 0.2, &mut stream(k, "annotator")).unwrap(),
        })
        .collect();
    let cmp = annotator_comparison(&annotators, &truth).unwrap();
    assert!((cmp.accuracy - 0.80).abs() <= 0.02, "{}", cmp.accuracy);
    // Monte-Carlo check of the corruption model itself
    let mean_direct: f64 = annotators
        .iter()
        .map(|a| {
            let (mut hit, mut n) = (0, 0);
            for (id, t) in &truth {
                for (p, q) in a.labels[id].iter().zip(t) {
                    hit += (p == q) as u32;
                    n += 1;
                }
            }
            hit as f64 / n as f64
        })
        .sum::<f64>()
        / 6.0;
    assert!((mean_direct - cmp.accuracy).abs() < 1e-12);
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/metrics")
        .join(name)
}

/// Compares against a checked-in file; `ECGNET_BLESS=1` rewrites it.
fn golden(name: &str, actual: &str) {
    let path = fixture(name);
    if std::env::var_os("ECGNET_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} differs from its golden file");
}

#[test]
fn report_files_match_golden_fixtures() {
    use RhythmClass::{Afib, Noise, Sinus, Vt};
    let truth: Labeling = [
        ("a".to_string(), vec![Sinus, Sinus, Afib, Afib]),
        ("b".to_string(), vec![Vt, Vt, Vt, Sinus]),
        ("c".to_string(), vec![Noise, Noise, Sinus, Sinus]),
    ]
    .into();
    let pred: Labeling = [
        ("a".to_string(), vec![Sinus, Afib, Afib, Afib]),
        ("b".to_string(), vec![Vt, Vt, Sinus, Sinus]),
        ("c".to_string(), vec![Noise, Sinus, Sinus, Vt]),
    ]
    .into();
    let report = evaluate(&pred, &truth).unwrap();
    golden("scores.csv", &scores_csv(&report));
    let csv = confusion_csv(&report.confusion);
    golden("confusion.csv", &csv);
    golden("confusion.svg", &confusion_svg(&report.confusion));
    assert_eq!(
        parse_confusion_csv(&csv, Path::new("confusion.csv")).unwrap(),
        report.confusion
    );
}
