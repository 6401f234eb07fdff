use std::fmt::Write;

use super::annotators::{AnnotatorComparison, MeanTable};
use super::scores::{Confusion, EvalReport, Prf, ScoreTable};
use crate::data::{RhythmClass, CLASS_COUNT};
use crate::error::{Error, Result};

pub const SCORES_CSV_HEADER: &str = "metric,class,precision,recall,f1,support";
pub const COMPARISON_CSV_HEADER: &str = "annotator,metric,class,precision,recall,f1";

fn push_table(out: &mut String, metric: &str, table: &ScoreTable) {
    for c in &table.classes {
        let _ = writeln!(
            out,
            "{metric},{},{},{},{},{}",
            c.class, c.precision, c.recall, c.f1, c.support
        );
    }
    let a = table.aggregate;
    let _ = writeln!(
        out,
        "{metric},aggregate,{},{},{},{}",
        a.precision,
        a.recall,
        a.f1,
        table.total_support()
    );
}

/// Per-class and aggregate rows for the sequence metric, then the set metric.
/// Scores are written in shortest round-trip form.
pub fn scores_csv(report: &EvalReport) -> String {
    let mut out = format!("{SCORES_CSV_HEADER}\n");
    push_table(&mut out, "sequence", &report.sequence);
    push_table(&mut out, "set", &report.set);
    out
}

fn push_mean(out: &mut String, metric: &str, table: &MeanTable) {
    let row = |out: &mut String, class: &str, s: Prf| {
        let _ = writeln!(out, "mean,{metric},{class},{},{},{}", s.precision, s.recall, s.f1);
    };
    for (c, s) in &table.classes {
        row(out, c.name(), *s);
    }
    row(out, "aggregate", table.aggregate);
}

/// Every annotator's rows followed by the `mean` rows.
pub fn comparison_csv(cmp: &AnnotatorComparison) -> String {
    let mut out = format!("{COMPARISON_CSV_HEADER}\n");
    for (name, report) in &cmp.per_annotator {
        for (metric, table) in [("sequence", &report.sequence), ("set", &report.set)] {
            for c in &table.classes {
                let _ = writeln!(out, "{name},{metric},{},{},{},{}", c.class, c.precision, c.recall, c.f1);
            }
            let a = table.aggregate;
            let _ = writeln!(out, "{name},{metric},aggregate,{},{},{}", a.precision, a.recall, a.f1);
        }
    }
    push_mean(&mut out, "sequence", &cmp.sequence);
    push_mean(&mut out, "set", &cmp.set);
    out
}

/// Rows are ground truth, columns predictions, both in class-index order.
pub fn confusion_csv(confusion: &Confusion) -> String {
    let mut out = String::from("truth");
    for c in RhythmClass::ALL {
        let _ = write!(out, ",{c}");
    }
    out.push('\n');
    for (c, row) in RhythmClass::ALL.iter().zip(&confusion.counts) {
        out.push_str(c.name());
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`confusion_csv`].
pub fn parse_confusion_csv(text: &str, source: &std::path::Path) -> Result<Confusion> {
    let schema = |reason: String| Error::Schema {
        path: source.to_path_buf(),
        reason,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| schema("empty confusion file".into()))?;
    let expected = confusion_csv(&Confusion::default());
    if Some(header) != expected.lines().next() {
        return Err(schema(format!("unexpected header `{header}`")));
    }
    let mut out = Confusion::default();
    for (k, class) in RhythmClass::ALL.iter().enumerate() {
        let line = lines.next().ok_or_else(|| schema(format!("missing row for {class}")))?;
        let mut cells = line.split(',');
        if cells.next() != Some(class.name()) {
            return Err(schema(format!("row {} should be {class}: `{line}`", k + 1)));
        }
        let values = cells
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|e| schema(format!("bad count `{v}` in row {class}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != CLASS_COUNT {
            return Err(schema(format!("row {class} has {} counts", values.len())));
        }
        out.counts[k].copy_from_slice(&values);
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(schema("trailing rows after the last class".into()));
    }
    Ok(out)
}

const CELL: usize = 36;
const MARGIN: usize = 120;
/// Darkest fill, used for a row-normalized value of 1.
const FULL: [u8; 3] = [0x08, 0x30, 0x6b];

fn fill(intensity: f64) -> String {
    let channel = |full: u8| (255.0 + (full as f64 - 255.0) * intensity).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        channel(FULL[0]),
        channel(FULL[1]),
        channel(FULL[2])
    )
}

/// Heatmap with each cell shaded by its share of the row (truth) total and
/// labeled with its count. Output depends only on the counts.
pub fn confusion_svg(confusion: &Confusion) -> String {
    let side = MARGIN + CELL * CLASS_COUNT + 10;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{side}" height="{side}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(out, r##"<rect width="{side}" height="{side}" fill="#ffffff"/>"##);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="14" text-anchor="middle" font-size="12">predicted</text>"#,
        MARGIN + CELL * CLASS_COUNT / 2
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{y}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {y})">truth</text>"#,
        y = MARGIN + CELL * CLASS_COUNT / 2
    );
    for (k, class) in RhythmClass::ALL.iter().enumerate() {
        let centre = MARGIN + k * CELL + CELL / 2;
        let _ = writeln!(
            out,
            r#"<text x="{centre}" y="{y}" text-anchor="start" transform="rotate(-90 {centre} {y})">{class}</text>"#,
            y = MARGIN - 6
        );
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{}" text-anchor="end">{class}</text>"#,
            centre + 4,
            x = MARGIN - 6
        );
    }
    for (r, row) in confusion.counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        for (c, &count) in row.iter().enumerate() {
            let intensity = if total == 0 { 0.0 } else { count as f64 / total as f64 };
            let (x, y) = (MARGIN + c * CELL, MARGIN + r * CELL);
            let _ = writeln!(
                out,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}" stroke="#cccccc"/>"##,
                fill(intensity)
            );
            if count > 0 {
                let ink = if intensity > 0.5 { "#ffffff" } else { "#000000" };
                let _ = writeln!(
                    out,
                    r#"<text x="{}" y="{}" text-anchor="middle" fill="{ink}">{count}</text>"#,
                    x + CELL / 2,
                    y + CELL / 2 + 4
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
