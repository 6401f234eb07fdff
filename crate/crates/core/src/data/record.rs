use serde::{Deserialize, Serialize};

use super::RhythmClass;
use crate::error::{Error, Result};

/// Samples between consecutive output labels of the default network.
pub const LABEL_STRIDE: usize = 256;
pub const SAMPLE_RATE_HZ: u32 = 200;
const IQR_FLOOR: f64 = 1e-3;

/// One annotated rhythm run, `[onset, offset)` in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub onset: usize,
    pub offset: usize,
    pub class: RhythmClass,
}

impl Segment {
    pub fn new(onset: usize, offset: usize, class: RhythmClass) -> Self {
        Segment { onset, offset, class }
    }
}

/// A single-lead recording with a full segmentation into rhythm runs.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    pub record_id: String,
    pub patient_id: String,
    pub sample_rate: u32,
    pub samples: Vec<f32>,
    pub annotations: Vec<Segment>,
}

impl EcgRecord {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Checks that the segments are sorted, contiguous and cover `[0, len)`.
    pub fn validate(&self) -> Result<()> {
        validate_segments(&self.annotations, self.samples.len())
    }

    /// Distinct classes in annotation order.
    pub fn classes(&self) -> Vec<RhythmClass> {
        let mut out = Vec::new();
        for s in &self.annotations {
            if !out.contains(&s.class) {
                out.push(s.class);
            }
        }
        out
    }
}

pub fn validate_segments(segments: &[Segment], len: usize) -> Result<()> {
    if len == 0 {
        return Err(Error::InvalidInput("record has no samples".into()));
    }
    let mut expected = 0;
    for seg in segments {
        if seg.onset > expected {
            return Err(Error::InvalidAnnotation {
                sample: expected,
                reason: format!("gap before segment starting at {}", seg.onset),
            });
        }
        if seg.onset < expected {
            return Err(Error::InvalidAnnotation {
                sample: seg.onset,
                reason: format!("segment overlaps the previous one ending at {expected}"),
            });
        }
        if seg.offset <= seg.onset {
            return Err(Error::InvalidAnnotation {
                sample: seg.onset,
                reason: format!("empty or reversed segment [{}, {})", seg.onset, seg.offset),
            });
        }
        expected = seg.offset;
    }
    if expected != len {
        let reason = if expected < len {
            "annotations end before the signal does"
        } else {
            "annotation runs past the end of the signal"
        };
        return Err(Error::InvalidAnnotation {
            sample: expected.min(len),
            reason: reason.into(),
        });
    }
    Ok(())
}

/// One rhythm class per output position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    pub stride: usize,
    pub labels: Vec<RhythmClass>,
}

impl LabelGrid {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.labels.iter().map(|c| c.index()).collect()
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// `(x − median) / max(IQR, 1e-3)` with quartiles interpolated linearly
/// between order statistics.
pub fn robust_normalize(samples: &[f32]) -> Result<Vec<f32>> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("cannot normalize an empty signal".into()));
    }
    let mut sorted: Vec<f64> = samples.iter().map(|&v| v as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let median = quantile(&sorted, 0.5);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let scale = iqr.max(IQR_FLOOR);
    Ok(samples.iter().map(|&v| ((v as f64 - median) / scale) as f32).collect())
}

/// Right-pads with zeros to the next multiple of `stride`.
pub fn pad_to_stride(samples: &[f32], stride: usize) -> Vec<f32> {
    let stride = stride.max(1);
    let padded = samples.len().div_ceil(stride).max(1) * stride;
    let mut out = samples.to_vec();
    out.resize(padded, 0.0);
    out
}

/// Majority-overlap label of every `stride`-sample window.
///
/// Padding past the end of the record counts toward the final segment's
/// class; ties go to the class whose overlapping segment starts first.
pub fn annotations_to_grid(record: &EcgRecord, stride: usize) -> Result<LabelGrid> {
    let positions = record.len().div_ceil(stride.max(1));
    annotations_to_grid_with_len(record, stride, positions)
}

/// Like [`annotations_to_grid`] but for a caller-chosen number of positions,
/// used when a batch pads records beyond their own padded length.
pub fn annotations_to_grid_with_len(record: &EcgRecord, stride: usize, positions: usize) -> Result<LabelGrid> {
    segments_to_grid(&record.annotations, record.len(), stride, positions)
}

/// Grid of `positions` labels from a segmentation of `len` samples, without
/// needing the samples themselves.
pub fn segments_to_grid(segments: &[Segment], len: usize, stride: usize, positions: usize) -> Result<LabelGrid> {
    if stride == 0 {
        return Err(Error::Contract("label stride must be >= 1".into()));
    }
    validate_segments(segments, len)?;
    let last = segments.len() - 1;
    let mut labels = Vec::with_capacity(positions);
    let mut first = 0;
    for i in 0..positions {
        let (start, end) = (i * stride, (i + 1) * stride);
        // (class, overlap, earliest onset)
        let mut tally: Vec<(RhythmClass, usize, usize)> = Vec::new();
        while first < last && segments[first].offset <= start {
            first += 1;
        }
        for (k, seg) in segments.iter().enumerate().skip(first) {
            if seg.onset >= end {
                break;
            }
            let seg_end = if k == last { usize::MAX } else { seg.offset };
            let overlap = seg_end.min(end).saturating_sub(seg.onset.max(start));
            if overlap == 0 {
                continue;
            }
            match tally.iter_mut().find(|t| t.0 == seg.class) {
                Some(t) => t.1 += overlap,
                None => tally.push((seg.class, overlap, seg.onset)),
            }
        }
        let winner = tally
            .iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
            .map(|t| t.0)
            .unwrap_or(segments[last].class);
        labels.push(winner);
    }
    Ok(LabelGrid { stride, labels })
}

/// Runs of equal labels as segments of `stride` samples each, the last one
/// clipped to `len`. Inverse of [`segments_to_grid`] for stride-aligned runs.
pub fn grid_to_segments(labels: &[RhythmClass], stride: usize, len: usize) -> Result<Vec<Segment>> {
    if labels.is_empty() || stride == 0 || len == 0 || labels.len() != len.div_ceil(stride) {
        return Err(Error::Contract(format!(
            "{} labels at stride {stride} cannot cover {len} samples",
            labels.len()
        )));
    }
    let mut out: Vec<Segment> = Vec::new();
    for (i, &class) in labels.iter().enumerate() {
        let end = ((i + 1) * stride).min(len);
        match out.last_mut() {
            Some(seg) if seg.class == class => seg.offset = end,
            _ => out.push(Segment::new(i * stride, end, class)),
        }
    }
    Ok(out)
}
