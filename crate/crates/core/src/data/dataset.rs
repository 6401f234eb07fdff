//! Dataset directory: `manifest.json` plus one raw little-endian `f32`
//! signal file per record. The field layout is documented in
//! `docs/formats.md`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{segments_to_grid, EcgRecord, LabelGrid, RhythmClass, Segment};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT_NAME: &str = "ecgnet-dataset";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub record_id: String,
    pub patient_id: String,
    pub sample_rate: u32,
    pub length: usize,
    /// `[onset, offset, label]` triples in samples.
    pub segments: Vec<(usize, usize, String)>,
    pub signal_file: String,
    pub crc32: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub records: Vec<ManifestEntry>,
}

impl ManifestEntry {
    pub fn parsed_segments(&self, manifest_path: &Path) -> Result<Vec<Segment>> {
        self.segments
            .iter()
            .map(|(onset, offset, label)| {
                let class = label.parse::<RhythmClass>().map_err(|e| Error::Schema {
                    path: manifest_path.to_path_buf(),
                    reason: format!("record {}: {e}", self.record_id),
                })?;
                Ok(Segment::new(*onset, *offset, class))
            })
            .collect()
    }

    /// Reference labels at `stride` without reading the signal file.
    pub fn label_grid(&self, manifest_path: &Path, stride: usize) -> Result<LabelGrid> {
        let segments = self.parsed_segments(manifest_path)?;
        segments_to_grid(&segments, self.length, stride, self.length.div_ceil(stride.max(1)))
    }

    /// Record with its annotations but no samples loaded.
    pub fn annotation_record(&self, manifest_path: &Path) -> Result<EcgRecord> {
        Ok(EcgRecord {
            record_id: self.record_id.clone(),
            patient_id: self.patient_id.clone(),
            sample_rate: self.sample_rate,
            samples: Vec::new(),
            annotations: self.parsed_segments(manifest_path)?,
        })
    }
}

fn encode_signal(samples: &[f32]) -> Vec<u8> {
    samples.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn write_dataset(records: &[EcgRecord], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(records.len());
    for r in records {
        if r.record_id.is_empty() || r.record_id.contains(['/', '\\']) || r.record_id.starts_with('.') {
            return Err(Error::Contract(format!(
                "record id `{}` is not usable as a file name",
                r.record_id
            )));
        }
        r.validate()?;
        let bytes = encode_signal(&r.samples);
        let signal_file = format!("{}.f32", r.record_id);
        let path = dir.join(&signal_file);
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        entries.push(ManifestEntry {
            record_id: r.record_id.clone(),
            patient_id: r.patient_id.clone(),
            sample_rate: r.sample_rate,
            length: r.samples.len(),
            segments: r
                .annotations
                .iter()
                .map(|s| (s.onset, s.offset, s.class.name().to_string()))
                .collect(),
            signal_file,
            crc32: crc32fast::hash(&bytes),
        });
    }
    let manifest = Manifest {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        records: entries,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    if manifest.format != FORMAT_NAME {
        return Err(Error::Schema {
            path,
            reason: format!("format `{}` is not `{FORMAT_NAME}`", manifest.format),
        });
    }
    if manifest.version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path,
            found: manifest.version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(manifest)
}

/// Reads a raw little-endian `f32` signal file.
pub fn read_signal_file(path: &Path) -> Result<Vec<f32>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Corrupt {
            path: path.to_path_buf(),
            offset: (bytes.len() - bytes.len() % 4) as u64,
            reason: "trailing partial sample".into(),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn read_dataset(dir: &Path) -> Result<Vec<EcgRecord>> {
    let manifest = read_manifest(dir)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    manifest
        .records
        .iter()
        .map(|entry| {
            let path: PathBuf = dir.join(&entry.signal_file);
            if !path.exists() {
                return Err(Error::MissingFile(path));
            }
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if bytes.len() != entry.length * 4 {
                return Err(Error::Corrupt {
                    path,
                    offset: bytes.len().min(entry.length * 4) as u64,
                    reason: format!("expected {} samples, file holds {} bytes", entry.length, bytes.len()),
                });
            }
            if crc32fast::hash(&bytes) != entry.crc32 {
                return Err(Error::Corrupt {
                    path,
                    offset: 0,
                    reason: "crc32 mismatch".into(),
                });
            }
            let mut record = entry.annotation_record(&manifest_path)?;
            record.samples = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            record.validate()?;
            Ok(record)
        })
        .collect()
}
