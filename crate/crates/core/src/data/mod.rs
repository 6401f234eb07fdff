//! Annotated ECG records, preprocessing, dataset files and the synthetic
//! corpus generator.

mod dataset;
mod record;
mod rhythm;
pub mod synth;

pub use dataset::{
    read_dataset, read_manifest, read_signal_file, write_dataset, Manifest, ManifestEntry, MANIFEST_FILE,
};
pub use record::{
    annotations_to_grid, annotations_to_grid_with_len, grid_to_segments, pad_to_stride, robust_normalize,
    segments_to_grid, validate_segments, EcgRecord, LabelGrid, Segment, LABEL_STRIDE, SAMPLE_RATE_HZ,
};
pub use rhythm::{RhythmClass, UnknownClass, CLASS_COUNT};
