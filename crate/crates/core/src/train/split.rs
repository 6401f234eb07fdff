//! Patient-disjoint train/validation split.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Shuffles patients by `seed` and moves whole patients into the validation
/// side while that brings its record count closer to `val_fraction · n`.
/// Both sides always receive at least one patient.
pub fn split_by_patient<P: AsRef<str>>(patient_ids: &[P], val_fraction: f64, seed: u64) -> Result<Split> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Config(format!(
            "val_fraction must lie in (0, 1), got {val_fraction}"
        )));
    }
    let mut patients: Vec<(&str, Vec<usize>)> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for (i, p) in patient_ids.iter().enumerate() {
        let p = p.as_ref();
        if p.is_empty() {
            return Err(Error::InvalidInput(format!("record {i} has an empty patient id")));
        }
        let slot = *index.entry(p).or_insert_with(|| {
            patients.push((p, Vec::new()));
            patients.len() - 1
        });
        patients[slot].1.push(i);
    }
    if patients.len() < 2 {
        return Err(Error::SplitInfeasible(format!(
            "need at least 2 patients, found {}",
            patients.len()
        )));
    }
    patients.sort_by(|a, b| a.0.cmp(b.0));
    patients.shuffle(&mut stream(seed, "split"));
    let target = val_fraction * patient_ids.len() as f64;
    let mut in_val = vec![false; patients.len()];
    let mut count = 0usize;
    for (k, (_, records)) in patients.iter().enumerate() {
        let with = (count + records.len()) as f64;
        if (with - target).abs() < (count as f64 - target).abs() {
            in_val[k] = true;
            count += records.len();
        }
    }
    if count == 0 {
        in_val[0] = true;
    }
    if in_val.iter().all(|&v| v) {
        in_val[patients.len() - 1] = false;
    }
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
    };
    for (k, (_, records)) in patients.iter().enumerate() {
        let side = if in_val[k] { &mut split.val } else { &mut split.train };
        side.extend_from_slice(records);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    Ok(split)
}
