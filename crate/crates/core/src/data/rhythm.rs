use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The 14 output classes: 12 arrhythmias, sinus rhythm and noise.
///
/// Indices follow alphabetical order of the label names and are part of the
/// checkpoint and dataset formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RhythmClass {
    #[serde(rename = "AFIB")]
    Afib,
    #[serde(rename = "AFL")]
    Afl,
    #[serde(rename = "AVB_TYPE2")]
    AvbType2,
    #[serde(rename = "BIGEMINY")]
    Bigeminy,
    #[serde(rename = "CHB")]
    Chb,
    #[serde(rename = "EAR")]
    Ear,
    #[serde(rename = "IVR")]
    Ivr,
    #[serde(rename = "JUNCTIONAL")]
    Junctional,
    #[serde(rename = "NOISE")]
    Noise,
    #[serde(rename = "SINUS")]
    Sinus,
    #[serde(rename = "SVT")]
    Svt,
    #[serde(rename = "TRIGEMINY")]
    Trigeminy,
    #[serde(rename = "VT")]
    Vt,
    #[serde(rename = "WENCKEBACH")]
    Wenckebach,
}

pub const CLASS_COUNT: usize = 14;

impl RhythmClass {
    pub const ALL: [RhythmClass; CLASS_COUNT] = [
        RhythmClass::Afib,
        RhythmClass::Afl,
        RhythmClass::AvbType2,
        RhythmClass::Bigeminy,
        RhythmClass::Chb,
        RhythmClass::Ear,
        RhythmClass::Ivr,
        RhythmClass::Junctional,
        RhythmClass::Noise,
        RhythmClass::Sinus,
        RhythmClass::Svt,
        RhythmClass::Trigeminy,
        RhythmClass::Vt,
        RhythmClass::Wenckebach,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            RhythmClass::Afib => "AFIB",
            RhythmClass::Afl => "AFL",
            RhythmClass::AvbType2 => "AVB_TYPE2",
            RhythmClass::Bigeminy => "BIGEMINY",
            RhythmClass::Chb => "CHB",
            RhythmClass::Ear => "EAR",
            RhythmClass::Ivr => "IVR",
            RhythmClass::Junctional => "JUNCTIONAL",
            RhythmClass::Noise => "NOISE",
            RhythmClass::Sinus => "SINUS",
            RhythmClass::Svt => "SVT",
            RhythmClass::Trigeminy => "TRIGEMINY",
            RhythmClass::Vt => "VT",
            RhythmClass::Wenckebach => "WENCKEBACH",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            RhythmClass::Afib => "Atrial Fibrillation",
            RhythmClass::Afl => "Atrial Flutter",
            RhythmClass::AvbType2 => "Second degree AV Block Type 2 (Mobitz II)",
            RhythmClass::Bigeminy => "Ventricular Bigeminy",
            RhythmClass::Chb => "Complete Heart Block",
            RhythmClass::Ear => "Ectopic Atrial Rhythm",
            RhythmClass::Ivr => "Idioventricular Rhythm",
            RhythmClass::Junctional => "Junctional Rhythm",
            RhythmClass::Noise => "Noise",
            RhythmClass::Sinus => "Sinus Rhythm",
            RhythmClass::Svt => "Supraventricular Tachycardia",
            RhythmClass::Trigeminy => "Ventricular Trigeminy",
            RhythmClass::Vt => "Ventricular Tachycardia",
            RhythmClass::Wenckebach => "Wenckebach (Mobitz I)",
        }
    }
}

impl fmt::Display for RhythmClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown rhythm class `{0}`")]
pub struct UnknownClass(pub String);

impl FromStr for RhythmClass {
    type Err = UnknownClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| UnknownClass(s.to_string()))
    }
}
