//! Deterministic synthetic single-lead ECG.
//!
//! Each beat is a sum of Gaussian bumps (P, Q, R, S, T) placed on an RR
//! interval process chosen per rhythm class; atrial fibrillation and flutter
//! add their own baseline activity. Record `i` draws from a random stream
//! keyed by `(seed, i)` and its patient's morphology from a stream keyed by
//! `(seed, patient)`, so any record can be generated in isolation.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{EcgRecord, RhythmClass, Segment, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::rng::{stream, StreamRng};

/// Inclusive-exclusive uniform range `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    fn sample(&self, rng: &mut StreamRng) -> f64 {
        if self.hi <= self.lo {
            self.lo
        } else {
            rng.random_range(self.lo..self.hi)
        }
    }
}

/// Rates in beats (or atrial waves) per minute, amplitudes in millivolts.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RhythmRanges {
    pub sinus_bpm: Range,
    pub afib_bpm: Range,
    /// Coefficient of variation of AFIB RR intervals.
    pub afib_rr_cv: Range,
    pub flutter_atrial_bpm: Range,
    pub vt_bpm: Range,
    pub ivr_bpm: Range,
    pub svt_bpm: Range,
    pub junctional_bpm: Range,
    pub chb_atrial_bpm: Range,
    pub chb_ventricular_bpm: Range,
    pub r_amplitude: Range,
    pub p_amplitude: Range,
    pub t_amplitude: Range,
    /// Multiplier on every wave width.
    pub width_scale: Range,
}

impl Default for RhythmRanges {
    fn default() -> Self {
        RhythmRanges {
            sinus_bpm: Range::new(60.0, 100.0),
            afib_bpm: Range::new(70.0, 140.0),
            afib_rr_cv: Range::new(0.2, 0.35),
            flutter_atrial_bpm: Range::new(250.0, 350.0),
            vt_bpm: Range::new(100.0, 250.0),
            ivr_bpm: Range::new(40.0, 100.0),
            svt_bpm: Range::new(130.0, 220.0),
            junctional_bpm: Range::new(40.0, 60.0),
            chb_atrial_bpm: Range::new(60.0, 100.0),
            chb_ventricular_bpm: Range::new(30.0, 45.0),
            r_amplitude: Range::new(0.8, 1.6),
            p_amplitude: Range::new(0.1, 0.25),
            t_amplitude: Range::new(0.1, 0.3),
            width_scale: Range::new(0.85, 1.15),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub records_per_class: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    /// Standard deviation of additive white noise, mV.
    pub noise_level: f64,
    /// Relative frequency of each class as the record's primary rhythm.
    pub class_weights: Vec<(RhythmClass, f64)>,
    /// Probability that a record switches to a second rhythm part-way.
    pub transition_prob: f64,
    pub records_per_patient: usize,
    pub ranges: RhythmRanges,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            records_per_class: 10,
            duration_s: 30.0,
            sample_rate: SAMPLE_RATE_HZ,
            noise_level: 0.03,
            class_weights: RhythmClass::ALL.iter().map(|&c| (c, 1.0)).collect(),
            transition_prob: 0.0,
            records_per_patient: 1,
            ranges: RhythmRanges::default(),
        }
    }
}

impl SynthConfig {
    pub fn with_classes(mut self, classes: &[RhythmClass]) -> Self {
        self.class_weights = classes.iter().map(|&c| (c, 1.0)).collect();
        self
    }

    /// Classes with positive weight, in configuration order.
    pub fn active_classes(&self) -> Vec<RhythmClass> {
        self.class_weights
            .iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(c, _)| *c)
            .collect()
    }

    pub fn record_count(&self) -> usize {
        self.records_per_class * self.active_classes().len()
    }

    pub fn samples_per_record(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(Error::Config(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        if self.samples_per_record() == 0 {
            return Err(Error::Config("records would contain no samples".into()));
        }
        if self.class_weights.iter().any(|(_, w)| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config("class weights must be finite and non-negative".into()));
        }
        if self.active_classes().is_empty() {
            return Err(Error::Config("at least one class needs a positive weight".into()));
        }
        for (i, (c, _)) in self.class_weights.iter().enumerate() {
            if self.class_weights[..i].iter().any(|(d, _)| d == c) {
                return Err(Error::Config(format!("class {c} listed twice")));
            }
        }
        if !(0.0..=1.0).contains(&self.transition_prob) {
            return Err(Error::Config("transition_prob must lie in [0, 1]".into()));
        }
        if self.records_per_patient == 0 {
            return Err(Error::Config("records_per_patient must be >= 1".into()));
        }
        if !(self.noise_level >= 0.0) {
            return Err(Error::Config("noise_level must be non-negative".into()));
        }
        Ok(())
    }
}

/// Ground-truth wave timings (seconds) for one generated record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BeatEvents {
    pub p_waves: Vec<f64>,
    pub qrs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthRecord {
    pub record: EcgRecord,
    pub events: BeatEvents,
}

/// Primary class of every record, spreading classes by smooth weighted
/// round-robin so realized counts track the weights to within one record.
pub fn class_schedule(config: &SynthConfig) -> Vec<RhythmClass> {
    let active: Vec<(RhythmClass, f64)> = config.class_weights.iter().copied().filter(|(_, w)| *w > 0.0).collect();
    let total: f64 = active.iter().map(|(_, w)| w).sum();
    let mut current = vec![0.0; active.len()];
    (0..config.record_count())
        .map(|_| {
            for (cur, (_, w)) in current.iter_mut().zip(&active) {
                *cur += w;
            }
            let best = (0..active.len())
                .max_by(|&a, &b| current[a].total_cmp(&current[b]).then(b.cmp(&a)))
                .expect("at least one active class");
            current[best] -= total;
            active[best].0
        })
        .collect()
}

pub fn generate_corpus(config: &SynthConfig) -> Result<Vec<EcgRecord>> {
    config.validate()?;
    class_schedule(config)
        .into_iter()
        .enumerate()
        .map(|(i, class)| generate_record(config, i, class).map(|r| r.record))
        .collect()
}

/// Patient-level morphology shared by all records of one synthetic patient.
#[derive(Debug, Clone, Copy)]
struct Morphology {
    r_amp: f64,
    p_amp: f64,
    t_amp: f64,
    width: f64,
    pr: f64,
    wander_amp: f64,
}

impl Morphology {
    fn draw(config: &SynthConfig, patient: usize) -> Self {
        let mut rng = stream(config.seed, &format!("synth/patient/{patient}"));
        let r = &config.ranges;
        Morphology {
            r_amp: r.r_amplitude.sample(&mut rng),
            p_amp: r.p_amplitude.sample(&mut rng),
            t_amp: r.t_amplitude.sample(&mut rng),
            width: r.width_scale.sample(&mut rng),
            pr: rng.random_range(0.14..0.19),
            wander_amp: rng.random_range(0.02..0.1),
        }
    }
}

struct Canvas<'a> {
    buf: &'a mut [f64],
    fs: f64,
}

impl Canvas<'_> {
    fn bump(&mut self, center: f64, amp: f64, sigma: f64) {
        let lo = ((center - 4.0 * sigma) * self.fs).floor().max(0.0) as usize;
        let hi = (((center + 4.0 * sigma) * self.fs).ceil().max(0.0) as usize).min(self.buf.len());
        for i in lo..hi {
            let t = i as f64 / self.fs;
            let z = (t - center) / sigma;
            self.buf[i] += amp * (-0.5 * z * z).exp();
        }
    }

    fn p_wave(&mut self, t: f64, m: &Morphology, polarity: f64) {
        self.bump(t, polarity * m.p_amp, 0.022 * m.width);
    }

    fn narrow_beat(&mut self, t: f64, rr: f64, m: &Morphology) {
        let w = m.width;
        self.bump(t - 0.025 * w, -0.12 * m.r_amp, 0.008 * w);
        self.bump(t, m.r_amp, 0.010 * w);
        self.bump(t + 0.025 * w, -0.2 * m.r_amp, 0.009 * w);
        let qt = (0.2 + 0.1 * rr).min(0.32);
        self.bump(t + qt, m.t_amp, 0.045 * w);
    }

    fn wide_beat(&mut self, t: f64, rr: f64, m: &Morphology) {
        let w = m.width;
        self.bump(t, 1.1 * m.r_amp, 0.035 * w);
        self.bump(t + 0.065 * w, -0.45 * m.r_amp, 0.03 * w);
        let qt = (0.22 + 0.12 * rr).min(0.36);
        self.bump(t + qt, -1.3 * m.t_amp, 0.06 * w);
    }
}

fn jittered(rr: f64, cv: f64, rng: &mut StreamRng) -> f64 {
    let n: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
    (rr * (1.0 + cv * n)).max(0.2)
}

/// Renders `class` into `[t0, t1)` seconds of `canvas`, appending events.
#[allow(clippy::too_many_arguments)]
fn render_segment(
    class: RhythmClass,
    t0: f64,
    t1: f64,
    canvas: &mut Canvas<'_>,
    m: &Morphology,
    ranges: &RhythmRanges,
    rng: &mut StreamRng,
    events: &mut BeatEvents,
) {
    use RhythmClass::*;
    let bpm_to_rr = |bpm: f64| 60.0 / bpm;
    match class {
        Sinus | Ear => {
            let rr = bpm_to_rr(ranges.sinus_bpm.sample(rng));
            let pr = if class == Ear { m.pr * 0.8 } else { m.pr };
            let mut t = t0 + rng.random_range(0.0..rr);
            while t < t1 {
                let beat_rr = jittered(rr, 0.03, rng);
                if class == Ear {
                    // inverted, biphasic ectopic P
                    canvas.bump(t - pr, -m.p_amp, 0.02 * m.width);
                    canvas.bump(t - pr + 0.035, 0.5 * m.p_amp, 0.015 * m.width);
                } else {
                    canvas.p_wave(t - pr, m, 1.0);
                }
                events.p_waves.push(t - pr);
                canvas.narrow_beat(t, beat_rr, m);
                events.qrs.push(t);
                t += beat_rr;
            }
        }
        Afib => {
            let rr = bpm_to_rr(ranges.afib_bpm.sample(rng));
            let cv = ranges.afib_rr_cv.sample(rng);
            let log_sigma = (1.0 + cv * cv).ln().sqrt();
            let lognormal = Normal::new(-0.5 * log_sigma * log_sigma, log_sigma).expect("finite sigma");
            let mut t = t0 + rng.random_range(0.0..rr);
            while t < t1 {
                let beat_rr = (rr * lognormal.sample(rng).exp()).max(0.28);
                canvas.narrow_beat(t, beat_rr, m);
                events.qrs.push(t);
                t += beat_rr;
            }
            // fibrillatory baseline: a few incommensurate 4-9 Hz waves
            let waves: Vec<(f64, f64, f64)> = (0..3)
                .map(|_| {
                    (
                        rng.random_range(4.0..9.0),
                        rng.random_range(0.02..0.06),
                        rng.random_range(0.0..2.0 * PI),
                    )
                })
                .collect();
            let (lo, hi) = sample_span(t0, t1, canvas);
            for i in lo..hi {
                let t = i as f64 / canvas.fs;
                canvas.buf[i] += waves
                    .iter()
                    .map(|(f, a, ph)| a * (2.0 * PI * f * t + ph).sin())
                    .sum::<f64>();
            }
        }
        Afl => {
            let atrial_rr = bpm_to_rr(ranges.flutter_atrial_bpm.sample(rng));
            let ratio = [2usize, 2, 3, 4][rng.random_range(0..4)];
            let amp = rng.random_range(0.12..0.25);
            let phase0 = t0 + rng.random_range(0.0..atrial_rr);
            let (lo, hi) = sample_span(t0, t1, canvas);
            for i in lo..hi {
                let t = i as f64 / canvas.fs;
                // negative sawtooth: slow rise, fast fall
                let frac = ((t - phase0) / atrial_rr).rem_euclid(1.0);
                let saw = if frac < 0.8 { frac / 0.8 } else { (1.0 - frac) / 0.2 };
                canvas.buf[i] += amp * (0.5 - saw);
            }
            let mut k = 0usize;
            let mut wave = phase0;
            while wave < t1 {
                events.p_waves.push(wave);
                if k.is_multiple_of(ratio) {
                    let t = wave + 0.22;
                    if t < t1 {
                        canvas.narrow_beat(t, atrial_rr * ratio as f64, m);
                        events.qrs.push(t);
                    }
                }
                k += 1;
                wave += atrial_rr;
            }
        }
        Vt | Ivr => {
            let range = if class == Vt { ranges.vt_bpm } else { ranges.ivr_bpm };
            let rr = bpm_to_rr(range.sample(rng));
            let mut t = t0 + rng.random_range(0.0..rr);
            while t < t1 {
                let beat_rr = jittered(rr, 0.02, rng);
                canvas.wide_beat(t, beat_rr, m);
                events.qrs.push(t);
                t += beat_rr;
            }
        }
        Svt | Junctional => {
            let range = if class == Svt {
                ranges.svt_bpm
            } else {
                ranges.junctional_bpm
            };
            let rr = bpm_to_rr(range.sample(rng));
            let retrograde = class == Junctional && rng.random::<bool>();
            let mut t = t0 + rng.random_range(0.0..rr);
            while t < t1 {
                let beat_rr = jittered(rr, 0.015, rng);
                canvas.narrow_beat(t, beat_rr, m);
                events.qrs.push(t);
                if retrograde {
                    canvas.p_wave(t + 0.09, m, -0.6);
                    events.p_waves.push(t + 0.09);
                }
                t += beat_rr;
            }
        }
        Bigeminy | Trigeminy => {
            let period = if class == Bigeminy { 2 } else { 3 };
            let rr = bpm_to_rr(ranges.sinus_bpm.sample(rng));
            let coupling = rng.random_range(0.55..0.7);
            let mut t = t0 + rng.random_range(0.0..rr);
            let mut k = rng.random_range(0..period);
            while t < t1 {
                let beat_rr = jittered(rr, 0.02, rng);
                canvas.p_wave(t - m.pr, m, 1.0);
                events.p_waves.push(t - m.pr);
                canvas.narrow_beat(t, beat_rr, m);
                events.qrs.push(t);
                k += 1;
                if k % period == 0 {
                    let ectopic = t + coupling * beat_rr;
                    if ectopic < t1 {
                        canvas.wide_beat(ectopic, beat_rr, m);
                        events.qrs.push(ectopic);
                    }
                    // compensatory pause
                    t += 2.0 * beat_rr;
                    k = 0;
                } else {
                    t += beat_rr;
                }
            }
        }
        Chb => {
            let v_rr = bpm_to_rr(ranges.chb_ventricular_bpm.sample(rng));
            // keep atria clearly faster than the escape rhythm
            let a_bpm = ranges.chb_atrial_bpm.sample(rng).max(1.6 * 60.0 / v_rr);
            let a_rr = bpm_to_rr(a_bpm);
            let mut t = t0 + rng.random_range(0.0..a_rr);
            while t < t1 {
                canvas.p_wave(t, m, 1.0);
                events.p_waves.push(t);
                t += jittered(a_rr, 0.02, rng);
            }
            let mut t = t0 + rng.random_range(0.0..v_rr);
            while t < t1 {
                let beat_rr = jittered(v_rr, 0.02, rng);
                canvas.wide_beat(t, beat_rr, m);
                events.qrs.push(t);
                t += beat_rr;
            }
        }
        AvbType2 | Wenckebach => {
            let rr = bpm_to_rr(ranges.sinus_bpm.sample(rng));
            let cycle = rng.random_range(3..6usize);
            let mut k = rng.random_range(0..cycle);
            let mut t = t0 + rng.random_range(0.0..rr);
            while t < t1 {
                let p_rr = jittered(rr, 0.02, rng);
                canvas.p_wave(t, m, 1.0);
                events.p_waves.push(t);
                let pos = k % cycle;
                if pos + 1 < cycle {
                    let pr = if class == Wenckebach {
                        // progressively longer, with shrinking increments
                        m.pr + 0.16 * (1.0 - 0.5f64.powi(pos as i32))
                    } else {
                        m.pr
                    };
                    if t + pr < t1 {
                        canvas.narrow_beat(t + pr, p_rr, m);
                        events.qrs.push(t + pr);
                    }
                }
                k += 1;
                t += p_rr;
            }
        }
        Noise => {
            let level = rng.random_range(0.25..0.7);
            let normal = Normal::new(0.0, level).expect("finite level");
            let wander: Vec<(f64, f64, f64)> = (0..3)
                .map(|_| {
                    (
                        rng.random_range(0.1..2.0),
                        rng.random_range(0.3..1.2),
                        rng.random_range(0.0..2.0 * PI),
                    )
                })
                .collect();
            let (lo, hi) = sample_span(t0, t1, canvas);
            let mut drift = 0.0;
            for i in lo..hi {
                let t = i as f64 / canvas.fs;
                drift = 0.98 * drift + 0.2 * normal.sample(rng);
                canvas.buf[i] += normal.sample(rng)
                    + drift
                    + wander
                        .iter()
                        .map(|(f, a, ph)| a * (2.0 * PI * f * t + ph).sin())
                        .sum::<f64>();
            }
            // motion artifacts: sharp steps that decay
            let spikes = rng.random_range(2..8);
            for _ in 0..spikes {
                let at = rng.random_range(t0..t1);
                canvas.bump(at, rng.random_range(-2.0..2.0), rng.random_range(0.01..0.2));
            }
        }
    }
}

fn sample_span(t0: f64, t1: f64, canvas: &Canvas<'_>) -> (usize, usize) {
    let lo = (t0 * canvas.fs).round() as usize;
    let hi = ((t1 * canvas.fs).round() as usize).min(canvas.buf.len());
    (lo.min(hi), hi)
}

/// Record `index` of the corpus, with primary rhythm `class`.
pub fn generate_record(config: &SynthConfig, index: usize, class: RhythmClass) -> Result<SynthRecord> {
    config.validate()?;
    let mut rng = stream(config.seed, &format!("synth/record/{index}"));
    let patient = index / config.records_per_patient;
    let morphology = Morphology::draw(config, patient);
    let n = config.samples_per_record();
    let fs = config.sample_rate as f64;
    let duration = n as f64 / fs;

    let mut segments = vec![Segment::new(0, n, class)];
    let active = config.active_classes();
    let others: Vec<RhythmClass> = active.iter().copied().filter(|&c| c != class).collect();
    if !others.is_empty() && n >= 4 && rng.random::<f64>() < config.transition_prob {
        let second = others[rng.random_range(0..others.len())];
        let boundary = ((rng.random_range(0.3..0.7) * n as f64).round() as usize).clamp(1, n - 1);
        let (first, last) = if rng.random::<bool>() {
            (class, second)
        } else {
            (second, class)
        };
        segments = vec![Segment::new(0, boundary, first), Segment::new(boundary, n, last)];
    }

    let mut buf = vec![0.0f64; n];
    let mut events = BeatEvents::default();
    {
        let mut canvas = Canvas { buf: &mut buf, fs };
        for seg in &segments {
            let (t0, t1) = (seg.onset as f64 / fs, seg.offset as f64 / fs);
            render_segment(
                seg.class,
                t0,
                t1,
                &mut canvas,
                &morphology,
                &config.ranges,
                &mut rng,
                &mut events,
            );
        }
    }
    let wander_f = rng.random_range(0.15..0.4);
    let wander_ph = rng.random_range(0.0..2.0 * PI);
    let noise = Normal::new(0.0, config.noise_level.max(0.0)).expect("finite noise level");
    for (i, v) in buf.iter_mut().enumerate() {
        let t = i as f64 / fs;
        *v += morphology.wander_amp * (2.0 * PI * wander_f * t + wander_ph).sin() + noise.sample(&mut rng);
    }
    events.p_waves.retain(|&t| (0.0..duration).contains(&t));
    events.p_waves.sort_by(f64::total_cmp);
    events.qrs.sort_by(f64::total_cmp);

    let record = EcgRecord {
        record_id: format!("synth-{index:06}"),
        patient_id: format!("patient-{patient:05}"),
        sample_rate: config.sample_rate,
        samples: buf.into_iter().map(|v| v as f32).collect(),
        annotations: segments,
    };
    record.validate()?;
    Ok(SynthRecord { record, events })
}
