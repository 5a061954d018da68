use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbolic::{Note, NoteSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Major,
    Minor,
}

const MAJOR_STEPS: [u8; 7] = [0, 2, 4, 5, 7, 9, 11];
// Natural minor.
const MINOR_STEPS: [u8; 7] = [0, 2, 3, 5, 7, 8, 10];

// Krumhansl-Kessler probe-tone ratings, index 0 = tonic.
const MAJOR_PROFILE: [f64; 12] = [6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88];
const MINOR_PROFILE: [f64; 12] = [6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17];

/// Correlations this close to the best count as a tie.
pub const KEY_TIE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Key {
    pub tonic: u8,
    pub mode: Mode,
}

impl Key {
    pub fn new(tonic: u8, mode: Mode) -> Self {
        Self { tonic: tonic % 12, mode }
    }

    pub fn major(tonic: u8) -> Self {
        Self::new(tonic, Mode::Major)
    }

    pub fn minor(tonic: u8) -> Self {
        Self::new(tonic, Mode::Minor)
    }

    fn steps(&self) -> &'static [u8; 7] {
        match self.mode {
            Mode::Major => &MAJOR_STEPS,
            Mode::Minor => &MINOR_STEPS,
        }
    }

    /// The seven pitch classes of the scale, starting from the tonic.
    pub fn scale(&self) -> [u8; 7] {
        self.steps().map(|s| (self.tonic + s) % 12)
    }

    pub fn contains(&self, pitch: u8) -> bool {
        self.degree(pitch).is_some()
    }

    /// Absolute scale degree (7 per octave, tonic of octave 0 = 0), or `None`
    /// for out-of-scale pitches.
    pub fn degree(&self, pitch: u8) -> Option<i32> {
        let rel = pitch as i32 - self.tonic as i32;
        let pc = rel.rem_euclid(12) as u8;
        let idx = self.steps().iter().position(|&s| s == pc)? as i32;
        Some(rel.div_euclid(12) * 7 + idx)
    }

    /// Pitch at an absolute scale degree, if it is a valid MIDI pitch.
    pub fn pitch_at(&self, degree: i32) -> Option<u8> {
        let octave = degree.div_euclid(7);
        let idx = degree.rem_euclid(7) as usize;
        let p = self.tonic as i32 + octave * 12 + self.steps()[idx] as i32;
        (0..=127).contains(&p).then_some(p as u8)
    }

    fn profile_score(&self, histogram: &[f64; 12]) -> f64 {
        let profile = match self.mode {
            Mode::Major => &MAJOR_PROFILE,
            Mode::Minor => &MINOR_PROFILE,
        };
        let rotated: [f64; 12] = std::array::from_fn(|pc| profile[(pc + 12 - self.tonic as usize) % 12]);
        pearson(histogram, &rotated)
    }
}

fn pearson(a: &[f64; 12], b: &[f64; 12]) -> f64 {
    let ma = a.iter().sum::<f64>() / 12.0;
    let mb = b.iter().sum::<f64>() / 12.0;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for i in 0..12 {
        let (da, db) = (a[i] - ma, b[i] - mb);
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Duration-weighted pitch-class histogram.
pub fn pitch_class_profile(notes: &[Note]) -> [f64; 12] {
    let mut h = [0.0; 12];
    for n in notes {
        h[(n.pitch % 12) as usize] += n.duration as f64;
    }
    h
}

/// Best key by correlating the duration profile with the 24 rotated
/// major/minor profiles.
///
/// Keys scoring within [`KEY_TIE_TOLERANCE`] of the best are tied; ties go to
/// the key whose tonic is the final bass pitch class, then to the lowest
/// tonic, then to major.
pub fn infer_key(seq: &NoteSequence) -> Result<Key> {
    infer_key_from_notes(seq.notes())
}

pub fn infer_key_from_notes(notes: &[Note]) -> Result<Key> {
    let last_onset = notes
        .iter()
        .map(|n| n.onset)
        .max()
        .ok_or(Error::EmptyInput("key inference needs at least one note"))?;
    let bass = notes
        .iter()
        .filter(|n| n.onset == last_onset)
        .map(|n| n.pitch)
        .min()
        .unwrap()
        % 12;
    let h = pitch_class_profile(notes);

    let scored: Vec<(Key, f64)> = all_keys().map(|k| (k, k.profile_score(&h))).collect();
    let best = scored.iter().map(|&(_, s)| s).fold(f64::NEG_INFINITY, f64::max);
    let key = scored
        .iter()
        .filter(|&&(_, s)| s >= best - KEY_TIE_TOLERANCE)
        .map(|&(k, _)| k)
        .min_by_key(|k| (k.tonic != bass, k.tonic, k.mode == Mode::Minor))
        .unwrap();
    Ok(key)
}

pub fn all_keys() -> impl Iterator<Item = Key> {
    (0..12u8).flat_map(|t| [Key::major(t), Key::minor(t)])
}
