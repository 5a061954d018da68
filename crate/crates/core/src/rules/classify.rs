use serde::{Deserialize, Serialize};

use super::development::development;
use super::key::Key;
use super::label::{RepetitionLabel, SymmetryKind, Transposition, TranspositionKind};
use super::lcs::similar;
use crate::error::{Error, Result};
use crate::symbolic::Motif;

pub const DEFAULT_SIMILARITY: f64 = 0.75;

/// Pairwise repetition rules with a configurable similarity threshold
/// (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub threshold: f64,
}

impl Default for Classifier {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_SIMILARITY,
        }
    }
}

impl Classifier {
    pub fn new(threshold: f64) -> Self {
        Self { threshold }
    }

    /// Classify a pair. Strict repetition compares every pitch; all other
    /// rules compare skyline melodies.
    pub fn classify(&self, a: &Motif, b: &Motif, key: &Key) -> Result<RepetitionLabel> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptyMotif);
        }
        Ok(self.classify_sequences(&a.pitches(), &b.pitches(), &a.melody(), &b.melody(), key))
    }

    /// The rule cascade over precomputed pitch lists and melodies.
    pub fn classify_sequences(
        &self,
        pitches_a: &[u8],
        pitches_b: &[u8],
        melody_a: &[u8],
        melody_b: &[u8],
        key: &Key,
    ) -> RepetitionLabel {
        if pitches_a == pitches_b {
            return RepetitionLabel::Strict;
        }
        if let Some(t) = transposition_of(melody_a, melody_b, key) {
            return RepetitionLabel::Transpositional(t);
        }
        if similar(melody_a, melody_b, self.threshold) {
            return RepetitionLabel::Subsequential;
        }
        let homodirectional = self.homodirectional_melodies(melody_a, melody_b);
        match (homodirectional, self.symmetry_melodies(melody_a, melody_b)) {
            (true, Some(kind)) => RepetitionLabel::Ambiguous(kind),
            (true, None) => RepetitionLabel::Homodirectional,
            (false, Some(kind)) => RepetitionLabel::Symmetric(kind),
            (false, None) => RepetitionLabel::None,
        }
    }

    pub fn is_subsequential(&self, a: &Motif, b: &Motif) -> bool {
        similar(&a.melody(), &b.melody(), self.threshold)
    }

    pub fn is_homodirectional(&self, a: &Motif, b: &Motif) -> bool {
        self.homodirectional_melodies(&a.melody(), &b.melody())
    }

    pub fn symmetry(&self, a: &Motif, b: &Motif) -> Option<SymmetryKind> {
        self.symmetry_melodies(&a.melody(), &b.melody())
    }

    fn homodirectional_melodies(&self, a: &[u8], b: &[u8]) -> bool {
        similar(development(a).directions(), development(b).directions(), self.threshold)
    }

    /// First of horizontal, vertical, rotational whose transformed development
    /// of `a` is similar to the development of `b`.
    fn symmetry_melodies(&self, a: &[u8], b: &[u8]) -> Option<SymmetryKind> {
        let da = development(a);
        let db = development(b);
        let candidates = [
            (SymmetryKind::Horizontal, da.negated()),
            (SymmetryKind::Vertical, da.reversed()),
            (SymmetryKind::Rotational, da.reversed().negated()),
        ];
        candidates
            .into_iter()
            .find(|(_, t)| similar(t.directions(), db.directions(), self.threshold))
            .map(|(kind, _)| kind)
    }
}

pub fn is_strict(a: &Motif, b: &Motif) -> bool {
    a.pitches() == b.pitches()
}

/// Constant non-zero shift between the melodies, chromatic (semitones) first,
/// then diatonic (scale degrees, both melodies fully in `key`).
pub fn transposition(a: &Motif, b: &Motif, key: &Key) -> Option<Transposition> {
    transposition_of(&a.melody(), &b.melody(), key)
}

pub(crate) fn transposition_of(a: &[u8], b: &[u8], key: &Key) -> Option<Transposition> {
    if a.len() != b.len() || a.is_empty() {
        return None;
    }
    let constant_shift = |x: &[i32], y: &[i32]| -> Option<i32> {
        let t = y[0] - x[0];
        (t != 0 && x.iter().zip(y).all(|(p, q)| q - p == t)).then_some(t)
    };
    let sa: Vec<i32> = a.iter().map(|&p| p as i32).collect();
    let sb: Vec<i32> = b.iter().map(|&p| p as i32).collect();
    if let Some(offset) = constant_shift(&sa, &sb) {
        return Some(Transposition {
            kind: TranspositionKind::Chromatic,
            offset,
        });
    }
    let da: Vec<i32> = a.iter().map(|&p| key.degree(p)).collect::<Option<_>>()?;
    let db: Vec<i32> = b.iter().map(|&p| key.degree(p)).collect::<Option<_>>()?;
    constant_shift(&da, &db).map(|offset| Transposition {
        kind: TranspositionKind::Diatonic,
        offset,
    })
}

pub fn is_subsequential(a: &Motif, b: &Motif) -> bool {
    Classifier::default().is_subsequential(a, b)
}

pub fn is_homodirectional(a: &Motif, b: &Motif) -> bool {
    Classifier::default().is_homodirectional(a, b)
}

pub fn symmetry(a: &Motif, b: &Motif) -> Option<SymmetryKind> {
    Classifier::default().symmetry(a, b)
}

/// [`Classifier::classify`] at the default 0.75 threshold.
pub fn classify(a: &Motif, b: &Motif, key: &Key) -> Result<RepetitionLabel> {
    Classifier::default().classify(a, b, key)
}
