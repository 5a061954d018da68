//! Per-slot chord labels by template matching over sounding pitch classes.

use serde::{Deserialize, Serialize};

use super::note::{Motif, SLOTS_PER_BAR};
use super::vocab::{CHORD_NONE, CHORD_QUALITIES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChordQuality {
    Major,
    Minor,
    Diminished,
    Augmented,
    Sus4,
    Dominant7,
    Major7,
    Minor7,
    HalfDiminished7,
}

impl ChordQuality {
    pub const ALL: [ChordQuality; CHORD_QUALITIES as usize] = [
        ChordQuality::Major,
        ChordQuality::Minor,
        ChordQuality::Diminished,
        ChordQuality::Augmented,
        ChordQuality::Sus4,
        ChordQuality::Dominant7,
        ChordQuality::Major7,
        ChordQuality::Minor7,
        ChordQuality::HalfDiminished7,
    ];

    pub fn intervals(self) -> &'static [u8] {
        match self {
            ChordQuality::Major => &[0, 4, 7],
            ChordQuality::Minor => &[0, 3, 7],
            ChordQuality::Diminished => &[0, 3, 6],
            ChordQuality::Augmented => &[0, 4, 8],
            ChordQuality::Sus4 => &[0, 5, 7],
            ChordQuality::Dominant7 => &[0, 4, 7, 10],
            ChordQuality::Major7 => &[0, 4, 7, 11],
            ChordQuality::Minor7 => &[0, 3, 7, 10],
            ChordQuality::HalfDiminished7 => &[0, 3, 6, 10],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chord {
    None,
    Triad { root: u8, quality: ChordQuality },
}

impl Chord {
    pub fn token(self) -> u16 {
        match self {
            Chord::None => CHORD_NONE,
            Chord::Triad { root, quality } => {
                let q = ChordQuality::ALL.iter().position(|&c| c == quality).unwrap() as u16;
                2 + root as u16 * CHORD_QUALITIES + q
            }
        }
    }

    pub fn from_token(token: u16) -> Option<Chord> {
        match token {
            CHORD_NONE => Some(Chord::None),
            t if (2..2 + 12 * CHORD_QUALITIES).contains(&t) => Some(Chord::Triad {
                root: ((t - 2) / CHORD_QUALITIES) as u8,
                quality: ChordQuality::ALL[((t - 2) % CHORD_QUALITIES) as usize],
            }),
            _ => None,
        }
    }
}

/// Best-matching chord for a pitch-class set; `bass` is the lowest sounding
/// pitch class. Requires at least two chord tones present.
pub fn match_chord(pitch_classes: [bool; 12], bass: Option<u8>) -> Chord {
    let present = pitch_classes.iter().filter(|&&b| b).count() as i32;
    if present < 2 {
        return Chord::None;
    }
    let mut best: Option<((i32, bool), Chord)> = None;
    for root in 0..12u8 {
        for quality in ChordQuality::ALL {
            let tones = quality.intervals();
            let hits = tones
                .iter()
                .filter(|&&i| pitch_classes[((root + i) % 12) as usize])
                .count() as i32;
            if hits < 2 || !pitch_classes[root as usize] {
                continue;
            }
            let missing = tones.len() as i32 - hits;
            let extra = present - hits;
            // Doubled to keep integer arithmetic: hits - (missing + extra) / 2.
            let score = 2 * hits - missing - extra;
            let key = (score, bass == Some(root));
            if best.map_or(true, |(b, _)| key > b) {
                best = Some((key, Chord::Triad { root, quality }));
            }
        }
    }
    best.map_or(Chord::None, |(_, c)| c)
}

/// Chord label for each of the 16 slots of a motif.
pub fn chords_for(m: &Motif) -> Vec<Chord> {
    let slot = m.slot_ticks();
    (0..SLOTS_PER_BAR as u64)
        .map(|s| {
            let t = s * slot;
            let mut pcs = [false; 12];
            let mut bass: Option<u8> = None;
            for n in m.notes().iter().filter(|n| n.onset <= t && t < n.end()) {
                pcs[(n.pitch % 12) as usize] = true;
                bass = Some(bass.map_or(n.pitch, |b| b.min(n.pitch)));
            }
            match_chord(pcs, bass.map(|b| b % 12))
        })
        .collect()
}
