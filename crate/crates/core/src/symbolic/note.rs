use serde::{Deserialize, Serialize};

/// Ticks per quarter note used when a motif is rebuilt from tokens.
pub const DEFAULT_TPQ: u32 = 480;

/// Sixteenth-note slots in one 4/4 bar.
pub const SLOTS_PER_BAR: u32 = 16;

pub const DEFAULT_BPM: f64 = 120.0;

/// A pitched event. Times are in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Note {
    pub pitch: u8,
    pub onset: u64,
    pub duration: u64,
    pub velocity: u8,
}

impl Note {
    pub fn new(pitch: u8, onset: u64, duration: u64, velocity: u8) -> Self {
        Self {
            pitch,
            onset,
            duration,
            velocity,
        }
    }

    pub fn end(&self) -> u64 {
        self.onset + self.duration
    }

    pub fn is_valid(&self) -> bool {
        self.pitch <= 127 && self.duration >= 1 && (1..=127).contains(&self.velocity)
    }

    fn sort_key(&self) -> (u64, u8, u64, u8) {
        (self.onset, self.pitch, self.duration, self.velocity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempoEvent {
    pub tick: u64,
    pub bpm: f64,
}

/// Notes of one piece, kept sorted by `(onset, pitch)`. Always 4/4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteSequence {
    notes: Vec<Note>,
    pub ticks_per_quarter: u32,
    pub tempo_events: Vec<TempoEvent>,
}

impl NoteSequence {
    pub fn new(mut notes: Vec<Note>, ticks_per_quarter: u32, mut tempo_events: Vec<TempoEvent>) -> Self {
        assert!(ticks_per_quarter > 0, "ticks_per_quarter must be positive");
        notes.sort_by_key(Note::sort_key);
        tempo_events.sort_by_key(|t| t.tick);
        Self {
            notes,
            ticks_per_quarter,
            tempo_events,
        }
    }

    pub fn notes(&self) -> &[Note] {
        &self.notes
    }

    pub fn into_notes(self) -> Vec<Note> {
        self.notes
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn bar_ticks(&self) -> u64 {
        4 * self.ticks_per_quarter as u64
    }

    /// Tempo in effect at `tick` (120 bpm when no tempo event precedes it).
    pub fn tempo_at(&self, tick: u64) -> f64 {
        self.tempo_events
            .iter()
            .take_while(|t| t.tick <= tick)
            .last()
            .map(|t| t.bpm)
            .unwrap_or(DEFAULT_BPM)
    }
}

/// One bar of music. Note onsets are relative to the start of the bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Motif {
    pub bar_index: usize,
    pub ticks_per_quarter: u32,
    notes: Vec<Note>,
}

impl Motif {
    pub fn new(bar_index: usize, ticks_per_quarter: u32, mut notes: Vec<Note>) -> Self {
        notes.sort_by_key(Note::sort_key);
        Self {
            bar_index,
            ticks_per_quarter,
            notes,
        }
    }

    /// Monophonic motif on the sixteenth grid, one note per entry of
    /// `(pitch, slot, length_in_slots)`.
    pub fn from_slots(bar_index: usize, notes: &[(u8, u32, u32)], velocity: u8) -> Self {
        let slot = (DEFAULT_TPQ / 4) as u64;
        let notes = notes
            .iter()
            .map(|&(p, s, d)| Note::new(p, s as u64 * slot, d as u64 * slot, velocity))
            .collect();
        Self::new(bar_index, DEFAULT_TPQ, notes)
    }

    /// A monophonic motif of consecutive equal-length notes.
    pub fn from_pitches(pitches: &[u8]) -> Self {
        let n = pitches.len().max(1) as u32;
        let len = (SLOTS_PER_BAR / n).max(1);
        let notes: Vec<_> = pitches
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, (i as u32 * len).min(SLOTS_PER_BAR - 1), len))
            .collect();
        Self::from_slots(0, &notes, 80)
    }

    pub fn notes(&self) -> &[Note] {
        &self.notes
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn bar_ticks(&self) -> u64 {
        4 * self.ticks_per_quarter as u64
    }

    pub fn slot_ticks(&self) -> u64 {
        (self.ticks_per_quarter / 4).max(1) as u64
    }

    /// Pitches of every note in `(onset, pitch)` order.
    pub fn pitches(&self) -> Vec<u8> {
        self.notes.iter().map(|n| n.pitch).collect()
    }

    /// Skyline melody. See [`crate::symbolic::extract_melody`].
    pub fn melody(&self) -> Vec<u8> {
        crate::symbolic::segment::skyline(&self.notes)
    }

    /// Copy with every pitch moved by `semitones`; `None` if a pitch leaves 0..=127.
    pub fn transposed(&self, semitones: i32) -> Option<Motif> {
        let notes = self
            .notes
            .iter()
            .map(|n| {
                let p = n.pitch as i32 + semitones;
                (0..=127).contains(&p).then(|| Note { pitch: p as u8, ..*n })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Motif::new(self.bar_index, self.ticks_per_quarter, notes))
    }
}
