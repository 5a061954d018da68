//! The compound-token vocabulary. Token 0 is the pad token in every attribute.

use serde::{Deserialize, Serialize};

/// Attributes per compound token.
pub const NUM_ATTRIBUTES: usize = 7;

/// Rows per token matrix.
pub const MAX_LEN: usize = 120;

pub const PAD: u16 = 0;

pub const TEMPO_BINS: u16 = 64;
pub const TEMPO_MIN_BPM: f64 = 40.0;
pub const TEMPO_STEP_BPM: f64 = 3.0;
pub const CHORD_ROOTS: u16 = 12;
pub const CHORD_QUALITIES: u16 = 9;
pub const POSITION_SLOTS: u16 = 16;
pub const DURATION_STEPS: u16 = 32;
pub const VELOCITY_BINS: u16 = 32;

pub const TYPE_NOTE: u16 = 1;
pub const TYPE_METRIC: u16 = 2;
pub const TYPE_EOS: u16 = 3;

pub const CHORD_NONE: u16 = 1;

/// Column order of a [`crate::symbolic::TokenMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Attribute {
    Tempo,
    Chord,
    Position,
    Type,
    Pitch,
    Duration,
    Velocity,
}

impl Attribute {
    pub const ALL: [Attribute; NUM_ATTRIBUTES] = [
        Attribute::Tempo,
        Attribute::Chord,
        Attribute::Position,
        Attribute::Type,
        Attribute::Pitch,
        Attribute::Duration,
        Attribute::Velocity,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Tempo => "tempo",
            Attribute::Chord => "chord",
            Attribute::Position => "position",
            Attribute::Type => "type",
            Attribute::Pitch => "pitch",
            Attribute::Duration => "duration",
            Attribute::Velocity => "velocity",
        }
    }

    /// Number of tokens including pad.
    pub fn vocab_size(self) -> usize {
        let real = match self {
            Attribute::Tempo => TEMPO_BINS,
            Attribute::Chord => CHORD_ROOTS * CHORD_QUALITIES + 1,
            Attribute::Position => POSITION_SLOTS,
            Attribute::Type => 3,
            Attribute::Pitch => 128,
            Attribute::Duration => DURATION_STEPS,
            Attribute::Velocity => VELOCITY_BINS,
        };
        real as usize + 1
    }

    pub fn max_token(self) -> u16 {
        (self.vocab_size() - 1) as u16
    }
}

/// Token/value conversions for every attribute.
pub struct Vocabulary;

impl Vocabulary {
    pub fn sizes() -> [usize; NUM_ATTRIBUTES] {
        Attribute::ALL.map(Attribute::vocab_size)
    }

    pub fn tempo_token(bpm: f64) -> u16 {
        let bin = ((bpm - TEMPO_MIN_BPM) / TEMPO_STEP_BPM).round();
        bin.clamp(0.0, (TEMPO_BINS - 1) as f64) as u16 + 1
    }

    pub fn tempo_bpm(token: u16) -> Option<f64> {
        (1..=TEMPO_BINS)
            .contains(&token)
            .then(|| TEMPO_MIN_BPM + TEMPO_STEP_BPM * (token - 1) as f64)
    }

    pub fn position_token(slot: u32) -> Option<u16> {
        (slot < POSITION_SLOTS as u32).then(|| slot as u16 + 1)
    }

    pub fn pitch_token(pitch: u8) -> Option<u16> {
        (pitch <= 127).then(|| pitch as u16 + 1)
    }

    pub fn duration_token(slots: u64) -> u16 {
        slots.clamp(1, DURATION_STEPS as u64) as u16
    }

    pub fn velocity_bin(velocity: u8) -> u16 {
        (velocity as u16 / 4).min(VELOCITY_BINS - 1)
    }

    pub fn velocity_token(velocity: u8) -> u16 {
        Self::velocity_bin(velocity) + 1
    }

    /// Representative velocity of a token (the bin midpoint).
    pub fn velocity_value(token: u16) -> Option<u8> {
        (1..=VELOCITY_BINS).contains(&token).then(|| ((token - 1) * 4 + 2) as u8)
    }

    /// Velocity after a round trip through its bin.
    pub fn snap_velocity(velocity: u8) -> u8 {
        Self::velocity_value(Self::velocity_token(velocity)).expect("bin in range")
    }
}
