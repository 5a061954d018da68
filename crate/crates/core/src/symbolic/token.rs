use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::chord::Chord;
use super::note::{Motif, Note, DEFAULT_TPQ, SLOTS_PER_BAR};
use super::vocab::{Attribute, Vocabulary, MAX_LEN, NUM_ATTRIBUTES, PAD, TYPE_EOS, TYPE_METRIC, TYPE_NOTE};
use crate::error::{Error, Result};

pub type TokenRow = [u16; NUM_ATTRIBUTES];

/// A motif as `MAX_LEN` compound tokens, columns in [`Attribute::ALL`] order.
///
/// Serializes as `{"valid_len": n, "rows": [[...7 ints], ...]}` with all
/// `MAX_LEN` rows; deserialization accepts fewer rows and pads them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawTokens", into = "RawTokens")]
pub struct TokenMatrix {
    rows: Vec<TokenRow>,
    valid_len: usize,
}

impl TokenMatrix {
    pub fn empty() -> Self {
        Self {
            rows: vec![[PAD; NUM_ATTRIBUTES]; MAX_LEN],
            valid_len: 0,
        }
    }

    /// Build from the non-pad rows; the remainder is padded.
    pub fn from_valid_rows(valid: &[TokenRow]) -> Result<Self> {
        if valid.len() > MAX_LEN {
            return Err(Error::InvalidTokens(format!("{} rows exceed the maximum of {MAX_LEN}", valid.len())));
        }
        let mut rows = vec![[PAD; NUM_ATTRIBUTES]; MAX_LEN];
        rows[..valid.len()].copy_from_slice(valid);
        let m = Self {
            rows,
            valid_len: valid.len(),
        };
        m.check_pad_discipline()?;
        Ok(m)
    }

    /// Build from raw integer rows (the JSON wire form). Rows beyond
    /// `valid_len` must be all pad; missing rows are padded.
    pub fn from_raw(rows: &[Vec<i64>], valid_len: usize) -> Result<Self> {
        if rows.len() > MAX_LEN || valid_len > MAX_LEN {
            return Err(Error::InvalidTokens(format!("more than {MAX_LEN} rows")));
        }
        if valid_len > rows.len() {
            return Err(Error::InvalidTokens(format!("valid_len {valid_len} exceeds {} rows", rows.len())));
        }
        let mut out = vec![[PAD; NUM_ATTRIBUTES]; MAX_LEN];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != NUM_ATTRIBUTES {
                return Err(Error::InvalidTokens(format!("row {r} has {} attributes, expected {NUM_ATTRIBUTES}", row.len())));
            }
            for (k, &v) in row.iter().enumerate() {
                let attribute = Attribute::ALL[k];
                if v < 0 || v > attribute.max_token() as i64 {
                    return Err(Error::OutOfVocabulary {
                        row: r,
                        attribute: attribute.name(),
                        value: v,
                    });
                }
                out[r][k] = v as u16;
            }
        }
        let m = Self { rows: out, valid_len };
        m.check_pad_discipline()?;
        Ok(m)
    }

    pub fn valid_len(&self) -> usize {
        self.valid_len
    }

    pub fn rows(&self) -> &[TokenRow] {
        &self.rows
    }

    pub fn valid_rows(&self) -> &[TokenRow] {
        &self.rows[..self.valid_len]
    }

    pub fn get(&self, row: usize, attribute: Attribute) -> u16 {
        self.rows[row][attribute.index()]
    }

    pub fn column(&self, attribute: Attribute) -> Vec<u16> {
        self.rows.iter().map(|r| r[attribute.index()]).collect()
    }

    /// Tempo of the first row carrying one.
    pub fn tempo_bpm(&self) -> Option<f64> {
        self.valid_rows()
            .iter()
            .find_map(|r| Vocabulary::tempo_bpm(r[Attribute::Tempo.index()]))
    }

    /// Every entry within its attribute range.
    pub fn validate(&self) -> Result<()> {
        for (r, row) in self.rows.iter().enumerate() {
            for attribute in Attribute::ALL {
                let v = row[attribute.index()];
                if v > attribute.max_token() {
                    return Err(Error::OutOfVocabulary {
                        row: r,
                        attribute: attribute.name(),
                        value: v as i64,
                    });
                }
            }
        }
        self.check_pad_discipline()
    }

    fn check_pad_discipline(&self) -> Result<()> {
        for (r, row) in self.rows.iter().enumerate() {
            let is_pad_type = row[Attribute::Type.index()] == PAD;
            if r < self.valid_len && is_pad_type {
                return Err(Error::InvalidTokens(format!("row {r} is inside valid_len but has pad type")));
            }
            if r >= self.valid_len && row.iter().any(|&t| t != PAD) {
                return Err(Error::InvalidTokens(format!("row {r} is past valid_len but not all pad")));
            }
        }
        Ok(())
    }

    pub fn to_record(&self, song_id: impl Into<String>, bar_index: usize) -> MotifRecord {
        MotifRecord {
            song_id: song_id.into(),
            bar_index,
            valid_len: self.valid_len,
            rows: self.rows.iter().map(|r| r.iter().map(|&v| v as i64).collect()).collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawTokens {
    valid_len: usize,
    rows: Vec<Vec<i64>>,
}

impl TryFrom<RawTokens> for TokenMatrix {
    type Error = Error;

    fn try_from(raw: RawTokens) -> Result<Self> {
        TokenMatrix::from_raw(&raw.rows, raw.valid_len)
    }
}

impl From<TokenMatrix> for RawTokens {
    fn from(t: TokenMatrix) -> Self {
        RawTokens {
            valid_len: t.valid_len,
            rows: t.rows.iter().map(|r| r.iter().map(|&v| v as i64).collect()).collect(),
        }
    }
}

/// JSON form of one motif, one per line in motif dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifRecord {
    pub song_id: String,
    pub bar_index: usize,
    pub valid_len: usize,
    pub rows: Vec<Vec<i64>>,
}

impl MotifRecord {
    pub fn tokens(&self) -> Result<TokenMatrix> {
        TokenMatrix::from_raw(&self.rows, self.valid_len)
    }
}

/// Result of [`tokenize_with_report`].
#[derive(Debug, Clone)]
pub struct Tokenized {
    pub tokens: TokenMatrix,
    /// Rows dropped because the encoding exceeded `MAX_LEN`.
    pub truncated_rows: usize,
}

/// Encode a motif as compound tokens.
///
/// For every onset slot, in order, one metric row (tempo, chord, position)
/// is followed by one note row per note starting there, sorted by pitch.
/// `chords` gives the label per slot; missing entries count as no chord.
pub fn tokenize(m: &Motif, tempo_bpm: f64, chords: &[Chord]) -> TokenMatrix {
    let out = tokenize_with_report(m, tempo_bpm, chords);
    if out.truncated_rows > 0 {
        log::warn!(
            "motif at bar {} truncated: {} rows beyond {MAX_LEN} dropped",
            m.bar_index,
            out.truncated_rows
        );
    }
    out.tokens
}

pub fn tokenize_with_report(m: &Motif, tempo_bpm: f64, chords: &[Chord]) -> Tokenized {
    let slot_ticks = m.slot_ticks();
    let tempo = Vocabulary::tempo_token(tempo_bpm);
    let mut by_slot: BTreeMap<u32, Vec<&Note>> = BTreeMap::new();
    for n in m.notes() {
        let slot = ((n.onset + slot_ticks / 2) / slot_ticks).min(SLOTS_PER_BAR as u64 - 1) as u32;
        by_slot.entry(slot).or_default().push(n);
    }

    let mut rows: Vec<TokenRow> = Vec::new();
    for (slot, mut notes) in by_slot {
        notes.sort_by_key(|n| (n.pitch, n.duration, n.velocity));
        let chord = chords.get(slot as usize).copied().unwrap_or(Chord::None).token();
        let position = Vocabulary::position_token(slot).expect("slot clamped to bar");
        rows.push([tempo, chord, position, TYPE_METRIC, PAD, PAD, PAD]);
        for n in notes {
            let slots = (n.duration + slot_ticks / 2) / slot_ticks;
            rows.push([
                tempo,
                chord,
                position,
                TYPE_NOTE,
                Vocabulary::pitch_token(n.pitch).unwrap_or(128),
                Vocabulary::duration_token(slots),
                Vocabulary::velocity_token(n.velocity),
            ]);
        }
    }
    let truncated_rows = rows.len().saturating_sub(MAX_LEN);
    rows.truncate(MAX_LEN);
    Tokenized {
        tokens: TokenMatrix::from_valid_rows(&rows).expect("generated rows respect pad discipline"),
        truncated_rows,
    }
}

/// Rebuild a motif (bar 0, [`DEFAULT_TPQ`]) from tokens; metric, EOS and pad rows
/// carry no notes.
pub fn detokenize(t: &TokenMatrix) -> Result<Motif> {
    detokenize_at(t, 0, DEFAULT_TPQ)
}

pub fn detokenize_at(t: &TokenMatrix, bar_index: usize, ticks_per_quarter: u32) -> Result<Motif> {
    t.validate()?;
    let slot = (ticks_per_quarter / 4).max(1) as u64;
    let mut notes = Vec::new();
    for (r, row) in t.valid_rows().iter().enumerate() {
        let kind = row[Attribute::Type.index()];
        if kind == TYPE_METRIC || kind == TYPE_EOS {
            continue;
        }
        let need = |attribute: Attribute| -> Result<u16> {
            let v = row[attribute.index()];
            if v == PAD {
                Err(Error::OutOfVocabulary {
                    row: r,
                    attribute: attribute.name(),
                    value: 0,
                })
            } else {
                Ok(v)
            }
        };
        let position = need(Attribute::Position)?;
        let pitch = need(Attribute::Pitch)?;
        let duration = need(Attribute::Duration)?;
        let velocity = need(Attribute::Velocity)?;
        notes.push(Note::new(
            (pitch - 1) as u8,
            (position - 1) as u64 * slot,
            duration as u64 * slot,
            Vocabulary::velocity_value(velocity).expect("validated"),
        ));
    }
    Ok(Motif::new(bar_index, ticks_per_quarter, notes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::chords_for;

    #[test]
    fn empty_motif_is_all_pad() {
        let t = tokenize(&Motif::new(0, 480, vec![]), 120.0, &[]);
        assert_eq!(t.valid_len(), 0);
        assert!(t.rows().iter().all(|r| r.iter().all(|&v| v == PAD)));
        assert_eq!(t.rows().len(), MAX_LEN);
    }

    #[test]
    fn one_note_is_metric_plus_note_row() {
        let m = Motif::new(0, 480, vec![Note::new(60, 0, 480, 82)]);
        let t = tokenize(&m, 120.0, &chords_for(&m));
        assert_eq!(t.valid_len(), 2);
        let tempo = Vocabulary::tempo_token(120.0);
        assert_eq!(tempo, 28); // 40 + 3 * 27 = 121 is the nearest bin to 120
        assert_eq!(t.rows()[0], [tempo, 1, 1, TYPE_METRIC, 0, 0, 0]);
        assert_eq!(t.rows()[1], [tempo, 1, 1, TYPE_NOTE, 61, 4, 21]);
        assert_eq!(detokenize(&t).unwrap(), m);
    }

    #[test]
    fn truncation_is_reported() {
        // 16 slots x 8 notes = 16 metric + 128 note rows
        let notes = (0..16u64)
            .flat_map(|s| (0..8u8).map(move |p| Note::new(60 + p, s * 120, 120, 82)))
            .collect();
        let out = tokenize_with_report(&Motif::new(0, 480, notes), 120.0, &[]);
        assert_eq!(out.truncated_rows, 144 - MAX_LEN);
        assert_eq!(out.tokens.valid_len(), MAX_LEN);
    }

    #[test]
    fn out_of_range_pitch_is_rejected() {
        let mut row = vec![28, 1, 1, 1, 61, 4, 21];
        row[Attribute::Pitch.index()] = 200;
        match TokenMatrix::from_raw(&[row], 1) {
            Err(Error::OutOfVocabulary { row, attribute, value }) => {
                assert_eq!((row, attribute, value), (0, "pitch", 200));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pad_rows_inside_valid_len_are_rejected() {
        assert!(TokenMatrix::from_raw(&[vec![0; 7]], 1).is_err());
        assert!(TokenMatrix::from_raw(&[vec![28, 1, 1, 2, 0, 0, 0], vec![1, 0, 0, 0, 0, 0, 0]], 1).is_err());
    }

    #[test]
    fn record_round_trip() {
        let m = Motif::from_pitches(&[67, 67, 67, 63]);
        let t = tokenize(&m, 108.0, &chords_for(&m));
        let json = serde_json::to_string(&t.to_record("song", 3)).unwrap();
        let back: MotifRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.rows.len(), MAX_LEN);
        assert_eq!(back.tokens().unwrap(), t);
    }

    #[test]
    fn matrix_json_round_trip() {
        let m = Motif::from_pitches(&[60, 64, 67]);
        let t = tokenize(&m, 120.0, &chords_for(&m));
        let json = serde_json::to_value(&t).unwrap();
        assert_eq!(json["rows"].as_array().unwrap().len(), MAX_LEN);
        let back: TokenMatrix = serde_json::from_value(json).unwrap();
        assert_eq!(back, t);
        let bad = serde_json::json!({"valid_len": 1, "rows": [[28, 1, 1, 1, 300, 4, 21]]});
        assert!(serde_json::from_value::<TokenMatrix>(bad).is_err());
    }
}
