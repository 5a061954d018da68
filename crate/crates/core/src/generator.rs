//! Label-conditioned motif generation: rule branches for strict and
//! transpositional repetition, the model decoder for everything else, and
//! sequential assembly into multi-bar pieces.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelState;
use crate::rules::{infer_key_from_notes, Classifier, Key, RepetitionLabel, RepetitionType, Verdict};
use crate::symbolic::vocab::{PAD, TYPE_EOS, TYPE_NOTE};
use crate::symbolic::{detokenize_at, write_midi, Attribute, Note, NoteSequence, TempoEvent, TokenMatrix, TokenRow, DEFAULT_TPQ, NUM_ATTRIBUTES};

/// Transposition used when a TrR step gives none and no model can suggest one.
pub const DEFAULT_TRANSPOSITION: i32 = -2;
pub const MAX_TRANSPOSITION: i32 = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub motif: TokenMatrix,
    pub labels: Vec<RepetitionType>,
    /// Per-label transposition in semitones, parallel to `labels`; only TrR
    /// entries may be set. May be empty.
    #[serde(default)]
    pub t: Vec<Option<i32>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_chaining")]
    pub chaining: bool,
}

fn default_chaining() -> bool {
    true
}

impl GenerationRequest {
    pub fn new(motif: TokenMatrix, labels: Vec<RepetitionType>) -> Self {
        Self {
            motif,
            labels,
            t: Vec::new(),
            seed: 0,
            chaining: true,
        }
    }

    pub fn t_for(&self, step: usize) -> Option<i32> {
        self.t.get(step).copied().flatten()
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.is_empty() {
            return Err(Error::Generation("at least one label is required".into()));
        }
        if self.motif.valid_len() == 0 {
            return Err(Error::EmptyMotif);
        }
        self.motif.validate()?;
        if !self.t.is_empty() && self.t.len() != self.labels.len() {
            return Err(Error::Generation(format!("{} transpositions for {} labels", self.t.len(), self.labels.len())));
        }
        for (i, t) in self.t.iter().enumerate() {
            let Some(t) = *t else { continue };
            if self.labels[i] != RepetitionType::TrR {
                return Err(Error::Generation(format!("step {i}: a transposition is only valid for TrR")));
            }
            if t == 0 || t.abs() > MAX_TRANSPOSITION {
                return Err(Error::Generation(format!("step {i}: transposition {t} must be non-zero and within ±{MAX_TRANSPOSITION}")));
            }
        }
        Ok(())
    }
}

/// How outputs are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationOptions {
    /// Apply the StR/TrR pitch rules. Off, every label is decoded by the model.
    pub rules: bool,
    /// Without a model, copy every non-pitch attribute from the input instead
    /// of failing.
    pub copy_without_model: bool,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        Self {
            rules: true,
            copy_without_model: true,
        }
    }
}

/// One generated motif.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub tokens: TokenMatrix,
    /// Transposition applied by the TrR rule.
    pub t: Option<i32>,
    /// Note rows whose shifted pitch left 0..=127 and was clamped.
    pub clamped: usize,
}

fn round_clamp(v: f64, lo: u16, hi: u16) -> u16 {
    if v.is_nan() {
        return lo;
    }
    v.round().clamp(lo as f64, hi as f64) as u16
}

/// Discretize decoder output onto the input's valid rows: round to the
/// nearest integer, then clamp per attribute. Note rows get non-pad pitch,
/// duration and velocity; other rows get pad there.
pub fn discretize(raw: &Array2<f64>, valid_len: usize) -> Result<TokenMatrix> {
    let mut rows: Vec<TokenRow> = Vec::with_capacity(valid_len);
    for l in 0..valid_len {
        let mut row = [PAD; NUM_ATTRIBUTES];
        let kind = round_clamp(raw[[l, Attribute::Type.index()]], TYPE_NOTE, TYPE_EOS);
        for a in Attribute::ALL {
            let k = a.index();
            row[k] = match a {
                Attribute::Type => kind,
                Attribute::Pitch | Attribute::Duration | Attribute::Velocity if kind != TYPE_NOTE => PAD,
                _ => round_clamp(raw[[l, k]], 1, a.max_token()),
            };
        }
        rows.push(row);
    }
    TokenMatrix::from_valid_rows(&rows)
}

fn model_rows(model: Option<&ModelState>, motif: &TokenMatrix, label: RepetitionType, copy: bool) -> Result<TokenMatrix> {
    match model {
        Some(m) => discretize(&m.reconstruct(motif, label)?, motif.valid_len()),
        None if copy => Ok(motif.clone()),
        None => Err(Error::Generation(format!("{label} needs a model"))),
    }
}

/// Transposition suggested by the decoder: the rounded mean pitch change over
/// note rows, pushed away from zero by a seeded coin when it rounds to 0.
fn suggested_t(motif: &TokenMatrix, decoded: &TokenMatrix, seed: u64) -> i32 {
    let p = Attribute::Pitch.index();
    let ty = Attribute::Type.index();
    let diffs: Vec<f64> = motif
        .valid_rows()
        .iter()
        .zip(decoded.valid_rows())
        .filter(|(a, b)| a[ty] == TYPE_NOTE && b[ty] == TYPE_NOTE)
        .map(|(a, b)| b[p] as f64 - a[p] as f64)
        .collect();
    let mean = if diffs.is_empty() { 0.0 } else { diffs.iter().sum::<f64>() / diffs.len() as f64 };
    let t = (mean.round() as i32).clamp(-MAX_TRANSPOSITION, MAX_TRANSPOSITION);
    if t != 0 {
        t
    } else if ChaCha8Rng::seed_from_u64(seed).random_bool(0.5) {
        1
    } else {
        -1
    }
}

/// Generate the motif that should stand in relation `label` to `motif`.
///
/// Under the rule branches, StR and TrR keep the input's row skeleton (type
/// and position columns) and set the pitch column by rule; the remaining
/// attributes come from the decoder, or from the input when no model is
/// given. Other labels are decoded entirely by the model.
pub fn generate_one(
    motif: &TokenMatrix,
    label: RepetitionType,
    model: Option<&ModelState>,
    t: Option<i32>,
    seed: u64,
    options: GenerationOptions,
) -> Result<Generated> {
    if motif.valid_len() == 0 {
        return Err(Error::EmptyMotif);
    }
    motif.validate()?;
    if !(options.rules && label.is_rule_based()) {
        let tokens = model_rows(model, motif, label, false)?;
        return Ok(Generated { tokens, t: None, clamped: 0 });
    }

    let decoded = model_rows(model, motif, label, options.copy_without_model)?;
    let (shift, clamped_t) = match label {
        RepetitionType::StR => (0, None),
        _ => {
            let t = match t {
                Some(t) => t,
                None if model.is_some() => suggested_t(motif, &decoded, seed),
                None => DEFAULT_TRANSPOSITION,
            };
            if t == 0 || t.abs() > MAX_TRANSPOSITION {
                return Err(Error::Generation(format!("transposition {t} must be non-zero and within ±{MAX_TRANSPOSITION}")));
            }
            (t, Some(t))
        }
    };

    let mut clamped = 0;
    let mut rows: Vec<TokenRow> = decoded.valid_rows().to_vec();
    for (row, src) in rows.iter_mut().zip(motif.valid_rows()) {
        let ty = Attribute::Type.index();
        row[ty] = src[ty];
        row[Attribute::Position.index()] = src[Attribute::Position.index()];
        let p = Attribute::Pitch.index();
        if src[ty] == TYPE_NOTE {
            let shifted = src[p] as i32 + shift;
            let bounded = shifted.clamp(1, Attribute::Pitch.max_token() as i32);
            if bounded != shifted {
                clamped += 1;
            }
            row[p] = bounded as u16;
            for a in [Attribute::Duration, Attribute::Velocity] {
                if row[a.index()] == PAD {
                    row[a.index()] = src[a.index()];
                }
            }
        } else {
            row[p] = PAD;
            row[Attribute::Duration.index()] = PAD;
            row[Attribute::Velocity.index()] = PAD;
        }
    }
    if clamped > 0 {
        log::warn!("transposition by {shift} clamped {clamped} pitches to the MIDI range");
    }
    Ok(Generated {
        tokens: TokenMatrix::from_valid_rows(&rows)?,
        t: clamped_t,
        clamped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceMotif {
    pub tokens: TokenMatrix,
    /// Requested relation to the motif it was generated from; `None` for the
    /// opening motif.
    pub requested: Option<RepetitionType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<i32>,
    /// Classification against its source motif.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default)]
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub motifs: Vec<PieceMotif>,
    pub provenance: GenerationRequest,
}

/// Key inferred from the notes of one motif.
pub fn motif_key(tokens: &TokenMatrix) -> Result<Key> {
    let m = detokenize_at(tokens, 0, DEFAULT_TPQ)?;
    infer_key_from_notes(m.notes())
}

/// Apply every label in order; each step's verdict is computed in the key of
/// the request motif.
pub fn generate_piece(req: &GenerationRequest, model: Option<&ModelState>, options: GenerationOptions) -> Result<Piece> {
    req.validate()?;
    let key = motif_key(&req.motif)?;
    let classifier = Classifier::default();
    let mut motifs = vec![PieceMotif {
        tokens: req.motif.clone(),
        requested: None,
        t: None,
        verdict: None,
        clamped: 0,
    }];
    for (step, &label) in req.labels.iter().enumerate() {
        let source = if req.chaining { &motifs[step].tokens } else { &req.motif };
        let g = generate_one(source, label, model, req.t_for(step), req.seed.wrapping_add(step as u64), options)?;
        let verdict = verdict(source, &g.tokens, &key, &classifier)?;
        motifs.push(PieceMotif {
            tokens: g.tokens,
            requested: Some(label),
            t: g.t,
            verdict,
            clamped: g.clamped,
        });
    }
    Ok(Piece {
        motifs,
        provenance: req.clone(),
    })
}

fn verdict(a: &TokenMatrix, b: &TokenMatrix, key: &Key, classifier: &Classifier) -> Result<Option<Verdict>> {
    let ma = detokenize_at(a, 0, DEFAULT_TPQ)?;
    let mb = detokenize_at(b, 0, DEFAULT_TPQ)?;
    if ma.is_empty() || mb.is_empty() {
        return Ok(None);
    }
    Ok(Some(classifier.classify(&ma, &mb, key)?.into()))
}

/// Classify two token matrices in the key of the first.
pub fn classify_tokens(a: &TokenMatrix, b: &TokenMatrix, classifier: &Classifier) -> Result<RepetitionLabel> {
    let ma = detokenize_at(a, 0, DEFAULT_TPQ)?;
    let mb = detokenize_at(b, 0, DEFAULT_TPQ)?;
    if ma.is_empty() || mb.is_empty() {
        return Err(Error::EmptyMotif);
    }
    let mut both = ma.notes().to_vec();
    let bar = ma.bar_ticks();
    both.extend(mb.notes().iter().map(|n| Note { onset: n.onset + bar, ..*n }));
    let key = infer_key_from_notes(&both)?;
    classifier.classify(&ma, &mb, &key)
}

impl Piece {
    /// Tempo of the opening motif.
    pub fn tempo_bpm(&self) -> f64 {
        self.motifs
            .first()
            .and_then(|m| m.tokens.tempo_bpm())
            .unwrap_or(crate::symbolic::note::DEFAULT_BPM)
    }

    /// All notes, motif `i` in bar `i`, at [`DEFAULT_TPQ`]. Durations end at
    /// the bar line and at the next onset of the same pitch.
    pub fn notes(&self) -> Result<Vec<Note>> {
        let bar = 4 * DEFAULT_TPQ as u64;
        let mut notes = Vec::new();
        for (i, m) in self.motifs.iter().enumerate() {
            let motif = detokenize_at(&m.tokens, i, DEFAULT_TPQ)?;
            let start = i as u64 * bar;
            let mut local: Vec<Note> = motif.notes().to_vec();
            local.dedup_by(|b, a| a.onset == b.onset && a.pitch == b.pitch);
            for (j, n) in local.iter().enumerate() {
                let mut end = (n.onset + n.duration).min(bar);
                if let Some(next) = local[j + 1..].iter().find(|o| o.pitch == n.pitch && o.onset > n.onset) {
                    end = end.min(next.onset);
                }
                notes.push(Note::new(n.pitch, start + n.onset, end - n.onset, n.velocity));
            }
        }
        notes.sort_by_key(|n| (n.onset, n.pitch));
        Ok(notes)
    }

    pub fn to_sequence(&self) -> Result<NoteSequence> {
        Ok(NoteSequence::new(
            self.notes()?,
            DEFAULT_TPQ,
            vec![TempoEvent {
                tick: 0,
                bpm: self.tempo_bpm(),
            }],
        ))
    }
}

/// Standard MIDI file (format 0) of a piece, one bar per motif.
pub fn render_midi(piece: &Piece) -> Result<Vec<u8>> {
    if piece.motifs.is_empty() {
        return Err(Error::Generation("cannot render an empty piece".into()));
    }
    Ok(write_midi(&piece.to_sequence()?))
}
