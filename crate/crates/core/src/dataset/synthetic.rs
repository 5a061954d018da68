//! Seeded synthetic corpus: two-bar songs whose second bar is a constructed
//! repetition of the first.
//!
//! Each song's opening bar carries a texture (tempo band and loudness) tied
//! to the repetition type that follows it, so that the type is predictable
//! from the first bar alone, as the classifier head requires.

use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EncodedSong, Song};
use crate::error::{Error, Result};
use crate::rules::{Classifier, Key, Mode, RepetitionType};
use crate::symbolic::vocab::{TEMPO_MIN_BPM, TEMPO_STEP_BPM};
use crate::symbolic::{detokenize_at, write_midi, Note, NoteSequence, TempoEvent, Vocabulary, DEFAULT_TPQ, SLOTS_PER_BAR};

const SLOT: u64 = (DEFAULT_TPQ / 4) as u64;
const BAR: u64 = SLOT * SLOTS_PER_BAR as u64;
const MAX_TRIES: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub songs_per_type: usize,
    pub seed: u64,
    pub min_notes: usize,
    pub max_notes: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            songs_per_type: 600,
            seed: 0,
            min_notes: 4,
            max_notes: 8,
        }
    }
}

/// `(pitch, slot, length)` of a monophonic line.
type Line = Vec<(u8, u32, u32)>;

fn rhythm(rng: &mut ChaCha8Rng, n: usize) -> Vec<(u32, u32)> {
    // n distinct onsets in 0..16 including 0; each note lasts to the next.
    let onsets: Vec<u32> = (1..SLOTS_PER_BAR).collect();
    let mut chosen: Vec<u32> = onsets.choose_multiple(rng, n - 1).copied().collect();
    chosen.push(0);
    chosen.sort_unstable();
    chosen
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, chosen.get(i + 1).copied().unwrap_or(SLOTS_PER_BAR) - s))
        .collect()
}

fn degree_pitch(key: &Key, degree: i32) -> Option<u8> {
    key.pitch_at(degree).filter(|p| (48..=96).contains(p))
}

/// Random diatonic walk, in scale degrees.
fn walk(rng: &mut ChaCha8Rng, start: i32, n: usize) -> Vec<i32> {
    let steps = [-3, -2, -1, -1, 0, 1, 1, 2, 3];
    let mut d = vec![start];
    for _ in 1..n {
        let last = *d.last().unwrap();
        d.push(last + steps.choose(rng).unwrap());
    }
    d
}

/// Degrees with the given direction pattern and random step sizes.
fn walk_with_directions(rng: &mut ChaCha8Rng, start: i32, directions: &[i32]) -> Vec<i32> {
    let mut d = vec![start];
    for &dir in directions {
        let size = rng.random_range(1..=3);
        d.push(d.last().unwrap() + dir * size);
    }
    d
}

fn directions(degrees: &[i32]) -> Vec<i32> {
    degrees.windows(2).map(|w| (w[1] - w[0]).signum()).collect()
}

fn to_pitches(key: &Key, degrees: &[i32]) -> Option<Vec<u8>> {
    degrees.iter().map(|&d| degree_pitch(key, d)).collect()
}

fn line(pitches: &[u8], rhythm: &[(u32, u32)]) -> Line {
    pitches.iter().zip(rhythm).map(|(&p, &(s, l))| (p, s, l)).collect()
}

/// Re-time `n` notes by splitting or merging the given rhythm.
fn adjust_rhythm(rng: &mut ChaCha8Rng, r: &[(u32, u32)], n: usize) -> Option<Vec<(u32, u32)>> {
    let mut r = r.to_vec();
    while r.len() > n {
        let i = rng.random_range(1..r.len());
        let (_, l) = r.remove(i);
        r[i - 1].1 += l;
    }
    while r.len() < n {
        let splittable: Vec<usize> = (0..r.len()).filter(|&i| r[i].1 >= 2).collect();
        let &i = splittable.choose(rng)?;
        let (s, l) = r[i];
        let first = rng.random_range(1..l);
        r[i] = (s, first);
        r.insert(i + 1, (s + first, l - first));
    }
    Some(r)
}

struct Texture {
    bpm: f64,
    velocity: u8,
}

fn texture(rng: &mut ChaCha8Rng, label: RepetitionType) -> Texture {
    let bin = 8 + 9 * label.index() as i32 + rng.random_range(-2..=2);
    Texture {
        bpm: TEMPO_MIN_BPM + TEMPO_STEP_BPM * bin as f64,
        velocity: Vocabulary::snap_velocity((40 + 16 * label.index() as i32 + rng.random_range(-4..=4)) as u8),
    }
}

/// Candidate second bar for the requested type, in degrees of `key`, or
/// `None` when this draw does not work out.
fn answer(rng: &mut ChaCha8Rng, label: RepetitionType, key: &Key, degrees: &[i32], r: &[(u32, u32)]) -> Option<Line> {
    let pitches = to_pitches(key, degrees)?;
    match label {
        RepetitionType::StR => Some(line(&pitches, r)),
        RepetitionType::TrR => {
            if rng.random_bool(0.5) {
                let t = *[-7, -5, -4, -3, -2, -1, 1, 2, 3, 4, 5, 7].choose(rng).unwrap();
                let shifted: Option<Vec<u8>> = pitches.iter().map(|&p| u8::try_from(p as i32 + t).ok()).collect();
                Some(line(&shifted?, r))
            } else {
                let d = *[-4, -3, -2, -1, 1, 2, 3, 4].choose(rng).unwrap();
                let moved: Vec<i32> = degrees.iter().map(|x| x + d).collect();
                Some(line(&to_pitches(key, &moved)?, r))
            }
        }
        RepetitionType::SuR => {
            let mut d = degrees.to_vec();
            match rng.random_range(0..3) {
                0 => {
                    let i = rng.random_range(0..d.len());
                    d[i] += *[-2, -1, 1, 2].choose(rng).unwrap();
                }
                1 if d.len() > 4 => {
                    d.remove(rng.random_range(0..d.len()));
                }
                _ => {
                    let i = rng.random_range(0..=d.len());
                    let near = d[i.min(d.len() - 1)];
                    d.insert(i, near + rng.random_range(-2..=2));
                }
            }
            let r = adjust_rhythm(rng, r, d.len())?;
            Some(line(&to_pitches(key, &d)?, &r))
        }
        RepetitionType::HoR => {
            let start = degrees[0] + rng.random_range(-3..=3);
            let d = walk_with_directions(rng, start, &directions(degrees));
            Some(line(&to_pitches(key, &d)?, r))
        }
        RepetitionType::SyR => {
            let dirs = directions(degrees);
            let target: Vec<i32> = match rng.random_range(0..3) {
                0 => dirs.iter().map(|d| -d).collect(),
                1 => dirs.iter().rev().copied().collect(),
                _ => dirs.iter().rev().map(|d| -d).collect(),
            };
            let start = degrees[0] + rng.random_range(-3..=3);
            let d = walk_with_directions(rng, start, &target);
            Some(line(&to_pitches(key, &d)?, r))
        }
    }
}

fn song_from(id: String, first: &Line, second: &Line, bass: Option<u8>, tex: &Texture, rng: &mut ChaCha8Rng) -> Song {
    let mut notes = Vec::new();
    for &(p, s, l) in first {
        notes.push(Note::new(p, s as u64 * SLOT, l as u64 * SLOT, tex.velocity));
    }
    for &(p, s, l) in second {
        let v = Vocabulary::snap_velocity(tex.velocity.saturating_add(rng.random_range(0..3) * 4));
        notes.push(Note::new(p, BAR + s as u64 * SLOT, l as u64 * SLOT, v));
    }
    if let Some(b) = bass {
        // Held under the first beat of each bar, below the melody.
        let v = Vocabulary::snap_velocity(tex.velocity / 2 + 8);
        notes.push(Note::new(b, 0, 4 * SLOT, v));
        notes.push(Note::new(b, BAR, 4 * SLOT, v));
    }
    let sequence = NoteSequence::new(notes, DEFAULT_TPQ, vec![TempoEvent { tick: 0, bpm: tex.bpm }]);
    Song { id, sequence }
}

/// One song whose bar pair classifies as `label` under `classifier`.
pub fn synthesize_song(rng: &mut ChaCha8Rng, id: String, label: RepetitionType, config: &SyntheticConfig, classifier: &Classifier) -> Result<Song> {
    for _ in 0..MAX_TRIES {
        let key = Key::new(rng.random_range(0..12), if rng.random_bool(0.5) { Mode::Major } else { Mode::Minor });
        let n = rng.random_range(config.min_notes..=config.max_notes);
        let r = rhythm(rng, n);
        let start = rng.random_range(30..=38);
        let degrees = walk(rng, start, n);
        if directions(&degrees).iter().all(|&d| d == 0) {
            continue;
        }
        let tex = texture(rng, label);
        let Some(first) = to_pitches(&key, &degrees).map(|p| line(&p, &r)) else {
            continue;
        };
        let Some(second) = answer(rng, label, &key, &degrees, &r) else {
            continue;
        };
        let low = first.iter().chain(&second).map(|n| n.0).min().unwrap();
        let bass = (rng.random_bool(0.4) && low > 48).then(|| {
            let b = 36 + key.tonic;
            if b + 12 < low { b + 12 } else { b }
        });
        let song = song_from(id.clone(), &first, &second, bass, &tex, rng);
        let encoded = EncodedSong::encode(&song)?;
        if encoded.motifs.len() != 2 {
            continue;
        }
        let a = detokenize_at(&encoded.motifs[0].1, 0, DEFAULT_TPQ)?;
        let b = detokenize_at(&encoded.motifs[1].1, 1, DEFAULT_TPQ)?;
        if classifier.classify(&a, &b, &encoded.key)?.repetition_type() == Some(label) {
            return Ok(song);
        }
    }
    Err(Error::Generation(format!("could not construct a {label} song in {MAX_TRIES} draws")))
}

/// `songs_per_type` songs of each type, interleaved by type.
pub fn synthesize_corpus(config: &SyntheticConfig, classifier: &Classifier) -> Result<Vec<Song>> {
    if config.min_notes < 4 || config.max_notes < config.min_notes || config.max_notes > SLOTS_PER_BAR as usize {
        return Err(Error::Config(format!(
            "note counts must satisfy 4 <= min_notes <= max_notes <= {SLOTS_PER_BAR}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut songs = Vec::with_capacity(config.songs_per_type * RepetitionType::COUNT);
    for _ in 0..config.songs_per_type {
        for label in RepetitionType::ALL {
            let id = format!("synth{:05}", songs.len());
            songs.push(synthesize_song(&mut rng, id, label, config, classifier)?);
        }
    }
    Ok(songs)
}

/// Write each song as `<id>.mid`.
pub fn write_corpus(songs: &[Song], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for s in songs {
        std::fs::write(dir.join(format!("{}.mid", s.id)), write_midi(&s.sequence))?;
    }
    Ok(())
}
