//! Labelled repetition pairs: pairing, splitting, statistics and JSONL storage.

pub mod synthetic;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TrainingExample;
use crate::rules::{infer_key_from_notes, Classifier, Key, RepetitionLabel, RepetitionType, DEFAULT_SIMILARITY};
use crate::symbolic::{detokenize_at, encode_motif, parse_midi, quantize, segment_bars, MotifRecord, Note, NoteSequence, TokenMatrix, DEFAULT_TPQ};

pub const TRAIN_FILE: &str = "train.jsonl";
pub const TEST_FILE: &str = "test.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// A song as a quantized 4/4 note sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Song {
    pub id: String,
    pub sequence: NoteSequence,
}

impl Song {
    /// Parse and quantize a Standard MIDI File.
    pub fn from_midi(id: impl Into<String>, bytes: &[u8]) -> Result<Self> {
        Ok(Self {
            id: id.into(),
            sequence: quantize(&parse_midi(bytes)?),
        })
    }

    /// One record per non-empty bar.
    pub fn motif_records(&self) -> Result<Vec<MotifRecord>> {
        let encoded = EncodedSong::encode(self)?;
        Ok(encoded.motifs.iter().map(|(bar, t)| t.to_record(self.id.clone(), *bar)).collect())
    }
}

/// A song reduced to its tokenized bars and the key used to label them.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSong {
    pub id: String,
    pub key: Key,
    /// `(bar_index, tokens)` in bar order.
    pub motifs: Vec<(usize, TokenMatrix)>,
}

impl EncodedSong {
    /// Segment and tokenize every non-empty bar.
    pub fn encode(song: &Song) -> Result<Self> {
        let seq = &song.sequence;
        let motifs = segment_bars(seq)
            .into_iter()
            .map(|m| {
                let tempo = seq.tempo_at(m.bar_index as u64 * seq.bar_ticks());
                (m.bar_index, encode_motif(&m, tempo))
            })
            .collect();
        Self::from_motifs(song.id.clone(), motifs)
    }

    /// The key is inferred from the detokenized bars, so a song read back
    /// from motif records gets the same key as the song it came from.
    pub fn from_motifs(id: String, mut motifs: Vec<(usize, TokenMatrix)>) -> Result<Self> {
        motifs.sort_by_key(|(bar, _)| *bar);
        let mut notes = Vec::new();
        for (bar, tokens) in &motifs {
            let offset = *bar as u64 * 4 * DEFAULT_TPQ as u64;
            let m = detokenize_at(tokens, *bar, DEFAULT_TPQ)?;
            notes.extend(m.notes().iter().map(|n| Note { onset: n.onset + offset, ..*n }));
        }
        let key = infer_key_from_notes(&notes)?;
        Ok(Self { id, key, motifs })
    }

    pub fn from_records(records: Vec<MotifRecord>) -> Result<Vec<Self>> {
        let mut by_song: BTreeMap<String, Vec<(usize, TokenMatrix)>> = BTreeMap::new();
        for r in records {
            let t = r.tokens()?;
            by_song.entry(r.song_id).or_default().push((r.bar_index, t));
        }
        by_song.into_iter().map(|(id, motifs)| Self::from_motifs(id, motifs)).collect()
    }
}

/// One labelled pair: `input` is the earlier bar, `target` the later one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionSample {
    pub song_id: String,
    pub bar_indices: (usize, usize),
    pub label: RepetitionType,
    /// Transposition offset or symmetry kind, when the label has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub key: Key,
    pub input: TokenMatrix,
    pub target: TokenMatrix,
}

impl RepetitionSample {
    /// Classify the stored pair again.
    pub fn reclassify(&self, classifier: &Classifier) -> Result<RepetitionLabel> {
        let a = detokenize_at(&self.input, self.bar_indices.0, DEFAULT_TPQ)?;
        let b = detokenize_at(&self.target, self.bar_indices.1, DEFAULT_TPQ)?;
        classifier.classify(&a, &b, &self.key)
    }

    /// True when reclassifying reproduces the stored label and detail.
    pub fn is_consistent(&self, classifier: &Classifier) -> Result<bool> {
        let label = self.reclassify(classifier)?;
        Ok(label.repetition_type() == Some(self.label) && label.detail() == self.detail)
    }

    pub fn to_training_example(&self) -> TrainingExample {
        TrainingExample {
            input: self.input.clone(),
            target: self.target.clone(),
            label: self.label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Maximum bar distance between paired motifs; `None` pairs every bar.
    pub window: Option<usize>,
    pub holdout_songs: usize,
    pub seed: u64,
    pub similarity_threshold: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            window: None,
            holdout_songs: 100,
            seed: 0,
            similarity_threshold: DEFAULT_SIMILARITY,
        }
    }
}

impl DatasetConfig {
    pub fn classifier(&self) -> Classifier {
        Classifier::new(self.similarity_threshold)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold <= 1.0) {
            return Err(Error::Config(format!("similarity_threshold {} outside (0, 1]", self.similarity_threshold)));
        }
        if self.window == Some(0) {
            return Err(Error::Config("window must be at least 1 bar".into()));
        }
        Ok(())
    }
}

/// Counts gathered while pairing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub songs: usize,
    pub pairs_considered: usize,
    pub kept: usize,
    pub dropped_none: usize,
    /// Pairs that were both homodirectional and symmetric.
    pub dropped_ambiguous: usize,
}

impl BuildReport {
    /// Share of considered pairs dropped as ambiguous.
    pub fn ambiguous_rate(&self) -> f64 {
        if self.pairs_considered == 0 {
            0.0
        } else {
            self.dropped_ambiguous as f64 / self.pairs_considered as f64
        }
    }
}

/// Classify every ordered bar pair of every song and keep the labelled ones,
/// sorted by song id and bar indices.
pub fn build_dataset(songs: &[EncodedSong], config: &DatasetConfig) -> Result<(Vec<RepetitionSample>, BuildReport)> {
    config.validate()?;
    if songs.is_empty() {
        log::warn!("empty corpus: no samples built");
    }
    let classifier = config.classifier();
    let mut report = BuildReport {
        songs: songs.len(),
        ..Default::default()
    };
    let mut samples = Vec::new();
    for song in songs {
        let motifs = song
            .motifs
            .iter()
            .map(|(bar, t)| detokenize_at(t, *bar, DEFAULT_TPQ))
            .collect::<Result<Vec<_>>>()?;
        let prepared: Vec<_> = motifs.iter().map(|m| (m.pitches(), m.melody())).collect();
        for i in 0..motifs.len() {
            for j in i + 1..motifs.len() {
                let (bar_i, bar_j) = (song.motifs[i].0, song.motifs[j].0);
                if config.window.is_some_and(|w| bar_j - bar_i > w) {
                    continue;
                }
                if motifs[i].is_empty() || motifs[j].is_empty() {
                    continue;
                }
                report.pairs_considered += 1;
                let label = classifier.classify_sequences(&prepared[i].0, &prepared[j].0, &prepared[i].1, &prepared[j].1, &song.key);
                match label {
                    RepetitionLabel::None => report.dropped_none += 1,
                    RepetitionLabel::Ambiguous(_) => report.dropped_ambiguous += 1,
                    _ => {
                        samples.push(RepetitionSample {
                            song_id: song.id.clone(),
                            bar_indices: (bar_i, bar_j),
                            label: label.repetition_type().expect("labelled"),
                            detail: label.detail(),
                            key: song.key,
                            input: song.motifs[i].1.clone(),
                            target: song.motifs[j].1.clone(),
                        });
                    }
                }
            }
        }
    }
    samples.sort_by(|a, b| (&a.song_id, a.bar_indices).cmp(&(&b.song_id, b.bar_indices)));
    report.kept = samples.len();
    Ok((samples, report))
}

/// Song-level holdout split, returns `(train, test, holdout_song_ids)`.
pub fn split(samples: Vec<RepetitionSample>, holdout_songs: usize, seed: u64) -> Result<(Vec<RepetitionSample>, Vec<RepetitionSample>, Vec<String>)> {
    let ids: BTreeSet<&str> = samples.iter().map(|s| s.song_id.as_str()).collect();
    if holdout_songs > 0 && holdout_songs >= ids.len() {
        return Err(Error::TooFewSongs {
            available: ids.len(),
            requested: holdout_songs,
        });
    }
    let mut ids: Vec<String> = ids.into_iter().map(String::from).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut holdout: Vec<String> = ids.into_iter().take(holdout_songs).collect();
    holdout.sort();
    let held: BTreeSet<&str> = holdout.iter().map(String::as_str).collect();
    let (test, train) = samples.into_iter().partition(|s| held.contains(s.song_id.as_str()));
    Ok((train, test, holdout))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub label: RepetitionType,
    pub count: usize,
    pub percentage: f64,
    /// Mean valid rows over inputs and targets.
    pub avg_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub split: Split,
    pub total: usize,
    pub labels: Vec<LabelStats>,
    pub holdout_song_ids: Vec<String>,
}

impl DatasetManifest {
    pub fn count(&self, label: RepetitionType) -> usize {
        self.labels[label.index()].count
    }

    pub fn percentage_sum(&self) -> f64 {
        self.labels.iter().map(|l| l.percentage).sum()
    }
}

pub fn stats(samples: &[RepetitionSample], split: Split, holdout_song_ids: &[String]) -> DatasetManifest {
    let total = samples.len();
    let labels = RepetitionType::ALL
        .iter()
        .map(|&label| {
            let of: Vec<_> = samples.iter().filter(|s| s.label == label).collect();
            let count = of.len();
            let rows: usize = of.iter().map(|s| s.input.valid_len() + s.target.valid_len()).sum();
            LabelStats {
                label,
                count,
                percentage: if total == 0 { 0.0 } else { 100.0 * count as f64 / total as f64 },
                avg_length: if count == 0 { 0.0 } else { rows as f64 / (2 * count) as f64 },
            }
        })
        .collect();
    DatasetManifest {
        split,
        total,
        labels,
        holdout_song_ids: holdout_song_ids.to_vec(),
    }
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub config: DatasetConfig,
    pub report: BuildReport,
    pub ambiguous_rate: f64,
    pub train: DatasetManifest,
    pub test: DatasetManifest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<RepetitionSample>,
    pub test: Vec<RepetitionSample>,
    pub info: DatasetInfo,
}

impl Dataset {
    /// Build, split and summarize in one go.
    pub fn build(songs: &[EncodedSong], config: &DatasetConfig) -> Result<Self> {
        let (samples, report) = build_dataset(songs, config)?;
        let (train, test, holdout) = split(samples, config.holdout_songs, config.seed)?;
        let info = DatasetInfo {
            config: config.clone(),
            ambiguous_rate: report.ambiguous_rate(),
            report,
            train: stats(&train, Split::Train, &holdout),
            test: stats(&test, Split::Test, &holdout),
        };
        Ok(Self { train, test, info })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_jsonl(&dir.join(TRAIN_FILE), &self.train)?;
        write_jsonl(&dir.join(TEST_FILE), &self.test)?;
        let f = BufWriter::new(File::create(dir.join(MANIFEST_FILE))?);
        serde_json::to_writer_pretty(f, &self.info)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let info: DatasetInfo = serde_json::from_reader(BufReader::new(File::open(dir.join(MANIFEST_FILE))?))?;
        Ok(Self {
            train: read_jsonl(&dir.join(TRAIN_FILE))?,
            test: read_jsonl(&dir.join(TEST_FILE))?,
            info,
        })
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut f, item)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

/// Read one JSON value per non-blank line; errors carry the line number.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let f = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidTokens(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(item);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::TranspositionKind;
    use crate::symbolic::{Motif, TempoEvent};

    fn song(id: &str, bars: &[&[u8]]) -> EncodedSong {
        let mut notes = Vec::new();
        for (b, pitches) in bars.iter().enumerate() {
            let m = Motif::from_pitches(pitches);
            notes.extend(m.notes().iter().map(|n| Note { onset: n.onset + b as u64 * 1920, ..*n }));
        }
        let seq = NoteSequence::new(notes, DEFAULT_TPQ, vec![TempoEvent { tick: 0, bpm: 100.0 }]);
        EncodedSong::encode(&Song { id: id.into(), sequence: seq }).unwrap()
    }

    fn config() -> DatasetConfig {
        DatasetConfig {
            holdout_songs: 0,
            ..Default::default()
        }
    }

    #[test]
    fn identical_bars_give_one_strict_sample() {
        let (s, report) = build_dataset(&[song("a", &[&[60, 62, 64], &[60, 62, 64]])], &config()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].label, RepetitionType::StR);
        assert_eq!(s[0].bar_indices, (0, 1));
        assert_eq!(report.pairs_considered, 1);
        assert!(s[0].is_consistent(&config().classifier()).unwrap());
    }

    #[test]
    fn fate_motif_and_diatonic_step_down() {
        // G G G Eb, then F F F D: one scale step down in C minor.
        let s = song("fate", &[&[67, 67, 67, 63, 60], &[65, 65, 65, 62, 58]]);
        let (samples, _) = build_dataset(&[s.clone()], &config()).unwrap();
        let a = detokenize_at(&s.motifs[0].1, 0, DEFAULT_TPQ).unwrap();
        let b = detokenize_at(&s.motifs[1].1, 1, DEFAULT_TPQ).unwrap();
        let expected = crate::rules::classify(&a, &b, &s.key).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(Some(samples[0].label), expected.repetition_type());
        if let RepetitionLabel::Transpositional(t) = expected {
            assert_eq!((t.kind, t.offset), (TranspositionKind::Diatonic, -1));
        } else {
            panic!("expected a transposition, got {expected}");
        }
    }

    #[test]
    fn unrelated_bars_give_nothing() {
        // A rising scale against a repeated note: disjoint pitches, no shared direction.
        let (s, report) = build_dataset(&[song("x", &[&[60, 62, 64, 65, 67], &[71, 71, 71, 71, 71]])], &config()).unwrap();
        assert!(s.is_empty());
        assert_eq!(report.dropped_none + report.dropped_ambiguous, 1);
    }

    #[test]
    fn window_limits_pairs() {
        let bars: &[&[u8]] = &[&[60, 62], &[60, 62], &[60, 62]];
        let all = build_dataset(&[song("w", bars)], &config()).unwrap().0;
        assert_eq!(all.len(), 3);
        let near = DatasetConfig {
            window: Some(1),
            ..config()
        };
        assert_eq!(build_dataset(&[song("w", bars)], &near).unwrap().0.len(), 2);
    }

    fn dummy(id: &str) -> RepetitionSample {
        let t = crate::symbolic::encode_motif(&Motif::from_pitches(&[60]), 120.0);
        RepetitionSample {
            song_id: id.into(),
            bar_indices: (0, 1),
            label: RepetitionType::StR,
            detail: None,
            key: Key::major(0),
            input: t.clone(),
            target: t,
        }
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let samples: Vec<_> = (0..10).flat_map(|i| [dummy(&format!("s{i}")), dummy(&format!("s{i}"))]).collect();
        let (train, test, held) = split(samples.clone(), 2, 7).unwrap();
        let (_, _, again) = split(samples.clone(), 2, 7).unwrap();
        assert_eq!(held, again);
        assert_eq!(held.len(), 2);
        assert_eq!(test.len(), 4);
        assert!(train.iter().all(|s| !held.contains(&s.song_id)));
        let (_, none, _) = split(samples.clone(), 0, 7).unwrap();
        assert!(none.is_empty());
        assert!(matches!(split(samples, 10, 7), Err(Error::TooFewSongs { available: 10, .. })));
    }

    #[test]
    fn stats_percentages() {
        let mut samples = Vec::new();
        for label in RepetitionType::ALL {
            samples.push(RepetitionSample { label, ..dummy("a") });
        }
        let m = stats(&samples, Split::Train, &[]);
        assert!(m.labels.iter().all(|l| (l.percentage - 20.0).abs() < 1e-12));
        let empty = stats(&[], Split::Test, &[]);
        assert!(empty.labels.iter().all(|l| l.count == 0 && l.percentage == 0.0));
    }
}
