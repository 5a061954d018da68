//! Parsing, quantization, bar segmentation and compound-token encoding.

pub mod chord;
pub mod midi;
pub mod note;
pub mod quantize;
pub mod segment;
pub mod token;
pub mod vocab;

pub use chord::{chords_for, Chord, ChordQuality};
pub use midi::{parse_midi, parse_midi_with_warnings, write_midi, ParsedMidi};
pub use note::{Motif, Note, NoteSequence, TempoEvent, DEFAULT_TPQ, SLOTS_PER_BAR};
pub use quantize::quantize;
pub use segment::{extract_melody, segment_bars};
pub use token::{detokenize, detokenize_at, tokenize, tokenize_with_report, MotifRecord, TokenMatrix, TokenRow, Tokenized};
pub use vocab::{Attribute, Vocabulary, MAX_LEN, NUM_ATTRIBUTES};

/// Tokenize a motif with chords detected from its own notes.
pub fn encode_motif(m: &Motif, tempo_bpm: f64) -> TokenMatrix {
    tokenize(m, tempo_bpm, &chords_for(m))
}
