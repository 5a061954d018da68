//! The motif-level repetition taxonomy and its pair classifier.

pub mod classify;
pub mod development;
pub mod key;
pub mod label;
pub mod lcs;

pub use classify::{
    classify, is_homodirectional, is_strict, is_subsequential, symmetry, transposition, Classifier, DEFAULT_SIMILARITY,
};
pub use development::{development, DevSequence, Direction};
pub use key::{infer_key, infer_key_from_notes, Key, Mode};
pub use label::{RepetitionLabel, RepetitionType, SymmetryKind, Transposition, TranspositionKind, Verdict};
pub use lcs::{lcs_len, lcs_similarity};
