//! Motif-level repetition engine for symbolic music.
//!
//! The crate covers the whole pipeline: MIDI parsing and compound-token
//! encoding ([`symbolic`]), the five repetition types and their classifier
//! ([`rules`]), labelled pair datasets ([`dataset`]), the repetition-aware
//! transformer ([`model`]), rule/model generation ([`generator`]) and the
//! matching-rate evaluation ([`eval`]).

pub mod dataset;
pub mod error;
pub mod eval;
pub mod generator;
pub mod model;
pub mod rules;
pub mod symbolic;

pub use error::{Error, Result};
