use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("MIDI parse error at byte {offset}: {message}")]
    MidiParse { offset: usize, message: String },

    #[error("unsupported meter {numerator}/{denominator}: only 4/4 is supported")]
    UnsupportedMeter { numerator: u8, denominator: u32 },

    #[error("empty motif")]
    EmptyMotif,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("token out of vocabulary at row {row}, attribute {attribute}: {value}")]
    OutOfVocabulary {
        row: usize,
        attribute: &'static str,
        value: i64,
    },

    #[error("invalid token matrix: {0}")]
    InvalidTokens(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("too few songs for holdout: have {available}, need more than {requested}")]
    TooFewSongs { available: usize, requested: usize },

    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: usize, detail: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("shape mismatch for {name}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("generation error: {0}")]
    Generation(String),

    #[error("invalid label: {0}")]
    InvalidLabel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
