use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rules::RepetitionType;
use crate::symbolic::{Attribute, MAX_LEN, NUM_ATTRIBUTES};

/// Model variants compared by the matching-rate evaluation.
///
/// * `V`: plain squared reconstruction loss, every label decoded by the model.
/// * `R`: repetition learning matrix in the loss, every label decoded by the model.
/// * `RR`: repetition learning matrix plus rule-based StR/TrR pitch generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    V,
    R,
    RR,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::V, Variant::R, Variant::RR];

    pub fn uses_repetition_matrix(self) -> bool {
        !matches!(self, Variant::V)
    }

    pub fn uses_rules(self) -> bool {
        matches!(self, Variant::RR)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::V => "V",
            Variant::R => "R",
            Variant::RR => "RR",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "V" => Ok(Variant::V),
            "R" => Ok(Variant::R),
            "RR" => Ok(Variant::RR),
            _ => Err(Error::Config(format!("unknown variant {s:?} (expected V, R or RR)"))),
        }
    }
}

/// Attribute importance per (label, attribute).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSchedule {
    /// Indexed `[label][attribute]`.
    pub table: [[f64; NUM_ATTRIBUTES]; RepetitionType::COUNT],
}

impl GammaSchedule {
    /// Pitch 4 for every label; position, duration and velocity 2 for
    /// SuR/HoR/SyR; everything else 1.
    pub fn standard() -> Self {
        let mut table = [[1.0; NUM_ATTRIBUTES]; RepetitionType::COUNT];
        for label in RepetitionType::ALL {
            let row = &mut table[label.index()];
            row[Attribute::Pitch.index()] = 4.0;
            if !label.is_rule_based() {
                for a in [Attribute::Position, Attribute::Duration, Attribute::Velocity] {
                    row[a.index()] = 2.0;
                }
            }
        }
        Self { table }
    }

    pub fn uniform(value: f64) -> Self {
        Self {
            table: [[value; NUM_ATTRIBUTES]; RepetitionType::COUNT],
        }
    }

    pub fn gamma(&self, label: RepetitionType, attribute: Attribute) -> f64 {
        self.table[label.index()][attribute.index()]
    }
}

impl Default for GammaSchedule {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Rows per input (L).
    pub max_len: usize,
    pub layers: usize,
    pub heads: usize,
    /// Embedding and feature width (H1 = H2).
    pub hidden: usize,
    pub feed_forward: usize,
    /// Embedding width per attribute, in column order.
    pub attribute_embedding: [usize; NUM_ATTRIBUTES],
    pub label_embedding: usize,
    pub dropout: f64,
    /// Weight of the classification loss; reconstruction gets `1 - lambda`.
    pub lambda: f64,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    /// Steps per averaging window of the stopping rule.
    pub stop_window: usize,
    pub stop_patience: usize,
    /// Minimum relative improvement between consecutive windows.
    pub stop_epsilon: f64,
    pub gamma: GammaSchedule,
    pub variant: Variant,
    /// Per-attribute softmax heads with weighted cross-entropy instead of
    /// squared error over token indices.
    pub categorical: bool,
    pub seed: u64,
}

impl ModelConfig {
    /// Full-size hyperparameters.
    pub fn full() -> Self {
        Self {
            max_len: MAX_LEN,
            layers: 6,
            heads: 4,
            hidden: 256,
            feed_forward: 2048,
            attribute_embedding: [128, 256, 64, 32, 512, 128, 128],
            label_embedding: 32,
            dropout: 0.1,
            lambda: 0.5,
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 16,
            max_steps: 200_000,
            stop_window: 200,
            stop_patience: 3,
            stop_epsilon: 1e-3,
            gamma: GammaSchedule::standard(),
            variant: Variant::RR,
            categorical: false,
            seed: 0,
        }
    }

    /// Laptop-scale defaults: same structure, narrower and shallower.
    pub fn desk() -> Self {
        Self {
            layers: 2,
            hidden: 64,
            feed_forward: 256,
            attribute_embedding: [32, 64, 16, 8, 128, 32, 32],
            learning_rate: 1e-3,
            max_steps: 6_000,
            ..Self::full()
        }
    }

    /// The L = 8, H1 = 16 model used for finite-difference checks.
    pub fn tiny() -> Self {
        Self {
            max_len: 8,
            layers: 2,
            heads: 2,
            hidden: 16,
            feed_forward: 32,
            attribute_embedding: [4, 4, 4, 4, 8, 4, 4],
            label_embedding: 4,
            batch_size: 4,
            max_steps: 200,
            ..Self::full()
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    pub fn embedding_width(&self) -> usize {
        self.attribute_embedding.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.max_len == 0 || self.max_len > MAX_LEN {
            return fail(format!("max_len must be in 1..={MAX_LEN}"));
        }
        if self.heads == 0 || self.hidden == 0 || self.hidden % self.heads != 0 {
            return fail(format!("hidden {} must be a positive multiple of heads {}", self.hidden, self.heads));
        }
        if self.feed_forward == 0 || self.label_embedding == 0 || self.attribute_embedding.contains(&0) {
            return fail("layer widths must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return fail(format!("lambda {} outside [0, 1]", self.lambda));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.gamma.table.iter().flatten().any(|&g| g < 1.0) {
            return fail("gamma values must be at least 1".into());
        }
        if self.batch_size == 0 || self.learning_rate <= 0.0 || self.stop_window == 0 {
            return fail("batch_size, learning_rate and stop_window must be positive".into());
        }
        Ok(())
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk()
    }
}
