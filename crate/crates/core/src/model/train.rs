use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::adam_step;
use super::config::ModelConfig;
use super::loss::{sample_loss, LossParts, RepetitionLearningMatrix};
use super::state::ModelState;
use crate::error::{Error, Result};
use crate::rules::RepetitionType;
use crate::symbolic::TokenMatrix;

/// One supervised pair: reconstruct `target` from `(input, label)` and
/// predict `label` from `input`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub input: TokenMatrix,
    pub target: TokenMatrix,
    pub label: RepetitionType,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    pub classification: f64,
    pub reconstruction: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: ModelState,
    pub log: Vec<LogEntry>,
    /// True when the plateau rule fired before `max_steps`.
    pub converged: bool,
}

impl TrainOutcome {
    /// Mean total loss of each complete window of `window` steps.
    pub fn window_means(&self, window: usize) -> Vec<f64> {
        self.log
            .chunks(window)
            .filter(|c| c.len() == window)
            .map(|c| c.iter().map(|e| e.total).sum::<f64>() / window as f64)
            .collect()
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "step,L_c,L_r,total")?;
        for e in &self.log {
            writeln!(out, "{},{},{},{}", e.step, e.classification, e.reconstruction, e.total)?;
        }
        Ok(())
    }
}

/// Relative-improvement plateau detector over fixed windows.
#[derive(Debug, Clone)]
pub struct PlateauRule {
    window: usize,
    patience: usize,
    epsilon: f64,
    sum: f64,
    count: usize,
    previous: Option<f64>,
    strikes: usize,
}

impl PlateauRule {
    pub fn new(window: usize, patience: usize, epsilon: f64) -> Self {
        Self {
            window,
            patience,
            epsilon,
            sum: 0.0,
            count: 0,
            previous: None,
            strikes: 0,
        }
    }

    /// Record one step; true once `patience` consecutive windows each
    /// improved on their predecessor by less than `epsilon` (relative).
    pub fn observe(&mut self, loss: f64) -> bool {
        self.sum += loss;
        self.count += 1;
        if self.count < self.window {
            return false;
        }
        let mean = self.sum / self.window as f64;
        self.sum = 0.0;
        self.count = 0;
        if let Some(prev) = self.previous {
            let improvement = (prev - mean) / prev.abs().max(f64::MIN_POSITIVE);
            if improvement < self.epsilon {
                self.strikes += 1;
            } else {
                self.strikes = 0;
            }
        }
        self.previous = Some(mean);
        self.strikes >= self.patience
    }
}

/// Mean target token per attribute over the valid rows of all targets.
fn target_means(examples: &[TrainingExample]) -> [f64; crate::symbolic::NUM_ATTRIBUTES] {
    let mut sums = [0.0; crate::symbolic::NUM_ATTRIBUTES];
    let mut rows = 0usize;
    for e in examples {
        for row in e.target.valid_rows() {
            for (s, &v) in sums.iter_mut().zip(row) {
                *s += v as f64;
            }
            rows += 1;
        }
    }
    sums.map(|s| if rows > 0 { s / rows as f64 } else { 0.0 })
}

/// Train from scratch with mini-batch Adam on the joint loss.
pub fn train(examples: &[TrainingExample], config: &ModelConfig) -> Result<TrainOutcome> {
    let mut state = ModelState::new(config.clone())?;
    if !config.categorical {
        // Regression heads start at the mean target so early steps are spent
        // on structure rather than on the offset of the token scale.
        for (head, mean) in state.params.heads.iter_mut().zip(target_means(examples)) {
            head.bias.fill(mean);
        }
    }
    continue_training(state, examples)
}

/// Resume training an existing state under its own config.
pub fn continue_training(mut state: ModelState, examples: &[TrainingExample]) -> Result<TrainOutcome> {
    if examples.is_empty() {
        return Err(Error::EmptyInput("training needs at least one example"));
    }
    let config = state.config.clone();
    for (i, e) in examples.iter().enumerate() {
        if e.input.valid_len() == 0 {
            return Err(Error::InvalidTokens(format!("example {i} has an all-pad input")));
        }
        if e.input.valid_len() > config.max_len || e.target.valid_len() > config.max_len {
            return Err(Error::InvalidTokens(format!("example {i} is longer than the model length {}", config.max_len)));
        }
    }
    let weights: Vec<RepetitionLearningMatrix> = examples
        .iter()
        .map(|e| RepetitionLearningMatrix::for_training(&e.target, e.label, &config))
        .collect();

    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut cursor = order.len();
    let mut plateau = PlateauRule::new(config.stop_window, config.stop_patience, config.stop_epsilon);
    let mut log = Vec::new();
    let mut converged = false;
    let settings = state.adam();

    for step in 0..config.max_steps {
        let mut grads = state.params.zeros_like();
        let mut parts = LossParts::default();
        for _ in 0..config.batch_size.min(examples.len()) {
            if cursor == order.len() {
                order.shuffle(&mut order_rng);
                cursor = 0;
            }
            let i = order[cursor];
            cursor += 1;
            let e = &examples[i];
            let net = state.network();
            let rng = (config.dropout > 0.0).then_some(&mut dropout_rng);
            let fwd = net.forward(&e.input, e.label, rng)?;
            let (p, dout) = sample_loss(&config, &fwd, e.label, &e.target, &weights[i]);
            net.backward(&fwd, &dout, &mut grads);
            parts += p;
        }
        if !parts.total.is_finite() {
            return Err(Error::Diverged {
                step,
                detail: format!("loss L_c={} L_r={}", parts.classification, parts.reconstruction),
            });
        }
        state.step += 1;
        adam_step(&mut state.params, &grads, &mut state.adam_m, &mut state.adam_v, state.step, settings);
        log.push(LogEntry {
            step,
            classification: parts.classification,
            reconstruction: parts.reconstruction,
            total: parts.total,
        });
        if log::log_enabled!(log::Level::Debug) && step % 100 == 0 {
            log::debug!("step {step}: L_c={:.4} L_r={:.2} total={:.2}", parts.classification, parts.reconstruction, parts.total);
        }
        if plateau.observe(parts.total) {
            converged = true;
            break;
        }
    }
    if !state.is_finite() {
        return Err(Error::Diverged {
            step: log.len(),
            detail: "non-finite parameters".into(),
        });
    }
    Ok(TrainOutcome { state, log, converged })
}

/// Fraction of examples whose most probable class is their label.
pub fn classification_accuracy(state: &ModelState, examples: &[TrainingExample]) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for e in examples {
        let p = state.classify(&e.input)?;
        if super::network::argmax(&p) == e.label.index() {
            correct += 1;
        }
    }
    Ok(correct as f64 / examples.len() as f64)
}
