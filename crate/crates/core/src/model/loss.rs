//! Repetition learning matrix and the joint classification/reconstruction loss.

use std::collections::HashMap;

use ndarray::Array2;

use super::config::{GammaSchedule, ModelConfig};
use super::layers::{log_softmax, softmax};
use super::network::{Forward, OutputGrads};
use crate::rules::RepetitionType;
use crate::symbolic::{Attribute, TokenMatrix, NUM_ATTRIBUTES};

/// Per-cell reconstruction weights, `rows x K`.
///
/// On a valid row, `a[l][k] = gamma_k * (1 + count(x[l][k] in column k) / valid_len)`;
/// pad rows are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionLearningMatrix {
    pub weights: Array2<f64>,
}

impl RepetitionLearningMatrix {
    pub fn compute(x: &TokenMatrix, label: RepetitionType, gamma: &GammaSchedule) -> Self {
        let n = x.valid_len();
        let mut weights = Array2::zeros((x.rows().len(), NUM_ATTRIBUTES));
        if n == 0 {
            return Self { weights };
        }
        for attribute in Attribute::ALL {
            let k = attribute.index();
            let mut counts: HashMap<u16, usize> = HashMap::new();
            for row in x.valid_rows() {
                *counts.entry(row[k]).or_default() += 1;
            }
            let g = gamma.gamma(label, attribute);
            for (l, row) in x.valid_rows().iter().enumerate() {
                let omega = counts[&row[k]] as f64 / n as f64;
                weights[[l, k]] = g * (1.0 + omega);
            }
        }
        Self { weights }
    }

    /// Ones on the valid rows, zero on pad rows (no attribute weighting).
    pub fn uniform(x: &TokenMatrix) -> Self {
        let mut weights = Array2::zeros((x.rows().len(), NUM_ATTRIBUTES));
        weights.slice_mut(ndarray::s![..x.valid_len(), ..]).fill(1.0);
        Self { weights }
    }

    /// Weights for training under `config` (uniform for the V variant).
    pub fn for_training(target: &TokenMatrix, label: RepetitionType, config: &ModelConfig) -> Self {
        if config.variant.uses_repetition_matrix() {
            Self::compute(target, label, &config.gamma)
        } else {
            Self::uniform(target)
        }
    }

    pub fn get(&self, row: usize, attribute: Attribute) -> f64 {
        self.weights[[row, attribute.index()]]
    }
}

/// Cross-entropy `-ln p[label]` of a probability vector.
pub fn loss_classification(probs: &[f64], label: RepetitionType) -> f64 {
    -probs[label.index()].ln()
}

/// `sum (a * (target - predicted))^2` over all cells.
pub fn loss_reconstruction(predicted: &Array2<f64>, target: &TokenMatrix, a: &RepetitionLearningMatrix) -> f64 {
    let mut total = 0.0;
    for l in 0..predicted.nrows().min(a.weights.nrows()) {
        for k in 0..NUM_ATTRIBUTES {
            let r = a.weights[[l, k]] * (target.rows()[l][k] as f64 - predicted[[l, k]]);
            total += r * r;
        }
    }
    total
}

/// `lambda * l_c + (1 - lambda) * l_r`.
pub fn total_loss(lambda: f64, classification: f64, reconstruction: f64) -> f64 {
    lambda * classification + (1.0 - lambda) * reconstruction
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub classification: f64,
    pub reconstruction: f64,
    pub total: f64,
}

impl std::ops::AddAssign for LossParts {
    fn add_assign(&mut self, o: Self) {
        self.classification += o.classification;
        self.reconstruction += o.reconstruction;
        self.total += o.total;
    }
}

/// Loss of one forward pass and its gradient with respect to the outputs.
pub fn sample_loss(config: &ModelConfig, fwd: &Forward, label: RepetitionType, target: &TokenMatrix, a: &RepetitionLearningMatrix) -> (LossParts, OutputGrads) {
    let lambda = config.lambda;
    let rows = fwd.head_outputs[0].nrows();

    let log_probs = log_softmax(&fwd.logits);
    let classification = -log_probs[label.index()];
    let mut dlogits: Vec<f64> = log_probs.iter().map(|lp| lambda * lp.exp()).collect();
    dlogits[label.index()] -= lambda;

    let mut reconstruction = 0.0;
    let mut heads = Vec::with_capacity(NUM_ATTRIBUTES);
    for (k, out) in fwd.head_outputs.iter().enumerate() {
        let mut d = Array2::zeros(out.raw_dim());
        for l in 0..rows {
            let w = a.weights[[l, k]];
            if w == 0.0 {
                continue;
            }
            let t = target.rows()[l][k];
            if config.categorical {
                let logits = out.row(l);
                let lp = log_softmax(logits.as_slice().unwrap());
                reconstruction += -w * lp[t as usize];
                let p = softmax(logits.as_slice().unwrap());
                for (j, pj) in p.iter().enumerate() {
                    d[[l, j]] = (1.0 - lambda) * w * (pj - if j == t as usize { 1.0 } else { 0.0 });
                }
            } else {
                let r = t as f64 - out[[l, 0]];
                reconstruction += (w * r).powi(2);
                d[[l, 0]] = (1.0 - lambda) * -2.0 * w * w * r;
            }
        }
        heads.push(d);
    }
    let parts = LossParts {
        classification,
        reconstruction,
        total: total_loss(lambda, classification, reconstruction),
    };
    (parts, OutputGrads { logits: dlogits, heads })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::vocab::{TYPE_METRIC, TYPE_NOTE};

    fn column_matrix(pitches: &[u16]) -> TokenMatrix {
        let rows: Vec<_> = pitches.iter().map(|&p| [28, 1, 1, TYPE_NOTE, p, 4, 21]).collect();
        TokenMatrix::from_valid_rows(&rows).unwrap()
    }

    #[test]
    fn pitch_column_example() {
        // C3 D3 C3 E3 C3 as pitch tokens (MIDI 48, 50, 52 -> tokens 49, 51, 53)
        let x = column_matrix(&[49, 51, 49, 53, 49]);
        let a = RepetitionLearningMatrix::compute(&x, RepetitionType::SuR, &GammaSchedule::standard());
        let got: Vec<f64> = (0..5).map(|l| a.get(l, Attribute::Pitch)).collect();
        let want = [6.4, 4.8, 6.4, 4.8, 6.4];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{got:?}");
        }
        // Constant columns get 2 * gamma; pad rows zero.
        assert!((a.get(0, Attribute::Tempo) - 2.0).abs() < 1e-12);
        assert!((a.get(2, Attribute::Duration) - 4.0).abs() < 1e-12);
        assert_eq!(a.get(5, Attribute::Pitch), 0.0);
    }

    #[test]
    fn distinct_column_example() {
        let x = column_matrix(&[61, 62, 63, 64]);
        let a = RepetitionLearningMatrix::compute(&x, RepetitionType::StR, &GammaSchedule::uniform(1.0));
        for l in 0..4 {
            assert!((a.get(l, Attribute::Pitch) - 1.25).abs() < 1e-12);
        }
    }

    #[test]
    fn bounds_hold_on_mixed_rows() {
        let rows = vec![[28, 1, 1, TYPE_METRIC, 0, 0, 0], [28, 1, 1, TYPE_NOTE, 61, 2, 21], [28, 5, 9, TYPE_METRIC, 0, 0, 0]];
        let x = TokenMatrix::from_valid_rows(&rows).unwrap();
        let g = GammaSchedule::standard();
        for label in RepetitionType::ALL {
            let a = RepetitionLearningMatrix::compute(&x, label, &g);
            for l in 0..x.rows().len() {
                for attr in Attribute::ALL {
                    let v = a.get(l, attr);
                    if l < 3 {
                        let gk = g.gamma(label, attr);
                        assert!(v >= gk && v <= 2.0 * gk);
                    } else {
                        assert_eq!(v, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn classification_loss_values() {
        assert_eq!(loss_classification(&[0.0, 1.0, 0.0, 0.0, 0.0], RepetitionType::TrR), 0.0);
        let uniform = [0.2; 5];
        assert!((loss_classification(&uniform, RepetitionType::SyR) - 5f64.ln()).abs() < 1e-12);
        assert!((5f64.ln() - 1.6094).abs() < 1e-4);
    }

    #[test]
    fn reconstruction_loss_values() {
        let x = column_matrix(&[61, 62]);
        let ones = RepetitionLearningMatrix::uniform(&x);
        let exact = Array2::from_shape_fn((120, NUM_ATTRIBUTES), |(l, k)| x.rows()[l][k] as f64);
        assert_eq!(loss_reconstruction(&exact, &x, &ones), 0.0);

        let mut off = exact.clone();
        off[[1, Attribute::Pitch.index()]] += 2.0;
        assert_eq!(loss_reconstruction(&off, &x, &ones), 4.0);

        let doubled = RepetitionLearningMatrix { weights: &ones.weights * 2.0 };
        assert_eq!(loss_reconstruction(&off, &x, &doubled), 16.0);
    }

    #[test]
    fn lambda_endpoints() {
        assert_eq!(total_loss(1.0, 1.3, 50.0), 1.3);
        assert_eq!(total_loss(0.0, 1.3, 50.0), 50.0);
        assert_eq!(total_loss(0.5, 2.0, 4.0), 3.0);
    }
}
