//! Matching-rate evaluation of generated repetitions.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::RepetitionSample;
use crate::error::{Error, Result};
use crate::generator::{generate_one, GenerationOptions};
use crate::model::{ModelConfig, ModelState, Variant};
use crate::rules::{Classifier, Key, RepetitionType};
use crate::symbolic::{detokenize_at, TokenMatrix, DEFAULT_TPQ};

/// Share of `true` indicators.
pub fn matching_rate(matched: &[bool]) -> Result<f64> {
    if matched.is_empty() {
        return Err(Error::EmptyInput("matching rate of no pairs"));
    }
    Ok(matched.iter().filter(|&&m| m).count() as f64 / matched.len() as f64)
}

/// Whether `output` classifies as `requested` against `input`.
pub fn is_match(input: &TokenMatrix, output: &TokenMatrix, requested: RepetitionType, key: &Key, classifier: &Classifier) -> Result<bool> {
    let a = detokenize_at(input, 0, DEFAULT_TPQ)?;
    let b = detokenize_at(output, 1, DEFAULT_TPQ)?;
    if a.is_empty() || b.is_empty() {
        return Ok(false);
    }
    Ok(classifier.classify(&a, &b, key)?.matches(requested))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRate {
    pub label: RepetitionType,
    pub mean: f64,
    /// Population standard deviation of the 0/1 match indicators.
    pub std: f64,
    pub count: usize,
    pub matched: usize,
}

impl LabelRate {
    fn from_indicators(label: RepetitionType, matched: &[bool]) -> Result<Self> {
        let mean = matching_rate(matched)?;
        Ok(Self {
            label,
            mean,
            std: (mean * (1.0 - mean)).max(0.0).sqrt(),
            count: matched.len(),
            matched: matched.iter().filter(|&&m| m).count(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: Variant,
    pub labels: Vec<LabelRate>,
    pub motifs: usize,
    /// TrR outputs whose pitches had to be clamped to the MIDI range.
    pub clamped: usize,
    pub config: Option<ModelConfig>,
}

impl EvalReport {
    pub fn rate(&self, label: RepetitionType) -> Option<&LabelRate> {
        self.labels.iter().find(|r| r.label == label)
    }

    /// Mean of the per-label rates of SuR, HoR and SyR.
    pub fn model_label_mean(&self) -> f64 {
        let rates: Vec<f64> = [RepetitionType::SuR, RepetitionType::HoR, RepetitionType::SyR]
            .iter()
            .filter_map(|&l| self.rate(l).map(|r| r.mean))
            .collect();
        if rates.is_empty() {
            0.0
        } else {
            rates.iter().sum::<f64>() / rates.len() as f64
        }
    }

    /// Aligned table: one row per variant, one column per label.
    pub fn table(reports: &[&EvalReport]) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<8}", "Model");
        for l in RepetitionType::ALL {
            let _ = write!(out, "{:>14}", l.as_str());
        }
        out.push('\n');
        for r in reports {
            let _ = write!(out, "{:<8}", format!("R-{}", r.variant));
            for l in RepetitionType::ALL {
                match r.rate(l) {
                    Some(x) => {
                        let _ = write!(out, "{:>14}", format!("{:.2} ± {:.2}", x.mean, x.std));
                    }
                    None => {
                        let _ = write!(out, "{:>14}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Fixed TrR transposition; `None` lets the model suggest one.
    pub transposition: Option<i32>,
    pub seed: u64,
    /// Cap on distinct test motifs (`None` = all).
    pub max_motifs: Option<usize>,
    pub labels: Vec<RepetitionType>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            transposition: None,
            seed: 0,
            max_motifs: None,
            labels: RepetitionType::ALL.to_vec(),
        }
    }
}

/// Distinct input motifs of the samples with their song keys, in sample order.
pub fn test_motifs(samples: &[RepetitionSample]) -> Vec<(TokenMatrix, Key)> {
    let mut seen = BTreeSet::new();
    samples
        .iter()
        .filter(|s| seen.insert((s.song_id.clone(), s.bar_indices.0)))
        .map(|s| (s.input.clone(), s.key))
        .collect()
}

/// Generate every label for every test motif as the variant prescribes and
/// score against the requested labels. V and R decode all labels with the
/// model; RR uses the StR/TrR rules.
pub fn evaluate_variant(variant: Variant, model: Option<&ModelState>, motifs: &[(TokenMatrix, Key)], options: &EvalOptions) -> Result<EvalReport> {
    let model = model.ok_or_else(|| Error::Generation("evaluation needs a trained model".into()))?;
    let classifier = Classifier::default();
    let gen = GenerationOptions {
        rules: variant.uses_rules(),
        copy_without_model: false,
    };
    let motifs = &motifs[..options.max_motifs.unwrap_or(motifs.len()).min(motifs.len())];
    if motifs.is_empty() {
        return Err(Error::EmptyInput("evaluation needs at least one test motif"));
    }
    let mut clamped = 0;
    let mut labels = Vec::new();
    for &label in &options.labels {
        let mut matched = Vec::with_capacity(motifs.len());
        for (i, (x, key)) in motifs.iter().enumerate() {
            let t = if label == RepetitionType::TrR { options.transposition } else { None };
            let g = generate_one(x, label, Some(model), t, options.seed.wrapping_add(i as u64), gen)?;
            clamped += g.clamped;
            matched.push(is_match(x, &g.tokens, label, key, &classifier)?);
        }
        labels.push(LabelRate::from_indicators(label, &matched)?);
    }
    Ok(EvalReport {
        variant,
        labels,
        motifs: motifs.len(),
        clamped,
        config: Some(model.config.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{encode_motif, Motif};

    #[test]
    fn rate_arithmetic() {
        let mut v = vec![true; 75];
        v.extend(vec![false; 25]);
        assert_eq!(matching_rate(&v).unwrap(), 0.75);
        assert_eq!(matching_rate(&[false, false]).unwrap(), 0.0);
        assert!(matching_rate(&[]).is_err());
        let r = LabelRate::from_indicators(RepetitionType::SuR, &v).unwrap();
        assert!((r.std - (0.75f64 * 0.25).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rule_labels_match_under_rr() {
        let state = ModelState::new(ModelConfig::tiny()).unwrap();
        let motifs: Vec<_> = [[60u8, 62, 64], [67, 67, 63], [72, 71, 69]]
            .iter()
            .map(|p| (encode_motif(&Motif::from_pitches(p), 120.0), Key::major(0)))
            .collect();
        let options = EvalOptions {
            labels: vec![RepetitionType::StR, RepetitionType::TrR],
            ..Default::default()
        };
        let r = evaluate_variant(Variant::RR, Some(&state), &motifs, &options).unwrap();
        assert_eq!(r.rate(RepetitionType::StR).unwrap().mean, 1.0);
        assert_eq!(r.rate(RepetitionType::TrR).unwrap().mean, 1.0);
        assert!(evaluate_variant(Variant::RR, None, &motifs, &options).is_err());
        assert!(EvalReport::table(&[&r]).contains("R-RR"));
    }
}
