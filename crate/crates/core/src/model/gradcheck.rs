//! Finite-difference verification of the backward pass.

use std::collections::BTreeMap;

use super::config::ModelConfig;
use super::loss::{sample_loss, RepetitionLearningMatrix};
use super::network::Network;
use super::params::{Group, Params};
use crate::error::Result;
use crate::rules::RepetitionType;
use crate::symbolic::TokenMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckSettings {
    pub step: f64,
    /// Denominator floor, as a fraction of `max(1, |loss|)`. Central
    /// differences carry roundoff of order `eps * |loss| / step`, so gradients
    /// below this scale are compared absolutely.
    pub floor: f64,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        Self { step: 1e-4, floor: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorReport {
    pub name: String,
    pub group: Group,
    pub max_relative_error: f64,
    pub checked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorReport>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_relative_error).fold(0.0, f64::max)
    }

    pub fn by_group(&self) -> BTreeMap<Group, f64> {
        let mut out = BTreeMap::new();
        for t in &self.tensors {
            let e = out.entry(t.group).or_insert(0.0f64);
            *e = e.max(t.max_relative_error);
        }
        out
    }
}

/// `(analytic, numeric)` relative error.
pub fn relative_error(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

fn loss_of(config: &ModelConfig, params: &Params, x: &TokenMatrix, label: RepetitionType, target: &TokenMatrix, a: &RepetitionLearningMatrix) -> Result<f64> {
    let fwd = Network::new(config, params).forward(x, label, None)?;
    Ok(sample_loss(config, &fwd, label, target, a).0.total)
}

/// Compare analytic gradients of the joint loss (dropout off) with central
/// differences on every trainable parameter element.
pub fn check_gradients(
    config: &ModelConfig,
    params: &Params,
    x: &TokenMatrix,
    label: RepetitionType,
    target: &TokenMatrix,
    settings: GradCheckSettings,
) -> Result<GradCheckReport> {
    let a = RepetitionLearningMatrix::for_training(target, label, config);
    let net = Network::new(config, params);
    let fwd = net.forward(x, label, None)?;
    let (parts, dout) = sample_loss(config, &fwd, label, target, &a);
    let floor = settings.floor * parts.total.abs().max(1.0);
    let mut grads = params.zeros_like();
    net.backward(&fwd, &dout, &mut grads);

    let info = params.tensor_info();
    let analytic = grads.slices();
    let mut probe = params.clone();
    let mut tensors = Vec::with_capacity(info.len());
    for (t, info) in info.iter().enumerate() {
        let mut worst = 0.0f64;
        let len = analytic[t].len();
        // Row 0 of an embedding table is the pad token, held fixed at zero.
        let start = if info.group == Group::Embedding && info.name.starts_with("embedding.") { info.shape[1] } else { 0 };
        for i in start..len {
            let original = probe.slices()[t][i];
            probe.slices_mut()[t][i] = original + settings.step;
            let plus = loss_of(config, &probe, x, label, target, &a)?;
            probe.slices_mut()[t][i] = original - settings.step;
            let minus = loss_of(config, &probe, x, label, target, &a)?;
            probe.slices_mut()[t][i] = original;
            let numeric = (plus - minus) / (2.0 * settings.step);
            worst = worst.max(relative_error(analytic[t][i], numeric, floor));
        }
        tensors.push(TensorReport {
            name: info.name.clone(),
            group: info.group,
            max_relative_error: worst,
            checked: len - start,
        });
    }
    Ok(GradCheckReport { tensors })
}
