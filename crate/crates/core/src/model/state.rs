use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::AdamSettings;
use super::config::ModelConfig;
use super::network::Network;
use super::params::Params;
use crate::error::Result;
use crate::rules::RepetitionType;
use crate::symbolic::TokenMatrix;

/// Parameters, optimizer moments and step counter of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: ModelConfig,
    pub params: Params,
    pub adam_m: Params,
    pub adam_v: Params,
    pub step: u64,
}

impl ModelState {
    /// Freshly initialized from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = Params::init(&config, &mut ChaCha8Rng::seed_from_u64(config.seed));
        let adam_m = params.zeros_like();
        let adam_v = params.zeros_like();
        Ok(Self {
            config,
            params,
            adam_m,
            adam_v,
            step: 0,
        })
    }

    pub fn network(&self) -> Network<'_> {
        Network::new(&self.config, &self.params)
    }

    pub fn adam(&self) -> AdamSettings {
        AdamSettings {
            learning_rate: self.config.learning_rate,
            beta1: self.config.adam_beta1,
            beta2: self.config.adam_beta2,
            epsilon: self.config.adam_epsilon,
        }
    }

    /// Class probabilities for an input motif.
    pub fn classify(&self, x: &TokenMatrix) -> Result<Vec<f64>> {
        let net = self.network();
        let h = net.embed(x)?;
        let f = net.encode(&h, x.valid_len());
        net.classify_head(&f, x.valid_len())
    }

    /// Decoder output for `(x, label)`, `max_len x K`, evaluation mode.
    pub fn reconstruct(&self, x: &TokenMatrix, label: RepetitionType) -> Result<Array2<f64>> {
        let net = self.network();
        let h = net.embed(x)?;
        let f = net.encode(&h, x.valid_len());
        Ok(net.decode_heads(&f, label))
    }

    pub fn is_finite(&self) -> bool {
        self.params.all_finite() && self.adam_m.all_finite() && self.adam_v.all_finite()
    }
}
