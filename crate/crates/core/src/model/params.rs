use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::ModelConfig;
use crate::rules::RepetitionType;
use crate::symbolic::Attribute;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Parameter group, used to report gradient checks per group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    Embedding,
    Encoder,
    Classifier,
    Decoder,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Embedding => "emb",
            Group::Encoder => "enc",
            Group::Classifier => "lab",
            Group::Decoder => "dec",
        }
    }
}

/// `y = x W + b` with `W` stored input-major (`in x out`).
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Array2::zeros((input, output)),
            bias: Array1::zeros(output),
        }
    }

    /// Uniform in `±1/sqrt(fan_in)`.
    fn init(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        Self {
            weight: Array2::from_shape_fn((input, output), |_| rng.random_range(-bound..bound)),
            bias: Array1::from_shape_fn(output, |_| rng.random_range(-bound..bound)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Array1<f64>,
    pub bias: Array1<f64>,
}

impl LayerNorm {
    fn new(width: usize) -> Self {
        Self {
            gain: Array1::ones(width),
            bias: Array1::zeros(width),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub norm_attention: LayerNorm,
    pub ff_in: Linear,
    pub ff_out: Linear,
    pub norm_ff: LayerNorm,
}

/// All learnable tensors. Gradients and optimizer moments use the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// One table per attribute, `vocab x width`; row 0 (pad) stays zero.
    pub embeddings: Vec<Array2<f64>>,
    pub input_projection: Linear,
    /// Learned positional table, `max_len x hidden`.
    pub positional: Array2<f64>,
    pub layers: Vec<EncoderLayer>,
    pub classifier: Linear,
    /// `5 x label_embedding`.
    pub label_embedding: Array2<f64>,
    /// One projection per attribute from `[feature, label]`.
    pub heads: Vec<Linear>,
}

/// Shape, name and group of one tensor, in visiting order.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorInfo {
    pub name: String,
    pub group: Group,
    pub shape: Vec<usize>,
}

pub(crate) fn head_width(config: &ModelConfig, attribute: Attribute) -> usize {
    if config.categorical {
        attribute.vocab_size()
    } else {
        1
    }
}

impl Params {
    pub fn init(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let h = config.hidden;
        let embeddings = Attribute::ALL
            .iter()
            .zip(config.attribute_embedding)
            .map(|(a, width)| {
                let mut t = Array2::from_shape_fn((a.vocab_size(), width), |_| 0.02 * normal(rng));
                t.row_mut(0).fill(0.0);
                t
            })
            .collect();
        let input_projection = Linear::init(config.embedding_width(), h, rng);
        let positional = Array2::from_shape_fn((config.max_len, h), |_| 0.02 * normal(rng));
        let layers = (0..config.layers)
            .map(|_| EncoderLayer {
                query: Linear::init(h, h, rng),
                key: Linear::init(h, h, rng),
                value: Linear::init(h, h, rng),
                output: Linear::init(h, h, rng),
                norm_attention: LayerNorm::new(h),
                ff_in: Linear::init(h, config.feed_forward, rng),
                ff_out: Linear::init(config.feed_forward, h, rng),
                norm_ff: LayerNorm::new(h),
            })
            .collect();
        let classifier = Linear::init(h, RepetitionType::COUNT, rng);
        let label_embedding = Array2::from_shape_fn((RepetitionType::COUNT, config.label_embedding), |_| 0.02 * normal(rng));
        let heads = Attribute::ALL
            .iter()
            .map(|&a| Linear::init(h + config.label_embedding, head_width(config, a), rng))
            .collect();
        Self {
            embeddings,
            input_projection,
            positional,
            layers,
            classifier,
            label_embedding,
            heads,
        }
    }

    /// Same layout, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_mut(|t| t.fill(0.0));
        z
    }

    pub fn tensor_info(&self) -> Vec<TensorInfo> {
        let mut out = Vec::new();
        self.visit(|name, group, shape, _| {
            out.push(TensorInfo {
                name,
                group,
                shape: shape.to_vec(),
            })
        });
        out
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        self.visit(|_, _, _, data| out.push(data));
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        self.for_each_mut(|t| out.push(t));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    fn visit<'a>(&'a self, mut f: impl FnMut(String, Group, &[usize], &'a [f64])) {
        fn std<'a, D: ndarray::Dimension>(a: &'a ndarray::Array<f64, D>) -> &'a [f64] {
            a.as_slice().expect("parameters are kept in standard layout")
        }
        let linear = |f: &mut dyn FnMut(String, Group, &[usize], &'a [f64]), name: &str, g: Group, l: &'a Linear| {
            f(format!("{name}.weight"), g, l.weight.shape(), std(&l.weight));
            f(format!("{name}.bias"), g, l.bias.shape(), std(&l.bias));
        };
        for (a, t) in Attribute::ALL.iter().zip(&self.embeddings) {
            f(format!("embedding.{}", a.name()), Group::Embedding, t.shape(), std(t));
        }
        linear(&mut f, "input_projection", Group::Embedding, &self.input_projection);
        f("positional".into(), Group::Encoder, self.positional.shape(), std(&self.positional));
        for (i, l) in self.layers.iter().enumerate() {
            linear(&mut f, &format!("layer{i}.query"), Group::Encoder, &l.query);
            linear(&mut f, &format!("layer{i}.key"), Group::Encoder, &l.key);
            linear(&mut f, &format!("layer{i}.value"), Group::Encoder, &l.value);
            linear(&mut f, &format!("layer{i}.output"), Group::Encoder, &l.output);
            f(format!("layer{i}.norm_attention.gain"), Group::Encoder, l.norm_attention.gain.shape(), std(&l.norm_attention.gain));
            f(format!("layer{i}.norm_attention.bias"), Group::Encoder, l.norm_attention.bias.shape(), std(&l.norm_attention.bias));
            linear(&mut f, &format!("layer{i}.ff_in"), Group::Encoder, &l.ff_in);
            linear(&mut f, &format!("layer{i}.ff_out"), Group::Encoder, &l.ff_out);
            f(format!("layer{i}.norm_ff.gain"), Group::Encoder, l.norm_ff.gain.shape(), std(&l.norm_ff.gain));
            f(format!("layer{i}.norm_ff.bias"), Group::Encoder, l.norm_ff.bias.shape(), std(&l.norm_ff.bias));
        }
        linear(&mut f, "classifier", Group::Classifier, &self.classifier);
        f("label_embedding".into(), Group::Decoder, self.label_embedding.shape(), std(&self.label_embedding));
        for (a, h) in Attribute::ALL.iter().zip(&self.heads) {
            linear(&mut f, &format!("head.{}", a.name()), Group::Decoder, h);
        }
    }

    /// Mutable access in the same order as [`Params::tensor_info`].
    fn for_each_mut<'a>(&'a mut self, mut f: impl FnMut(&'a mut [f64])) {
        fn std<'a, D: ndarray::Dimension>(a: &'a mut ndarray::Array<f64, D>) -> &'a mut [f64] {
            a.as_slice_mut().expect("parameters are kept in standard layout")
        }
        for t in &mut self.embeddings {
            f(std(t));
        }
        f(std(&mut self.input_projection.weight));
        f(std(&mut self.input_projection.bias));
        f(std(&mut self.positional));
        for l in &mut self.layers {
            for lin in [&mut l.query, &mut l.key, &mut l.value, &mut l.output] {
                f(std(&mut lin.weight));
                f(std(&mut lin.bias));
            }
            f(std(&mut l.norm_attention.gain));
            f(std(&mut l.norm_attention.bias));
            for lin in [&mut l.ff_in, &mut l.ff_out] {
                f(std(&mut lin.weight));
                f(std(&mut lin.bias));
            }
            f(std(&mut l.norm_ff.gain));
            f(std(&mut l.norm_ff.bias));
        }
        f(std(&mut self.classifier.weight));
        f(std(&mut self.classifier.bias));
        f(std(&mut self.label_embedding));
        for h in &mut self.heads {
            f(std(&mut h.weight));
            f(std(&mut h.bias));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn visiting_orders_agree() {
        let config = ModelConfig::tiny();
        let mut p = Params::init(&config, &mut ChaCha8Rng::seed_from_u64(1));
        let info = p.tensor_info();
        let lens: Vec<usize> = p.slices_mut().iter().map(|s| s.len()).collect();
        assert_eq!(info.len(), lens.len());
        for (i, l) in info.iter().zip(lens) {
            assert_eq!(i.shape.iter().product::<usize>(), l, "{}", i.name);
        }
    }

    #[test]
    fn pad_embeddings_start_at_zero() {
        let p = Params::init(&ModelConfig::tiny(), &mut ChaCha8Rng::seed_from_u64(2));
        for t in &p.embeddings {
            assert!(t.row(0).iter().all(|&v| v == 0.0));
            assert!(t.row(1).iter().any(|&v| v != 0.0));
        }
    }
}
