//! Forward and backward passes of the full model.
//!
//! Only the `n = valid_len` non-pad rows enter the encoder, which is exactly
//! attention with pad positions masked on both sides. Pad rows of the
//! feature matrix are zero, so the decoder output on a pad row depends on the
//! label alone.

use ndarray::{s, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::layers::{gelu, gelu_grad, layer_norm, layer_norm_backward, linear, linear_backward, log_softmax, softmax, softmax_rows, LayerNormCache};
use super::params::{EncoderLayer, Params};
use crate::error::{Error, Result};
use crate::rules::RepetitionType;
use crate::symbolic::{TokenMatrix, NUM_ATTRIBUTES};

/// Read-only view of a model for inference and gradient computation.
#[derive(Clone, Copy)]
pub struct Network<'a> {
    pub config: &'a ModelConfig,
    pub params: &'a Params,
}

struct LayerCache {
    input: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    ctx: Array2<f64>,
    attention_mask: Option<Array2<f64>>,
    norm_attention: LayerNormCache,
    x1: Array2<f64>,
    z: Array2<f64>,
    g: Array2<f64>,
    ff_mask: Option<Array2<f64>>,
    norm_ff: LayerNormCache,
}

/// Everything the backward pass needs from one forward pass.
pub struct Forward {
    tokens: Vec<[u16; NUM_ATTRIBUTES]>,
    concat: Array2<f64>,
    input_mask: Option<Array2<f64>>,
    layers: Vec<LayerCache>,
    /// Encoder output on the valid rows, `n x hidden`.
    pub features: Array2<f64>,
    pooled: Array2<f64>,
    /// Class probabilities.
    pub probs: Vec<f64>,
    pub logits: Vec<f64>,
    label: RepetitionType,
    /// Decoder input per row, `max_len x (hidden + label_embedding)`.
    decoder_input: Array2<f64>,
    /// Per attribute: `max_len x head_width`.
    pub head_outputs: Vec<Array2<f64>>,
}

/// Loss gradients with respect to the two model outputs.
pub struct OutputGrads {
    pub logits: Vec<f64>,
    pub heads: Vec<Array2<f64>>,
}

fn dropout_mask(shape: (usize, usize), p: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_fn(shape, |_| if rng.random::<f64>() < p { 0.0 } else { keep })
}

impl<'a> Network<'a> {
    pub fn new(config: &'a ModelConfig, params: &'a Params) -> Self {
        Self { config, params }
    }

    fn check_tokens(&self, x: &TokenMatrix) -> Result<()> {
        x.validate()?;
        if x.valid_len() > self.config.max_len {
            return Err(Error::InvalidTokens(format!(
                "valid_len {} exceeds model length {}",
                x.valid_len(),
                self.config.max_len
            )));
        }
        Ok(())
    }

    fn concat_embeddings(&self, rows: &[[u16; NUM_ATTRIBUTES]]) -> Array2<f64> {
        let mut out = Array2::zeros((rows.len(), self.config.embedding_width()));
        for (r, row) in rows.iter().enumerate() {
            let mut offset = 0;
            for (k, table) in self.params.embeddings.iter().enumerate() {
                let w = table.ncols();
                out.slice_mut(s![r, offset..offset + w]).assign(&table.row(row[k] as usize));
                offset += w;
            }
        }
        out
    }

    /// Attribute embeddings, concatenated and projected: `max_len x hidden`.
    /// Pad rows map to the projection of the zero vector.
    pub fn embed(&self, x: &TokenMatrix) -> Result<Array2<f64>> {
        self.check_tokens(x)?;
        let concat = self.concat_embeddings(&x.rows()[..self.config.max_len]);
        Ok(linear(&concat.view(), &self.params.input_projection))
    }

    /// Positional addition plus the encoder stack; pad rows of the result
    /// are zero.
    pub fn encode(&self, h: &Array2<f64>, valid_len: usize) -> Array2<f64> {
        let n = valid_len.min(h.nrows());
        let mut x = h.slice(s![..n, ..]).to_owned() + &self.params.positional.slice(s![..n, ..]);
        for layer in &self.params.layers {
            x = self.layer_forward(layer, x, None).0;
        }
        let mut out = Array2::zeros((self.config.max_len, self.config.hidden));
        out.slice_mut(s![..n, ..]).assign(&x);
        out
    }

    /// Mean over the valid rows, linear map, softmax.
    pub fn classify_head(&self, features: &Array2<f64>, valid_len: usize) -> Result<Vec<f64>> {
        if valid_len == 0 {
            return Err(Error::InvalidTokens("cannot classify an all-pad input".into()));
        }
        let pooled = features.slice(s![..valid_len, ..]).mean_axis(Axis(0)).unwrap().insert_axis(Axis(0));
        let logits = linear(&pooled.view(), &self.params.classifier);
        Ok(softmax(logits.as_slice().unwrap()))
    }

    /// Decoder heads for a target label: `max_len x K`. Regression heads give
    /// a real value per cell, categorical heads their argmax token.
    pub fn decode_heads(&self, features: &Array2<f64>, label: RepetitionType) -> Array2<f64> {
        let z = self.decoder_input(features, label);
        let mut out = Array2::zeros((self.config.max_len, NUM_ATTRIBUTES));
        for (k, head) in self.params.heads.iter().enumerate() {
            let y = linear(&z.view(), head);
            for l in 0..self.config.max_len {
                out[[l, k]] = if self.config.categorical { argmax(y.row(l).as_slice().unwrap()) as f64 } else { y[[l, 0]] };
            }
        }
        out
    }

    fn decoder_input(&self, features: &Array2<f64>, label: RepetitionType) -> Array2<f64> {
        let h = self.config.hidden;
        let d = self.config.label_embedding;
        let mut z = Array2::zeros((self.config.max_len, h + d));
        let n = features.nrows().min(self.config.max_len);
        z.slice_mut(s![..n, ..h]).assign(&features.slice(s![..n, ..]));
        let e = self.params.label_embedding.row(label.index());
        for mut row in z.rows_mut() {
            row.slice_mut(s![h..]).assign(&e);
        }
        z
    }

    fn layer_forward(&self, p: &EncoderLayer, x: Array2<f64>, mut rng: Option<&mut ChaCha8Rng>) -> (Array2<f64>, LayerCache) {
        let n = x.nrows();
        let heads = self.config.heads;
        let dh = self.config.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let q = linear(&x.view(), &p.query);
        let k = linear(&x.view(), &p.key);
        let v = linear(&x.view(), &p.value);
        let mut ctx = Array2::zeros((n, self.config.hidden));
        let mut probs = Vec::with_capacity(heads);
        for h in 0..heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            softmax_rows(&mut scores);
            ctx.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
            probs.push(scores);
        }
        let mut attention = linear(&ctx.view(), &p.output);
        let attention_mask = rng.as_deref_mut().map(|r| dropout_mask(attention.dim(), self.config.dropout, r));
        if let Some(m) = &attention_mask {
            attention *= m;
        }
        let (x1, norm_attention) = layer_norm(&(&x + &attention), &p.norm_attention);
        let z = linear(&x1.view(), &p.ff_in);
        let g = z.mapv(gelu);
        let mut ff = linear(&g.view(), &p.ff_out);
        let ff_mask = rng.map(|r| dropout_mask(ff.dim(), self.config.dropout, r));
        if let Some(m) = &ff_mask {
            ff *= m;
        }
        let (x2, norm_ff) = layer_norm(&(&x1 + &ff), &p.norm_ff);
        let cache = LayerCache {
            input: x,
            q,
            k,
            v,
            probs,
            ctx,
            attention_mask,
            norm_attention,
            x1,
            z,
            g,
            ff_mask,
            norm_ff,
        };
        (x2, cache)
    }

    fn layer_backward(&self, p: &EncoderLayer, c: &LayerCache, dx2: &Array2<f64>, grad: &mut EncoderLayer) -> Array2<f64> {
        let dh = self.config.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();

        let dr2 = layer_norm_backward(dx2, &c.norm_ff, &p.norm_ff, &mut grad.norm_ff);
        let mut dx1 = dr2.clone();
        let mut dff = dr2;
        if let Some(m) = &c.ff_mask {
            dff *= m;
        }
        let dg = linear_backward(&c.g.view(), &dff, &p.ff_out, &mut grad.ff_out);
        let dz = dg * &c.z.mapv(gelu_grad);
        dx1 += &linear_backward(&c.x1.view(), &dz, &p.ff_in, &mut grad.ff_in);

        let dr1 = layer_norm_backward(&dx1, &c.norm_attention, &p.norm_attention, &mut grad.norm_attention);
        let mut dx = dr1.clone();
        let mut datt = dr1;
        if let Some(m) = &c.attention_mask {
            datt *= m;
        }
        let dctx = linear_backward(&c.ctx.view(), &datt, &p.output, &mut grad.output);
        let mut dq = Array2::zeros(c.q.raw_dim());
        let mut dk = Array2::zeros(c.k.raw_dim());
        let mut dv = Array2::zeros(c.v.raw_dim());
        for (h, probs) in c.probs.iter().enumerate() {
            let cols = s![.., h * dh..(h + 1) * dh];
            let dctx_h = dctx.slice(cols);
            let dprobs = dctx_h.dot(&c.v.slice(cols).t());
            dv.slice_mut(cols).assign(&probs.t().dot(&dctx_h));
            let row_dot = (&dprobs * probs).sum_axis(Axis(1)).insert_axis(Axis(1));
            let dscores = probs * &(dprobs - &row_dot) * scale;
            dq.slice_mut(cols).assign(&dscores.dot(&c.k.slice(cols)));
            dk.slice_mut(cols).assign(&dscores.t().dot(&c.q.slice(cols)));
        }
        let x = c.input.view();
        dx += &linear_backward(&x, &dq, &p.query, &mut grad.query);
        dx += &linear_backward(&x, &dk, &p.key, &mut grad.key);
        dx += &linear_backward(&x, &dv, &p.value, &mut grad.value);
        dx
    }

    /// Full forward pass for one input and target label. `rng` enables dropout.
    pub fn forward(&self, x: &TokenMatrix, label: RepetitionType, mut rng: Option<&mut ChaCha8Rng>) -> Result<Forward> {
        self.check_tokens(x)?;
        let n = x.valid_len();
        if n == 0 {
            return Err(Error::InvalidTokens("all-pad input".into()));
        }
        let tokens = x.valid_rows().to_vec();
        let concat = self.concat_embeddings(&tokens);
        let mut h = linear(&concat.view(), &self.params.input_projection) + &self.params.positional.slice(s![..n, ..]);
        let input_mask = rng.as_deref_mut().map(|r| dropout_mask(h.dim(), self.config.dropout, r));
        if let Some(m) = &input_mask {
            h *= m;
        }
        let mut layers = Vec::with_capacity(self.params.layers.len());
        for layer in &self.params.layers {
            let (out, cache) = self.layer_forward(layer, h, rng.as_deref_mut());
            layers.push(cache);
            h = out;
        }
        let features = h;
        let pooled = features.mean_axis(Axis(0)).unwrap().insert_axis(Axis(0));
        let logits = linear(&pooled.view(), &self.params.classifier).into_raw_vec_and_offset().0;
        let probs = softmax(&logits);
        let decoder_input = self.decoder_input(&features, label);
        let head_outputs = self.params.heads.iter().map(|head| linear(&decoder_input.view(), head)).collect();
        Ok(Forward {
            tokens,
            concat,
            input_mask,
            layers,
            features,
            pooled,
            probs,
            logits,
            label,
            decoder_input,
            head_outputs,
        })
    }

    /// Accumulate parameter gradients for the given output gradients.
    pub fn backward(&self, fwd: &Forward, dout: &OutputGrads, grad: &mut Params) {
        let h = self.config.hidden;
        let n = fwd.features.nrows();

        let mut dz = Array2::<f64>::zeros(fwd.decoder_input.raw_dim());
        for (k, head) in self.params.heads.iter().enumerate() {
            dz += &linear_backward(&fwd.decoder_input.view(), &dout.heads[k], head, &mut grad.heads[k]);
        }
        let mut dfeatures = dz.slice(s![..n, ..h]).to_owned();
        let dlabel = dz.slice(s![.., h..]).sum_axis(Axis(0));
        let mut row = grad.label_embedding.row_mut(fwd.label.index());
        row += &dlabel;

        let dlogits = Array2::from_shape_vec((1, dout.logits.len()), dout.logits.clone()).unwrap();
        let dpooled = linear_backward(&fwd.pooled.view(), &dlogits, &self.params.classifier, &mut grad.classifier);
        dfeatures += &(dpooled / n as f64);

        let mut dx = dfeatures;
        for (i, cache) in fwd.layers.iter().enumerate().rev() {
            dx = self.layer_backward(&self.params.layers[i], cache, &dx, &mut grad.layers[i]);
        }
        if let Some(m) = &fwd.input_mask {
            dx *= m;
        }
        let mut pos = grad.positional.slice_mut(s![..n, ..]);
        pos += &dx;
        let dconcat = linear_backward(&fwd.concat.view(), &dx, &self.params.input_projection, &mut grad.input_projection);
        for (r, row) in fwd.tokens.iter().enumerate() {
            let mut offset = 0;
            for (k, table) in grad.embeddings.iter_mut().enumerate() {
                let w = table.ncols();
                let token = row[k] as usize;
                if token != 0 {
                    let mut dst = table.row_mut(token);
                    dst += &dconcat.slice(s![r, offset..offset + w]);
                }
                offset += w;
            }
        }
    }
}

impl Forward {
    /// Per-cell prediction for regression heads, `max_len x K`.
    pub fn regression_output(&self) -> Array2<f64> {
        let rows = self.head_outputs[0].nrows();
        Array2::from_shape_fn((rows, NUM_ATTRIBUTES), |(l, k)| self.head_outputs[k][[l, 0]])
    }

    pub fn log_probs(&self) -> Vec<f64> {
        log_softmax(&self.logits)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}
