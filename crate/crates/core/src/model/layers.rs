//! Forward and backward passes of the primitive layers, row-major `n x d`.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::params::{LayerNorm, Linear};

pub const LAYER_NORM_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

pub fn linear(x: &ArrayView2<f64>, l: &Linear) -> Array2<f64> {
    x.dot(&l.weight) + &l.bias
}

/// Accumulates parameter gradients into `grad`, returns the input gradient.
pub fn linear_backward(x: &ArrayView2<f64>, dy: &Array2<f64>, l: &Linear, grad: &mut Linear) -> Array2<f64> {
    grad.weight += &x.t().dot(dy);
    grad.bias += &dy.sum_axis(Axis(0));
    dy.dot(&l.weight.t())
}

pub struct LayerNormCache {
    normalized: Array2<f64>,
    inv_std: Array1<f64>,
}

pub fn layer_norm(x: &Array2<f64>, ln: &LayerNorm) -> (Array2<f64>, LayerNormCache) {
    let d = x.ncols() as f64;
    let mut normalized = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, s) in normalized.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        *s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        row.mapv_inplace(|v| v * *s);
    }
    let y = &normalized * &ln.gain + &ln.bias;
    (y, LayerNormCache { normalized, inv_std })
}

pub fn layer_norm_backward(dy: &Array2<f64>, cache: &LayerNormCache, ln: &LayerNorm, grad: &mut LayerNorm) -> Array2<f64> {
    grad.gain += &(dy * &cache.normalized).sum_axis(Axis(0));
    grad.bias += &dy.sum_axis(Axis(0));
    let dn = dy * &ln.gain;
    let d = dy.ncols() as f64;
    let mut dx = Array2::zeros(dy.raw_dim());
    for i in 0..dy.nrows() {
        let g = dn.row(i);
        let n = cache.normalized.row(i);
        let mean_g = g.sum() / d;
        let mean_gn = g.dot(&n) / d;
        let s = cache.inv_std[i];
        for j in 0..dy.ncols() {
            dx[[i, j]] = s * (g[j] - mean_g - n[j] * mean_gn);
        }
    }
    dx
}

/// Tanh approximation of GeLU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &mut Array2<f64>) {
    for mut row in x.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Log-softmax, stable for large logits.
pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn gelu_grad_matches_central_difference() {
        for &x in &[-3.0, -1.0, -0.1, 0.0, 0.5, 2.0] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn layer_norm_backward_matches_central_difference() {
        let x = array![[0.3, -1.2, 2.0, 0.7], [1.0, 1.5, -0.5, 0.0]];
        let ln = LayerNorm {
            gain: array![1.0, 0.5, -2.0, 1.5],
            bias: array![0.1, 0.0, 0.2, -0.3],
        };
        let upstream = array![[0.2, -0.4, 1.0, 0.3], [-1.0, 0.5, 0.25, 0.8]];
        let loss = |x: &Array2<f64>| (layer_norm(x, &ln).0 * &upstream).sum();
        let (_, cache) = layer_norm(&x, &ln);
        let mut g = LayerNorm {
            gain: Array1::zeros(4),
            bias: Array1::zeros(4),
        };
        let dx = layer_norm_backward(&upstream, &cache, &ln, &mut g);
        let h = 1e-6;
        for i in 0..2 {
            for j in 0..4 {
                let mut p = x.clone();
                p[[i, j]] += h;
                let mut m = x.clone();
                m[[i, j]] -= h;
                let fd = (loss(&p) - loss(&m)) / (2.0 * h);
                assert!((fd - dx[[i, j]]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1000.0, 1001.0, -5.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let lp = log_softmax(&[1000.0, 1001.0, -5.0]);
        assert!((lp[1].exp() - p[1]).abs() < 1e-12);
    }
}
