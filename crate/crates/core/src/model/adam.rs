use super::params::Params;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamSettings {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

/// One bias-corrected Adam update; `step` counts from 1.
pub fn adam_step(params: &mut Params, grads: &Params, m: &mut Params, v: &mut Params, step: u64, s: AdamSettings) {
    let c1 = 1.0 - s.beta1.powi(step as i32);
    let c2 = 1.0 - s.beta2.powi(step as i32);
    let gs = grads.slices();
    for (((p, g), m), v) in params.slices_mut().into_iter().zip(gs).zip(m.slices_mut()).zip(v.slices_mut()) {
        for i in 0..p.len() {
            m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
            v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
            let mh = m[i] / c1;
            let vh = v[i] / c2;
            p[i] -= s.learning_rate * mh / (vh.sqrt() + s.epsilon);
        }
    }
}
