//! Bias-corrected Adam.

use super::net::{DenseNet, Grads};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Grads,
    pub second_moment: Grads,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(net: &DenseNet, learning_rate: f64, beta1: f64, beta2: f64) -> Self {
        assert!((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2));
        Self {
            first_moment: Grads::zeros_like(net),
            second_moment: Grads::zeros_like(net),
            step_count: 0,
            learning_rate,
            beta1,
            beta2,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam step applied in place.
pub fn adam_update(net: &mut DenseNet, grads: &Grads, state: &mut AdamState) {
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let lr = state.learning_rate;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);

    let update = |param: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *param -= lr * m_hat / (v_hat.sqrt() + eps);
    };

    for (l, layer) in net.layers.iter_mut().enumerate() {
        for (i, p) in layer.weights.data.iter_mut().enumerate() {
            update(
                p,
                grads.weights[l].data[i],
                &mut state.first_moment.weights[l].data[i],
                &mut state.second_moment.weights[l].data[i],
            );
        }
        for (i, p) in layer.bias.iter_mut().enumerate() {
            update(
                p,
                grads.biases[l][i],
                &mut state.first_moment.biases[l][i],
                &mut state.second_moment.biases[l][i],
            );
        }
    }
}
