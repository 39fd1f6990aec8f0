//! Dense network with explicit reverse-mode passes.

use super::NnError;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// y = M x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = 0.0;
            for (w, xv) in row.iter().zip(x) {
                acc += w * xv;
            }
            y[i] = acc;
        }
        y
    }

    /// y = M^T x
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let xi = x[i];
            for (yj, w) in y.iter_mut().zip(row) {
                *yj += w * xi;
            }
        }
        y
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// First derivative at pre-activation `z`. The relu subgradient at 0 is 0.
    #[inline]
    pub fn d(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }

    /// Second derivative at pre-activation `z`.
    #[inline]
    pub fn dd(self, z: f64) -> f64 {
        match self {
            Activation::Relu | Activation::Identity => 0.0,
            Activation::Tanh => {
                let t = z.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Mat,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Fully-connected network: affine map then elementwise activation per layer.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
}

/// Per-parameter gradient (or accumulator) collection shaped like a net.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Grads {
    pub weights: Vec<Mat>,
    pub biases: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| Mat::zeros(l.weights.rows, l.weights.cols))
                .collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Grads, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for m in &mut self.weights {
            for x in &mut m.data {
                *x *= s;
            }
        }
        for b in &mut self.biases {
            for x in b {
                *x *= s;
            }
        }
    }
}

/// Forward intermediates kept for the reverse passes.
#[derive(Clone, Debug)]
pub struct Trace {
    pub input: Vec<f64>,
    /// Pre-activations per layer.
    pub zs: Vec<Vec<f64>>,
    /// Post-activations per layer.
    pub acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap_or(&self.input)
    }
}

/// Result of one reverse pass, including the intermediates the second-order
/// pass consumes: `u[l]` is the gradient of the seeded output scalar with
/// respect to the layer-l activation (`u[0]` is the input gradient) and
/// `s[l]` the gradient with respect to the layer-(l+1) pre-activation.
#[derive(Clone, Debug)]
pub struct BackwardPass {
    pub grads: Grads,
    pub input_grad: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub s: Vec<Vec<f64>>,
}

impl DenseNet {
    /// He-style uniform initialization: U[-sqrt(6/fan_in), sqrt(6/fan_in)].
    pub fn new<R: Rng + ?Sized>(dims: &[usize], activations: &[Activation], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        assert_eq!(dims.len() - 1, activations.len());
        let mut layers = Vec::with_capacity(activations.len());
        for (w, &act) in dims.windows(2).zip(activations) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let mut weights = Mat::zeros(fan_out, fan_in);
            for v in &mut weights.data {
                *v = rng.random_range(-limit..limit);
            }
            layers.push(Layer {
                weights,
                bias: vec![0.0; fan_out],
                activation: act,
            });
        }
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weights.rows
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut current = input.to_vec();
        for layer in &self.layers {
            let mut z = layer.weights.matvec(&current);
            for (zi, b) in z.iter_mut().zip(&layer.bias) {
                *zi += b;
            }
            for zi in &mut z {
                *zi = layer.activation.apply(*zi);
            }
            current = z;
        }
        Ok(current)
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace, NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut zs = Vec::with_capacity(self.layers.len());
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut current = input.to_vec();
        for layer in &self.layers {
            let mut z = layer.weights.matvec(&current);
            for (zi, b) in z.iter_mut().zip(&layer.bias) {
                *zi += b;
            }
            let a: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            zs.push(z);
            current = a.clone();
            acts.push(a);
        }
        Ok(Trace {
            input: input.to_vec(),
            zs,
            acts,
        })
    }

    /// Reverse pass from an output seed (the loss gradient at the output).
    /// Returns exact parameter gradients and the input gradient.
    pub fn backward(&self, trace: &Trace, seed: &[f64]) -> BackwardPass {
        let depth = self.layers.len();
        debug_assert_eq!(seed.len(), self.output_dim());
        let mut grads = Grads::zeros_like(self);
        let mut u = vec![Vec::new(); depth + 1];
        let mut s = vec![Vec::new(); depth];
        u[depth] = seed.to_vec();
        for l in (0..depth).rev() {
            let layer = &self.layers[l];
            let z = &trace.zs[l];
            let sl: Vec<f64> = u[l + 1]
                .iter()
                .zip(z)
                .map(|(ui, &zi)| ui * layer.activation.d(zi))
                .collect();
            let below = if l == 0 { &trace.input } else { &trace.acts[l - 1] };
            for (i, &si) in sl.iter().enumerate() {
                let row = &mut grads.weights[l].data[i * layer.weights.cols..(i + 1) * layer.weights.cols];
                for (g, &a) in row.iter_mut().zip(below.iter()) {
                    *g += si * a;
                }
            }
            for (g, &si) in grads.biases[l].iter_mut().zip(&sl) {
                *g += si;
            }
            u[l] = layer.weights.matvec_t(&sl);
            s[l] = sl;
        }
        BackwardPass {
            input_grad: u[0].clone(),
            grads,
            u,
            s,
        }
    }

    /// Second-order reverse pass: parameter gradient of the scalar
    /// q = <input_grad, v> with v held constant, where input_grad comes from
    /// the `pass` seeded with 1 at a scalar output.
    ///
    /// Writing the first reverse pass as
    ///     s_l = u_l .* f'(z_l),   u_{l-1} = W_l^T s_l,   q = <u_0, v>,
    /// the adjoints of q propagate once up and once down:
    ///
    ///   up,   l = 1..L:  sbar_l   = W_l ubar_{l-1}
    ///                    dW_l    += s_l (ubar_{l-1})^T
    ///                    zseed_l  = sbar_l .* u_l .* f''(z_l)
    ///                    ubar_l   = sbar_l .* f'(z_l)
    ///   down, l = L..1:  zbar_l   = zseed_l + abar_l .* f'(z_l)
    ///                    dW_l    += zbar_l (a_{l-1})^T
    ///                    db_l    += zbar_l
    ///                    abar_{l-1} = W_l^T zbar_l
    ///
    /// with ubar_0 = v and abar_L = 0. For relu/identity layers f'' = 0, so
    /// the whole down sweep vanishes and only the rank-one up-sweep terms
    /// remain; the general form is kept for smooth activations.
    pub fn double_backward(&self, trace: &Trace, pass: &BackwardPass, v: &[f64]) -> Grads {
        let depth = self.layers.len();
        debug_assert_eq!(v.len(), self.input_dim());
        let mut grads = Grads::zeros_like(self);
        let mut zseeds: Vec<Vec<f64>> = Vec::with_capacity(depth);
        let mut ubar = v.to_vec();
        for l in 0..depth {
            let layer = &self.layers[l];
            let z = &trace.zs[l];
            let sbar = layer.weights.matvec(&ubar);
            let sl = &pass.s[l];
            for (i, &si) in sl.iter().enumerate() {
                let row = &mut grads.weights[l].data[i * layer.weights.cols..(i + 1) * layer.weights.cols];
                for (g, &ub) in row.iter_mut().zip(&ubar) {
                    *g += si * ub;
                }
            }
            let ul = &pass.u[l + 1];
            let zseed: Vec<f64> = sbar
                .iter()
                .zip(ul)
                .zip(z)
                .map(|((&sb, &ui), &zi)| sb * ui * layer.activation.dd(zi))
                .collect();
            ubar = sbar
                .iter()
                .zip(z)
                .map(|(&sb, &zi)| sb * layer.activation.d(zi))
                .collect();
            zseeds.push(zseed);
        }
        let mut abar = vec![0.0; self.output_dim()];
        for l in (0..depth).rev() {
            let layer = &self.layers[l];
            let z = &trace.zs[l];
            let zbar: Vec<f64> = zseeds[l]
                .iter()
                .zip(&abar)
                .zip(z)
                .map(|((&zs, &ab), &zi)| zs + ab * layer.activation.d(zi))
                .collect();
            let below = if l == 0 { &trace.input } else { &trace.acts[l - 1] };
            for (i, &zb) in zbar.iter().enumerate() {
                let row = &mut grads.weights[l].data[i * layer.weights.cols..(i + 1) * layer.weights.cols];
                for (g, &a) in row.iter_mut().zip(below.iter()) {
                    *g += zb * a;
                }
            }
            for (g, &zb) in grads.biases[l].iter_mut().zip(&zbar) {
                *g += zb;
            }
            abar = layer.weights.matvec_t(&zbar);
        }
        grads
    }

    /// Flattened view of all parameters, weights row-major then biases,
    /// layer by layer. Used by the finite-difference oracles.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.data.len() + l.bias.len())
            .sum()
    }

    pub fn get_param(&self, mut idx: usize) -> f64 {
        for layer in &self.layers {
            if idx < layer.weights.data.len() {
                return layer.weights.data[idx];
            }
            idx -= layer.weights.data.len();
            if idx < layer.bias.len() {
                return layer.bias[idx];
            }
            idx -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut idx: usize, value: f64) {
        for layer in &mut self.layers {
            if idx < layer.weights.data.len() {
                layer.weights.data[idx] = value;
                return;
            }
            idx -= layer.weights.data.len();
            if idx < layer.bias.len() {
                layer.bias[idx] = value;
                return;
            }
            idx -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn grad_param(grads: &Grads, mut idx: usize) -> f64 {
        for (w, b) in grads.weights.iter().zip(&grads.biases) {
            if idx < w.data.len() {
                return w.data[idx];
            }
            idx -= w.data.len();
            if idx < b.len() {
                return b[idx];
            }
            idx -= b.len();
        }
        panic!("parameter index out of range");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_layer(weights: Vec<f64>, rows: usize, cols: usize, act: Activation) -> DenseNet {
        DenseNet {
            layers: vec![Layer {
                weights: Mat {
                    rows,
                    cols,
                    data: weights,
                },
                bias: vec![0.0; rows],
                activation: act,
            }],
        }
    }

    #[test]
    fn identity_layer_passes_through() {
        let net = single_layer(vec![1.0, 0.0, 0.0, 1.0], 2, 2, Activation::Identity);
        let out = net.forward(&[3.0, -4.0]).unwrap();
        assert_eq!(out, vec![3.0, -4.0]);
    }

    #[test]
    fn relu_layer_clips_negative() {
        let net = single_layer(vec![1.0, 0.0, 0.0, 1.0], 2, 2, Activation::Relu);
        let out = net.forward(&[-1.0, 2.0]).unwrap();
        assert_eq!(out, vec![0.0, 2.0]);
    }

    #[test]
    fn two_layer_hand_computed_composition() {
        let net = DenseNet {
            layers: vec![
                Layer {
                    weights: Mat {
                        rows: 2,
                        cols: 2,
                        data: vec![0.5, -0.25, 1.0, 0.75],
                    },
                    bias: vec![0.1, -0.2],
                    activation: Activation::Tanh,
                },
                Layer {
                    weights: Mat {
                        rows: 1,
                        cols: 2,
                        data: vec![2.0, -1.0],
                    },
                    bias: vec![0.05],
                    activation: Activation::Identity,
                },
            ],
        };
        let x = [0.3, -0.6];
        let h0 = (0.5 * 0.3 + -0.25 * -0.6 + 0.1_f64).tanh();
        let h1 = (1.0 * 0.3 + 0.75 * -0.6 - 0.2_f64).tanh();
        let expected = 2.0 * h0 - 1.0 * h1 + 0.05;
        let out = net.forward(&x).unwrap();
        assert!((out[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = single_layer(vec![1.0, 0.0], 1, 2, Activation::Identity);
        assert_eq!(
            net.forward(&[1.0]).unwrap_err(),
            NnError::DimensionMismatch {
                expected: 2,
                got: 1
            }
        );
    }

    #[test]
    fn linear_net_squared_loss_matches_closed_form() {
        // y = w.x, loss = (y - t)^2, dL/dw = 2 (y - t) x.
        let net = single_layer(vec![0.4, -0.7, 0.2], 1, 3, Activation::Identity);
        let x = [1.0, 2.0, -0.5];
        let target = 0.3;
        let trace = net.forward_trace(&x).unwrap();
        let y = trace.output()[0];
        let pass = net.backward(&trace, &[2.0 * (y - target)]);
        for j in 0..3 {
            let expected = 2.0 * (y - target) * x[j];
            assert!((pass.grads.weights[0].get(0, j) - expected).abs() < 1e-12);
        }
        assert!((pass.grads.biases[0][0] - 2.0 * (y - target)).abs() < 1e-12);
    }

    #[test]
    fn inactive_relu_units_have_zero_input_gradient() {
        let net = single_layer(vec![1.0, 0.0, 0.0, -1.0], 2, 2, Activation::Relu);
        // Second unit gets z = 0 at this input; relu subgradient at 0 is 0.
        let trace = net.forward_trace(&[0.0, 0.0]).unwrap();
        let pass = net.backward(&trace, &[1.0, 1.0]);
        assert_eq!(pass.input_grad, vec![0.0, 0.0]);
    }

    fn fd_param_grads(net: &DenseNet, input: &[f64], seed: &[f64], h: f64) -> Vec<f64> {
        // Loss = <seed, output>, differentiated by central differences.
        let mut out = Vec::with_capacity(net.param_count());
        let mut probe = net.clone();
        for idx in 0..net.param_count() {
            let orig = probe.get_param(idx);
            probe.set_param(idx, orig + h);
            let up: f64 = probe
                .forward(input)
                .unwrap()
                .iter()
                .zip(seed)
                .map(|(o, s)| o * s)
                .sum();
            probe.set_param(idx, orig - h);
            let down: f64 = probe
                .forward(input)
                .unwrap()
                .iter()
                .zip(seed)
                .map(|(o, s)| o * s)
                .sum();
            probe.set_param(idx, orig);
            out.push((up - down) / (2.0 * h));
        }
        out
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = crate::test_rng(41);
        for case in 0..20 {
            let acts = [
                [Activation::Relu, Activation::Identity],
                [Activation::Tanh, Activation::Identity],
                [Activation::Sigmoid, Activation::Sigmoid],
                [Activation::Relu, Activation::Tanh],
            ][case % 4];
            let net = DenseNet::new(&[3, 5, 2], &acts, &mut rng);
            let input: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let seed: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let trace = net.forward_trace(&input).unwrap();
            let pass = net.backward(&trace, &seed);
            let fd = fd_param_grads(&net, &input, &seed, 1e-5);
            for idx in 0..net.param_count() {
                let analytic = DenseNet::grad_param(&pass.grads, idx);
                let numeric = fd[idx];
                let denom = analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(
                    ((analytic - numeric) / denom).abs() < 1e-4,
                    "case {case} param {idx}: {analytic} vs {numeric}"
                );
            }
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = crate::test_rng(43);
        let net = DenseNet::new(
            &[4, 6, 1],
            &[Activation::Tanh, Activation::Identity],
            &mut rng,
        );
        let input: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let trace = net.forward_trace(&input).unwrap();
        let pass = net.backward(&trace, &[1.0]);
        let h = 1e-6;
        for j in 0..4 {
            let mut xp = input.clone();
            xp[j] += h;
            let mut xm = input.clone();
            xm[j] -= h;
            let numeric =
                (net.forward(&xp).unwrap()[0] - net.forward(&xm).unwrap()[0]) / (2.0 * h);
            assert!((pass.input_grad[j] - numeric).abs() < 1e-7);
        }
    }
}
