//! Wasserstein GAN with gradient penalty, specialized to the curvature test
//! space. All training happens in the unit-scaled space `[-1, 1]^d`; tests
//! are divided by the curvature bound on the way in and generator outputs
//! multiplied by it on the way out.

use super::adam::{adam_update, AdamState};
use super::net::{Activation, DenseNet, Grads};
use super::NnError;
use crate::geometry::{CurvatureTest, KAPPA_MAX};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const HIDDEN_WIDTH: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpGradientMode {
    /// Analytic double-backward pass.
    DoubleBackward,
    /// Central finite differences over the critic parameters. Slow; kept as a
    /// cross-check oracle.
    FiniteDifference,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct WganHyper {
    pub critic_lr: f64,
    pub generator_lr: f64,
    /// Penalty coefficient lambda.
    pub gp_coefficient: f64,
    pub critic_steps_per_generator_step: usize,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub gp_gradient: GpGradientMode,
}

impl Default for WganHyper {
    fn default() -> Self {
        Self {
            critic_lr: 5e-5,
            generator_lr: 5e-5,
            gp_coefficient: 10.0,
            critic_steps_per_generator_step: 5,
            batch_size: 32,
            adam_beta1: 0.0,
            adam_beta2: 0.9,
            gp_gradient: GpGradientMode::DoubleBackward,
        }
    }
}

/// Maps the latent cube `[-1, 1]^latent_dim` into the test space. The output
/// layer is tanh, scaled by the curvature bound, so every output is in range
/// by construction.
#[derive(Clone, Debug)]
pub struct Generator {
    pub net: DenseNet,
    pub latent_dim: usize,
    pub adam: AdamState,
}

/// Extra scale on the output-layer initialization. Plain He leaves the
/// pre-tanh outputs small, so the initial generator covers only a narrow
/// core of the test space and the online loop inherits that bias; widening
/// the initial distribution costs nothing and keeps early candidates spread.
const OUTPUT_INIT_GAIN: f64 = 3.5;

impl Generator {
    pub fn new<R: Rng + ?Sized>(latent_dim: usize, test_dim: usize, hyper: &WganHyper, rng: &mut R) -> Self {
        let mut net = DenseNet::new(
            &[latent_dim, HIDDEN_WIDTH, HIDDEN_WIDTH, test_dim],
            &[Activation::Relu, Activation::Relu, Activation::Tanh],
            rng,
        );
        if let Some(last) = net.layers.last_mut() {
            for w in &mut last.weights.data {
                *w *= OUTPUT_INIT_GAIN;
            }
        }
        let adam = AdamState::new(&net, hyper.generator_lr, hyper.adam_beta1, hyper.adam_beta2);
        Self {
            net,
            latent_dim,
            adam,
        }
    }

    pub fn sample_latent<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.latent_dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect()
    }

    /// Unit-scaled output for a latent vector.
    pub fn raw(&self, z: &[f64]) -> Vec<f64> {
        self.net.forward(z).expect("latent dim checked at build")
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> CurvatureTest {
        let z = self.sample_latent(rng);
        let out = self.raw(&z);
        CurvatureTest::clamped(out.into_iter().map(|v| v * KAPPA_MAX).collect())
    }
}

/// Scores unit-scaled tests; higher means more like the training
/// distribution.
#[derive(Clone, Debug)]
pub struct Critic {
    pub net: DenseNet,
    pub adam: AdamState,
}

impl Critic {
    pub fn new<R: Rng + ?Sized>(test_dim: usize, hyper: &WganHyper, rng: &mut R) -> Self {
        let net = DenseNet::new(
            &[test_dim, HIDDEN_WIDTH, HIDDEN_WIDTH, 1],
            &[Activation::Relu, Activation::Relu, Activation::Identity],
            rng,
        );
        let adam = AdamState::new(&net, hyper.critic_lr, hyper.adam_beta1, hyper.adam_beta2);
        Self { net, adam }
    }

    pub fn score(&self, unit_test: &[f64]) -> f64 {
        self.net.forward(unit_test).expect("dims checked")[0]
    }
}

pub fn to_unit(test: &CurvatureTest) -> Vec<f64> {
    test.kappas().iter().map(|k| k / KAPPA_MAX).collect()
}

/// Mean over the batch of `(||grad_x C(x_hat)|| - 1)^2` with
/// `x_hat = eps * real + (1 - eps) * fake`, `eps` uniform per sample.
pub fn gradient_penalty<R: Rng + ?Sized>(
    critic: &DenseNet,
    real: &[Vec<f64>],
    fake: &[Vec<f64>],
    rng: &mut R,
) -> f64 {
    let interp = interpolates(real, fake, rng);
    penalty_value(critic, &interp)
}

pub fn interpolates<R: Rng + ?Sized>(
    real: &[Vec<f64>],
    fake: &[Vec<f64>],
    rng: &mut R,
) -> Vec<Vec<f64>> {
    assert_eq!(real.len(), fake.len(), "batches must pair up");
    real.iter()
        .zip(fake)
        .map(|(r, f)| {
            let eps: f64 = rng.random();
            r.iter()
                .zip(f)
                .map(|(&rv, &fv)| eps * rv + (1.0 - eps) * fv)
                .collect()
        })
        .collect()
}

pub fn penalty_value(critic: &DenseNet, interpolates: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for x in interpolates {
        let trace = critic.forward_trace(x).expect("dims checked");
        let pass = critic.backward(&trace, &[1.0]);
        let norm: f64 = pass.input_grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        acc += (norm - 1.0) * (norm - 1.0);
    }
    acc / interpolates.len() as f64
}

/// Penalty value and its exact parameter gradient via the double-backward
/// pass. At `||g|| = 0` the penalty is not differentiable; the zero
/// subgradient is used.
pub fn penalty_param_grads(critic: &DenseNet, interpolates: &[Vec<f64>]) -> (f64, Grads) {
    let mut grads = Grads::zeros_like(critic);
    let mut value = 0.0;
    let scale = 1.0 / interpolates.len() as f64;
    for x in interpolates {
        let trace = critic.forward_trace(x).expect("dims checked");
        let pass = critic.backward(&trace, &[1.0]);
        let norm: f64 = pass.input_grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        value += (norm - 1.0) * (norm - 1.0);
        if norm < 1e-12 {
            continue;
        }
        let coeff = 2.0 * (norm - 1.0) / norm;
        let v: Vec<f64> = pass.input_grad.iter().map(|&g| coeff * g).collect();
        let sample = critic.double_backward(&trace, &pass, &v);
        grads.add_scaled(&sample, scale);
    }
    (value * scale, grads)
}

/// Finite-difference oracle for the penalty parameter gradient.
pub fn penalty_param_grads_fd(critic: &DenseNet, interpolates: &[Vec<f64>], h: f64) -> Grads {
    let mut probe = critic.clone();
    let mut grads = Grads::zeros_like(critic);
    for idx in 0..critic.param_count() {
        let orig = probe.get_param(idx);
        probe.set_param(idx, orig + h);
        let up = penalty_value(&probe, interpolates);
        probe.set_param(idx, orig - h);
        let down = penalty_value(&probe, interpolates);
        probe.set_param(idx, orig);
        set_grad_param(&mut grads, idx, (up - down) / (2.0 * h));
    }
    grads
}

fn set_grad_param(grads: &mut Grads, mut idx: usize, value: f64) {
    for (w, b) in grads.weights.iter_mut().zip(&mut grads.biases) {
        if idx < w.data.len() {
            w.data[idx] = value;
            return;
        }
        idx -= w.data.len();
        if idx < b.len() {
            b[idx] = value;
            return;
        }
        idx -= b.len();
    }
    panic!("parameter index out of range");
}

/// One round of WGAN training on a biased batch: several critic updates on
/// the Wasserstein estimate plus the gradient penalty, then one generator
/// update. Returns the last critic loss and the generator loss.
pub fn train_wgan_step<R: Rng + ?Sized>(
    gen: &mut Generator,
    critic: &mut Critic,
    real_batch: &[CurvatureTest],
    hyper: &WganHyper,
    rng: &mut R,
) -> Result<(f64, f64), NnError> {
    if real_batch.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let m = real_batch.len();
    let real_unit: Vec<Vec<f64>> = real_batch.iter().map(to_unit).collect();
    let inv_m = 1.0 / m as f64;

    let mut critic_loss = 0.0;
    for _ in 0..hyper.critic_steps_per_generator_step {
        let fake_unit: Vec<Vec<f64>> = (0..m)
            .map(|_| gen.raw(&gen.sample_latent(rng)))
            .collect();

        let mut grads = Grads::zeros_like(&critic.net);
        let mut loss = 0.0;
        // d/dtheta [ mean C(fake) - mean C(real) ]
        for fake in &fake_unit {
            let trace = critic.net.forward_trace(fake)?;
            loss += trace.output()[0] * inv_m;
            let pass = critic.net.backward(&trace, &[inv_m]);
            grads.add_scaled(&pass.grads, 1.0);
        }
        for real in &real_unit {
            let trace = critic.net.forward_trace(real)?;
            loss -= trace.output()[0] * inv_m;
            let pass = critic.net.backward(&trace, &[-inv_m]);
            grads.add_scaled(&pass.grads, 1.0);
        }
        let interp = interpolates(&real_unit, &fake_unit, rng);
        let (penalty, penalty_grads) = match hyper.gp_gradient {
            GpGradientMode::DoubleBackward => penalty_param_grads(&critic.net, &interp),
            GpGradientMode::FiniteDifference => {
                let value = penalty_value(&critic.net, &interp);
                (value, penalty_param_grads_fd(&critic.net, &interp, 1e-6))
            }
        };
        grads.add_scaled(&penalty_grads, hyper.gp_coefficient);
        loss += hyper.gp_coefficient * penalty;
        adam_update(&mut critic.net, &grads, &mut critic.adam);
        critic_loss = loss;
    }

    // Generator update: minimize -mean C(G(z)).
    let mut gen_grads = Grads::zeros_like(&gen.net);
    let mut gen_loss = 0.0;
    for _ in 0..m {
        let z = gen.sample_latent(rng);
        let g_trace = gen.net.forward_trace(&z)?;
        let c_trace = critic.net.forward_trace(g_trace.output())?;
        gen_loss -= c_trace.output()[0] * inv_m;
        let c_pass = critic.net.backward(&c_trace, &[-inv_m]);
        let g_pass = gen.net.backward(&g_trace, &c_pass.input_grad);
        gen_grads.add_scaled(&g_pass.grads, 1.0);
    }
    adam_update(&mut gen.net, &gen_grads, &mut gen.adam);

    Ok((critic_loss, gen_loss))
}
