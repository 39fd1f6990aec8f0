//! Surrogate fitness regressor. A small sigmoid-output network approximates
//! the test-to-fitness mapping so candidate tests can be screened without
//! running the simulator.

use super::adam::{adam_update, AdamState};
use super::net::{Activation, DenseNet, Grads};
use super::wgan::to_unit;
use super::NnError;
use crate::geometry::CurvatureTest;
use rand::seq::SliceRandom;
use rand::Rng;

pub const ANALYZER_HIDDEN: usize = 32;
pub const ANALYZER_LR: f64 = 0.001;
pub const ANALYZER_BETA1: f64 = 0.0;
pub const ANALYZER_BETA2: f64 = 0.9;
const MINI_BATCH: usize = 32;

#[derive(Clone, Debug)]
pub struct Analyzer {
    pub net: DenseNet,
    pub adam: AdamState,
}

impl Analyzer {
    pub fn new<R: Rng + ?Sized>(test_dim: usize, rng: &mut R) -> Self {
        let net = DenseNet::new(
            &[test_dim, ANALYZER_HIDDEN, ANALYZER_HIDDEN, 1],
            &[Activation::Relu, Activation::Relu, Activation::Sigmoid],
            rng,
        );
        let adam = AdamState::new(&net, ANALYZER_LR, ANALYZER_BETA1, ANALYZER_BETA2);
        Self { net, adam }
    }

    /// Predicted fitness, in (0, 1) by the sigmoid output.
    pub fn predict(&self, test: &CurvatureTest) -> f64 {
        self.net.forward(&to_unit(test)).expect("dims checked")[0]
    }
}

/// Trains the analyzer with mean squared error over shuffled mini-batches,
/// one pass per epoch. Returns the running mean loss of the final epoch.
pub fn train_analyzer<R: Rng + ?Sized>(
    analyzer: &mut Analyzer,
    tests: &[CurvatureTest],
    fitnesses: &[f64],
    epochs: usize,
    rng: &mut R,
) -> Result<f64, NnError> {
    if tests.is_empty() || tests.len() != fitnesses.len() {
        return Err(NnError::EmptyData(format!(
            "{} tests vs {} fitnesses",
            tests.len(),
            fitnesses.len()
        )));
    }
    let unit: Vec<Vec<f64>> = tests.iter().map(to_unit).collect();
    let mut order: Vec<usize> = (0..unit.len()).collect();
    let mut final_loss = 0.0;
    for _ in 0..epochs.max(1) {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(MINI_BATCH) {
            let inv = 1.0 / chunk.len() as f64;
            let mut grads = Grads::zeros_like(&analyzer.net);
            let mut batch_loss = 0.0;
            for &i in chunk {
                let trace = analyzer.net.forward_trace(&unit[i])?;
                let err = trace.output()[0] - fitnesses[i];
                batch_loss += err * err * inv;
                let pass = analyzer.net.backward(&trace, &[2.0 * err * inv]);
                grads.add_scaled(&pass.grads, 1.0);
            }
            adam_update(&mut analyzer.net, &grads, &mut analyzer.adam);
            epoch_loss += batch_loss * chunk.len() as f64;
        }
        final_loss = epoch_loss / unit.len() as f64;
    }
    Ok(final_loss)
}
