//! The online test-generation loop.
//!
//! Starting from a batch of random valid tests executed on the system, each
//! round trains the fitness analyzer on everything executed so far, trains
//! the WGAN on a batch biased toward high-fitness tests, then draws generator
//! candidates until one is valid and predicted good enough, executes it, and
//! appends the outcome to the archive. The bias parameter alpha rises
//! linearly over the budget so early rounds explore and late rounds exploit.

use crate::baselines::random_walk_test;
use crate::geometry::{build_road, validate_road, CurvatureTest, GeometryConfig, GeometryError};
use crate::nn::{
    train_analyzer, train_wgan_step, Analyzer, Critic, Generator, NnError, WganHyper,
};
use crate::record::{Source, TestRecord, TestSuite};
use crate::sim::{SimError, Sut};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("archive is empty")]
    EmptyArchive,
    #[error("no valid candidate produced within the draw cap")]
    NoValidCandidate,
    #[error("budget {budget} is smaller than the initial random phase {n_init}")]
    BudgetTooSmall { budget: usize, n_init: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Campaign budget: a fixed number of executed tests (deterministic, the
/// default) or a wall-clock allowance mirroring a timed experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Executions(usize),
    Seconds(f64),
}

impl Default for Budget {
    fn default() -> Self {
        Budget::Executions(300)
    }
}

/// Campaign clock. Count-mode campaigns use a virtual clock that advances by
/// each execution's simulated duration, which keeps record timestamps (and
/// therefore the persisted JSONL) bit-identical across reruns. Time-mode
/// campaigns use the real monotonic clock.
pub(crate) enum Clock {
    Virtual(f64),
    Real(std::time::Instant),
}

impl Clock {
    pub fn for_budget(budget: &Budget) -> Self {
        match budget {
            Budget::Executions(_) => Clock::Virtual(0.0),
            Budget::Seconds(_) => Clock::Real(std::time::Instant::now()),
        }
    }

    pub fn now(&self) -> f64 {
        match self {
            Clock::Virtual(t) => *t,
            Clock::Real(start) => start.elapsed().as_secs_f64(),
        }
    }

    pub fn advance_sim(&mut self, sim_seconds: f64) {
        if let Clock::Virtual(t) = self {
            *t += sim_seconds;
        }
    }

    /// Measures a closure's real duration, or reports zero on the virtual
    /// clock where real durations would break determinism.
    pub fn measure<T>(&self, f: impl FnOnce() -> T) -> (T, f64) {
        match self {
            Clock::Virtual(_) => (f(), 0.0),
            Clock::Real(_) => {
                let started = std::time::Instant::now();
                let out = f();
                (out, started.elapsed().as_secs_f64())
            }
        }
    }

    pub fn exhausted(&self, executed: usize, budget: &Budget) -> bool {
        match budget {
            Budget::Executions(n) => executed >= *n,
            Budget::Seconds(s) => self.now() >= *s,
        }
    }
}

/// How training batches are drawn from the fitness bins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerScheme {
    /// Scan nonempty bins from the highest fitness midpoint downward,
    /// accepting bin i with probability sigmoid(midpoint_i + alpha). As alpha
    /// grows the top bin absorbs nearly all draws.
    DescendingScan,
    /// Pick bins with probability proportional to sigmoid(midpoint + alpha).
    /// Flattens toward uniform as alpha grows; kept for comparison.
    Proportional,
}

/// Biased batch sampler state.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerState {
    pub bins: usize,
    pub batch_size: usize,
    pub alpha: f64,
}

impl Default for SamplerState {
    fn default() -> Self {
        Self {
            bins: 10,
            batch_size: 32,
            alpha: 0.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct WoganConfig {
    /// Size of the initial random phase.
    pub n_init: usize,
    /// Multiplicative decay of the analyzer acceptance target per valid
    /// candidate.
    pub target_reducer: f64,
    /// Latent space dimension.
    pub latent_dim: usize,
    /// Test space dimension.
    pub test_dim: usize,
    pub budget: Budget,
    /// Candidate-draw cap per round.
    pub inner_loop_cap: usize,
    /// Fitness threshold above which a test counts as failing.
    pub failure_threshold: f64,
    /// Number of fitness bins for the biased sampler.
    pub bins: usize,
    pub sampler_scheme: SamplerScheme,
    pub analyzer_epochs_per_round: usize,
    pub wgan_steps_per_round: usize,
}

impl Default for WoganConfig {
    fn default() -> Self {
        Self {
            n_init: 60,
            target_reducer: 0.95,
            latent_dim: 10,
            test_dim: 5,
            budget: Budget::default(),
            inner_loop_cap: 1000,
            failure_threshold: 0.95,
            bins: 10,
            // The proportional scheme keeps campaign batches two-sided, which
            // preserves failing-test diversity on the built-in simulator; the
            // descending scan remains available and is the sharper exploiter.
            sampler_scheme: SamplerScheme::Proportional,
            analyzer_epochs_per_round: 1,
            wgan_steps_per_round: 1,
        }
    }
}

/// Bin index of a fitness value: `floor(fitness * bins)`, clamped so that
/// fitness 1.0 lands in the top bin.
pub fn bin_index(fitness: f64, bins: usize) -> usize {
    ((fitness * bins as f64).floor() as usize).min(bins - 1)
}

/// Shifted sigmoid weight `1 / (1 + exp(-(x + alpha)))`.
pub fn bin_weight(bin_midpoint: f64, alpha: f64) -> f64 {
    1.0 / (1.0 + (-(bin_midpoint + alpha)).exp())
}

/// Linear bias schedule: alpha runs from 0 to 3 over the budget.
pub fn update_batch_parameter(progress: f64) -> f64 {
    3.0 * progress.clamp(0.0, 1.0)
}

fn bin_midpoint(index: usize, bins: usize) -> f64 {
    (index as f64 + 0.5) / bins as f64
}

struct BinPools {
    /// Nonempty bins in descending midpoint order: (bin index, record indices).
    bins: Vec<(usize, Vec<usize>)>,
    /// Unused record indices per entry of `bins`; refilled when drained.
    pools: Vec<Vec<usize>>,
}

impl BinPools {
    fn build(records: &[TestRecord], bins: usize) -> Self {
        let mut table: Vec<Vec<usize>> = vec![Vec::new(); bins];
        for (i, r) in records.iter().enumerate() {
            table[bin_index(r.fitness, bins)].push(i);
        }
        let mut nonempty: Vec<(usize, Vec<usize>)> = table
            .into_iter()
            .enumerate()
            .filter(|(_, v)| !v.is_empty())
            .collect();
        nonempty.sort_by(|a, b| b.0.cmp(&a.0));
        let pools = nonempty.iter().map(|(_, v)| v.clone()).collect();
        Self {
            bins: nonempty,
            pools,
        }
    }

    /// Uniform draw without replacement within the current batch; the pool
    /// refills once its unused tests are exhausted.
    fn draw<R: Rng + ?Sized>(&mut self, slot: usize, rng: &mut R) -> usize {
        if self.pools[slot].is_empty() {
            self.pools[slot] = self.bins[slot].1.clone();
        }
        let at = rng.random_range(0..self.pools[slot].len());
        self.pools[slot].swap_remove(at)
    }
}

/// Draws a biased batch of `min(batch_size, |records|)` tests using the
/// descending acceptance scan.
pub fn sample_batch<R: Rng + ?Sized>(
    records: &[TestRecord],
    state: &SamplerState,
    rng: &mut R,
) -> Result<Vec<CurvatureTest>, EngineError> {
    sample_batch_impl(records, state, rng, SamplerScheme::DescendingScan)
}

/// Literal proportional-weights variant of [`sample_batch`].
pub fn sample_batch_proportional<R: Rng + ?Sized>(
    records: &[TestRecord],
    state: &SamplerState,
    rng: &mut R,
) -> Result<Vec<CurvatureTest>, EngineError> {
    sample_batch_impl(records, state, rng, SamplerScheme::Proportional)
}

fn sample_batch_impl<R: Rng + ?Sized>(
    records: &[TestRecord],
    state: &SamplerState,
    rng: &mut R,
    scheme: SamplerScheme,
) -> Result<Vec<CurvatureTest>, EngineError> {
    if records.is_empty() {
        return Err(EngineError::EmptyArchive);
    }
    if records.len() <= state.batch_size {
        // Capped batch: the whole archive, shuffled.
        let mut all: Vec<CurvatureTest> = records.iter().map(|r| r.test.clone()).collect();
        all.shuffle(rng);
        return Ok(all);
    }

    let mut pools = BinPools::build(records, state.bins);
    let weights: Vec<f64> = pools
        .bins
        .iter()
        .map(|(b, _)| bin_weight(bin_midpoint(*b, state.bins), state.alpha))
        .collect();
    let total_weight: f64 = weights.iter().sum();

    let mut batch = Vec::with_capacity(state.batch_size);
    for _ in 0..state.batch_size {
        let slot = match scheme {
            SamplerScheme::DescendingScan => loop {
                let mut chosen = None;
                for (slot, w) in weights.iter().enumerate() {
                    if rng.random::<f64>() < *w {
                        chosen = Some(slot);
                        break;
                    }
                }
                if let Some(slot) = chosen {
                    break slot;
                }
                // Full rejection: restart the scan.
            },
            SamplerScheme::Proportional => {
                let mut pick = rng.random::<f64>() * total_weight;
                let mut slot = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if pick < *w {
                        slot = i;
                        break;
                    }
                    pick -= w;
                }
                slot
            }
        };
        let idx = pools.draw(slot, rng);
        batch.push(records[idx].test.clone());
    }
    Ok(batch)
}

/// Closed-form probability that a single descending-scan selection lands in
/// the higher of two populated bins. Used as the distribution oracle.
pub fn scan_top_bin_probability(top_midpoint: f64, low_midpoint: f64, alpha: f64) -> f64 {
    let p_top = bin_weight(top_midpoint, alpha);
    let p_low = bin_weight(low_midpoint, alpha);
    p_top / (p_top + (1.0 - p_top) * p_low)
}

/// Draws generator candidates until one is valid and predicted at or above
/// the decaying target. The target starts at 1 and shrinks by
/// `target_reducer` per valid candidate, so a pessimistic analyzer cannot
/// stall the loop forever; after `inner_loop_cap` valid candidates the best
/// seen so far is returned.
pub fn generate_candidate<R, FS, FP, FV>(
    mut sample: FS,
    mut predict: FP,
    mut is_valid: FV,
    cfg: &WoganConfig,
    rng: &mut R,
) -> Result<CurvatureTest, EngineError>
where
    R: Rng + ?Sized,
    FS: FnMut(&mut R) -> CurvatureTest,
    FP: FnMut(&CurvatureTest) -> f64,
    FV: FnMut(&CurvatureTest) -> bool,
{
    let mut target = 1.0;
    let mut draws = 0usize;
    let mut valid_draws = 0usize;
    let mut best: Option<(f64, CurvatureTest)> = None;
    loop {
        let candidate = sample(rng);
        draws += 1;
        if !is_valid(&candidate) {
            if draws >= cfg.inner_loop_cap && valid_draws == 0 {
                return Err(EngineError::NoValidCandidate);
            }
            // Hard stop against pathological validity rates.
            if draws >= cfg.inner_loop_cap.saturating_mul(100) {
                return best
                    .map(|(_, t)| t)
                    .ok_or(EngineError::NoValidCandidate);
            }
            continue;
        }
        valid_draws += 1;
        target *= cfg.target_reducer;
        let prediction = predict(&candidate);
        if best.as_ref().map_or(true, |(b, _)| prediction > *b) {
            best = Some((prediction, candidate.clone()));
        }
        if prediction >= target {
            return Ok(candidate);
        }
        if valid_draws >= cfg.inner_loop_cap {
            return Ok(best.expect("at least one valid candidate seen").1);
        }
    }
}

/// Trained models of a finished campaign, kept for post-hoc inspection.
#[derive(Debug)]
pub struct WoganModels {
    pub generator: Generator,
    pub critic: Critic,
    pub analyzer: Analyzer,
}

#[derive(Debug)]
pub struct WoganOutcome {
    pub suite: TestSuite,
    pub models: WoganModels,
    /// Alpha at each round boundary, for schedule diagnostics.
    pub alphas: Vec<f64>,
}

/// Runs the full online loop against a system under test. Records are handed
/// to `sink` in execution order as soon as they exist.
pub fn wogan_run<S, R>(
    sut: &S,
    cfg: &WoganConfig,
    geo: &GeometryConfig,
    hyper: &WganHyper,
    rng: &mut R,
    sink: &mut dyn FnMut(&TestRecord),
) -> Result<WoganOutcome, EngineError>
where
    S: Sut,
    R: Rng + ?Sized,
{
    if let Budget::Executions(n) = cfg.budget {
        if n < cfg.n_init {
            return Err(EngineError::BudgetTooSmall {
                budget: n,
                n_init: cfg.n_init,
            });
        }
    }

    let mut clock = Clock::for_budget(&cfg.budget);
    let mut suite = TestSuite::new();
    let mut generator = Generator::new(cfg.latent_dim, cfg.test_dim, hyper, rng);
    let mut critic = Critic::new(cfg.test_dim, hyper, rng);
    let mut analyzer = Analyzer::new(cfg.test_dim, rng);

    for _ in 0..cfg.n_init {
        let (test, generation_time) = clock.measure(|| loop {
            let candidate = random_walk_test(cfg.test_dim, rng);
            if test_is_valid(&candidate, geo) {
                break candidate;
            }
        });
        execute_and_record(
            sut,
            geo,
            &mut clock,
            &mut suite,
            sink,
            test,
            Source::RandomInit,
            generation_time,
            0.0,
        )?;
    }

    let mut alpha = 0.0;
    let mut alphas = vec![alpha];
    while !clock.exhausted(suite.len(), &cfg.budget) {
        let tests: Vec<CurvatureTest> = suite.records.iter().map(|r| r.test.clone()).collect();
        let fitnesses: Vec<f64> = suite.records.iter().map(|r| r.fitness).collect();
        let sampler = SamplerState {
            bins: cfg.bins,
            batch_size: hyper.batch_size,
            alpha,
        };

        let (train_result, training_time) = clock.measure(|| -> Result<(), EngineError> {
            for _ in 0..cfg.analyzer_epochs_per_round.max(1) {
                train_analyzer(&mut analyzer, &tests, &fitnesses, 1, rng)?;
            }
            for _ in 0..cfg.wgan_steps_per_round.max(1) {
                let batch = sample_batch_impl(&suite.records, &sampler, rng, cfg.sampler_scheme)?;
                train_wgan_step(&mut generator, &mut critic, &batch, hyper, rng)?;
            }
            Ok(())
        });
        train_result?;

        let (candidate, generation_time) = clock.measure(|| {
            generate_candidate(
                |rng| generator.generate(rng),
                |t| analyzer.predict(t),
                |t| test_is_valid(t, geo),
                cfg,
                rng,
            )
        });
        execute_and_record(
            sut,
            geo,
            &mut clock,
            &mut suite,
            sink,
            candidate?,
            Source::Wogan,
            generation_time,
            training_time,
        )?;

        alpha = update_batch_parameter(campaign_progress(&cfg.budget, cfg.n_init, suite.len(), &clock));
        alphas.push(alpha);
    }

    Ok(WoganOutcome {
        suite,
        models: WoganModels {
            generator,
            critic,
            analyzer,
        },
        alphas,
    })
}

/// Fraction of the post-initialization budget consumed, in [0, 1].
fn campaign_progress(budget: &Budget, n_init: usize, executed: usize, clock: &Clock) -> f64 {
    match budget {
        Budget::Executions(n) => {
            if *n <= n_init {
                1.0
            } else {
                (executed.saturating_sub(n_init)) as f64 / (n - n_init) as f64
            }
        }
        Budget::Seconds(s) => {
            if *s <= 0.0 {
                1.0
            } else {
                clock.now() / s
            }
        }
    }
}

pub(crate) fn test_is_valid(test: &CurvatureTest, geo: &GeometryConfig) -> bool {
    build_road(test, geo)
        .map(|road| validate_road(&road, geo).valid)
        .unwrap_or(false)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn execute_and_record<S: Sut>(
    sut: &S,
    geo: &GeometryConfig,
    clock: &mut Clock,
    suite: &mut TestSuite,
    sink: &mut dyn FnMut(&TestRecord),
    test: CurvatureTest,
    source: Source,
    generation_time: f64,
    training_time: f64,
) -> Result<(), EngineError> {
    let road = build_road(&test, geo)?;
    let result = sut.execute(&road)?;
    clock.advance_sim(result.sim_seconds);
    let record = TestRecord {
        test,
        fitness: result.fitness,
        source,
        executed_at: clock.now(),
        generation_time,
        training_time,
    };
    sink(&record);
    suite.push(record);
    Ok(())
}
