//! Comparison algorithms: plain random search and a Frenetic-style genetic
//! algorithm with separate mutator sets for passed and failed tests.

use crate::engine::{execute_and_record, test_is_valid, Budget, Clock, EngineError};
use crate::geometry::{CurvatureTest, GeometryConfig, Point2, KAPPA_MAX};
use crate::record::{Source, TestRecord, TestSuite};
use crate::sim::Sut;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Random-walk test: the first curvature is uniform in range, each later one
/// uniform within 0.05 of its predecessor, clamped into range.
pub fn random_walk_test<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CurvatureTest {
    assert!(d >= 1);
    const WALK_STEP: f64 = 0.05;
    let mut kappas = Vec::with_capacity(d);
    let mut current = rng.random_range(-KAPPA_MAX..=KAPPA_MAX);
    kappas.push(current);
    for _ in 1..d {
        current = (current + rng.random_range(-WALK_STEP..=WALK_STEP)).clamp(-KAPPA_MAX, KAPPA_MAX);
        kappas.push(current);
    }
    CurvatureTest::new(kappas).expect("components clamped into range")
}

/// Components i.i.d. uniform over the curvature range.
pub fn uniform_random_test<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CurvatureTest {
    assert!(d >= 1);
    let kappas = (0..d)
        .map(|_| rng.random_range(-KAPPA_MAX..=KAPPA_MAX))
        .collect();
    CurvatureTest::new(kappas).expect("components drawn in range")
}

/// Raw plane-point sampler for the validity-rate comparison: `count` points
/// uniform over the map square. Not a practical search representation; the
/// sharp-turn rule rejects almost everything it produces.
pub fn uniform_plane_points<R: Rng + ?Sized>(
    count: usize,
    map_size: f64,
    rng: &mut R,
) -> Vec<Point2> {
    (0..count)
        .map(|_| {
            Point2::new(
                rng.random_range(0.0..map_size),
                rng.random_range(0.0..map_size),
            )
        })
        .collect()
}

/// Uniform-random baseline: draw, validate, execute valid tests until the
/// budget is exhausted. Invalid draws cost generation time but no budget.
pub fn random_search_run<S, R>(
    sut: &S,
    budget: Budget,
    d: usize,
    geo: &GeometryConfig,
    rng: &mut R,
    sink: &mut dyn FnMut(&TestRecord),
) -> Result<TestSuite, EngineError>
where
    S: Sut,
    R: Rng + ?Sized,
{
    let mut clock = Clock::for_budget(&budget);
    let mut suite = TestSuite::new();
    while !clock.exhausted(suite.len(), &budget) {
        let (test, generation_time) = clock.measure(|| loop {
            let candidate = uniform_random_test(d, rng);
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
            Source::RandomBaseline,
            generation_time,
            0.0,
        )?;
    }
    Ok(suite)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FreneticConfig {
    /// Size of the initial random phase.
    pub init_population: usize,
    /// Control points of random-phase roads: base +/- spread.
    pub road_points_base: usize,
    pub road_points_spread: usize,
    /// Fitness threshold separating passed from failed parents.
    pub failure_threshold: f64,
    /// Standard deviation of the passed-test Gaussian perturbation.
    pub passed_mutation_scale: f64,
    /// Probability that a passed-test mutation also grows or shrinks the
    /// road by one point.
    pub length_jitter_prob: f64,
    /// Floor probability of picking a parent uniformly instead of
    /// fitness-proportionally.
    pub uniform_parent_prob: f64,
}

impl Default for FreneticConfig {
    fn default() -> Self {
        Self {
            init_population: 60,
            road_points_base: 20,
            road_points_spread: 5,
            failure_threshold: 0.95,
            passed_mutation_scale: 0.01,
            length_jitter_prob: 0.1,
            uniform_parent_prob: 0.05,
        }
    }
}

/// The four failed-test mutators, in order: reversed curvatures, mirrored
/// (negated) curvatures, halves swapped at the ceil(d/2) split, and the
/// curvature image of traversing the road backward (reversed and negated).
pub fn frenetic_mutate_failed(test: &CurvatureTest) -> [CurvatureTest; 4] {
    let k = test.kappas();
    debug_assert!(k.len() >= 2);
    let reversed: Vec<f64> = k.iter().rev().copied().collect();
    let mirrored: Vec<f64> = k.iter().map(|v| -v).collect();
    let split = k.len().div_ceil(2);
    let mut swapped: Vec<f64> = k[split..].to_vec();
    swapped.extend_from_slice(&k[..split]);
    let reverse_cartesian: Vec<f64> = k.iter().rev().map(|v| -v).collect();
    [
        CurvatureTest::new(reversed).expect("permutation stays in range"),
        CurvatureTest::new(mirrored).expect("negation stays in range"),
        CurvatureTest::new(swapped).expect("permutation stays in range"),
        CurvatureTest::new(reverse_cartesian).expect("negation stays in range"),
    ]
}

/// Passed-test explorer: Gaussian noise on every component, clamped into
/// range, plus an occasional one-point length change.
pub fn frenetic_mutate_passed<R: Rng + ?Sized>(
    test: &CurvatureTest,
    cfg: &FreneticConfig,
    rng: &mut R,
) -> CurvatureTest {
    let mut kappas: Vec<f64> = if cfg.passed_mutation_scale > 0.0 {
        let noise = Normal::new(0.0, cfg.passed_mutation_scale).expect("positive std dev");
        test.kappas().iter().map(|k| k + noise.sample(rng)).collect()
    } else {
        test.kappas().to_vec()
    };
    if cfg.length_jitter_prob > 0.0 && rng.random::<f64>() < cfg.length_jitter_prob {
        if rng.random::<bool>() && kappas.len() > 2 {
            kappas.pop();
        } else {
            let last = *kappas.last().unwrap();
            kappas.push(last + rng.random_range(-0.05..=0.05));
        }
    }
    CurvatureTest::clamped(kappas)
}

/// Steady-state genetic loop: a random phase of variable-length random-walk
/// roads, then repeated parent selection and mutation. Failed parents get all
/// four exploit mutators, passed parents one explore mutation.
pub fn frenetic_run<S, R>(
    sut: &S,
    budget: Budget,
    cfg: &FreneticConfig,
    geo: &GeometryConfig,
    rng: &mut R,
    sink: &mut dyn FnMut(&TestRecord),
) -> Result<TestSuite, EngineError>
where
    S: Sut,
    R: Rng + ?Sized,
{
    if let Budget::Executions(n) = budget {
        if n < cfg.init_population {
            return Err(EngineError::BudgetTooSmall {
                budget: n,
                n_init: cfg.init_population,
            });
        }
    }
    let mut clock = Clock::for_budget(&budget);
    let mut suite = TestSuite::new();

    for _ in 0..cfg.init_population {
        if clock.exhausted(suite.len(), &budget) {
            break;
        }
        let (test, generation_time) = clock.measure(|| loop {
            let points = rng.random_range(
                cfg.road_points_base - cfg.road_points_spread
                    ..=cfg.road_points_base + cfg.road_points_spread,
            );
            let candidate = random_walk_test(points - 1, rng);
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
            Source::Frenetic,
            generation_time,
            0.0,
        )?;
    }

    while !clock.exhausted(suite.len(), &budget) {
        let parent = select_parent(&suite, cfg, rng).clone();
        if parent.fitness > cfg.failure_threshold {
            let mutants = frenetic_mutate_failed(&parent.test);
            let mut executed_any = false;
            for mutant in mutants {
                if clock.exhausted(suite.len(), &budget) {
                    break;
                }
                let (valid, generation_time) = clock.measure(|| test_is_valid(&mutant, geo));
                if !valid {
                    continue;
                }
                execute_and_record(
                    sut,
                    geo,
                    &mut clock,
                    &mut suite,
                    sink,
                    mutant,
                    Source::Frenetic,
                    generation_time,
                    0.0,
                )?;
                executed_any = true;
            }
            let _ = executed_any;
        } else {
            let (found, generation_time) = clock.measure(|| {
                for _ in 0..50 {
                    let mutant = frenetic_mutate_passed(&parent.test, cfg, rng);
                    if mutant.dim() >= 2 && test_is_valid(&mutant, geo) {
                        return Some(mutant);
                    }
                }
                None
            });
            if let Some(mutant) = found {
                execute_and_record(
                    sut,
                    geo,
                    &mut clock,
                    &mut suite,
                    sink,
                    mutant,
                    Source::Frenetic,
                    generation_time,
                    0.0,
                )?;
            }
        }
    }
    Ok(suite)
}

/// Fitness-proportional parent choice with a uniform floor; uniform when all
/// fitnesses are zero.
fn select_parent<'a, R: Rng + ?Sized>(
    suite: &'a TestSuite,
    cfg: &FreneticConfig,
    rng: &mut R,
) -> &'a TestRecord {
    let records = &suite.records;
    if rng.random::<f64>() < cfg.uniform_parent_prob {
        return &records[rng.random_range(0..records.len())];
    }
    let total: f64 = records.iter().map(|r| r.fitness).sum();
    if total <= 0.0 {
        return &records[rng.random_range(0..records.len())];
    }
    let mut pick = rng.random::<f64>() * total;
    for r in records {
        if pick < r.fitness {
            return r;
        }
        pick -= r.fitness;
    }
    records.last().expect("suite non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::tests_support::TurnSut;

    #[test]
    fn random_walk_respects_range_and_step() {
        let mut rng = crate::test_rng(179);
        for _ in 0..500 {
            let t = random_walk_test(5, &mut rng);
            assert_eq!(t.dim(), 5);
            for &k in t.kappas() {
                assert!(k.abs() <= KAPPA_MAX);
            }
            for w in t.kappas().windows(2) {
                // Clamping can only shrink the step.
                assert!((w[1] - w[0]).abs() <= 0.05 + 1e-12);
            }
        }
    }

    #[test]
    fn random_walk_clamps_at_bounds() {
        // With the previous component at the upper bound the next lies in
        // [0.02, 0.07].
        let mut rng = crate::test_rng(181);
        let mut seen_low = false;
        for _ in 0..2000 {
            let t = random_walk_test(2, &mut rng);
            if t.kappas()[0] > 0.0699 {
                let next = t.kappas()[1];
                assert!((0.02 - 1e-9..=KAPPA_MAX + 1e-12).contains(&next));
                seen_low = true;
            }
        }
        assert!(seen_low, "never sampled near the bound");
    }

    #[test]
    fn uniform_test_mean_is_near_zero() {
        let mut rng = crate::test_rng(191);
        let mut sum = 0.0;
        let n = 10_000;
        for _ in 0..n {
            let t = uniform_random_test(5, &mut rng);
            sum += t.kappas().iter().sum::<f64>() / 5.0;
        }
        let mean = sum / n as f64;
        assert!(mean.abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let a = random_walk_test(5, &mut crate::test_rng(193));
        let b = random_walk_test(5, &mut crate::test_rng(193));
        assert_eq!(a, b);
        let c = uniform_random_test(5, &mut crate::test_rng(193));
        let d = uniform_random_test(5, &mut crate::test_rng(193));
        assert_eq!(c, d);
    }

    #[test]
    fn failed_mutators_examples() {
        let t = CurvatureTest::new(vec![0.01, 0.02, 0.03, 0.04, 0.05]).unwrap();
        let [rev, mir, swap, revcart] = frenetic_mutate_failed(&t);
        assert_eq!(rev.kappas(), &[0.05, 0.04, 0.03, 0.02, 0.01]);
        assert_eq!(mir.kappas(), &[-0.01, -0.02, -0.03, -0.04, -0.05]);
        assert_eq!(swap.kappas(), &[0.04, 0.05, 0.01, 0.02, 0.03]);
        assert_eq!(revcart.kappas(), &[-0.05, -0.04, -0.03, -0.02, -0.01]);
    }

    #[test]
    fn failed_mutators_are_order_two() {
        let t = CurvatureTest::new(vec![0.01, -0.02, 0.03, 0.07, -0.05, 0.0]).unwrap();
        let apply = |f: fn(&CurvatureTest) -> CurvatureTest, t: &CurvatureTest| f(t);
        let rev = |t: &CurvatureTest| frenetic_mutate_failed(t)[0].clone();
        let mir = |t: &CurvatureTest| frenetic_mutate_failed(t)[1].clone();
        let swap = |t: &CurvatureTest| frenetic_mutate_failed(t)[2].clone();
        let revcart = |t: &CurvatureTest| frenetic_mutate_failed(t)[3].clone();
        assert_eq!(apply(rev, &rev(&t)), t);
        assert_eq!(apply(mir, &mir(&t)), t);
        assert_eq!(apply(revcart, &revcart(&t)), t);
        // Split swap is an involution for even lengths only.
        assert_eq!(apply(swap, &swap(&t)), t);
        let odd = CurvatureTest::new(vec![0.01, 0.02, 0.03, 0.04, 0.05]).unwrap();
        assert_ne!(apply(swap, &swap(&odd)), odd);
    }

    #[test]
    fn passed_mutation_scale_zero_is_identity() {
        let mut rng = crate::test_rng(197);
        let mut cfg = FreneticConfig::default();
        cfg.passed_mutation_scale = 0.0;
        cfg.length_jitter_prob = 0.0;
        let t = CurvatureTest::new(vec![0.01, -0.02, 0.03]).unwrap();
        assert_eq!(frenetic_mutate_passed(&t, &cfg, &mut rng), t);
    }

    #[test]
    fn passed_mutation_stays_in_range() {
        let mut rng = crate::test_rng(199);
        let cfg = FreneticConfig::default();
        let t = CurvatureTest::new(vec![0.07, -0.07, 0.0, 0.06]).unwrap();
        for _ in 0..500 {
            let m = frenetic_mutate_passed(&t, &cfg, &mut rng);
            for &k in m.kappas() {
                assert!(k.abs() <= KAPPA_MAX);
            }
        }
    }

    #[test]
    fn passed_mutation_matches_folded_normal_mean() {
        let mut rng = crate::test_rng(211);
        let mut cfg = FreneticConfig::default();
        cfg.length_jitter_prob = 0.0;
        cfg.passed_mutation_scale = 0.01;
        // Parent at zero keeps the clamp out of play at this scale.
        let t = CurvatureTest::new(vec![0.0; 5]).unwrap();
        let mut acc = 0.0;
        let n = 1000;
        for _ in 0..n {
            let m = frenetic_mutate_passed(&t, &cfg, &mut rng);
            acc += m
                .kappas()
                .iter()
                .map(|k| k.abs())
                .sum::<f64>()
                / 5.0;
        }
        let mean = acc / n as f64;
        let expected = cfg.passed_mutation_scale * (2.0 / std::f64::consts::PI).sqrt();
        assert!(
            (mean - expected).abs() < 0.2 * expected,
            "mean {mean} vs {expected}"
        );
    }

    #[test]
    fn random_search_exact_budget_and_source() {
        let mut rng = crate::test_rng(223);
        let geo = GeometryConfig::default();
        let suite = random_search_run(
            &TurnSut,
            Budget::Executions(10),
            5,
            &geo,
            &mut rng,
            &mut |_| {},
        )
        .unwrap();
        assert_eq!(suite.len(), 10);
        assert!(suite
            .records
            .iter()
            .all(|r| r.source == Source::RandomBaseline));
    }

    #[test]
    fn frenetic_budget_equals_init_is_random_phase_only() {
        let mut rng = crate::test_rng(227);
        let mut cfg = FreneticConfig::default();
        cfg.init_population = 6;
        let geo = GeometryConfig::default();
        let suite = frenetic_run(
            &TurnSut,
            Budget::Executions(6),
            &cfg,
            &geo,
            &mut rng,
            &mut |_| {},
        )
        .unwrap();
        assert_eq!(suite.len(), 6);
        // Random phase roads carry 20 +/- 5 points, so 14..=24 curvatures.
        for r in &suite.records {
            assert!((14..=24).contains(&r.test.dim()));
        }
    }

    #[test]
    fn frenetic_small_budget_rejected() {
        let mut rng = crate::test_rng(229);
        let cfg = FreneticConfig::default();
        let err = frenetic_run(
            &TurnSut,
            Budget::Executions(10),
            &cfg,
            &GeometryConfig::default(),
            &mut rng,
            &mut |_| {},
        )
        .unwrap_err();
        assert!(matches!(err, EngineError::BudgetTooSmall { .. }));
    }

    #[test]
    fn frenetic_full_run_is_budget_exact_and_valid() {
        let mut rng = crate::test_rng(233);
        let mut cfg = FreneticConfig::default();
        cfg.init_population = 8;
        // TurnSut asserts validity of every executed road.
        let suite = frenetic_run(
            &TurnSut,
            Budget::Executions(25),
            &cfg,
            &GeometryConfig::default(),
            &mut rng,
            &mut |_| {},
        )
        .unwrap();
        assert_eq!(suite.len(), 25);
    }
}
