//! Suite-level evaluation quantities: failing-test counts, late-phase mean
//! fitness, generation-time statistics, and a pose-invariant diversity
//! measure over the failing tests.

use crate::geometry::{build_road, GeometryConfig, RoadPolyline};
use crate::record::TestSuite;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

/// Number of plane points each road is reduced to before comparing shapes.
pub const DIVERSITY_POINTS: usize = 75;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("centerline has {len} points, need at least {DIVERSITY_POINTS}")]
    TooShort { len: usize },
    #[error("suite is empty")]
    EmptySuite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteStats {
    pub executed: usize,
    /// Records with fitness strictly above the failure threshold.
    pub failing: usize,
    pub mean_fitness_final_80: f64,
    pub mean_fitness_final_20: f64,
    pub mean_generation_time: f64,
    pub sd_generation_time: f64,
    /// Median pairwise distance between failing-road shapes; absent with
    /// fewer than two failing tests.
    pub diversity: Option<f64>,
}

/// Reduces a road to 75 evenly indexed centerline points, rotates the whole
/// sequence so the first segment points straight up, and returns the 74
/// unwrapped absolute segment directions.
pub fn normalize_to_angles(road: &RoadPolyline) -> Result<Vec<f64>, MetricsError> {
    let n = road.centerline.len();
    if n < DIVERSITY_POINTS {
        return Err(MetricsError::TooShort { len: n });
    }
    let picked: Vec<_> = (0..DIVERSITY_POINTS)
        .map(|k| {
            let idx = (k as f64 * (n - 1) as f64 / (DIVERSITY_POINTS - 1) as f64).round() as usize;
            road.centerline[idx.min(n - 1)]
        })
        .collect();
    let mut angles: Vec<f64> = picked
        .windows(2)
        .map(|w| {
            let d = w[1].sub(w[0]);
            d.y.atan2(d.x)
        })
        .collect();
    let offset = FRAC_PI_2 - angles[0];
    for a in &mut angles {
        *a += offset;
    }
    for i in 1..angles.len() {
        while angles[i] - angles[i - 1] > std::f64::consts::PI {
            angles[i] -= 2.0 * std::f64::consts::PI;
        }
        while angles[i] - angles[i - 1] < -std::f64::consts::PI {
            angles[i] += 2.0 * std::f64::consts::PI;
        }
    }
    Ok(angles)
}

/// Median pairwise Euclidean distance between the angle vectors of the
/// failing tests. Absent with fewer than two failing tests. Failing roads too
/// short for the 75-point reduction are excluded.
pub fn suite_diversity(suite: &TestSuite, threshold: f64, geo: &GeometryConfig) -> Option<f64> {
    let vectors: Vec<Vec<f64>> = suite
        .failing(threshold)
        .filter_map(|r| {
            let road = build_road(&r.test, geo).ok()?;
            normalize_to_angles(&road).ok()
        })
        .collect();
    if vectors.len() < 2 {
        return None;
    }
    let mut distances = Vec::with_capacity(vectors.len() * (vectors.len() - 1) / 2);
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            let d: f64 = vectors[i]
                .iter()
                .zip(&vectors[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            distances.push(d);
        }
    }
    Some(median(&mut distances))
}

/// Full statistics of a suite under a failure threshold.
pub fn suite_stats(
    suite: &TestSuite,
    threshold: f64,
    geo: &GeometryConfig,
) -> Result<SuiteStats, MetricsError> {
    if suite.is_empty() {
        return Err(MetricsError::EmptySuite);
    }
    let n = suite.len();
    let fitnesses: Vec<f64> = suite.records.iter().map(|r| r.fitness).collect();
    // "Final 80%" discards the first fifth by execution order.
    let k80 = (n as f64 * 0.2).floor() as usize;
    let k20 = (n as f64 * 0.8).floor() as usize;
    let times: Vec<f64> = suite.records.iter().map(|r| r.generation_time).collect();
    Ok(SuiteStats {
        executed: n,
        failing: suite.failing_count(threshold),
        mean_fitness_final_80: mean(&fitnesses[k80.min(n - 1)..]),
        mean_fitness_final_20: mean(&fitnesses[k20.min(n - 1)..]),
        mean_generation_time: mean(&times),
        sd_generation_time: sample_sd(&times),
        diversity: suite_diversity(suite, threshold, geo),
    })
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}

/// Median with the midpoint convention for even counts. Sorts in place.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).expect("no NaN distances"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}
