//! Black-box falsification toolkit for a lane-keeping system.
//!
//! The crate is organized around an online test-generation loop: tests are
//! curvature vectors that [`geometry`] turns into roads, [`sim`] executes a
//! road on a deterministic mock lane-assist vehicle and reports the worst
//! body-out-of-lane fraction as the test fitness, and [`engine`] runs the
//! WGAN-based generator loop that learns to produce high-fitness roads.
//! [`baselines`] provides random search and a genetic comparison algorithm,
//! and [`metrics`] computes the suite-level statistics used to compare them.

pub mod baselines;
pub mod clip;
pub mod engine;
pub mod geometry;
pub mod metrics;
pub mod nn;
pub mod record;
pub mod sim;

pub use geometry::{CurvatureTest, GeometryConfig, Point2, RoadPolyline, ValidityReport};
pub use record::{Source, TestRecord, TestSuite};
pub use sim::{ExecutionResult, SimConfig, Sut};

#[cfg(test)]
pub(crate) fn test_rng(seed: u64) -> rand_chacha::ChaCha12Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha12Rng::seed_from_u64(seed)
}
