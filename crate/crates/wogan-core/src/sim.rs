//! Deterministic lane-keeping simulator.
//!
//! A kinematic bicycle vehicle follows the driving-lane center with a pure
//! pursuit controller. The observed signal is BOLP, the fraction of the car's
//! rectangular footprint outside the driving lane, computed by exact polygon
//! clipping against the lane strip. A test's fitness is the maximum BOLP over
//! the run.
//!
//! The controller is intentionally imperfect: the lookahead cuts corners and
//! the steering rate is limited, so roads with sustained tight turns produce
//! large BOLP excursions. Those are the faults the test generators hunt for.

use crate::clip;
use crate::geometry::{validate_road, GeometryConfig, Point2, RoadPolyline};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("road fails validation")]
    InvalidRoad,
    #[error("no lookahead point ahead of the vehicle")]
    EndOfRoad,
    #[error("invalid sim config: {0}")]
    BadConfig(String),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Point2,
    pub heading: f64,
    pub steering: f64,
    pub speed: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Distance between axles, map units.
    pub wheelbase: f64,
    pub car_length: f64,
    pub car_width: f64,
    /// Constant travel speed, map units per second.
    pub speed: f64,
    /// Pure-pursuit lookahead arc distance along the lane center.
    pub lookahead: f64,
    /// Steering angle limit, radians.
    pub max_steer: f64,
    /// Steering slew rate limit, radians per second.
    pub max_steer_rate: f64,
    /// Integration step, seconds.
    pub dt: f64,
    /// Abort threshold in simulated seconds.
    pub max_sim_time: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        // Fixed by the calibration sweep (see the `calibrate` CLI command):
        // straight roads track essentially exactly, sustained minimum-radius
        // turns fail badly, fitness grades smoothly with curvature, and
        // uniformly random tests fail at roughly 3.6%, inside the 2-5%
        // calibration band.
        Self {
            wheelbase: 2.5,
            car_length: 4.2,
            car_width: 1.8,
            speed: 13.0,
            lookahead: 13.5,
            max_steer: 0.6,
            max_steer_rate: 0.4,
            dt: 0.05,
            max_sim_time: 60.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("wheelbase", self.wheelbase),
            ("car_length", self.car_length),
            ("car_width", self.car_width),
            ("speed", self.speed),
            ("lookahead", self.lookahead),
            ("max_steer", self.max_steer),
            ("max_steer_rate", self.max_steer_rate),
            ("dt", self.dt),
            ("max_sim_time", self.max_sim_time),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(SimError::BadConfig(format!("{name} must be positive")));
            }
        }
        if self.dt > 0.1 {
            return Err(SimError::BadConfig("dt must be at most 0.1 s".into()));
        }
        if self.lookahead <= self.wheelbase {
            return Err(SimError::BadConfig("lookahead must exceed wheelbase".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExecutionResult {
    /// Maximum BOLP over the run.
    pub fitness: f64,
    pub bolp_trace: Vec<f64>,
    pub pose_trace: Vec<VehicleState>,
    /// Simulated duration, steps * dt. Drives the deterministic campaign clock.
    pub sim_seconds: f64,
    /// Real compute time of this call.
    pub wall_time: f64,
    /// True when the vehicle reached the end of the road before the abort time.
    pub completed: bool,
}

/// Anything that can execute a road and report the result. Implemented by
/// [`SimConfig`]; campaign code is written against this trait so tests can
/// substitute stub systems.
pub trait Sut {
    fn execute(&self, road: &RoadPolyline) -> Result<ExecutionResult, SimError>;
}

impl Sut for SimConfig {
    fn execute(&self, road: &RoadPolyline) -> Result<ExecutionResult, SimError> {
        simulate(road, self)
    }
}

/// The driving lane as a strip of quads sharing mitered edges. Because
/// consecutive quads share their full boundary edge, their interiors tile the
/// strip without overlap and intersection areas can be summed per quad.
struct LaneStrip {
    left: Vec<Point2>,
    right: Vec<Point2>,
    mids: Vec<Point2>,
    seg_reach: f64,
}

impl LaneStrip {
    fn new(road: &RoadPolyline, cfg: &GeometryConfig, apron: f64) -> Self {
        let half = cfg.lane_width / 2.0;
        let mut centers = road.lane_center.clone();
        let mut headings = road.headings.clone();
        if apron > 0.0 && centers.len() >= 2 {
            let h = headings[0];
            let back = centers[0].sub(Point2::new(h.cos(), h.sin()).scale(apron));
            centers.insert(0, back);
            headings.insert(0, h);
        }
        let mut left = Vec::with_capacity(centers.len());
        let mut right = Vec::with_capacity(centers.len());
        for (p, h) in centers.iter().zip(&headings) {
            let n = Point2::new(-h.sin(), h.cos());
            left.push(p.add(n.scale(half)));
            right.push(p.sub(n.scale(half)));
        }
        let seg_reach = centers
            .windows(2)
            .map(|w| w[0].dist(w[1]))
            .fold(0.0_f64, f64::max)
            + half;
        let mids = centers
            .windows(2)
            .map(|w| w[0].add(w[1]).scale(0.5))
            .collect();
        Self {
            left,
            right,
            mids,
            seg_reach,
        }
    }

    fn footprint_outside_fraction(&self, state: &VehicleState, cfg: &SimConfig) -> f64 {
        let rect = footprint(state, cfg);
        let rect_area = cfg.car_length * cfg.car_width;
        let reach = 0.5 * (cfg.car_length.hypot(cfg.car_width)) + self.seg_reach;
        let mut inside = 0.0;
        for (i, mid) in self.mids.iter().enumerate() {
            if mid.dist(state.position) > reach {
                continue;
            }
            let quad = [self.left[i], self.left[i + 1], self.right[i + 1], self.right[i]];
            inside += clip::convex_intersection_area(&rect, &quad);
        }
        (1.0 - inside / rect_area).clamp(0.0, 1.0)
    }
}

fn footprint(state: &VehicleState, cfg: &SimConfig) -> Vec<Point2> {
    let fwd = Point2::new(state.heading.cos(), state.heading.sin());
    let side = Point2::new(-state.heading.sin(), state.heading.cos());
    let hl = cfg.car_length / 2.0;
    let hw = cfg.car_width / 2.0;
    vec![
        state.position.add(fwd.scale(hl)).add(side.scale(hw)),
        state.position.add(fwd.scale(hl)).sub(side.scale(hw)),
        state.position.sub(fwd.scale(hl)).sub(side.scale(hw)),
        state.position.sub(fwd.scale(hl)).add(side.scale(hw)),
    ]
}

/// Fraction of the car's footprint outside the driving lane, in [0, 1].
pub fn bolp(state: &VehicleState, road: &RoadPolyline, sim: &SimConfig, geo: &GeometryConfig) -> f64 {
    LaneStrip::new(road, geo, 0.0).footprint_outside_fraction(state, sim)
}

/// Pure-pursuit steering command toward the lane-center point `lookahead` arc
/// units ahead of the vehicle's closest lane-center point. Clamped to
/// `max_steer` and slew-limited relative to the current steering angle.
/// Returns `EndOfRoad` when the remaining lane is shorter than the lookahead.
pub fn controller_step(
    state: &VehicleState,
    road: &RoadPolyline,
    cfg: &SimConfig,
) -> Result<f64, SimError> {
    let lane = &road.lane_center;
    let mut closest = 0;
    let mut best = f64::INFINITY;
    for (i, p) in lane.iter().enumerate() {
        let d = p.dist(state.position);
        if d < best {
            best = d;
            closest = i;
        }
    }
    let target = walk_arc(lane, closest, cfg.lookahead).ok_or(SimError::EndOfRoad)?;

    let to_target = target.sub(state.position);
    let chord = to_target.norm().max(1e-9);
    let alpha = to_target.y.atan2(to_target.x) - state.heading;
    // Kinematic pure pursuit: curvature of the arc through the target chord.
    let raw = (2.0 * cfg.wheelbase * alpha.sin() / chord).atan();
    let clamped = raw.clamp(-cfg.max_steer, cfg.max_steer);
    let max_delta = cfg.max_steer_rate * cfg.dt;
    Ok(clamped.clamp(state.steering - max_delta, state.steering + max_delta))
}

fn walk_arc(lane: &[Point2], from: usize, distance: f64) -> Option<Point2> {
    let mut remaining = distance;
    for i in from..lane.len() - 1 {
        let seg = lane[i + 1].sub(lane[i]);
        let len = seg.norm();
        if remaining <= len {
            return Some(lane[i].add(seg.scale(remaining / len)));
        }
        remaining -= len;
    }
    None
}

/// One kinematic bicycle step: turn first, then advance along the new heading.
pub fn vehicle_step(state: &VehicleState, steering: f64, cfg: &SimConfig) -> VehicleState {
    let heading = state.heading + state.speed / cfg.wheelbase * steering.tan() * cfg.dt;
    let position = state
        .position
        .add(Point2::new(heading.cos(), heading.sin()).scale(state.speed * cfg.dt));
    VehicleState {
        position,
        heading,
        steering,
        speed: state.speed,
    }
}

/// Runs the full closed loop on a validated road. Pure function of its
/// arguments: repeated calls agree bit-exactly.
pub fn simulate(road: &RoadPolyline, cfg: &SimConfig) -> Result<ExecutionResult, SimError> {
    simulate_with(road, cfg, &GeometryConfig::default())
}

/// [`simulate`] with an explicit geometry config for non-default lane widths.
pub fn simulate_with(
    road: &RoadPolyline,
    cfg: &SimConfig,
    geo: &GeometryConfig,
) -> Result<ExecutionResult, SimError> {
    cfg.validate()?;
    let started = std::time::Instant::now();
    if !validate_road(road, geo).valid {
        return Err(SimError::InvalidRoad);
    }
    // The footprint extends half a car behind the spawn point, so the BOLP
    // strip is extended backward by one car length.
    let strip = LaneStrip::new(road, geo, cfg.car_length);
    let lane = &road.lane_center;
    let first_dir = lane[1].sub(lane[0]);
    let mut state = VehicleState {
        position: lane[0],
        heading: first_dir.y.atan2(first_dir.x),
        steering: 0.0,
        speed: cfg.speed,
    };

    let mut bolp_trace = Vec::new();
    let mut pose_trace = Vec::new();
    let mut completed = false;
    let mut t = 0.0;
    loop {
        match controller_step(&state, road, cfg) {
            Err(SimError::EndOfRoad) => {
                completed = true;
                break;
            }
            Err(e) => return Err(e),
            Ok(command) => {
                state = vehicle_step(&state, command, cfg);
                bolp_trace.push(strip.footprint_outside_fraction(&state, cfg));
                pose_trace.push(state);
                t += cfg.dt;
                if t >= cfg.max_sim_time {
                    break;
                }
            }
        }
    }

    let fitness = bolp_trace.iter().copied().fold(0.0, f64::max);
    Ok(ExecutionResult {
        fitness,
        sim_seconds: bolp_trace.len() as f64 * cfg.dt,
        wall_time: started.elapsed().as_secs_f64(),
        completed,
        bolp_trace,
        pose_trace,
    })
}
