//! Road geometry: curvature-vector tests, spline interpolation, validation.
//!
//! A test is a short vector of signed curvatures. Integrating it with a fixed
//! step length from a fixed start pose yields the control points of a road;
//! a centripetal Catmull-Rom spline through those points, resampled at
//! near-uniform arc length, is what the simulator actually drives. The
//! validator rejects roads that leave the map, bend back onto themselves, or
//! turn sharper than a physical road could.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

/// Curvature magnitude bound of the test space, in 1/map-unit.
pub const KAPPA_MAX: f64 = 0.07;

/// Number of curvature components in a default (fixed-dimension) test.
pub const DEFAULT_TEST_DIM: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("curvature vector must be non-empty")]
    EmptyTest,
    #[error("curvature {value} at index {index} outside [-{KAPPA_MAX}, {KAPPA_MAX}]")]
    CurvatureOutOfRange { index: usize, value: f64 },
    #[error("interpolation needs at least 2 distinct points")]
    DegenerateInput,
    #[error("invalid geometry config: {0}")]
    BadConfig(String),
}

/// A point in the map plane, in map units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn add(self, other: Point2) -> Point2 {
        Point2::new(self.x + other.x, self.y + other.y)
    }

    pub fn sub(self, other: Point2) -> Point2 {
        Point2::new(self.x - other.x, self.y - other.y)
    }

    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product; positive when `other` is left of `self`.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point2) -> f64 {
        self.sub(other).norm()
    }
}

impl Serialize for Point2 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point2 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x, y] = <[f64; 2]>::deserialize(d)?;
        Ok(Point2::new(x, y))
    }
}

/// A test point: signed curvatures in `[-KAPPA_MAX, KAPPA_MAX]`, one per road
/// segment. Length is 5 by default; the genetic baseline uses longer vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CurvatureTest {
    kappas: Vec<f64>,
}

impl CurvatureTest {
    pub fn new(kappas: Vec<f64>) -> Result<Self, GeometryError> {
        if kappas.is_empty() {
            return Err(GeometryError::EmptyTest);
        }
        for (index, &value) in kappas.iter().enumerate() {
            if !value.is_finite() || value.abs() > KAPPA_MAX {
                return Err(GeometryError::CurvatureOutOfRange { index, value });
            }
        }
        Ok(Self { kappas })
    }

    /// Builds a test by clamping each component into range. Used by mutation
    /// operators that perturb an already valid test.
    pub fn clamped(kappas: Vec<f64>) -> Self {
        let kappas = kappas
            .into_iter()
            .map(|k| k.clamp(-KAPPA_MAX, KAPPA_MAX))
            .collect();
        Self { kappas }
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }

    pub fn dim(&self) -> usize {
        self.kappas.len()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryConfig {
    /// Side length of the square map, map units.
    pub map_size: f64,
    /// Distance between consecutive integrated control points.
    pub step_length: f64,
    /// First control point of every curvature road.
    pub start_point: Point2,
    /// Initial travel direction, radians.
    pub start_heading: f64,
    /// Centerline samples per control segment. 16 keeps a default 5-segment
    /// road above the 75 points the diversity reduction needs.
    pub samples_per_segment: usize,
    /// Full paved width.
    pub road_width: f64,
    /// Width of the driving lane.
    pub lane_width: f64,
    /// Signed offset of the driving-lane center from the road centerline,
    /// positive to the right of travel. Zero keeps the vehicle model exactly
    /// left/right symmetric, which the mirror-equivariance contract requires.
    pub lane_offset: f64,
    /// Maximum heading change between consecutive control segments, radians.
    pub sharp_turn_limit: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            map_size: 200.0,
            step_length: 15.0,
            start_point: Point2::new(100.0, 0.0),
            start_heading: FRAC_PI_2,
            samples_per_segment: 16,
            road_width: 8.0,
            lane_width: 4.0,
            lane_offset: 0.0,
            // KAPPA_MAX * step_length * 1.5: admits every in-range curvature
            // step (max 1.05 rad) while rejecting random point zigzags.
            sharp_turn_limit: 1.575,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.map_size > 0.0) {
            return Err(GeometryError::BadConfig("map_size must be positive".into()));
        }
        if !(self.step_length > 0.0) {
            return Err(GeometryError::BadConfig("step_length must be positive".into()));
        }
        if !(self.lane_width > 0.0 && self.lane_width <= self.road_width) {
            return Err(GeometryError::BadConfig(
                "need 0 < lane_width <= road_width".into(),
            ));
        }
        if self.samples_per_segment == 0 {
            return Err(GeometryError::BadConfig(
                "samples_per_segment must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// An interpolated road: the control polygon, the dense centerline, the
/// driving-lane center, and per-centerline-point tangent headings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoadPolyline {
    pub control_points: Vec<Point2>,
    pub centerline: Vec<Point2>,
    pub lane_center: Vec<Point2>,
    pub headings: Vec<f64>,
}

/// Validation outcome. `valid` is true exactly when `violations` is empty;
/// construct through [`ValidityReport::from_violations`] to keep that so.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    OutOfMap,
    SelfIntersection,
    SharpTurn,
    TooShort,
}

impl ValidityReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            valid: violations.is_empty(),
            violations,
        }
    }
}

/// Road export consumed by the replay and plot tools.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoadExport {
    pub kappas: Vec<f64>,
    pub control_points: Vec<Point2>,
    pub centerline: Vec<Point2>,
}

impl RoadExport {
    pub fn new(test: &CurvatureTest, road: &RoadPolyline) -> Self {
        Self {
            kappas: test.kappas().to_vec(),
            control_points: road.control_points.clone(),
            centerline: road.centerline.clone(),
        }
    }
}

/// Integrates a curvature vector into `d + 1` control points.
///
/// The heading turns by `kappa * step_length` before each step, so every
/// consecutive point pair is exactly `step_length` apart and negating all
/// curvatures mirrors the road across the vertical through the start point.
pub fn curvature_to_points(test: &CurvatureTest, cfg: &GeometryConfig) -> Vec<Point2> {
    let mut points = Vec::with_capacity(test.dim() + 1);
    let mut heading = cfg.start_heading;
    let mut p = cfg.start_point;
    points.push(p);
    for &kappa in test.kappas() {
        heading += kappa * cfg.step_length;
        p = p.add(Point2::new(heading.cos(), heading.sin()).scale(cfg.step_length));
        points.push(p);
    }
    points
}

/// Convenience: integrate and interpolate in one call.
pub fn build_road(test: &CurvatureTest, cfg: &GeometryConfig) -> Result<RoadPolyline, GeometryError> {
    interpolate_polyline(&curvature_to_points(test, cfg), cfg)
}

/// Interpolates control points into a dense centerline.
///
/// Uses a centripetal Catmull-Rom spline with reflected phantom endpoints,
/// resampled to `samples_per_segment` near-equal arc-length steps per control
/// segment; the control points themselves are kept as exact samples.
pub fn interpolate_polyline(
    points: &[Point2],
    cfg: &GeometryConfig,
) -> Result<RoadPolyline, GeometryError> {
    let control: Vec<Point2> = dedup_consecutive(points);
    if control.len() < 2 {
        return Err(GeometryError::DegenerateInput);
    }

    let n = control.len();
    // Phantom endpoints continue the local turning: the entry segment is the
    // exit segment rotated back by the first turn angle (and symmetrically at
    // the far end). On constant-curvature polygons this extends the
    // circumscribed polygon exactly; on straight roads it degenerates to
    // reflection.
    let phantom_first = {
        let s0 = control[1].sub(control[0]);
        let turn = if n >= 3 {
            let s1 = control[2].sub(control[1]);
            wrap_angle(s1.y.atan2(s1.x) - s0.y.atan2(s0.x))
        } else {
            0.0
        };
        control[0].sub(rotate(s0, -turn))
    };
    let phantom_last = {
        let s_last = control[n - 1].sub(control[n - 2]);
        let turn = if n >= 3 {
            let s_prev = control[n - 2].sub(control[n - 3]);
            wrap_angle(s_last.y.atan2(s_last.x) - s_prev.y.atan2(s_prev.x))
        } else {
            0.0
        };
        control[n - 1].add(rotate(s_last, turn))
    };
    let at = |i: isize| -> Point2 {
        if i < 0 {
            phantom_first
        } else if i as usize >= n {
            phantom_last
        } else {
            control[i as usize]
        }
    };

    let mut centerline = Vec::with_capacity((n - 1) * cfg.samples_per_segment + 1);
    centerline.push(control[0]);
    // Fine parameter grid per segment, then inverse arc-length lookup so the
    // emitted samples are near-uniform in arc length.
    let fine = 4 * cfg.samples_per_segment;
    let mut fine_pts = Vec::with_capacity(fine + 1);
    let mut cum = Vec::with_capacity(fine + 1);
    for seg in 0..n - 1 {
        let (p0, p1, p2, p3) = (
            at(seg as isize - 1),
            at(seg as isize),
            at(seg as isize + 1),
            at(seg as isize + 2),
        );
        fine_pts.clear();
        cum.clear();
        let mut total = 0.0;
        let mut prev = p1;
        fine_pts.push(p1);
        cum.push(0.0);
        for k in 1..=fine {
            let t = k as f64 / fine as f64;
            let q = catmull_rom_centripetal(p0, p1, p2, p3, t);
            total += q.dist(prev);
            fine_pts.push(q);
            cum.push(total);
            prev = q;
        }
        for k in 1..cfg.samples_per_segment {
            let target = total * k as f64 / cfg.samples_per_segment as f64;
            let j = cum.partition_point(|&c| c < target).min(fine);
            let (c0, c1) = (cum[j - 1], cum[j]);
            let f = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
            let q = fine_pts[j - 1].add(fine_pts[j].sub(fine_pts[j - 1]).scale(f));
            centerline.push(q);
        }
        centerline.push(p2);
    }
    let centerline = dedup_consecutive(&centerline);

    let headings = tangent_headings(&centerline);
    let lane_center = offset_polyline(&centerline, &headings, cfg.lane_offset);

    Ok(RoadPolyline {
        control_points: control,
        centerline,
        lane_center,
        headings,
    })
}

/// Checks a road against the map bounds, self-intersection, sharp-turn, and
/// minimum-length rules.
pub fn validate_road(road: &RoadPolyline, cfg: &GeometryConfig) -> ValidityReport {
    let mut violations = Vec::new();
    let r = cfg.road_width / 2.0;

    // The road enters through the bottom edge, so the bottom check is on the
    // centerline itself; the other three sides must fit the full road width.
    let out = road.centerline.iter().any(|p| {
        p.x - r < 0.0 || p.x + r > cfg.map_size || p.y + r > cfg.map_size || p.y < 0.0
    });
    if out {
        violations.push(Violation::OutOfMap);
    }

    if self_intersects(&road.centerline, cfg.road_width) {
        violations.push(Violation::SelfIntersection);
    }

    let mut sharp = false;
    for w in road.control_points.windows(3) {
        let h0 = w[1].sub(w[0]);
        let h1 = w[2].sub(w[1]);
        let turn = h1.y.atan2(h1.x) - h0.y.atan2(h0.x);
        if wrap_angle(turn).abs() > cfg.sharp_turn_limit {
            sharp = true;
            break;
        }
    }
    if sharp {
        violations.push(Violation::SharpTurn);
    }

    if polyline_length(&road.centerline) < 2.0 * cfg.step_length {
        violations.push(Violation::TooShort);
    }

    ValidityReport::from_violations(violations)
}

/// Fraction of `n` sampled control-point sequences whose interpolated road
/// validates. Sequences that cannot be interpolated count as invalid.
pub fn validity_rate<F>(mut sampler: F, n: usize, cfg: &GeometryConfig) -> f64
where
    F: FnMut() -> Vec<Point2>,
{
    assert!(n >= 1, "validity_rate needs at least one sample");
    let mut valid = 0usize;
    for _ in 0..n {
        let points = sampler();
        if let Ok(road) = interpolate_polyline(&points, cfg) {
            if validate_road(&road, cfg).valid {
                valid += 1;
            }
        }
    }
    valid as f64 / n as f64
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a.rem_euclid(2.0 * std::f64::consts::PI);
    if a > std::f64::consts::PI {
        a -= 2.0 * std::f64::consts::PI;
    }
    a
}

pub fn polyline_length(points: &[Point2]) -> f64 {
    points.windows(2).map(|w| w[0].dist(w[1])).sum()
}

fn rotate(v: Point2, angle: f64) -> Point2 {
    Point2::new(
        v.x * angle.cos() - v.y * angle.sin(),
        v.x * angle.sin() + v.y * angle.cos(),
    )
}

/// Minimum distance between two segments `a0a1` and `b0b1`.
pub fn segment_distance(a0: Point2, a1: Point2, b0: Point2, b1: Point2) -> f64 {
    if segments_intersect(a0, a1, b0, b1) {
        return 0.0;
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a.add(ab.scale(t)))
}

fn segments_intersect(a0: Point2, a1: Point2, b0: Point2, b1: Point2) -> bool {
    let d1 = a1.sub(a0).cross(b0.sub(a0));
    let d2 = a1.sub(a0).cross(b1.sub(a0));
    let d3 = b1.sub(b0).cross(a0.sub(b0));
    let d4 = b1.sub(b0).cross(a1.sub(b0));
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// True when two stretches of centerline that are far apart along the road
/// pass within `road_width` of each other in the plane. Pairs closer than
/// `2 * road_width` in arc length are the same stretch of road and are
/// skipped; the minimum legal turn radius is far larger than the road width,
/// so genuine overlaps always come from the road looping back.
fn self_intersects(centerline: &[Point2], road_width: f64) -> bool {
    let n = centerline.len();
    if n < 3 {
        return false;
    }
    let mut arc = Vec::with_capacity(n);
    arc.push(0.0);
    for w in centerline.windows(2) {
        arc.push(arc.last().unwrap() + w[0].dist(w[1]));
    }
    let window = 2.0 * road_width;
    for i in 0..n - 1 {
        for j in i + 1..n - 1 {
            if arc[j] - arc[i + 1] <= window {
                continue;
            }
            let d = segment_distance(
                centerline[i],
                centerline[i + 1],
                centerline[j],
                centerline[j + 1],
            );
            if d < road_width {
                return true;
            }
        }
    }
    false
}

fn dedup_consecutive(points: &[Point2]) -> Vec<Point2> {
    let mut out: Vec<Point2> = Vec::with_capacity(points.len());
    for &p in points {
        if out.last().map_or(true, |last| last.dist(p) > 1e-9) {
            out.push(p);
        }
    }
    out
}

fn tangent_headings(points: &[Point2]) -> Vec<f64> {
    let n = points.len();
    let mut headings = Vec::with_capacity(n);
    for i in 0..n {
        let d = if i == 0 {
            points[1].sub(points[0])
        } else if i == n - 1 {
            points[n - 1].sub(points[n - 2])
        } else {
            points[i + 1].sub(points[i - 1])
        };
        headings.push(d.y.atan2(d.x));
    }
    headings
}

fn offset_polyline(points: &[Point2], headings: &[f64], rightward: f64) -> Vec<Point2> {
    points
        .iter()
        .zip(headings)
        .map(|(p, h)| p.add(Point2::new(h.sin(), -h.cos()).scale(rightward)))
        .collect()
}

/// Centripetal Catmull-Rom evaluation between `p1` and `p2` at `t` in [0, 1].
fn catmull_rom_centripetal(p0: Point2, p1: Point2, p2: Point2, p3: Point2, t: f64) -> Point2 {
    let alpha = 0.5;
    let knot = |a: Point2, b: Point2, prev: f64| prev + a.dist(b).max(1e-12).powf(alpha);
    let t0 = 0.0;
    let t1 = knot(p0, p1, t0);
    let t2 = knot(p1, p2, t1);
    let t3 = knot(p2, p3, t2);
    let tt = t1 + t * (t2 - t1);

    let lerp = |a: Point2, b: Point2, ta: f64, tb: f64| -> Point2 {
        let w = (tt - ta) / (tb - ta);
        a.scale(1.0 - w).add(b.scale(w))
    };
    let a1 = lerp(p0, p1, t0, t1);
    let a2 = lerp(p1, p2, t1, t2);
    let a3 = lerp(p2, p3, t2, t3);
    let b1 = lerp(a1, a2, t0, t2);
    let b2 = lerp(a2, a3, t1, t3);
    lerp(b1, b2, t1, t2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_of(kappas: &[f64]) -> CurvatureTest {
        CurvatureTest::new(kappas.to_vec()).unwrap()
    }

    /// Independent route to the same points: prefix-sum headings and a
    /// vectorial sum instead of the sequential state update.
    pub(crate) fn integrate_prefix_sum(test: &CurvatureTest, cfg: &GeometryConfig) -> Vec<Point2> {
        let mut points = vec![cfg.start_point];
        for i in 0..test.dim() {
            let mut p = cfg.start_point;
            for j in 0..=i {
                let h: f64 = cfg.start_heading
                    + cfg.step_length * test.kappas()[..=j].iter().sum::<f64>();
                p = p.add(Point2::new(h.cos(), h.sin()).scale(cfg.step_length));
            }
            points.push(p);
        }
        points
    }

    #[test]
    fn zero_curvature_gives_straight_vertical_road() {
        let cfg = GeometryConfig::default();
        let pts = curvature_to_points(&test_of(&[0.0; 5]), &cfg);
        let expected = [0.0, 15.0, 30.0, 45.0, 60.0, 75.0];
        assert_eq!(pts.len(), 6);
        for (p, y) in pts.iter().zip(expected) {
            assert!((p.x - 100.0).abs() < 1e-12);
            assert!((p.y - y).abs() < 1e-12);
        }
    }

    #[test]
    fn single_turn_then_straight_heading() {
        let cfg = GeometryConfig::default();
        let pts = curvature_to_points(&test_of(&[0.07, 0.0, 0.0, 0.0, 0.0]), &cfg);
        assert!((pts[1].x - 86.988_652).abs() < 1e-5);
        assert!((pts[1].y - 7.463_566).abs() < 1e-5);
        // Remaining steps are colinear along heading pi/2 + 1.05.
        for w in pts[1..].windows(3) {
            let cross = w[1].sub(w[0]).cross(w[2].sub(w[1]));
            assert!(cross.abs() < 1e-9, "colinearity violated: {cross}");
        }
    }

    #[test]
    fn constant_curvature_points_lie_on_common_circle() {
        let cfg = GeometryConfig::default();
        let pts = curvature_to_points(&test_of(&[0.07; 5]), &cfg);
        // Constant turn angle and step length make a regular polygon; its
        // circumradius (s/2)/sin(theta/2) approximates 1/kappa.
        let theta = 0.07 * cfg.step_length;
        let r_poly = (cfg.step_length / 2.0) / (theta / 2.0).sin();
        let center = circumcenter(pts[0], pts[1], pts[2]);
        for p in &pts {
            assert!((p.dist(center) - r_poly).abs() < 1e-9);
        }
        assert!((r_poly - 1.0 / 0.07).abs() < 0.7);
    }

    #[test]
    fn matches_prefix_sum_integrator() {
        let mut rng = crate::test_rng(7);
        let cfg = GeometryConfig::default();
        for _ in 0..200 {
            let t = crate::baselines::uniform_random_test(5, &mut rng);
            let a = curvature_to_points(&t, &cfg);
            let b = integrate_prefix_sum(&t, &cfg);
            for (pa, pb) in a.iter().zip(&b) {
                assert!(pa.dist(*pb) < 1e-9);
            }
        }
    }

    #[test]
    fn closed_form_constant_arc_oracle() {
        let cfg = GeometryConfig::default();
        for &kappa in &[0.07, -0.04, 0.015] {
            let pts = curvature_to_points(&test_of(&[kappa; 5]), &cfg);
            let theta = kappa * cfg.step_length;
            for (k, p) in pts.iter().enumerate().skip(1) {
                // Sum of unit steps at headings h0 + j*theta has the closed form
                // s * sin(k*theta/2)/sin(theta/2) at mean heading h0+(k+1)theta/2.
                let mag = cfg.step_length * (k as f64 * theta / 2.0).sin() / (theta / 2.0).sin();
                let dir = cfg.start_heading + (k as f64 + 1.0) * theta / 2.0;
                let q = cfg
                    .start_point
                    .add(Point2::new(dir.cos(), dir.sin()).scale(mag));
                assert!(p.dist(q) < 1e-9);
            }
        }
    }

    #[test]
    fn mirror_symmetry_is_exact() {
        let mut rng = crate::test_rng(11);
        let cfg = GeometryConfig::default();
        for _ in 0..100 {
            let t = crate::baselines::random_walk_test(5, &mut rng);
            let mirrored = CurvatureTest::new(t.kappas().iter().map(|k| -k).collect()).unwrap();
            let a = curvature_to_points(&t, &cfg);
            let b = curvature_to_points(&mirrored, &cfg);
            for (pa, pb) in a.iter().zip(&b) {
                assert!((pa.x - (cfg.map_size - pb.x)).abs() < 1e-9);
                assert!((pa.y - pb.y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn consecutive_points_are_step_length_apart() {
        let mut rng = crate::test_rng(13);
        let cfg = GeometryConfig::default();
        for _ in 0..50 {
            let t = crate::baselines::uniform_random_test(5, &mut rng);
            let pts = curvature_to_points(&t, &cfg);
            for w in pts.windows(2) {
                assert!((w[0].dist(w[1]) - cfg.step_length).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn interpolation_passes_through_knots() {
        let mut rng = crate::test_rng(17);
        let cfg = GeometryConfig::default();
        for _ in 0..20 {
            let t = crate::baselines::random_walk_test(5, &mut rng);
            let pts = curvature_to_points(&t, &cfg);
            let road = interpolate_polyline(&pts, &cfg).unwrap();
            for p in &pts {
                let nearest = road
                    .centerline
                    .iter()
                    .map(|q| q.dist(*p))
                    .fold(f64::INFINITY, f64::min);
                assert!(nearest < 1e-9, "knot missed by {nearest}");
            }
        }
    }

    #[test]
    fn straight_road_interpolates_to_the_line() {
        let cfg = GeometryConfig::default();
        let pts = curvature_to_points(&test_of(&[0.0; 5]), &cfg);
        let road = interpolate_polyline(&pts, &cfg).unwrap();
        assert!(road.centerline.len() >= 75);
        let mut prev_y = -1.0;
        for p in &road.centerline {
            assert!((p.x - 100.0).abs() < 1e-9);
            assert!(p.y > prev_y);
            prev_y = p.y;
        }
    }

    #[test]
    fn two_point_road_is_the_segment() {
        let cfg = GeometryConfig::default();
        let road =
            interpolate_polyline(&[Point2::new(100.0, 0.0), Point2::new(100.0, 15.0)], &cfg)
                .unwrap();
        for p in &road.centerline {
            assert!((p.x - 100.0).abs() < 1e-9);
        }
        for h in &road.headings {
            assert!((h - FRAC_PI_2).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_input_is_rejected() {
        let cfg = GeometryConfig::default();
        let p = Point2::new(1.0, 2.0);
        assert_eq!(
            interpolate_polyline(&[p, p, p], &cfg).unwrap_err(),
            GeometryError::DegenerateInput
        );
    }

    #[test]
    fn constant_curvature_centerline_stays_near_arc() {
        let cfg = GeometryConfig::default();
        let pts = curvature_to_points(&test_of(&[0.07; 5]), &cfg);
        let road = interpolate_polyline(&pts, &cfg).unwrap();
        // The exact arc through the control points is their circumcircle.
        let center = circumcenter(pts[0], pts[1], pts[2]);
        let radius = pts[0].dist(center);
        for p in &road.centerline {
            assert!((p.dist(center) - radius).abs() < 0.5);
        }
    }

    #[test]
    fn straight_road_validates() {
        let cfg = GeometryConfig::default();
        let road = build_road(&test_of(&[0.0; 5]), &cfg).unwrap();
        let report = validate_road(&road, &cfg);
        assert!(report.valid, "violations: {:?}", report.violations);
    }

    #[test]
    fn closing_loop_self_intersects() {
        let cfg = GeometryConfig::default();
        let road = build_road(&test_of(&[0.07; 7]), &cfg).unwrap();
        let report = validate_road(&road, &cfg);
        assert!(report.violations.contains(&Violation::SelfIntersection));
    }

    #[test]
    fn tall_straight_road_leaves_map() {
        let cfg = GeometryConfig::default();
        let road = build_road(&test_of(&[0.0; 19]), &cfg).unwrap();
        // 19 segments of 15 = 285 > 200.
        let report = validate_road(&road, &cfg);
        assert!(report.violations.contains(&Violation::OutOfMap));
        assert!(!report.valid);
    }

    #[test]
    fn short_road_is_too_short() {
        let cfg = GeometryConfig::default();
        let road = interpolate_polyline(
            &[Point2::new(100.0, 20.0), Point2::new(100.0, 35.0)],
            &cfg,
        )
        .unwrap();
        let report = validate_road(&road, &cfg);
        assert!(report.violations.contains(&Violation::TooShort));
    }

    #[test]
    fn zigzag_control_points_trip_sharp_turn() {
        let cfg = GeometryConfig::default();
        let pts = [
            Point2::new(100.0, 20.0),
            Point2::new(100.0, 50.0),
            Point2::new(100.0, 22.0),
            Point2::new(140.0, 60.0),
        ];
        let road = interpolate_polyline(&pts, &cfg).unwrap();
        let report = validate_road(&road, &cfg);
        assert!(report.violations.contains(&Violation::SharpTurn));
    }

    #[test]
    fn in_range_curvature_never_trips_sharp_turn() {
        let mut rng = crate::test_rng(23);
        let cfg = GeometryConfig::default();
        for _ in 0..200 {
            let t = crate::baselines::uniform_random_test(5, &mut rng);
            let road = build_road(&t, &cfg).unwrap();
            let report = validate_road(&road, &cfg);
            assert!(!report.violations.contains(&Violation::SharpTurn));
        }
    }

    #[test]
    fn prefix_of_valid_road_is_valid() {
        let mut rng = crate::test_rng(29);
        let cfg = GeometryConfig::default();
        let mut checked = 0;
        while checked < 30 {
            let t = crate::baselines::random_walk_test(6, &mut rng);
            let pts = curvature_to_points(&t, &cfg);
            let road = interpolate_polyline(&pts, &cfg).unwrap();
            if !validate_road(&road, &cfg).valid {
                continue;
            }
            checked += 1;
            // Prefixes of at least 3 control points keep enough length to
            // clear the minimum-length rule.
            for len in 3..pts.len() {
                let prefix = interpolate_polyline(&pts[..len], &cfg).unwrap();
                let report = validate_road(&prefix, &cfg);
                assert!(report.valid, "prefix {len} invalid: {:?}", report.violations);
            }
        }
    }

    #[test]
    fn validity_rate_trivial_samplers() {
        let cfg = GeometryConfig::default();
        let straight = curvature_to_points(&test_of(&[0.0; 5]), &cfg);
        assert_eq!(validity_rate(|| straight.clone(), 100, &cfg), 1.0);
        let loopy = curvature_to_points(&test_of(&[0.07; 7]), &cfg);
        assert_eq!(validity_rate(|| loopy.clone(), 100, &cfg), 0.0);
    }

    #[test]
    fn curvature_test_rejects_out_of_range() {
        assert!(CurvatureTest::new(vec![0.08]).is_err());
        assert!(CurvatureTest::new(vec![]).is_err());
        assert!(CurvatureTest::new(vec![0.07, -0.07]).is_ok());
        let clamped = CurvatureTest::clamped(vec![0.2, -0.5]);
        assert_eq!(clamped.kappas(), &[0.07, -0.07]);
    }

    fn circumcenter(a: Point2, b: Point2, c: Point2) -> Point2 {
        let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
        let ux = ((a.x * a.x + a.y * a.y) * (b.y - c.y)
            + (b.x * b.x + b.y * b.y) * (c.y - a.y)
            + (c.x * c.x + c.y * c.y) * (a.y - b.y))
            / d;
        let uy = ((a.x * a.x + a.y * a.y) * (c.x - b.x)
            + (b.x * b.x + b.y * b.y) * (a.x - c.x)
            + (c.x * c.x + c.y * c.y) * (b.x - a.x))
            / d;
        Point2::new(ux, uy)
    }
}
