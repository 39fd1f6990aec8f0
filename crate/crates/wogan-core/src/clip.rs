//! Convex polygon clipping and area helpers for the footprint computation.

use crate::geometry::Point2;

/// Signed shoelace area; positive for counterclockwise winding.
pub fn signed_area(polygon: &[Point2]) -> f64 {
    if polygon.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..polygon.len() {
        let a = polygon[i];
        let b = polygon[(i + 1) % polygon.len()];
        acc += a.cross(b);
    }
    acc / 2.0
}

pub fn area(polygon: &[Point2]) -> f64 {
    signed_area(polygon).abs()
}

/// Sutherland-Hodgman clip of `subject` against a convex `clipper`.
/// The clipper may wind either way; the subject must be convex too for the
/// result to be the exact intersection.
pub fn clip_convex(subject: &[Point2], clipper: &[Point2]) -> Vec<Point2> {
    let mut output: Vec<Point2> = subject.to_vec();
    let ccw = signed_area(clipper) >= 0.0;
    let n = clipper.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let edge_a = clipper[i];
        let edge_b = clipper[(i + 1) % n];
        let input = std::mem::take(&mut output);
        let inside = |p: Point2| {
            let side = edge_b.sub(edge_a).cross(p.sub(edge_a));
            if ccw {
                side >= 0.0
            } else {
                side <= 0.0
            }
        };
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let cur_in = inside(cur);
            let prev_in = inside(prev);
            if cur_in {
                if !prev_in {
                    output.push(line_intersection(prev, cur, edge_a, edge_b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(line_intersection(prev, cur, edge_a, edge_b));
            }
        }
    }
    output
}

/// Area of the intersection of two convex polygons.
pub fn convex_intersection_area(a: &[Point2], b: &[Point2]) -> f64 {
    area(&clip_convex(a, b))
}

fn line_intersection(p0: Point2, p1: Point2, q0: Point2, q1: Point2) -> Point2 {
    let d = p1.sub(p0);
    let e = q1.sub(q0);
    let denom = d.cross(e);
    if denom.abs() < 1e-30 {
        return p1;
    }
    let t = q0.sub(p0).cross(e) / denom;
    p0.add(d.scale(t))
}

/// Axis-aligned rectangle as a counterclockwise polygon, for tests.
#[cfg(test)]
fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Point2> {
    vec![
        Point2::new(x0, y0),
        Point2::new(x1, y0),
        Point2::new(x1, y1),
        Point2::new(x0, y1),
    ]
}
