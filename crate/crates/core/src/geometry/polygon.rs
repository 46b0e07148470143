//! Planar convex-polygon primitives: hull, clipping, area and the
//! minimum-area enclosing rectangle.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Intersections smaller than this (px²) are reported as empty.
pub const SLIVER_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// Signed shoelace area; positive for counter-clockwise vertex order.
pub fn signed_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        acc += p.cross(q);
    }
    0.5 * acc
}

/// Andrew's monotone chain. Returns the hull counter-clockwise with
/// collinear points dropped.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }

    let turn = |o: Point, a: Point, b: Point| (a - o).cross(b - o);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Sutherland–Hodgman clipping of `subject` against the convex,
/// counter-clockwise polygon `clip`.
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output: Vec<Point> = subject.to_vec();
    let mut input: Vec<Point> = Vec::with_capacity(subject.len() + clip.len());

    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let edge = b - a;
        std::mem::swap(&mut input, &mut output);
        output.clear();

        let side = |p: Point| edge.cross(p - a);
        let mut s = input[input.len() - 1];
        let mut s_side = side(s);
        for &e in &input {
            let e_side = side(e);
            if e_side >= 0.0 {
                if s_side < 0.0 {
                    output.push(line_crossing(s, e, s_side, e_side));
                }
                output.push(e);
            } else if s_side >= 0.0 {
                output.push(line_crossing(s, e, s_side, e_side));
            }
            s = e;
            s_side = e_side;
        }
    }
    output
}

// Point on segment s→e where the signed edge distance crosses zero.
#[inline]
fn line_crossing(s: Point, e: Point, s_side: f64, e_side: f64) -> Point {
    let t = s_side / (s_side - e_side);
    s + (e - s) * t
}

/// Area of the intersection of two convex counter-clockwise polygons.
///
/// The argument pair is put in a fixed order before clipping so the result
/// is bitwise symmetric.
pub fn convex_polygon_intersection_area(a: &[Point], b: &[Point]) -> f64 {
    let (subject, clip) = if lex_cmp(a, b).is_le() {
        (a, b)
    } else {
        (b, a)
    };
    let area = signed_area(&clip_convex(subject, clip));
    if area < SLIVER_AREA {
        0.0
    } else {
        area
    }
}

fn lex_cmp(a: &[Point], b: &[Point]) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        a.iter()
            .zip(b)
            .map(|(p, q)| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

/// Rectangle found by [`min_area_rect`]: center, the two axis directions
/// and the extents along them.
#[derive(Debug, Clone, Copy)]
pub struct Rect {
    pub center: Point,
    pub axis_u: Point,
    pub axis_v: Point,
    pub extent_u: f64,
    pub extent_v: f64,
}

/// Rotating-calipers minimum-area enclosing rectangle of a convex CCW hull.
/// One side of the optimum is always collinear with a hull edge, so every
/// edge orientation is tried.
pub fn min_area_rect(hull: &[Point]) -> Option<Rect> {
    if hull.len() < 3 {
        return None;
    }
    let mut best: Option<(f64, Rect)> = None;
    for i in 0..hull.len() {
        let e = hull[(i + 1) % hull.len()] - hull[i];
        let len = e.norm();
        if len == 0.0 {
            continue;
        }
        let u = e * (1.0 / len);
        let v = Point::new(-u.y, u.x);
        let (mut umin, mut umax, mut vmin, mut vmax) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for &p in hull {
            let pu = p.dot(u);
            let pv = p.dot(v);
            umin = umin.min(pu);
            umax = umax.max(pu);
            vmin = vmin.min(pv);
            vmax = vmax.max(pv);
        }
        let area = (umax - umin) * (vmax - vmin);
        if best.as_ref().is_none_or(|(a, _)| area < *a) {
            let center = u * (0.5 * (umin + umax)) + v * (0.5 * (vmin + vmax));
            best = Some((
                area,
                Rect {
                    center,
                    axis_u: u,
                    axis_v: v,
                    extent_u: umax - umin,
                    extent_v: vmax - vmin,
                },
            ));
        }
    }
    best.map(|(_, r)| r)
}
