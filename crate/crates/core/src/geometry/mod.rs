//! Oriented-box parameterizations and the geometry built on them.
//!
//! Boxes use the long-side convention: `w` is the long side, `h` the short
//! side and `theta` (degrees, `[0, 180)`) is the direction of the long side.
//! The long-side axis is `(cos θ, sin θ)` in the same frame as the
//! coordinates, so with image coordinates (y down) positive angles turn
//! clockwise on screen.

mod nms;
mod polygon;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use nms::rotated_nms;
pub use polygon::{
    clip_convex, convex_hull, convex_polygon_intersection_area, min_area_rect, signed_area, Point,
    Rect, SLIVER_AREA,
};

/// Wraps an angle in degrees into `[0, 180)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(180.0);
    // rem_euclid can round up to the modulus for tiny negative inputs
    if r >= 180.0 {
        0.0
    } else {
        r
    }
}

/// Five-parameter long-side oriented box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct OrientedBox {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    theta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawBox {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    theta: f64,
}

impl TryFrom<RawBox> for OrientedBox {
    type Error = Error;

    fn try_from(r: RawBox) -> Result<Self> {
        OrientedBox::new(r.cx, r.cy, r.w, r.h, r.theta)
    }
}

impl From<OrientedBox> for RawBox {
    fn from(b: OrientedBox) -> Self {
        RawBox {
            cx: b.cx,
            cy: b.cy,
            w: b.w,
            h: b.h,
            theta: b.theta,
        }
    }
}

impl OrientedBox {
    /// Strict constructor: requires `w >= h > 0` and `theta` in `[0, 180]`,
    /// with 180 folded to 0. Squares have `theta` reduced modulo 90.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        check_finite(&[cx, cy, w, h, theta])?;
        if h <= 0.0 {
            return Err(Error::invalid(format!(
                "box sides must be positive, got w={w} h={h}"
            )));
        }
        if w < h {
            return Err(Error::invalid(format!(
                "long side w={w} is shorter than h={h}"
            )));
        }
        let theta = if theta == 180.0 { 0.0 } else { theta };
        if !(0.0..180.0).contains(&theta) {
            return Err(Error::invalid(format!("theta={theta} outside [0, 180)")));
        }
        Ok(Self::canonical_unchecked(cx, cy, w, h, theta))
    }

    /// Builds a box from two side lengths in any order and any angle of
    /// the first side, relabelling into long-side form.
    pub fn canonical(cx: f64, cy: f64, side_a: f64, side_b: f64, theta_a: f64) -> Result<Self> {
        check_finite(&[cx, cy, side_a, side_b, theta_a])?;
        if side_a <= 0.0 || side_b <= 0.0 {
            return Err(Error::invalid(format!(
                "box sides must be positive, got {side_a} and {side_b}"
            )));
        }
        let (w, h, theta) = if side_a >= side_b {
            (side_a, side_b, theta_a)
        } else {
            (side_b, side_a, theta_a + 90.0)
        };
        Ok(Self::canonical_unchecked(cx, cy, w, h, theta))
    }

    fn canonical_unchecked(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Self {
        let theta = if w == h {
            normalize_angle(theta) % 90.0
        } else {
            normalize_angle(theta)
        };
        Self {
            cx,
            cy,
            w,
            h,
            theta,
        }
    }

    /// Converts from the acute-angle convention, where `theta_cv` in
    /// `(0, 90]` is the direction of the side of length `w_cv`.
    pub fn from_acute90(cx: f64, cy: f64, w_cv: f64, h_cv: f64, theta_cv: f64) -> Result<Self> {
        check_finite(&[theta_cv])?;
        if !(theta_cv > 0.0 && theta_cv <= 90.0) {
            return Err(Error::invalid(format!(
                "acute angle {theta_cv} outside (0, 90]"
            )));
        }
        Self::canonical(cx, cy, w_cv, h_cv, theta_cv)
    }

    /// Minimum-area enclosing rectangle of four points, in long-side form.
    pub fn from_points(points: &[Point; 4]) -> Result<Self> {
        if !points.iter().all(|p| p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::invalid("non-finite corner coordinate"));
        }
        for i in 0..4 {
            for j in i + 1..4 {
                if (points[i] - points[j]).norm() <= 1e-12 {
                    return Err(Error::DegenerateQuad(format!(
                        "corners {i} and {j} coincide"
                    )));
                }
            }
        }
        let hull = convex_hull(points);
        if hull.len() < 3 || signed_area(&hull) <= SLIVER_AREA {
            return Err(Error::DegenerateQuad("corners are collinear".into()));
        }
        let rect = min_area_rect(&hull)
            .ok_or_else(|| Error::DegenerateQuad("no enclosing rectangle".into()))?;
        let theta = rect.axis_u.y.atan2(rect.axis_u.x).to_degrees();
        Self::canonical(
            rect.center.x,
            rect.center.y,
            rect.extent_u,
            rect.extent_v,
            theta,
        )
    }

    pub fn from_corners(quad: &QuadPolygon) -> Result<Self> {
        Self::from_points(&quad.vertices)
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// The `(x, y, w, h)` operand, ignoring orientation.
    pub fn xywh(&self) -> AxisAlignedBox {
        AxisAlignedBox {
            cx: self.cx,
            cy: self.cy,
            w: self.w,
            h: self.h,
        }
    }

    pub fn with_center(self, cx: f64, cy: f64) -> Self {
        Self { cx, cy, ..self }
    }

    pub fn to_corners(&self) -> QuadPolygon {
        let (s, c) = self.theta.to_radians().sin_cos();
        let u = Point::new(c, s) * (0.5 * self.w);
        let v = Point::new(-s, c) * (0.5 * self.h);
        let o = Point::new(self.cx, self.cy);
        QuadPolygon {
            vertices: [o + u + v, o - u + v, o - u - v, o + u - v],
        }
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "non-finite box parameter in {values:?}"
        )))
    }
}

/// Convex quadrilateral with counter-clockwise vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPolygon {
    vertices: [Point; 4],
}

impl QuadPolygon {
    /// Accepts either winding; clockwise input is reversed.
    pub fn new(mut vertices: [Point; 4]) -> Result<Self> {
        let area = signed_area(&vertices);
        if area.abs() <= SLIVER_AREA {
            return Err(Error::DegenerateQuad("zero-area quadrilateral".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        for i in 0..4 {
            let a = vertices[i];
            let b = vertices[(i + 1) % 4];
            let c = vertices[(i + 2) % 4];
            if (b - a).cross(c - b) <= 0.0 {
                return Err(Error::DegenerateQuad(format!(
                    "quadrilateral is not convex at vertex {}",
                    (i + 1) % 4
                )));
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point; 4] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn centroid(&self) -> Point {
        let s = self
            .vertices
            .iter()
            .fold(Point::new(0.0, 0.0), |acc, &p| acc + p);
        s * 0.25
    }
}

pub fn convex_intersection_area(a: &QuadPolygon, b: &QuadPolygon) -> f64 {
    convex_polygon_intersection_area(&a.vertices, &b.vertices)
}

/// Intersection over union of two oriented boxes.
pub fn rotated_iou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let inter = convex_intersection_area(&a.to_corners(), &b.to_corners());
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Axis-aligned box in center form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAlignedBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl AxisAlignedBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        check_finite(&[cx, cy, w, h])?;
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::invalid(format!(
                "box sides must be positive, got w={w} h={h}"
            )));
        }
        Ok(Self { cx, cy, w, h })
    }

    /// `[x1, y1, x2, y2]`
    pub fn ltrb(&self) -> [f64; 4] {
        [
            self.cx - 0.5 * self.w,
            self.cy - 0.5 * self.h,
            self.cx + 0.5 * self.w,
            self.cy + 0.5 * self.h,
        ]
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Generalized IoU: `IoU - (C - U) / C` with `C` the smallest enclosing box.
pub fn aabb_giou(a: &AxisAlignedBox, b: &AxisAlignedBox) -> f64 {
    let [ax1, ay1, ax2, ay2] = a.ltrb();
    let [bx1, by1, bx2, by2] = b.ltrb();
    let iw = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
    let ih = (ay2.min(by2) - ay1.max(by1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    let enclose = (ax2.max(bx2) - ax1.min(bx1)) * (ay2.max(by2) - ay1.min(by1));
    inter / union - (enclose - union) / enclose
}
