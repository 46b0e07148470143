//! Central finite-difference verification of the analytic loss gradients.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::terms::*;
use crate::error::{Error, Result};
use crate::geometry::AxisAlignedBox;

/// Maximum relative error a loss may show and still pass.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

// Denominator floor for the relative error. With ε = 1e-6 one ulp of an
// O(1) loss shows up as ~1e-10 in the central difference, so components
// that are exactly zero need an absolute comparison well above that.
const REL_FLOOR: f64 = 1e-5;

/// Largest relative error between `grad(point)` and the central difference
/// `(f(x + ε) - f(x - ε)) / 2ε`, over all coordinates.
pub fn finite_diff_grad_check<F, G>(f: F, grad: G, point: &[f64], epsilon: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let analytic = grad(point);
    let mut x = point.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..point.len() {
        x[i] = point[i] + epsilon;
        let up = f(&x);
        x[i] = point[i] - epsilon;
        let down = f(&x);
        x[i] = point[i];
        let numeric = (up - down) / (2.0 * epsilon);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        worst = worst.max(err);
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    SmoothL1,
    Mse,
    Ifl,
    Focal,
    CrossEntropy,
    GiouLocation,
}

impl LossKind {
    pub const ALL: [LossKind; 6] = [
        LossKind::SmoothL1,
        LossKind::Mse,
        LossKind::Ifl,
        LossKind::Focal,
        LossKind::CrossEntropy,
        LossKind::GiouLocation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::SmoothL1 => "smooth-l1",
            LossKind::Mse => "mse",
            LossKind::Ifl => "ifl",
            LossKind::Focal => "focal",
            LossKind::CrossEntropy => "cross-entropy",
            LossKind::GiouLocation => "giou-location",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown loss {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckResult {
    pub loss: LossKind,
    pub points: usize,
    pub max_rel_error: f64,
    /// Point with the largest error; the last entries hold fixed
    /// parameters (label, target index, IoU) where the loss has them.
    pub worst_point: Vec<f64>,
    pub passed: bool,
}

const EPSILON: f64 = 1e-6;
// keeps sample points away from the smooth-L1 joint and GIoU edge kinks
const KINK_MARGIN: f64 = 1e-3;

/// Runs every loss gradient against central differences at `points`
/// random smooth points. `corrupt` scales one loss's analytic gradient by
/// 1.01 as a negative control.
pub fn gradcheck_suite(
    seed: u64,
    points: usize,
    corrupt: Option<LossKind>,
) -> Vec<GradCheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LossKind::ALL
        .into_iter()
        .map(|kind| {
            let scale = if corrupt == Some(kind) { 1.01 } else { 1.0 };
            let mut worst = 0.0;
            let mut worst_point = Vec::new();
            for _ in 0..points {
                let (err, point) = check_one(kind, &mut rng, scale);
                if err > worst || worst_point.is_empty() {
                    worst = err;
                    worst_point = point;
                }
            }
            GradCheckResult {
                loss: kind,
                points,
                max_rel_error: worst,
                worst_point,
                passed: worst <= GRADCHECK_TOLERANCE,
            }
        })
        .collect()
}

fn scaled(v: Vec<f64>, s: f64) -> Vec<f64> {
    v.into_iter().map(|g| g * s).collect()
}

fn check_one(kind: LossKind, rng: &mut ChaCha8Rng, scale: f64) -> (f64, Vec<f64>) {
    const BETA: f64 = 1.0;
    match kind {
        LossKind::SmoothL1 | LossKind::Ifl | LossKind::Mse => {
            let (pred, target) = loop {
                let p: f64 = rng.gen_range(-5.0..5.0);
                let t: f64 = rng.gen_range(-5.0..5.0);
                if kind == LossKind::Mse || ((p - t).abs() - BETA).abs() > KINK_MARGIN {
                    break (p, t);
                }
            };
            let iou: f64 = rng.gen_range(0.05..1.0);
            let err = match kind {
                LossKind::SmoothL1 => finite_diff_grad_check(
                    |x| smooth_l1(x[0], x[1], BETA),
                    |x| {
                        let g = smooth_l1_grad(x[0], x[1], BETA);
                        scaled(vec![g, -g], scale)
                    },
                    &[pred, target],
                    EPSILON,
                ),
                LossKind::Mse => finite_diff_grad_check(
                    |x| mse(x[0], x[1]),
                    |x| {
                        let g = mse_grad(x[0], x[1]);
                        scaled(vec![g, -g], scale)
                    },
                    &[pred, target],
                    EPSILON,
                ),
                _ => finite_diff_grad_check(
                    |x| ifl_with_beta(x[0], x[1], iou, BETA).unwrap_or(f64::NAN),
                    |x| {
                        let g = ifl_grad(x[0], x[1], iou, BETA).unwrap_or(f64::NAN);
                        scaled(vec![g, -g], scale)
                    },
                    &[pred, target],
                    EPSILON,
                ),
            };
            let point = if kind == LossKind::Ifl {
                vec![pred, target, iou]
            } else {
                vec![pred, target]
            };
            (err, point)
        }
        LossKind::Focal => {
            let logit: f64 = rng.gen_range(-6.0..6.0);
            let label = rng.gen_bool(0.5);
            let err = finite_diff_grad_check(
                |x| focal_loss(x[0], label, 0.25, 2.0),
                |x| vec![focal_loss_grad(x[0], label, 0.25, 2.0) * scale],
                &[logit],
                EPSILON,
            );
            (err, vec![logit, label as u8 as f64])
        }
        LossKind::CrossEntropy => {
            let n = rng.gen_range(2..=8);
            let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let target = rng.gen_range(0..n);
            let err = finite_diff_grad_check(
                |x| cross_entropy(x, target).unwrap_or(f64::NAN),
                |x| scaled(cross_entropy_grad(x, target).unwrap_or_default(), scale),
                &logits,
                EPSILON,
            );
            let mut point = logits;
            point.push(target as f64);
            (err, point)
        }
        LossKind::GiouLocation => {
            let (pred, gt) = loop {
                let gt = AxisAlignedBox {
                    cx: rng.gen_range(-10.0..10.0),
                    cy: rng.gen_range(-10.0..10.0),
                    w: rng.gen_range(1.0..10.0),
                    h: rng.gen_range(1.0..10.0),
                };
                let pred = AxisAlignedBox {
                    cx: gt.cx + rng.gen_range(-6.0..6.0),
                    cy: gt.cy + rng.gen_range(-6.0..6.0),
                    w: rng.gen_range(1.0..10.0),
                    h: rng.gen_range(1.0..10.0),
                };
                if giou_is_smooth_at(&pred, &gt) {
                    break (pred, gt);
                }
            };
            let err = finite_diff_grad_check(
                |x| {
                    giou_loss(
                        &AxisAlignedBox {
                            cx: x[0],
                            cy: x[1],
                            w: x[2],
                            h: x[3],
                        },
                        &gt,
                    )
                },
                |x| {
                    let p = AxisAlignedBox {
                        cx: x[0],
                        cy: x[1],
                        w: x[2],
                        h: x[3],
                    };
                    scaled(giou_loss_grad(&p, &gt).to_vec(), scale)
                },
                &[pred.cx, pred.cy, pred.w, pred.h],
                EPSILON,
            );
            (
                err,
                vec![pred.cx, pred.cy, pred.w, pred.h, gt.cx, gt.cy, gt.w, gt.h],
            )
        }
    }
}

/// True when no pair of edges (and no overlap extent) is within the kink
/// margin, so the loss is differentiable in a neighbourhood of `pred`.
fn giou_is_smooth_at(pred: &AxisAlignedBox, gt: &AxisAlignedBox) -> bool {
    let a = pred.ltrb();
    let b = gt.ltrb();
    let edges_apart = (0..4).all(|i| (a[i] - b[i]).abs() > KINK_MARGIN);
    let iw = a[2].min(b[2]) - a[0].max(b[0]);
    let ih = a[3].min(b[3]) - a[1].max(b[1]);
    edges_apart && iw.abs() > KINK_MARGIN && ih.abs() > KINK_MARGIN
}
