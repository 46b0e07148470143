//! Scalar loss terms and their analytic gradients with respect to the
//! prediction arguments.

use crate::codec::sigmoid;
use crate::error::{Error, Result};
use crate::geometry::{aabb_giou, AxisAlignedBox};

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn smooth_l1(pred: f64, target: f64, beta: f64) -> f64 {
    let x = (pred - target).abs();
    if x < beta {
        0.5 * x * x / beta
    } else {
        x - 0.5 * beta
    }
}

/// d smooth_l1 / d pred
pub fn smooth_l1_grad(pred: f64, target: f64, beta: f64) -> f64 {
    let x = pred - target;
    if x.abs() < beta {
        x / beta
    } else {
        x.signum()
    }
}

/// IoU-aware re-weighting factor `|-ln(iou)| + 1`.
pub fn ifl_weight(iou: f64) -> f64 {
    (-iou.ln()).abs() + 1.0
}

fn check_iou(iou: f64) -> Result<()> {
    if iou > 0.0 && iou <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("IoU must lie in (0, 1], got {iou}")))
    }
}

/// IoU-aware residual loss: smooth-L1 (β = 1) scaled by [`ifl_weight`].
pub fn ifl(pred: f64, target: f64, iou: f64) -> Result<f64> {
    ifl_with_beta(pred, target, iou, 1.0)
}

pub fn ifl_with_beta(pred: f64, target: f64, iou: f64, beta: f64) -> Result<f64> {
    check_iou(iou)?;
    Ok(smooth_l1(pred, target, beta) * ifl_weight(iou))
}

/// d ifl / d pred at fixed IoU.
pub fn ifl_grad(pred: f64, target: f64, iou: f64, beta: f64) -> Result<f64> {
    check_iou(iou)?;
    Ok(smooth_l1_grad(pred, target, beta) * ifl_weight(iou))
}

pub fn mse(pred: f64, target: f64) -> f64 {
    let d = pred - target;
    d * d
}

pub fn mse_grad(pred: f64, target: f64) -> f64 {
    2.0 * (pred - target)
}

/// Binary focal loss `-α_t (1 - p_t)^γ ln p_t` with `p = sigmoid(logit)`.
pub fn focal_loss(logit: f64, label: bool, alpha: f64, gamma: f64) -> f64 {
    // ln p = -softplus(-z), ln(1 - p) = -softplus(z)
    let p = sigmoid(logit);
    if label {
        alpha * (1.0 - p).powf(gamma) * softplus(-logit)
    } else {
        (1.0 - alpha) * p.powf(gamma) * softplus(logit)
    }
}

/// d focal_loss / d logit
pub fn focal_loss_grad(logit: f64, label: bool, alpha: f64, gamma: f64) -> f64 {
    let p = sigmoid(logit);
    if label {
        let q = 1.0 - p;
        alpha * q.powf(gamma) * (gamma * p * -softplus(-logit) - q)
    } else {
        (1.0 - alpha) * p.powf(gamma) * (p + gamma * (1.0 - p) * softplus(logit))
    }
}

/// Binary cross-entropy on a logit against a soft label in `[0, 1]`.
pub fn bce_with_logits(logit: f64, label: f64) -> f64 {
    label * softplus(-logit) + (1.0 - label) * softplus(logit)
}

pub fn bce_with_logits_grad(logit: f64, label: f64) -> f64 {
    sigmoid(logit) - label
}

/// `-ln softmax(logits)[target]`
pub fn cross_entropy(logits: &[f64], target: usize) -> Result<f64> {
    if target >= logits.len() {
        return Err(Error::invalid(format!(
            "target index {target} out of range for {} logits",
            logits.len()
        )));
    }
    Ok((log_sum_exp(logits) - logits[target]).max(0.0))
}

/// `softmax(logits) - onehot(target)`
pub fn cross_entropy_grad(logits: &[f64], target: usize) -> Result<Vec<f64>> {
    if target >= logits.len() {
        return Err(Error::invalid(format!(
            "target index {target} out of range for {} logits",
            logits.len()
        )));
    }
    let lse = log_sum_exp(logits);
    Ok(logits
        .iter()
        .enumerate()
        .map(|(i, &z)| (z - lse).exp() - if i == target { 1.0 } else { 0.0 })
        .collect())
}

/// Cross-entropy against a non-negative soft label, normalised to sum 1.
pub fn soft_cross_entropy(logits: &[f64], label: &[f64]) -> Result<f64> {
    if logits.len() != label.len() || logits.is_empty() {
        return Err(Error::invalid(format!(
            "soft label has {} entries for {} logits",
            label.len(),
            logits.len()
        )));
    }
    let mass: f64 = label.iter().sum();
    if mass.is_nan() || mass <= 0.0 {
        return Err(Error::invalid("soft label has no mass"));
    }
    let lse = log_sum_exp(logits);
    Ok(label
        .iter()
        .zip(logits)
        .map(|(q, z)| q / mass * (lse - z))
        .sum())
}

/// Location loss `1 - GIoU`.
pub fn giou_loss(pred: &AxisAlignedBox, target: &AxisAlignedBox) -> f64 {
    1.0 - aabb_giou(pred, target)
}

/// Gradient of [`giou_loss`] with respect to the predicted `(cx, cy, w, h)`.
pub fn giou_loss_grad(pred: &AxisAlignedBox, target: &AxisAlignedBox) -> [f64; 4] {
    let [ax1, ay1, ax2, ay2] = pred.ltrb();
    let [bx1, by1, bx2, by2] = target.ltrb();

    let iw_raw = ax2.min(bx2) - ax1.max(bx1);
    let ih_raw = ay2.min(by2) - ay1.max(by1);
    let (iw, ih) = (iw_raw.max(0.0), ih_raw.max(0.0));
    let inter = iw * ih;
    let area_a = pred.w * pred.h;
    let union = area_a + target.w * target.h - inter;
    let cw = ax2.max(bx2) - ax1.min(bx1);
    let ch = ay2.max(by2) - ay1.min(by1);
    let enclose = cw * ch;

    // L = 2 - I/U - U/C with U = A_a + A_b - I
    let d_inter = -(union + inter) / (union * union) + 1.0 / enclose;
    let d_area_a = inter / (union * union) - 1.0 / enclose;
    let d_enclose = union / (enclose * enclose);

    // partials of iw, ih, cw, ch with respect to the four edges of the prediction
    let (diw_dx1, diw_dx2) = if iw_raw > 0.0 {
        (-((ax1 > bx1) as i32 as f64), (ax2 < bx2) as i32 as f64)
    } else {
        (0.0, 0.0)
    };
    let (dih_dy1, dih_dy2) = if ih_raw > 0.0 {
        (-((ay1 > by1) as i32 as f64), (ay2 < by2) as i32 as f64)
    } else {
        (0.0, 0.0)
    };
    let (dcw_dx1, dcw_dx2) = (-((ax1 < bx1) as i32 as f64), (ax2 > bx2) as i32 as f64);
    let (dch_dy1, dch_dy2) = (-((ay1 < by1) as i32 as f64), (ay2 > by2) as i32 as f64);

    let dl_dx1 = d_inter * ih * diw_dx1 + d_enclose * ch * dcw_dx1;
    let dl_dx2 = d_inter * ih * diw_dx2 + d_enclose * ch * dcw_dx2;
    let dl_dy1 = d_inter * iw * dih_dy1 + d_enclose * cw * dch_dy1;
    let dl_dy2 = d_inter * iw * dih_dy2 + d_enclose * cw * dch_dy2;

    [
        dl_dx1 + dl_dx2,
        dl_dy1 + dl_dy2,
        0.5 * (dl_dx2 - dl_dx1) + d_area_a * pred.h,
        0.5 * (dl_dy2 - dl_dy1) + d_area_a * pred.w,
    ]
}
