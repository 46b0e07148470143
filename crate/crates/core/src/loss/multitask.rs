use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::terms::{
    bce_with_logits, cross_entropy, focal_loss, giou_loss, ifl_with_beta, mse, soft_cross_entropy,
};
use super::{decode_box_deltas, AnchorBox, BoxDeltas};
use crate::codec::{decode, encode, AnglePrediction, CodecConfig, Method};
use crate::error::{Error, Result};
use crate::geometry::{rotated_iou, OrientedBox};

/// Lower clamp on the IoU fed to the IFL weight, keeping `ln` finite.
pub const IOU_FLOOR: f64 = 1e-6;

/// Weights λ₁..λ₅ of the location, confidence, category, angle-class and
/// angle-residual terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 5]", into = "[f64; 5]")]
pub struct LossWeights([f64; 5]);

impl LossWeights {
    pub fn new(weights: [f64; 5]) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid(format!(
                "loss weights must be finite and >= 0, got {weights:?}"
            )));
        }
        Ok(Self(weights))
    }

    pub fn as_array(&self) -> [f64; 5] {
        self.0
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self([2.0, 2.0, 5.0, 2.0, 0.5])
    }
}

impl TryFrom<[f64; 5]> for LossWeights {
    type Error = Error;
    fn try_from(w: [f64; 5]) -> Result<Self> {
        Self::new(w)
    }
}

impl From<LossWeights> for [f64; 5] {
    fn from(w: LossWeights) -> Self {
        w.0
    }
}

/// Loss used on the angle residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngleRegLoss {
    #[default]
    Ifl,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub weights: LossWeights,
    pub focal_alpha: f64,
    pub focal_gamma: f64,
    pub smooth_l1_beta: f64,
    pub angle_reg: AngleRegLoss,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            focal_alpha: 0.25,
            focal_gamma: 2.0,
            smooth_l1_beta: 1.0,
            angle_reg: AngleRegLoss::Ifl,
        }
    }
}

/// One anchor with its label assignment and the network outputs for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignedSample {
    /// Foreground indicator; background samples only feed the confidence term.
    pub objectness: bool,
    pub anchor: AnchorBox,
    pub gt_box: OrientedBox,
    pub gt_category: usize,
    pub pred_deltas: BoxDeltas,
    pub pred_conf_logit: f64,
    pub pred_category_logits: Vec<f64>,
    pub pred_angle: AnglePrediction,
    pub conf_target: bool,
}

impl AssignedSample {
    /// The predicted oriented box: decoded deltas plus decoded angle.
    pub fn predicted_box(&self, codec: &CodecConfig) -> Result<OrientedBox> {
        let xywh = decode_box_deltas(&self.pred_deltas, &self.anchor);
        let theta = decode(&self.pred_angle, codec)?;
        OrientedBox::canonical(xywh.cx, xywh.cy, xywh.w, xywh.h, theta)
    }
}

/// Per-term sums (already gated by objectness) and the weighted total
/// `Σ λᵢ·termᵢ / N`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LossBreakdown {
    pub location: f64,
    pub confidence: f64,
    pub category: f64,
    pub angle_class: f64,
    pub angle_reg: f64,
    pub total: f64,
    pub samples: usize,
}

#[derive(Default)]
struct SampleTerms([f64; 5]);

fn angle_class_loss(pred: &AnglePrediction, target_theta: f64, codec: &CodecConfig) -> Result<f64> {
    let target = encode(target_theta, codec)?;
    let logits = &pred.class_logits;
    if logits.len() != codec.class_len() {
        return Err(Error::invalid(format!(
            "{} expects {} angle logits, got {}",
            codec.method(),
            codec.class_len(),
            logits.len()
        )));
    }
    match codec.method() {
        Method::Regression => Ok(0.0),
        Method::Mgar => cross_entropy(logits, target.class_index),
        Method::Csl => soft_cross_entropy(logits, &target.class_vector),
        Method::DclBinary | Method::DclGray => {
            let bits = &target.class_vector;
            let sum: f64 = logits
                .iter()
                .zip(bits)
                .map(|(&z, &b)| bce_with_logits(z, b))
                .sum();
            Ok(sum / bits.len() as f64)
        }
    }
}

fn sample_terms(s: &AssignedSample, codec: &CodecConfig, cfg: &LossConfig) -> Result<SampleTerms> {
    let confidence = focal_loss(
        s.pred_conf_logit,
        s.conf_target,
        cfg.focal_alpha,
        cfg.focal_gamma,
    );
    if !s.objectness {
        return Ok(SampleTerms([0.0, confidence, 0.0, 0.0, 0.0]));
    }

    let pred_xywh = decode_box_deltas(&s.pred_deltas, &s.anchor);
    let location = giou_loss(&pred_xywh, &s.gt_box.xywh());
    let category = cross_entropy(&s.pred_category_logits, s.gt_category)?;
    let angle_class = angle_class_loss(&s.pred_angle, s.gt_box.theta(), codec)?;

    let angle_reg = if codec.method().has_residual() {
        let target = encode(s.gt_box.theta(), codec)?;
        let t_target = target.residual_target.unwrap_or(0.0);
        let t_pred = s
            .pred_angle
            .regression_output
            .ok_or_else(|| Error::invalid("angle prediction lacks a regression output"))?;
        match cfg.angle_reg {
            AngleRegLoss::Mse => mse(t_pred, t_target),
            AngleRegLoss::Ifl => {
                let iou = rotated_iou(&s.predicted_box(codec)?, &s.gt_box).clamp(IOU_FLOOR, 1.0);
                ifl_with_beta(t_pred, t_target, iou, cfg.smooth_l1_beta)?
            }
        }
    } else {
        0.0
    };

    Ok(SampleTerms([
        location,
        confidence,
        category,
        angle_class,
        angle_reg,
    ]))
}

/// Assembles the five-term multi-task loss over pre-assigned samples.
///
/// Per-sample terms may be evaluated in parallel; the reduction runs in
/// sample order, so the result is bitwise reproducible.
pub fn multitask_loss(
    samples: &[AssignedSample],
    codec: &CodecConfig,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    if samples.is_empty() {
        return Err(Error::invalid("multitask loss needs at least one sample"));
    }
    for (i, s) in samples.iter().enumerate() {
        if s.gt_category >= s.pred_category_logits.len() {
            return Err(Error::invalid(format!(
                "sample {i}: category {} out of range for {} logits",
                s.gt_category,
                s.pred_category_logits.len()
            )));
        }
    }
    let per_sample: Vec<SampleTerms> = samples
        .par_iter()
        .map(|s| sample_terms(s, codec, cfg))
        .collect::<Result<_>>()?;

    let mut sums = [0.0; 5];
    for terms in &per_sample {
        for (acc, v) in sums.iter_mut().zip(terms.0) {
            *acc += v;
        }
    }
    let n = samples.len() as f64;
    let total = cfg
        .weights
        .as_array()
        .iter()
        .zip(sums)
        .map(|(w, s)| w * s / n)
        .sum();

    Ok(LossBreakdown {
        location: sums[0],
        confidence: sums[1],
        category: sums[2],
        angle_class: sums[3],
        angle_reg: sums[4],
        total,
        samples: samples.len(),
    })
}
