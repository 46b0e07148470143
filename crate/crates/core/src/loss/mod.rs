//! Box-delta transforms and the detection losses.

mod gradcheck;
mod multitask;
mod terms;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AxisAlignedBox;

pub use gradcheck::{
    finite_diff_grad_check, gradcheck_suite, GradCheckResult, LossKind, GRADCHECK_TOLERANCE,
};
pub use multitask::{
    multitask_loss, AngleRegLoss, AssignedSample, LossBreakdown, LossConfig, LossWeights, IOU_FLOOR,
};
pub use terms::*;

/// Prior box the deltas are expressed against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl AnchorBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if ![x, y, w, h].iter().all(|v| v.is_finite()) || w <= 0.0 || h <= 0.0 {
            return Err(Error::invalid(format!(
                "invalid anchor ({x}, {y}, {w}, {h})"
            )));
        }
        Ok(Self { x, y, w, h })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoxDeltas {
    pub tx: f64,
    pub ty: f64,
    pub tw: f64,
    pub th: f64,
}

/// `t_x = (x - x_a)/w_a`, `t_y = (y - y_a)/h_a`, `t_w = ln(w/w_a)`,
/// `t_h = ln(h/h_a)`.
pub fn encode_box_deltas(gt: &AxisAlignedBox, anchor: &AnchorBox) -> Result<BoxDeltas> {
    if !(gt.w > 0.0 && gt.h > 0.0) {
        return Err(Error::invalid(format!(
            "box sides must be positive, got w={} h={}",
            gt.w, gt.h
        )));
    }
    Ok(BoxDeltas {
        tx: (gt.cx - anchor.x) / anchor.w,
        ty: (gt.cy - anchor.y) / anchor.h,
        tw: (gt.w / anchor.w).ln(),
        th: (gt.h / anchor.h).ln(),
    })
}

pub fn decode_box_deltas(deltas: &BoxDeltas, anchor: &AnchorBox) -> AxisAlignedBox {
    AxisAlignedBox {
        cx: anchor.x + deltas.tx * anchor.w,
        cy: anchor.y + deltas.ty * anchor.h,
        w: anchor.w * deltas.tw.exp(),
        h: anchor.h * deltas.th.exp(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_deltas() {
        let anchor = AnchorBox::new(10.0, 20.0, 8.0, 4.0).unwrap();
        let gt = AxisAlignedBox::new(10.0, 20.0, 8.0, 4.0).unwrap();
        assert_eq!(
            encode_box_deltas(&gt, &anchor).unwrap(),
            BoxDeltas::default()
        );
        assert_eq!(decode_box_deltas(&BoxDeltas::default(), &anchor), gt);
    }

    #[test]
    fn log_width() {
        let anchor = AnchorBox::new(0.0, 0.0, 3.0, 2.0).unwrap();
        let gt = AxisAlignedBox::new(0.0, 0.0, 3.0 * std::f64::consts::E, 2.0).unwrap();
        let d = encode_box_deltas(&gt, &anchor).unwrap();
        assert!((d.tw - 1.0).abs() < 1e-15);
        assert!((decode_box_deltas(&d, &anchor).w - gt.w).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_sides() {
        let anchor = AnchorBox::new(0.0, 0.0, 3.0, 2.0).unwrap();
        let gt = AxisAlignedBox {
            cx: 0.0,
            cy: 0.0,
            w: 0.0,
            h: 1.0,
        };
        assert!(encode_box_deltas(&gt, &anchor).is_err());
        assert!(AnchorBox::new(0.0, 0.0, -1.0, 2.0).is_err());
    }
}
