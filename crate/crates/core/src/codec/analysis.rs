//! Encoding-error analysis and prediction-layer thickness.

use serde::Serialize;

use super::{decode, encode, CodecConfig, Method};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EncodingErrors {
    pub max: f64,
    pub mean: f64,
}

/// Closed-form encoding error. Classification-only codecs quantize to the
/// bin midpoint, so the error is uniform on `[0, ω/2]`: max `ω/2`, mean
/// `ω/4`. Codecs with a residual branch are lossless.
pub fn analytic_errors(config: &CodecConfig) -> EncodingErrors {
    if config.method().has_residual() {
        EncodingErrors {
            max: 0.0,
            mean: 0.0,
        }
    } else {
        let omega = config.omega();
        EncodingErrors {
            max: omega / 2.0,
            mean: omega / 4.0,
        }
    }
}

/// Sweeps `θ = i·grid_step` over `[0, 180)` and measures the circular
/// distance between `θ` and the decode of its ideal prediction.
pub fn empirical_errors(config: &CodecConfig, grid_step: f64) -> Result<EncodingErrors> {
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(Error::invalid(format!(
            "grid step must be positive, got {grid_step}"
        )));
    }
    let n = (CodecConfig::ANGLE_RANGE / grid_step).ceil() as usize;
    let mut max: f64 = 0.0;
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        let theta = i as f64 * grid_step;
        if theta >= CodecConfig::ANGLE_RANGE {
            break;
        }
        let decoded = decode(&encode(theta, config)?.ideal_prediction(), config)?;
        let d = (decoded - theta).abs();
        let err = d.min(CodecConfig::ANGLE_RANGE - d);
        max = max.max(err);
        sum += err;
        count += 1;
    }
    Ok(EncodingErrors {
        max,
        mean: sum / count as f64,
    })
}

/// Number of channels the angle branch needs for `anchors` anchors.
pub fn head_thickness(method: Method, c_theta: u32, anchors: u32) -> Result<u64> {
    if anchors == 0 {
        return Err(Error::invalid("anchor count must be at least 1"));
    }
    let config = CodecConfig::new(method, c_theta)?;
    let per_anchor = match method {
        Method::Regression => 1,
        Method::Csl => c_theta as u64,
        Method::DclBinary | Method::DclGray => config.code_bits() as u64,
        Method::Mgar => c_theta as u64 + 1,
    };
    Ok(anchors as u64 * per_anchor)
}
