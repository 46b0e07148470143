//! Angle representations for long-side oriented boxes.
//!
//! Every codec maps a ground-truth angle in `[0, 180)` to a training
//! target and maps a raw network-style prediction back to an angle:
//!
//! - `Regression`: one continuous output in fit space.
//! - `Csl`: 180 one-degree bins with a circular Gaussian soft label.
//! - `DclBinary` / `DclGray`: the bin index as a binary or Gray code.
//! - `Mgar`: a coarse bin `k = ⌊θ/ω⌋` (one-hot over `c_theta` classes) plus
//!   the fine residual `θ - kω` regressed in fit space.

mod analysis;
mod gray;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::normalize_angle;

pub use analysis::{analytic_errors, empirical_errors, head_thickness, EncodingErrors};
pub use gray::{binary_from_gray, from_bits, gray_from_binary, to_bits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Regression,
    Csl,
    DclBinary,
    DclGray,
    Mgar,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Regression,
        Method::Csl,
        Method::DclBinary,
        Method::DclGray,
        Method::Mgar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Regression => "regression",
            Method::Csl => "csl",
            Method::DclBinary => "dcl-binary",
            Method::DclGray => "dcl-gray",
            Method::Mgar => "mgar",
        }
    }

    /// Whether the codec carries a continuous residual output.
    pub fn has_residual(self) -> bool {
        matches!(self, Method::Regression | Method::Mgar)
    }

    pub fn is_dcl(self) -> bool {
        matches!(self, Method::DclBinary | Method::DclGray)
    }

    pub fn default_c_theta(self) -> u32 {
        match self {
            Method::Regression => 1,
            Method::Csl => 180,
            Method::DclBinary | Method::DclGray => 64,
            Method::Mgar => 3,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "regression" | "reg" => Ok(Method::Regression),
            "csl" => Ok(Method::Csl),
            "dcl" | "dcl-binary" | "dcl_binary" => Ok(Method::DclBinary),
            "dcl-gray" | "dcl_gray" => Ok(Method::DclGray),
            "mgar" => Ok(Method::Mgar),
            other => Err(Error::invalid(format!(
                "unknown method {other:?}; expected one of regression, csl, dcl-binary, dcl-gray, mgar"
            ))),
        }
    }
}

/// How the residual output `t` maps to degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitFunction {
    Linear,
    Sigmoid,
    #[default]
    Square,
    Exp,
}

// Keeps the sigmoid inverse finite at the ends of the residual range.
const SIGMOID_EDGE: f64 = 1e-12;

impl FitFunction {
    pub fn name(self) -> &'static str {
        match self {
            FitFunction::Linear => "linear",
            FitFunction::Sigmoid => "sigmoid",
            FitFunction::Square => "square",
            FitFunction::Exp => "exp",
        }
    }

    /// Degrees represented by output `t`; `span` is the residual range ω.
    pub fn apply(self, t: f64, span: f64) -> f64 {
        match self {
            FitFunction::Linear => t,
            FitFunction::Sigmoid => span * sigmoid(t),
            FitFunction::Square => t * t,
            FitFunction::Exp => t.exp_m1().max(0.0),
        }
    }

    /// Fit-space target for a residual of `degrees`.
    pub fn inverse(self, degrees: f64, span: f64) -> f64 {
        match self {
            FitFunction::Linear => degrees,
            FitFunction::Sigmoid => {
                let q = (degrees / span).clamp(SIGMOID_EDGE, 1.0 - SIGMOID_EDGE);
                (q / (1.0 - q)).ln()
            }
            FitFunction::Square => degrees.sqrt(),
            FitFunction::Exp => degrees.ln_1p(),
        }
    }
}

impl fmt::Display for FitFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FitFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(FitFunction::Linear),
            "sigmoid" => Ok(FitFunction::Sigmoid),
            "square" => Ok(FitFunction::Square),
            "exp" => Ok(FitFunction::Exp),
            other => Err(Error::invalid(format!(
                "unknown fit function {other:?}; expected one of linear, sigmoid, square, exp"
            ))),
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub const DEFAULT_CSL_WINDOW: f64 = 6.0;
pub const RECOMMENDED_MGAR_CLASSES: [u32; 3] = [3, 4, 5];
pub const DCL_CLASSES: [u32; 4] = [32, 64, 128, 256];

/// Validated codec configuration. The angle range is fixed at 180°.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CodecConfig {
    method: Method,
    c_theta: u32,
    window_size: f64,
    fit: FitFunction,
}

impl CodecConfig {
    pub const ANGLE_RANGE: f64 = 180.0;

    pub fn new(method: Method, c_theta: u32) -> Result<Self> {
        match method {
            Method::Regression if c_theta != 1 => Err(Error::invalid(format!(
                "regression uses a single output, c_theta must be 1 (got {c_theta})"
            ))),
            Method::Csl if c_theta != 180 => Err(Error::invalid(format!(
                "csl uses one-degree bins, c_theta must be 180 (got {c_theta})"
            ))),
            Method::DclBinary | Method::DclGray if !DCL_CLASSES.contains(&c_theta) => {
                Err(Error::invalid(format!(
                    "dcl c_theta must be one of {DCL_CLASSES:?} (got {c_theta})"
                )))
            }
            Method::Mgar if c_theta == 0 || 180 % c_theta != 0 => Err(Error::invalid(format!(
                "mgar c_theta must divide 180 (got {c_theta}, 180 mod {c_theta} = {})",
                if c_theta == 0 { 180 } else { 180 % c_theta }
            ))),
            _ => Ok(Self {
                method,
                c_theta,
                window_size: DEFAULT_CSL_WINDOW,
                fit: FitFunction::Square,
            }),
        }
    }

    /// Configuration with the method's default class count.
    pub fn default_for(method: Method) -> Self {
        Self::new(method, method.default_c_theta()).expect("default class counts are valid")
    }

    pub fn with_window(mut self, window_size: f64) -> Result<Self> {
        if !(window_size.is_finite() && window_size > 0.0) {
            return Err(Error::invalid(format!(
                "window size must be positive, got {window_size}"
            )));
        }
        self.window_size = window_size;
        Ok(self)
    }

    pub fn with_fit(mut self, fit: FitFunction) -> Self {
        self.fit = fit;
        self
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn c_theta(&self) -> u32 {
        self.c_theta
    }

    pub fn window_size(&self) -> f64 {
        self.window_size
    }

    pub fn fit(&self) -> FitFunction {
        self.fit
    }

    /// Bin width ω = 180 / c_theta in degrees.
    pub fn omega(&self) -> f64 {
        Self::ANGLE_RANGE / self.c_theta as f64
    }

    /// ⌈log₂ c_theta⌉
    pub fn code_bits(&self) -> u32 {
        if self.c_theta <= 1 {
            0
        } else {
            u32::BITS - (self.c_theta - 1).leading_zeros()
        }
    }

    /// Length of the class part of targets and predictions.
    pub fn class_len(&self) -> usize {
        match self.method {
            Method::Regression => 0,
            Method::Csl | Method::Mgar => self.c_theta as usize,
            Method::DclBinary | Method::DclGray => self.code_bits() as usize,
        }
    }

    /// Non-fatal remarks, e.g. an MGAR class count outside the
    /// recommended {3, 4, 5}.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.method == Method::Mgar && !RECOMMENDED_MGAR_CLASSES.contains(&self.c_theta) {
            out.push(format!(
                "mgar c_theta={} is outside the recommended {:?}",
                self.c_theta, RECOMMENDED_MGAR_CLASSES
            ));
        }
        out
    }
}

/// Encoded training target for one angle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleTarget {
    pub class_index: usize,
    pub class_vector: Vec<f64>,
    /// Residual in degrees (`θ - kω` for MGAR, `θ` for regression).
    pub residual: Option<f64>,
    /// Residual mapped into fit space, the value the network regresses.
    pub residual_target: Option<f64>,
    pub raw_angle: f64,
}

impl AngleTarget {
    /// The prediction a perfect network would emit for this target.
    pub fn ideal_prediction(&self) -> AnglePrediction {
        AnglePrediction {
            class_logits: self.class_vector.clone(),
            regression_output: self.residual_target,
        }
    }
}

/// Raw network-style outputs for the angle branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnglePrediction {
    pub class_logits: Vec<f64>,
    pub regression_output: Option<f64>,
}

/// Bin index `⌊θ/ω⌋` and residual `θ - kω ∈ [0, ω)`.
fn split_angle(theta: f64, omega: f64, classes: u32) -> (usize, f64) {
    let last = classes as usize - 1;
    let mut k = ((theta / omega).floor() as usize).min(last);
    let mut residual = theta - k as f64 * omega;
    // the quotient can round across a bin edge
    if residual < 0.0 && k > 0 {
        k -= 1;
        residual = theta - k as f64 * omega;
    } else if residual >= omega && k < last {
        k += 1;
        residual = theta - k as f64 * omega;
    }
    (k, residual.max(0.0))
}

/// Circular Gaussian label over the 180 one-degree bins centred on `k`.
fn csl_label(k: usize, config: &CodecConfig) -> Vec<f64> {
    let omega = config.omega();
    let window = config.window_size;
    let sigma = window / 3.0;
    (0..config.c_theta as usize)
        .map(|i| {
            let d = ((i as f64 - k as f64) * omega + 90.0).rem_euclid(180.0) - 90.0;
            if d.abs() > window {
                0.0
            } else {
                (-d * d / (2.0 * sigma * sigma)).exp()
            }
        })
        .collect()
}

pub fn encode(theta_gt: f64, config: &CodecConfig) -> Result<AngleTarget> {
    if !(theta_gt.is_finite() && (0.0..CodecConfig::ANGLE_RANGE).contains(&theta_gt)) {
        return Err(Error::invalid(format!("angle {theta_gt} outside [0, 180)")));
    }
    let omega = config.omega();
    let (k, residual) = split_angle(theta_gt, omega, config.c_theta);

    let target = match config.method {
        Method::Regression => AngleTarget {
            class_index: 0,
            class_vector: Vec::new(),
            residual: Some(theta_gt),
            residual_target: Some(config.fit.inverse(theta_gt, CodecConfig::ANGLE_RANGE)),
            raw_angle: theta_gt,
        },
        Method::Mgar => {
            let mut one_hot = vec![0.0; config.c_theta as usize];
            one_hot[k] = 1.0;
            AngleTarget {
                class_index: k,
                class_vector: one_hot,
                residual: Some(residual),
                residual_target: Some(config.fit.inverse(residual, omega)),
                raw_angle: theta_gt,
            }
        }
        Method::Csl => AngleTarget {
            class_index: k,
            class_vector: csl_label(k, config),
            residual: None,
            residual_target: None,
            raw_angle: theta_gt,
        },
        Method::DclBinary | Method::DclGray => {
            let mut bits = to_bits(k as u32, config.code_bits());
            if config.method == Method::DclGray {
                bits = gray_from_binary(&bits);
            }
            AngleTarget {
                class_index: k,
                class_vector: bits
                    .into_iter()
                    .map(|b| if b { 1.0 } else { 0.0 })
                    .collect(),
                residual: None,
                residual_target: None,
                raw_angle: theta_gt,
            }
        }
    };
    Ok(target)
}

/// Index of the largest value; the first one wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn decode(pred: &AnglePrediction, config: &CodecConfig) -> Result<f64> {
    let expected = config.class_len();
    if pred.class_logits.len() != expected {
        return Err(Error::invalid(format!(
            "{} expects {expected} class logits, got {}",
            config.method,
            pred.class_logits.len()
        )));
    }
    if pred.class_logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite class logit"));
    }
    let reg = match (config.method.has_residual(), pred.regression_output) {
        (true, Some(t)) if t.is_finite() => Some(t),
        (true, Some(t)) => return Err(Error::invalid(format!("non-finite regression output {t}"))),
        (true, None) => {
            return Err(Error::invalid(format!(
                "{} needs a regression output",
                config.method
            )))
        }
        (false, _) => None,
    };
    let omega = config.omega();

    let theta = match config.method {
        Method::Regression => config
            .fit
            .apply(reg.unwrap_or(0.0), CodecConfig::ANGLE_RANGE),
        Method::Mgar => {
            // sigmoid is monotone, so the arg-max over raw logits is the same
            let k = argmax(&pred.class_logits);
            omega * k as f64 + config.fit.apply(reg.unwrap_or(0.0), omega)
        }
        Method::Csl => {
            let k = argmax(&pred.class_logits);
            k as f64 * omega + omega / 2.0
        }
        Method::DclBinary | Method::DclGray => {
            let mut bits: Vec<bool> = pred
                .class_logits
                .iter()
                .map(|&z| sigmoid(z) > 0.5)
                .collect();
            if config.method == Method::DclGray {
                bits = binary_from_gray(&bits);
            }
            let k = from_bits(&bits).min(config.c_theta - 1);
            k as f64 * omega + omega / 2.0
        }
    };
    Ok(normalize_angle(theta))
}
