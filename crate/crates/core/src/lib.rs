//! Oriented bounding boxes and the machinery around a multi-grained angle
//! representation: a coarse angle class plus a fine residual regression.
//!
//! The crate is organised by subsystem:
//!
//! - [`geometry`]: long-side oriented boxes, corner conversions, convex
//!   clipping, rotated IoU, axis-aligned GIoU and rotated NMS.
//! - [`codec`]: angle encoders/decoders (plain regression, circular smooth
//!   label, binary/gray dense codes, multi-grained), their encoding-error
//!   analysis and prediction-layer thickness.
//! - [`loss`]: box-delta transforms, the per-term detection losses with
//!   analytic gradients, the assembled multi-task loss and a
//!   finite-difference checker.
//! - [`eval`]: rotated-IoU matching, precision/recall and VOC07/VOC12 AP.
//! - [`io`]: DOTA-style annotation/detection files, JSON detections,
//!   report writers and run configuration.

pub mod codec;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod loss;

pub use codec::{AnglePrediction, AngleTarget, CodecConfig, FitFunction, Method};
pub use error::{Error, Result};
pub use eval::{ApMode, DetectionRecord, EvalReport, GroundTruthRecord};
pub use geometry::{AxisAlignedBox, OrientedBox, Point, QuadPolygon};
pub use loss::{AnchorBox, AssignedSample, BoxDeltas, LossBreakdown, LossWeights};
