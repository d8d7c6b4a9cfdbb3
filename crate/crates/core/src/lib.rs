//! Ordinal (1-5) traffic congestion classification from video frames.
//!
//! The engine consumes externally computed semantic similarity scores and
//! vehicle detections, computes its own motion features with a per-pixel
//! Gaussian-mixture background model, and fuses the three into frame-level
//! and segment-level congestion levels.
//!
//! Module map:
//!
//! * [`imaging`]: frames, binary masks, resize, morphology, connected components
//! * [`bgsub`]: mixture-of-Gaussians background subtraction
//! * [`motion`]: coverage, intensity, contour density, stability and trend
//! * [`providers`]: score/detection sidecars, embedding similarity, test stub
//! * [`fusion`]: motion-based score adjustment, aggregation, smoothing, pipeline
//! * [`metrics`]: accuracy, MAE, macro-F1, quadratic weighted kappa
//! * [`synthgen`]: seeded synthetic traffic scenes

pub mod bgsub;
pub mod error;
pub mod fusion;
pub mod imaging;
pub mod metrics;
pub mod motion;
pub mod providers;
pub mod synthgen;

pub use bgsub::{BackgroundSubtractor, GaussianComponent, SubtractorParams};
pub use error::{Error, Result};
pub use fusion::{
    run_pipeline, AlphaVector, CongestionLevel, FramePrediction, FrameTrace, FusionParams,
    Pipeline, PipelineConfig, PipelineOutput, SegmentPrediction,
};
pub use imaging::{BinaryMask, ComponentStats, Frame, PixelLayout, StructuringElement};
pub use metrics::EvalReport;
pub use motion::{MotionFeatures, MotionParams, MotionWindow, Trend};
pub use providers::{Detection, DetectionSet, Embedding, ScoreVector};

/// Number of congestion levels on the ordinal scale.
pub const LEVELS: usize = 5;
