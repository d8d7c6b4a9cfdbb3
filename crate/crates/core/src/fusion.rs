//! Ordinal congestion reasoning.
//!
//! Per frame, the semantic score vector is reweighted by a motion-derived
//! multiplier vector (alpha) and the first maximal adjusted score picks the
//! level. Frames are then pooled into fixed-length segments by a
//! confidence-weighted mean of their levels, and segment levels are smoothed
//! with a centered moving average.
//!
//! The alpha rules:
//!
//! * stalled traffic: windowed mean coverage below `low_motion_threshold` while
//!   vehicles are present (enough detections or enough foreground blobs)
//!   multiplies the `boosted_levels` scores by `alpha_boost`;
//! * free flow: windowed mean coverage at or above `high_motion_coverage` with
//!   stability at or above `high_motion_stability` multiplies the same levels
//!   by `alpha_damp`.
//!
//! All roundings are half-up and all argmax ties go to the lowest level.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bgsub::{BackgroundSubtractor, SubtractorParams};
use crate::error::{Error, Result};
use crate::imaging::{self, Frame, StructuringElement};
use crate::motion::{MotionFeatures, MotionParams, MotionWindow};
use crate::providers::{DetectionSet, ScoreVector};
use crate::LEVELS;

/// A level on the 1 (free flow) to 5 (severe congestion) scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct CongestionLevel(u8);

impl CongestionLevel {
    pub const MIN: CongestionLevel = CongestionLevel(1);
    pub const MAX: CongestionLevel = CongestionLevel(5);

    pub fn new(value: u8) -> Result<Self> {
        if (1..=LEVELS as u8).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::invalid(format!("congestion level must be 1..=5, got {value}")))
        }
    }

    /// Level for a zero-based score slot.
    ///
    /// # Panics
    /// When `index >= 5`.
    pub fn from_index(index: usize) -> Self {
        assert!(index < LEVELS, "level index {index} out of range");
        Self(index as u8 + 1)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }

    pub fn all() -> impl Iterator<Item = CongestionLevel> {
        (1..=LEVELS as u8).map(CongestionLevel)
    }

    /// Rounds half-up and clamps into the scale.
    pub fn from_mean(mean: f64) -> Self {
        let r = (mean + 0.5).floor();
        Self(r.clamp(1.0, LEVELS as f64) as u8)
    }
}

impl TryFrom<u8> for CongestionLevel {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        Self::new(value)
    }
}

impl From<CongestionLevel> for u8 {
    fn from(level: CongestionLevel) -> u8 {
        level.0
    }
}

impl fmt::Display for CongestionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Positive per-level score multipliers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector([f64; LEVELS]);

impl AlphaVector {
    pub fn new(values: [f64; LEVELS]) -> Result<Self> {
        if values.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::invalid("alpha entries must be finite and positive"));
        }
        Ok(Self(values))
    }

    pub fn ones() -> Self {
        Self([1.0; LEVELS])
    }

    pub fn values(&self) -> &[f64; LEVELS] {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    #[default]
    Mean,
    Median,
}

/// Which inputs drive the per-frame decision. The single-input modes exist
/// for ablation runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    /// Semantic scores adjusted by motion.
    #[default]
    Fused,
    /// Semantic scores alone (alpha fixed at one).
    SemanticOnly,
    /// Motion alone: alpha applied to a uniform score vector.
    MotionOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionParams {
    pub low_motion_threshold: f64,
    pub rule_window: usize,
    pub alpha_boost: f64,
    pub alpha_damp: f64,
    pub boosted_levels: Vec<u8>,
    pub high_motion_coverage: f64,
    pub high_motion_stability: f64,
    pub presence_min_detections: usize,
    pub presence_min_density: f64,
    pub segment_smoothing_window: usize,
    pub aggregator: Aggregator,
    /// Also smooth frame levels inside each segment before pooling.
    pub smooth_frame_levels: bool,
    pub frame_smoothing_window: usize,
    pub modality: Modality,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            low_motion_threshold: 0.05,
            rule_window: 15,
            alpha_boost: 1.2,
            alpha_damp: 0.8,
            boosted_levels: vec![4, 5],
            high_motion_coverage: 0.15,
            high_motion_stability: 0.995,
            presence_min_detections: 5,
            presence_min_density: 40.0,
            segment_smoothing_window: 3,
            aggregator: Aggregator::Mean,
            smooth_frame_levels: false,
            frame_smoothing_window: 15,
            modality: Modality::Fused,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::invalid(format!("fusion: {msg}")));
        if !(self.low_motion_threshold > 0.0 && self.low_motion_threshold < 1.0) {
            return fail("low_motion_threshold must be in (0, 1)");
        }
        if !(self.high_motion_coverage > self.low_motion_threshold
            && self.high_motion_coverage <= 1.0)
        {
            return fail("high_motion_coverage must be in (low_motion_threshold, 1]");
        }
        if !(self.high_motion_stability > 0.0 && self.high_motion_stability <= 1.0) {
            return fail("high_motion_stability must be in (0, 1]");
        }
        if self.rule_window == 0 {
            return fail("rule_window must be at least 1");
        }
        if !(self.alpha_boost > 1.0 && self.alpha_boost.is_finite()) {
            return fail("alpha_boost must be greater than 1");
        }
        if !(self.alpha_damp > 0.0 && self.alpha_damp < 1.0) {
            return fail("alpha_damp must be in (0, 1)");
        }
        if self.boosted_levels.is_empty()
            || self.boosted_levels.iter().any(|&l| CongestionLevel::new(l).is_err())
        {
            return fail("boosted_levels must name levels in 1..=5");
        }
        if !(self.presence_min_density >= 0.0 && self.presence_min_density.is_finite()) {
            return fail("presence_min_density must be non-negative");
        }
        if self.segment_smoothing_window % 2 == 0 {
            return fail("segment_smoothing_window must be odd");
        }
        if self.frame_smoothing_window % 2 == 0 {
            return fail("frame_smoothing_window must be odd");
        }
        Ok(())
    }
}

/// Motion context the alpha rules look at.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub mean_coverage: f64,
    pub stability: f64,
    pub contour_density: f64,
}

pub fn compute_alpha(
    summary: &WindowSummary,
    detections: &DetectionSet,
    params: &FusionParams,
) -> AlphaVector {
    let present = detections.count() >= params.presence_min_detections
        || summary.contour_density >= params.presence_min_density;
    let factor = if summary.mean_coverage < params.low_motion_threshold && present {
        params.alpha_boost
    } else if summary.mean_coverage >= params.high_motion_coverage
        && summary.stability >= params.high_motion_stability
    {
        params.alpha_damp
    } else {
        return AlphaVector::ones();
    };
    let mut alpha = [1.0; LEVELS];
    for &l in &params.boosted_levels {
        alpha[usize::from(l) - 1] = factor;
    }
    AlphaVector(alpha)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FramePrediction {
    pub frame_index: usize,
    pub level: CongestionLevel,
    /// Largest adjusted score.
    pub confidence: f64,
    pub adjusted_scores: [f64; LEVELS],
}

pub fn adjust_and_classify(scores: &ScoreVector, alpha: &AlphaVector) -> Result<FramePrediction> {
    let mut adjusted = [0.0; LEVELS];
    for ((a, s), w) in adjusted.iter_mut().zip(scores.scores()).zip(alpha.values()) {
        if !s.is_finite() {
            return Err(Error::invalid("non-finite score"));
        }
        *a = s * w;
    }
    let mut best = 0;
    for i in 1..LEVELS {
        if adjusted[i] > adjusted[best] {
            best = i;
        }
    }
    Ok(FramePrediction {
        frame_index: scores.frame_index,
        level: CongestionLevel::from_index(best),
        confidence: adjusted[best],
        adjusted_scores: adjusted,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentPrediction {
    pub segment_index: usize,
    pub start_frame: usize,
    pub frame_count: usize,
    /// Pooled level before cross-segment smoothing.
    pub level: CongestionLevel,
    pub smoothed_level: CongestionLevel,
    /// Mean frame confidence.
    pub confidence: f64,
}

/// Pools frame levels with their confidences as weights.
///
/// The returned prediction has `segment_index` 0 and `smoothed_level` equal to
/// `level`; the caller fills both in.
pub fn aggregate_segment(
    frames: &[FramePrediction],
    aggregator: Aggregator,
) -> Result<SegmentPrediction> {
    if frames.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty segment"));
    }
    if let Some(f) = frames.iter().find(|f| !(f.confidence > 0.0 && f.confidence.is_finite())) {
        return Err(Error::invalid(format!(
            "frame {} has non-positive confidence {}",
            f.frame_index, f.confidence
        )));
    }
    let total: f64 = frames.iter().map(|f| f.confidence).sum();
    let level = match aggregator {
        Aggregator::Mean => {
            let weighted: f64 = frames
                .iter()
                .map(|f| f.confidence * f64::from(f.level.value()))
                .sum();
            CongestionLevel::from_mean(weighted / total)
        }
        Aggregator::Median => {
            let mut mass = [0.0; LEVELS];
            for f in frames {
                mass[f.level.index()] += f.confidence;
            }
            let mut acc = 0.0;
            let mut pick = LEVELS - 1;
            for (i, m) in mass.iter().enumerate() {
                acc += m;
                if acc >= total / 2.0 {
                    pick = i;
                    break;
                }
            }
            CongestionLevel::from_index(pick)
        }
    };
    Ok(SegmentPrediction {
        segment_index: 0,
        start_frame: frames[0].frame_index,
        frame_count: frames.len(),
        level,
        smoothed_level: level,
        confidence: total / frames.len() as f64,
    })
}

/// Centered moving average over an odd window, clipped at the ends, rounded
/// half-up. Output length equals input length.
pub fn smooth_segments(levels: &[CongestionLevel], window: usize) -> Result<Vec<CongestionLevel>> {
    if window % 2 == 0 {
        return Err(Error::invalid(format!("smoothing window must be odd, got {window}")));
    }
    let half = window / 2;
    let n = levels.len();
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let count = (hi - lo + 1) as u64;
            let sum: u64 = levels[lo..=hi].iter().map(|l| u64::from(l.value())).sum();
            // floor(sum / count + 1/2) without floating point
            let rounded = (2 * sum + count) / (2 * count);
            CongestionLevel(rounded as u8)
        })
        .collect())
}

/// Geometry and segmentation settings for the per-frame stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageParams {
    pub segment_len: usize,
    pub width: usize,
    pub height: usize,
    /// Radius of the elliptical opening/closing kernel.
    pub kernel_radius: usize,
    pub min_component_area: usize,
}

impl Default for StageParams {
    fn default() -> Self {
        Self {
            segment_len: 100,
            width: 224,
            height: 224,
            kernel_radius: 2,
            min_component_area: 25,
        }
    }
}

/// Every tunable of the engine, grouped the way the config file is.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub bgsub: SubtractorParams,
    pub motion: MotionParams,
    pub fusion: FusionParams,
    pub pipeline: StageParams,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.bgsub.validate()?;
        self.motion.validate()?;
        self.fusion.validate()?;
        let p = &self.pipeline;
        if p.segment_len == 0 {
            return Err(Error::invalid("pipeline: segment_len must be at least 1"));
        }
        if p.width == 0 || p.height == 0 {
            return Err(Error::invalid("pipeline: width and height must be positive"));
        }
        if p.min_component_area == 0 {
            return Err(Error::invalid("pipeline: min_component_area must be at least 1"));
        }
        Ok(())
    }
}

/// Everything computed for one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameTrace {
    pub prediction: FramePrediction,
    pub motion: MotionFeatures,
    pub alpha: AlphaVector,
    pub vehicle_count: usize,
}

/// Streaming classifier for one video.
///
/// Holds the background model and motion window, so frames must be pushed
/// in order from a single thread.
pub struct Pipeline {
    config: PipelineConfig,
    kernel: StructuringElement,
    subtractor: BackgroundSubtractor,
    motion: MotionWindow,
    rule_ring: VecDeque<f64>,
    prev_gray: Option<Frame>,
    pending: Vec<FramePrediction>,
    segments: Vec<SegmentPrediction>,
    next_frame: usize,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let stage = &config.pipeline;
        Ok(Self {
            kernel: StructuringElement::ellipse(stage.kernel_radius, stage.kernel_radius),
            subtractor: BackgroundSubtractor::new(stage.width, stage.height, config.bgsub.clone())?,
            motion: MotionWindow::new(config.motion.clone())?,
            rule_ring: VecDeque::with_capacity(config.fusion.rule_window),
            prev_gray: None,
            pending: Vec::with_capacity(stage.segment_len),
            segments: Vec::new(),
            next_frame: 0,
            config,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn frames_processed(&self) -> usize {
        self.next_frame
    }

    /// Runs the per-frame stages: resize, grayscale, background subtraction,
    /// opening then closing, components, motion metrics, alpha, classification.
    pub fn process(
        &mut self,
        frame: &Frame,
        scores: &ScoreVector,
        detections: &DetectionSet,
    ) -> Result<FrameTrace> {
        let t = self.next_frame;
        if scores.frame_index != t {
            return Err(Error::Alignment(format!(
                "score record for frame {} arrived at frame {t}",
                scores.frame_index
            )));
        }
        if detections.frame_index != t {
            return Err(Error::Alignment(format!(
                "detection record for frame {} arrived at frame {t}",
                detections.frame_index
            )));
        }
        let stage = &self.config.pipeline;
        let resized = imaging::preprocess(frame, stage.width, stage.height)?;
        let gray = imaging::to_grayscale(&resized).with_index(t);

        let raw = self.subtractor.apply(&gray)?;
        let mask = imaging::close(&imaging::open(&raw, &self.kernel), &self.kernel);
        let components = imaging::connected_components(&mask, stage.min_component_area)?;
        let motion = self
            .motion
            .step(&mask, self.prev_gray.as_ref(), &gray, &components)?;

        if self.rule_ring.len() == self.config.fusion.rule_window {
            self.rule_ring.pop_front();
        }
        self.rule_ring.push_back(motion.coverage);
        let summary = WindowSummary {
            mean_coverage: self.rule_ring.iter().sum::<f64>() / self.rule_ring.len() as f64,
            stability: motion.stability,
            contour_density: motion.contour_density,
        };

        let fusion = &self.config.fusion;
        let (alpha, prediction) = match fusion.modality {
            Modality::Fused => {
                let alpha = compute_alpha(&summary, detections, fusion);
                (alpha, adjust_and_classify(scores, &alpha)?)
            }
            Modality::SemanticOnly => {
                let alpha = AlphaVector::ones();
                (alpha, adjust_and_classify(scores, &alpha)?)
            }
            Modality::MotionOnly => {
                let alpha = compute_alpha(&summary, detections, fusion);
                (alpha, adjust_and_classify(&ScoreVector::uniform(t), &alpha)?)
            }
        };

        self.prev_gray = Some(gray);
        self.pending.push(prediction.clone());
        self.next_frame += 1;
        if self.pending.len() == stage.segment_len {
            self.close_segment()?;
        }
        Ok(FrameTrace {
            prediction,
            motion,
            alpha,
            vehicle_count: detections.count(),
        })
    }

    fn close_segment(&mut self) -> Result<()> {
        let fusion = &self.config.fusion;
        let frames = std::mem::take(&mut self.pending);
        let pooled = if fusion.smooth_frame_levels {
            let levels: Vec<CongestionLevel> = frames.iter().map(|f| f.level).collect();
            let smoothed = smooth_segments(&levels, fusion.frame_smoothing_window)?;
            let relabelled: Vec<FramePrediction> = frames
                .into_iter()
                .zip(smoothed)
                .map(|(f, level)| FramePrediction { level, ..f })
                .collect();
            aggregate_segment(&relabelled, fusion.aggregator)?
        } else {
            aggregate_segment(&frames, fusion.aggregator)?
        };
        self.segments.push(SegmentPrediction {
            segment_index: self.segments.len(),
            ..pooled
        });
        Ok(())
    }

    /// Closes any partial trailing segment and applies cross-segment smoothing.
    pub fn finish(mut self) -> Result<Vec<SegmentPrediction>> {
        if !self.pending.is_empty() {
            self.close_segment()?;
        }
        let levels: Vec<CongestionLevel> = self.segments.iter().map(|s| s.level).collect();
        let smoothed = smooth_segments(&levels, self.config.fusion.segment_smoothing_window)?;
        for (seg, level) in self.segments.iter_mut().zip(smoothed) {
            seg.smoothed_level = level;
        }
        Ok(self.segments)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub segments: Vec<SegmentPrediction>,
    pub frames: Vec<FrameTrace>,
}

/// Classifies a whole in-memory clip.
pub fn run_pipeline(
    frames: &[Frame],
    scores: &[ScoreVector],
    detections: &[DetectionSet],
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    if scores.len() != frames.len() || detections.len() != frames.len() {
        return Err(Error::Alignment(format!(
            "{} frames, {} score records, {} detection records",
            frames.len(),
            scores.len(),
            detections.len()
        )));
    }
    let mut pipeline = Pipeline::new(config.clone())?;
    let mut traces = Vec::with_capacity(frames.len());
    for ((frame, s), d) in frames.iter().zip(scores).zip(detections) {
        traces.push(pipeline.process(frame, s, d)?);
    }
    Ok(PipelineOutput {
        segments: pipeline.finish()?,
        frames: traces,
    })
}
