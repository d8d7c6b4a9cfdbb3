//! Per-frame semantic scores and vehicle detections.
//!
//! Model inference happens out of process. The engine reads its outputs from
//! line-delimited JSON sidecars:
//!
//! ```text
//! {"frame": 0, "scores": [0.330, 0.019, 0.358, 0.225, 0.069]}
//! {"frame": 0, "boxes": [[10, 10, 20, 15, 0.9]]}
//! ```
//!
//! Frame indices must start at 0 and increase by one per line. Unknown keys
//! are ignored.
//!
//! Score slot `i` belongs to congestion level `i + 1`; the usual prompt set is
//! "empty road", "light traffic", "moderate traffic", "heavy traffic",
//! "severe jam".

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::CongestionLevel;
use crate::synthgen::{default_bands, VehicleSize};
use crate::LEVELS;

/// One non-negative similarity score per congestion level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub frame_index: usize,
    scores: [f64; LEVELS],
}

impl ScoreVector {
    pub fn new(frame_index: usize, scores: [f64; LEVELS]) -> Result<Self> {
        if let Some(bad) = scores.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(Error::invalid(format!(
                "scores must be finite and non-negative, got {bad}"
            )));
        }
        Ok(Self {
            frame_index,
            scores,
        })
    }

    /// Every level scored equally; carries no semantic information.
    pub fn uniform(frame_index: usize) -> Self {
        Self {
            frame_index,
            scores: [1.0 / LEVELS as f64; LEVELS],
        }
    }

    pub fn scores(&self) -> &[f64; LEVELS] {
        &self.scores
    }

    /// Level of the first maximal score.
    pub fn argmax_level(&self) -> CongestionLevel {
        let mut best = 0;
        for i in 1..LEVELS {
            if self.scores[i] > self.scores[best] {
                best = i;
            }
        }
        CongestionLevel::from_index(best)
    }
}

/// Axis-aligned box in pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxF {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoxF,
    pub confidence: f64,
}

impl Detection {
    pub fn new(x: f64, y: f64, w: f64, h: f64, confidence: f64) -> Result<Self> {
        if ![x, y, w, h, confidence].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("detection values must be finite"));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::invalid("detection box must have positive size"));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::invalid("detection confidence must be in [0, 1]"));
        }
        Ok(Self {
            bbox: BoxF { x, y, w, h },
            confidence,
        })
    }

    /// The box restricted to a `width` x `height` frame, or `None` when it
    /// lies entirely outside.
    pub fn clipped(&self, width: usize, height: usize) -> Option<Detection> {
        let x0 = self.bbox.x.max(0.0);
        let y0 = self.bbox.y.max(0.0);
        let x1 = (self.bbox.x + self.bbox.w).min(width as f64);
        let y1 = (self.bbox.y + self.bbox.h).min(height as f64);
        (x1 > x0 && y1 > y0).then_some(Detection {
            bbox: BoxF {
                x: x0,
                y: y0,
                w: x1 - x0,
                h: y1 - y0,
            },
            confidence: self.confidence,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub frame_index: usize,
    pub detections: Vec<Detection>,
}

impl DetectionSet {
    /// Vehicle count for the frame.
    pub fn count(&self) -> usize {
        self.detections.len()
    }
}

/// A d-dimensional feature vector from an image or text encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("embedding must have at least one dimension"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding entries must be finite"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Raw inner product.
pub fn dot(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "embedding dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum())
}

pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    let d = dot(a, b)?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero vector"));
    }
    Ok((d / (na * nb)).clamp(-1.0, 1.0))
}

/// `N x M` matrix of raw inner products between image and text embeddings.
pub fn similarity_matrix(images: &[Embedding], texts: &[Embedding]) -> Result<Vec<Vec<f64>>> {
    images
        .iter()
        .map(|img| texts.iter().map(|txt| dot(img, txt)).collect())
        .collect()
}

/// Cosine similarity against each level prompt, mapped from `[-1, 1]` to
/// `[0, 1]` by `(s + 1) / 2` so downstream confidences stay positive.
pub fn scores_from_embeddings(
    frame_index: usize,
    image: &Embedding,
    level_prompts: &[Embedding],
) -> Result<ScoreVector> {
    if level_prompts.len() != LEVELS {
        return Err(Error::invalid(format!(
            "expected {LEVELS} level prompts, got {}",
            level_prompts.len()
        )));
    }
    let mut scores = [0.0; LEVELS];
    for (s, prompt) in scores.iter_mut().zip(level_prompts) {
        *s = (cosine_similarity(image, prompt)? + 1.0) / 2.0;
    }
    ScoreVector::new(frame_index, scores)
}

#[derive(Deserialize)]
struct ScoreRecord {
    frame: usize,
    scores: Vec<f64>,
}

#[derive(Deserialize)]
struct DetectionRecord {
    frame: usize,
    boxes: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct ScoreRecordOut<'a> {
    frame: usize,
    scores: &'a [f64],
}

#[derive(Serialize)]
struct DetectionRecordOut {
    frame: usize,
    boxes: Vec<[f64; 5]>,
}

fn parse_lines<R: BufRead, T, F>(reader: R, mut parse: F) -> Result<Vec<T>>
where
    F: FnMut(usize, &str) -> Result<(usize, T)>,
{
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let (frame, item) = parse(line_no, &line)?;
        if frame != out.len() {
            return Err(Error::Contiguity {
                line: line_no,
                expected: out.len(),
                found: frame,
            });
        }
        out.push(item);
    }
    Ok(out)
}

fn json_error(line: usize, e: serde_json::Error) -> Error {
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

pub fn parse_score_sidecar<R: BufRead>(reader: R) -> Result<Vec<ScoreVector>> {
    parse_lines(reader, |line, text| {
        let rec: ScoreRecord = serde_json::from_str(text).map_err(|e| json_error(line, e))?;
        let scores: [f64; LEVELS] = rec.scores.as_slice().try_into().map_err(|_| Error::Arity {
            line,
            expected: LEVELS,
            found: rec.scores.len(),
        })?;
        let sv = ScoreVector::new(rec.frame, scores).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        Ok((rec.frame, sv))
    })
}

pub fn parse_detection_sidecar<R: BufRead>(reader: R) -> Result<Vec<DetectionSet>> {
    parse_lines(reader, |line, text| {
        let rec: DetectionRecord = serde_json::from_str(text).map_err(|e| json_error(line, e))?;
        let mut detections = Vec::with_capacity(rec.boxes.len());
        for b in &rec.boxes {
            if b.len() != 5 {
                return Err(Error::Arity {
                    line,
                    expected: 5,
                    found: b.len(),
                });
            }
            let d = Detection::new(b[0], b[1], b[2], b[3], b[4]).map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            detections.push(d);
        }
        Ok((
            rec.frame,
            DetectionSet {
                frame_index: rec.frame,
                detections,
            },
        ))
    })
}

pub fn load_score_sidecar(path: impl AsRef<Path>) -> Result<Vec<ScoreVector>> {
    parse_score_sidecar(BufReader::new(File::open(path)?))
}

pub fn load_detection_sidecar(path: impl AsRef<Path>) -> Result<Vec<DetectionSet>> {
    parse_detection_sidecar(BufReader::new(File::open(path)?))
}

pub fn write_score_sidecar<W: Write>(mut out: W, scores: &[ScoreVector]) -> Result<()> {
    for s in scores {
        let rec = ScoreRecordOut {
            frame: s.frame_index,
            scores: &s.scores,
        };
        serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_detection_sidecar<W: Write>(mut out: W, sets: &[DetectionSet]) -> Result<()> {
    for set in sets {
        let rec = DetectionRecordOut {
            frame: set.frame_index,
            boxes: set
                .detections
                .iter()
                .map(|d| [d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h, d.confidence])
                .collect(),
        };
        serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Spread of the noiseless score profile around the true level, in levels.
const STUB_PROFILE_WIDTH: f64 = 0.8;

/// Deterministic stand-in for the semantic scorer and the vehicle detector.
///
/// Scores follow a Gaussian profile centred on the true level, perturbed by
/// log-normal noise of scale `noise` and normalized to sum to one. Each frame
/// draws from its own ChaCha stream, so any frame can be regenerated alone.
#[derive(Clone, Debug)]
pub struct StubProvider {
    pub seed: u64,
    pub noise: f64,
    pub width: usize,
    pub height: usize,
    pub vehicle_size: VehicleSize,
}

impl StubProvider {
    pub fn new(seed: u64, noise: f64) -> Self {
        Self {
            seed,
            noise,
            width: 224,
            height: 224,
            vehicle_size: VehicleSize::default(),
        }
    }

    fn rng(&self, frame_index: usize, purpose: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((frame_index as u64) << 2 | purpose);
        rng
    }

    pub fn scores(&self, frame_index: usize, level: CongestionLevel) -> ScoreVector {
        let mut rng = self.rng(frame_index, 0);
        let centre = level.index() as f64;
        let mut raw = [0.0; LEVELS];
        for (i, s) in raw.iter_mut().enumerate() {
            let d = i as f64 - centre;
            let z: f64 = rng.sample(StandardNormal);
            *s = (-d * d / (2.0 * STUB_PROFILE_WIDTH * STUB_PROFILE_WIDTH) + self.noise * z).exp();
        }
        let total: f64 = raw.iter().sum();
        for s in &mut raw {
            *s /= total;
        }
        ScoreVector {
            frame_index,
            scores: raw,
        }
    }

    /// Boxes with a count drawn from the level's density band.
    pub fn detections(&self, frame_index: usize, level: CongestionLevel) -> DetectionSet {
        let mut rng = self.rng(frame_index, 1);
        let band = &default_bands()[level.index()];
        let n = rng.random_range(band.vehicle_count.0..=band.vehicle_count.1);
        let vs = &self.vehicle_size;
        let detections = (0..n)
            .map(|_| {
                let w = rng.random_range(vs.width.0..=vs.width.1).min(self.width);
                let h = rng.random_range(vs.height.0..=vs.height.1).min(self.height);
                let x = rng.random_range(0..=self.width - w);
                let y = rng.random_range(0..=self.height - h);
                Detection {
                    bbox: BoxF {
                        x: x as f64,
                        y: y as f64,
                        w: w as f64,
                        h: h as f64,
                    },
                    confidence: rng.random_range(0.5..1.0),
                }
            })
            .collect();
        DetectionSet {
            frame_index,
            detections,
        }
    }
}

/// Score and detection streams for a per-frame ground-truth sequence.
pub fn stub_provider(
    levels: &[CongestionLevel],
    noise: f64,
    seed: u64,
) -> Vec<(ScoreVector, DetectionSet)> {
    let stub = StubProvider::new(seed, noise);
    levels
        .iter()
        .enumerate()
        .map(|(t, &level)| (stub.scores(t, level), stub.detections(t, level)))
        .collect()
}
