//! Seeded synthetic traffic scenes.
//!
//! A scene is a fixed low-contrast texture with solid rectangular vehicles
//! sliding to the right and wrapping around, plus per-frame Gaussian pixel
//! noise. Vehicle count and speed come from the level's [`DensityBand`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::CongestionLevel;
use crate::imaging::{BinaryMask, Frame};
use crate::providers::{BoxF, Detection, DetectionSet, ScoreVector, StubProvider};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityBand {
    pub level: CongestionLevel,
    /// Inclusive vehicle count range at 224x224.
    pub vehicle_count: (usize, usize),
    /// Pixels per frame, inclusive.
    pub speed: (f64, f64),
}

pub fn default_bands() -> [DensityBand; 5] {
    let band = |l: usize, count, speed| DensityBand {
        level: CongestionLevel::from_index(l),
        vehicle_count: count,
        speed,
    };
    [
        band(0, (0, 3), (6.0, 8.0)),
        band(1, (4, 8), (4.0, 6.0)),
        band(2, (9, 16), (2.0, 4.0)),
        band(3, (17, 30), (0.5, 2.0)),
        band(4, (31, 50), (0.0, 0.5)),
    ]
}

/// Inclusive vehicle width and height ranges in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VehicleSize {
    pub width: (usize, usize),
    pub height: (usize, usize),
}

impl Default for VehicleSize {
    fn default() -> Self {
        Self {
            width: (16, 28),
            height: (10, 14),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub level: CongestionLevel,
    pub seed: u64,
    pub frames: usize,
    pub vehicle_size: VehicleSize,
    pub noise_sigma: f64,
    /// Log-normal noise scale of the stub score sidecar.
    pub score_noise: f64,
}

impl SceneSpec {
    pub fn new(level: CongestionLevel, frames: usize, seed: u64) -> Self {
        Self {
            width: 224,
            height: 224,
            level,
            seed,
            frames,
            vehicle_size: VehicleSize::default(),
            noise_sigma: 2.0,
            score_noise: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::invalid("scene needs at least one frame"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("scene dimensions must be positive"));
        }
        let VehicleSize { width, height } = self.vehicle_size;
        if width.0 == 0 || height.0 == 0 {
            return Err(Error::invalid("vehicle size must be positive"));
        }
        if width.0 > width.1 || height.0 > height.1 {
            return Err(Error::invalid("vehicle size range is inverted"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma must be finite and non-negative"));
        }
        if !(self.score_noise >= 0.0 && self.score_noise.is_finite()) {
            return Err(Error::invalid("score_noise must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    /// Left edge at frame 0, measured from `-w`.
    pub x: f64,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub speed: f64,
    pub intensity: u8,
}

impl Vehicle {
    /// Left edge at frame `t`, in `[-w, width)`.
    pub fn left(&self, t: usize, width: usize) -> f64 {
        let period = (width + self.w) as f64;
        (self.x + self.speed * t as f64).rem_euclid(period) - self.w as f64
    }

    /// Visible column range `[x0, x1)` at frame `t`, if any.
    fn columns(&self, t: usize, width: usize) -> Option<(usize, usize)> {
        let left = self.left(t, width).floor() as isize;
        let x0 = left.max(0) as usize;
        let x1 = (left + self.w as isize).clamp(0, width as isize) as usize;
        (x1 > x0).then_some((x0, x1))
    }

    fn rows(&self, height: usize) -> (usize, usize) {
        (self.y.min(height), (self.y + self.h).min(height))
    }
}

/// Background intensity at a pixel, in roughly [96, 128].
fn texture(x: usize, y: usize) -> f64 {
    let (fx, fy) = (x as f64, y as f64);
    112.0 + 9.0 * (fx / 5.0).sin() + 5.0 * (fy / 7.0).cos() + 2.0 * ((fx + fy) / 3.0).sin()
}

const LAYOUT_STREAM: u64 = u64::MAX;

pub struct Scene {
    spec: SceneSpec,
    vehicles: Vec<Vehicle>,
    background: Vec<f64>,
}

impl Scene {
    /// Draws a vehicle layout from the level's band.
    pub fn new(spec: SceneSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(LAYOUT_STREAM);
        let band = default_bands()[spec.level.index()];
        let n = rng.random_range(band.vehicle_count.0..=band.vehicle_count.1);
        let vs = spec.vehicle_size;
        let vehicles = (0..n)
            .map(|_| {
                let w = rng.random_range(vs.width.0..=vs.width.1);
                let h = rng.random_range(vs.height.0..=vs.height.1).min(spec.height);
                let dark = rng.random_bool(0.5);
                Vehicle {
                    x: rng.random_range(0.0..(spec.width + w) as f64),
                    y: rng.random_range(0..=spec.height - h),
                    w,
                    h,
                    speed: rng.random_range(band.speed.0..=band.speed.1),
                    intensity: if dark {
                        rng.random_range(10..=40)
                    } else {
                        rng.random_range(200..=240)
                    },
                }
            })
            .collect();
        Self::with_vehicles(spec, vehicles)
    }

    /// Scene with an explicit vehicle layout.
    pub fn with_vehicles(spec: SceneSpec, vehicles: Vec<Vehicle>) -> Result<Self> {
        spec.validate()?;
        if vehicles.iter().any(|v| v.w == 0 || v.h == 0) {
            return Err(Error::invalid("vehicle with zero area"));
        }
        let background = (0..spec.height)
            .flat_map(|y| (0..spec.width).map(move |x| texture(x, y)))
            .collect();
        Ok(Self {
            spec,
            vehicles,
            background,
        })
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    /// Noise-free frame at time `t`, as real intensities.
    fn clean(&self, t: usize) -> Vec<f64> {
        let w = self.spec.width;
        let mut img = self.background.clone();
        for v in &self.vehicles {
            let Some((x0, x1)) = v.columns(t, w) else { continue };
            let (y0, y1) = v.rows(self.spec.height);
            for y in y0..y1 {
                img[y * w + x0..y * w + x1].fill(f64::from(v.intensity));
            }
        }
        img
    }

    pub fn render(&self, t: usize) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(t as u64);
        let sigma = self.spec.noise_sigma;
        let pixels = self
            .clean(t)
            .into_iter()
            .map(|v| {
                let z: f64 = if sigma > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
                (v + sigma * z).round().clamp(0.0, 255.0) as u8
            })
            .collect();
        Frame::gray(self.spec.width, self.spec.height, pixels)
            .expect("scene buffer matches its dimensions")
            .with_index(t)
    }

    /// Pixels covered by any vehicle at time `t`.
    pub fn truth_mask(&self, t: usize) -> BinaryMask {
        let w = self.spec.width;
        let mut mask = BinaryMask::new(w, self.spec.height);
        let bits = mask.bits_mut();
        for v in &self.vehicles {
            let Some((x0, x1)) = v.columns(t, w) else { continue };
            let (y0, y1) = v.rows(self.spec.height);
            for y in y0..y1 {
                bits[y * w + x0..y * w + x1].fill(true);
            }
        }
        mask
    }

    /// Visible vehicle boxes at time `t`.
    pub fn vehicle_boxes(&self, t: usize) -> Vec<BoxF> {
        self.vehicles
            .iter()
            .filter_map(|v| {
                let (x0, x1) = v.columns(t, self.spec.width)?;
                let (y0, y1) = v.rows(self.spec.height);
                Some(BoxF {
                    x: x0 as f64,
                    y: y0 as f64,
                    w: (x1 - x0) as f64,
                    h: (y1 - y0) as f64,
                })
            })
            .collect()
    }

    pub fn detections(&self, t: usize) -> DetectionSet {
        DetectionSet {
            frame_index: t,
            detections: self
                .vehicle_boxes(t)
                .into_iter()
                .map(|bbox| Detection {
                    bbox,
                    confidence: 0.9,
                })
                .collect(),
        }
    }
}

/// Frames plus aligned truth and sidecar records.
#[derive(Clone, Debug, Default)]
pub struct SyntheticClip {
    pub frames: Vec<Frame>,
    /// Per-frame level.
    pub truth: Vec<CongestionLevel>,
    pub scores: Vec<ScoreVector>,
    pub detections: Vec<DetectionSet>,
}

impl SyntheticClip {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Level of the first frame of each `segment_len` block.
    pub fn segment_truth(&self, segment_len: usize) -> Vec<CongestionLevel> {
        self.truth.iter().step_by(segment_len.max(1)).copied().collect()
    }

    fn append(&mut self, scene: &Scene, stub: &StubProvider) {
        let offset = self.frames.len();
        let level = scene.spec().level;
        for t in 0..scene.spec().frames {
            let g = offset + t;
            self.frames.push(scene.render(t).with_index(g));
            self.truth.push(level);
            self.scores.push(stub.scores(g, level));
            self.detections.push(DetectionSet {
                frame_index: g,
                ..scene.detections(t)
            });
        }
    }
}

/// Renders one scene with detections taken from the drawn vehicles and stub
/// scores peaked at the scene's level.
pub fn generate(spec: &SceneSpec) -> Result<SyntheticClip> {
    let scene = Scene::new(spec.clone())?;
    let stub = StubProvider::new(spec.seed, spec.score_noise);
    let mut clip = SyntheticClip::default();
    clip.append(&scene, &stub);
    Ok(clip)
}

/// Concatenates `segments_per_level` scenes for each level, level-major, each
/// `frames_per_segment` long with its own layout. Frame indices run over the
/// whole corpus.
pub fn generate_corpus(
    levels: &[CongestionLevel],
    segments_per_level: usize,
    frames_per_segment: usize,
    seed: u64,
    score_noise: f64,
) -> Result<SyntheticClip> {
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let stub = StubProvider::new(seed, score_noise);
    let mut clip = SyntheticClip::default();
    for &level in levels {
        for _ in 0..segments_per_level {
            let mut spec = SceneSpec::new(level, frames_per_segment, seeds.random());
            spec.score_noise = score_noise;
            clip.append(&Scene::new(spec)?, &stub);
        }
    }
    Ok(clip)
}
