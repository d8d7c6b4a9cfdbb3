//! Per-pixel adaptive mixture-of-Gaussians background model.
//!
//! Each pixel keeps up to `max_components` weighted Gaussians over its
//! grayscale intensity. On every frame the components are ranked by
//! `weight / sigma`; the highest-ranked prefix whose cumulative weight reaches
//! `background_ratio` is the background. A pixel is foreground when it does
//! not match any component of that prefix.
//!
//! The learning rate plays the role of an inverse history length: a rate of
//! `1 / N` adapts over roughly `N` frames.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, Frame, PixelLayout};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

impl GaussianComponent {
    #[inline]
    fn fitness(&self) -> f64 {
        self.weight / self.variance.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubtractorParams {
    pub max_components: usize,
    pub learning_rate: f64,
    /// Squared Mahalanobis distance below which a sample matches a component.
    pub match_threshold_sq: f64,
    pub background_ratio: f64,
    pub initial_variance: f64,
    pub variance_floor: f64,
    pub new_component_weight: f64,
}

impl Default for SubtractorParams {
    fn default() -> Self {
        Self {
            max_components: 5,
            learning_rate: 0.01,
            match_threshold_sq: 16.0,
            background_ratio: 0.9,
            initial_variance: 225.0,
            variance_floor: 4.0,
            new_component_weight: 0.05,
        }
    }
}

impl SubtractorParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::invalid(format!("bgsub: {msg}")));
        if self.max_components == 0 || self.max_components > 255 {
            return fail("max_components must be in 1..=255");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return fail("learning_rate must be in (0, 1]");
        }
        if !(self.background_ratio > 0.0 && self.background_ratio < 1.0) {
            return fail("background_ratio must be in (0, 1)");
        }
        if !(self.match_threshold_sq > 0.0 && self.match_threshold_sq.is_finite()) {
            return fail("match_threshold_sq must be positive");
        }
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return fail("variance_floor must be positive");
        }
        if !(self.initial_variance >= self.variance_floor && self.initial_variance.is_finite()) {
            return fail("initial_variance must be at least variance_floor");
        }
        if !(self.new_component_weight > 0.0 && self.new_component_weight <= 1.0) {
            return fail("new_component_weight must be in (0, 1]");
        }
        Ok(())
    }
}

/// Mutable background model for one video stream.
#[derive(Clone, Debug)]
pub struct BackgroundSubtractor {
    width: usize,
    height: usize,
    params: SubtractorParams,
    // `max_components` slots per pixel, first `counts[p]` of them live.
    components: Vec<GaussianComponent>,
    counts: Vec<u8>,
    frames_seen: u64,
}

impl BackgroundSubtractor {
    pub fn new(width: usize, height: usize, params: SubtractorParams) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("subtractor dimensions must be positive"));
        }
        params.validate()?;
        let empty = GaussianComponent {
            weight: 0.0,
            mean: 0.0,
            variance: params.initial_variance,
        };
        Ok(Self {
            width,
            height,
            components: vec![empty; width * height * params.max_components],
            counts: vec![0; width * height],
            params,
            frames_seen: 0,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn params(&self) -> &SubtractorParams {
        &self.params
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    /// Live components of pixel `(x, y)` in stored order.
    pub fn pixel_model(&self, x: usize, y: usize) -> &[GaussianComponent] {
        let p = y * self.width + x;
        let k = self.params.max_components;
        &self.components[p * k..p * k + usize::from(self.counts[p])]
    }

    /// Classifies `frame` against the model, then updates the model with it.
    pub fn apply(&mut self, frame: &Frame) -> Result<BinaryMask> {
        if frame.layout() != PixelLayout::Gray {
            return Err(Error::invalid("background subtraction needs a grayscale frame"));
        }
        if frame.width() != self.width || frame.height() != self.height {
            return Err(Error::invalid(format!(
                "frame is {}x{}, subtractor expects {}x{}",
                frame.width(),
                frame.height(),
                self.width,
                self.height
            )));
        }
        let mut mask = BinaryMask::new(self.width, self.height);
        let k = self.params.max_components;
        let params = &self.params;
        for ((&value, slots), (count, bit)) in frame
            .pixels()
            .iter()
            .zip(self.components.chunks_exact_mut(k))
            .zip(self.counts.iter_mut().zip(mask.bits_mut()))
        {
            *bit = update_pixel(params, slots, count, f64::from(value));
        }
        self.frames_seen += 1;
        Ok(mask)
    }

    /// Mean of each pixel's highest-ranked component, rounded to 8 bits.
    pub fn background_image(&self) -> Result<Frame> {
        if self.frames_seen == 0 {
            return Err(Error::NotReady("no frames have been applied yet"));
        }
        let k = self.params.max_components;
        let pixels = self
            .components
            .chunks_exact(k)
            .zip(&self.counts)
            .map(|(slots, &n)| {
                let live = &slots[..usize::from(n)];
                let mut best: Option<&GaussianComponent> = None;
                for c in live {
                    if best.is_none_or(|b| c.fitness() > b.fitness()) {
                        best = Some(c);
                    }
                }
                best.map_or(0, |c| c.mean.round().clamp(0.0, 255.0) as u8)
            })
            .collect();
        Frame::gray(self.width, self.height, pixels)
    }
}

/// Stable insertion sort by descending fitness.
#[inline]
fn sort_by_fitness(comps: &mut [GaussianComponent]) {
    for i in 1..comps.len() {
        let mut j = i;
        while j > 0 && comps[j].fitness() > comps[j - 1].fitness() {
            comps.swap(j, j - 1);
            j -= 1;
        }
    }
}

/// Runs one update on a single pixel; returns `true` for foreground.
#[inline]
fn update_pixel(
    params: &SubtractorParams,
    slots: &mut [GaussianComponent],
    count: &mut u8,
    x: f64,
) -> bool {
    let n = usize::from(*count);
    let comps = &mut slots[..n];
    sort_by_fitness(comps);

    let mut background_len = n;
    let mut cumulative = 0.0;
    for (i, c) in comps.iter().enumerate() {
        cumulative += c.weight;
        if cumulative >= params.background_ratio {
            background_len = i + 1;
            break;
        }
    }

    let matched = comps.iter().position(|c| {
        let d = x - c.mean;
        d * d <= params.match_threshold_sq * c.variance
    });

    let rho = params.learning_rate;
    match matched {
        Some(j) => {
            for (i, c) in comps.iter_mut().enumerate() {
                if i == j {
                    c.weight += rho * (1.0 - c.weight);
                    let rate = (rho / c.weight).min(1.0);
                    let d = x - c.mean;
                    c.mean += rate * d;
                    c.variance = (c.variance + rate * (d * d - c.variance)).max(params.variance_floor);
                } else {
                    c.weight *= 1.0 - rho;
                }
            }
            j >= background_len
        }
        None => {
            let fresh = GaussianComponent {
                weight: params.new_component_weight,
                mean: x,
                variance: params.initial_variance,
            };
            let live = if n < slots.len() {
                slots[n] = fresh;
                *count += 1;
                n + 1
            } else {
                slots[n - 1] = fresh;
                n
            };
            let total: f64 = slots[..live].iter().map(|c| c.weight).sum();
            for c in &mut slots[..live] {
                c.weight /= total;
            }
            true
        }
    }
}
