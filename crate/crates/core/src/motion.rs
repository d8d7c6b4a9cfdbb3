//! Motion metrics derived from foreground masks.
//!
//! Coverage is a fraction in `[0, 1]`, never a percentage. Stability is
//! `1 / (1 + population variance)` of the windowed coverage, which keeps it in
//! `[0.8, 1]` for any window of fractions.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, ComponentStats, Frame, PixelLayout};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Increasing,
    Decreasing,
    Stable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionFeatures {
    pub frame_index: usize,
    /// Foreground fraction of the current frame.
    pub coverage: f64,
    /// Mean coverage over the window.
    pub mean_coverage: f64,
    pub intensity: f64,
    /// Components per megapixel.
    pub contour_density: f64,
    pub component_count: usize,
    pub stability: f64,
    pub trend: Trend,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionParams {
    pub window: usize,
    /// Slope magnitude (coverage per frame) separating a trend from noise.
    pub trend_eps: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            window: 15,
            trend_eps: 0.002,
        }
    }
}

impl MotionParams {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::invalid("motion: window must be at least 1"));
        }
        if !(self.trend_eps >= 0.0 && self.trend_eps.is_finite()) {
            return Err(Error::invalid("motion: trend_eps must be finite and non-negative"));
        }
        Ok(())
    }
}

pub fn coverage(mask: &BinaryMask) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::invalid("coverage of a zero-size mask"));
    }
    Ok(mask.count() as f64 / mask.len() as f64)
}

/// Mean absolute temporal difference over foreground pixels, scaled to `[0, 1]`.
pub fn intensity(prev: &Frame, curr: &Frame, mask: &BinaryMask) -> Result<f64> {
    if prev.layout() != PixelLayout::Gray || curr.layout() != PixelLayout::Gray {
        return Err(Error::invalid("intensity needs grayscale frames"));
    }
    if prev.width() != curr.width()
        || prev.height() != curr.height()
        || mask.width() != curr.width()
        || mask.height() != curr.height()
    {
        return Err(Error::invalid("intensity inputs differ in size"));
    }
    let mut sum = 0u64;
    let mut n = 0u64;
    for ((&a, &b), &fg) in prev.pixels().iter().zip(curr.pixels()).zip(mask.bits()) {
        if fg {
            sum += u64::from(a.abs_diff(b));
            n += 1;
        }
    }
    if n == 0 {
        return Ok(0.0);
    }
    Ok(sum as f64 / n as f64 / 255.0)
}

pub fn contour_density(components: &[ComponentStats], width: usize, height: usize) -> Result<f64> {
    let area = width * height;
    if area == 0 {
        return Err(Error::invalid("contour density over a zero-size frame"));
    }
    Ok(components.len() as f64 / (area as f64 / 1e6))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn stability(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("stability of an empty window"));
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    Ok(1.0 / (1.0 + var))
}

/// Least-squares slope against frame position.
pub fn slope(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::invalid("slope needs at least two samples"));
    }
    let n = values.len() as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = mean(values);
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &y) in values.iter().enumerate() {
        let dx = i as f64 - x_mean;
        num += dx * (y - y_mean);
        den += dx * dx;
    }
    Ok(num / den)
}

pub fn trend(values: &[f64], eps: f64) -> Result<Trend> {
    let s = slope(values)?;
    Ok(if s > eps {
        Trend::Increasing
    } else if s < -eps {
        Trend::Decreasing
    } else {
        Trend::Stable
    })
}

/// Sliding window of recent coverage values for one stream.
#[derive(Clone, Debug)]
pub struct MotionWindow {
    params: MotionParams,
    history: VecDeque<f64>,
    component_counts: VecDeque<usize>,
    scratch: Vec<f64>,
}

impl MotionWindow {
    pub fn new(params: MotionParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            history: VecDeque::with_capacity(params.window),
            component_counts: VecDeque::with_capacity(params.window),
            scratch: Vec::with_capacity(params.window),
            params,
        })
    }

    pub fn params(&self) -> &MotionParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn coverages(&self) -> impl Iterator<Item = f64> + '_ {
        self.history.iter().copied()
    }

    pub fn component_counts(&self) -> impl Iterator<Item = usize> + '_ {
        self.component_counts.iter().copied()
    }

    /// Pushes the current frame's coverage and computes every metric over the
    /// updated window. `prev` is `None` for the first frame of a stream.
    pub fn step(
        &mut self,
        mask: &BinaryMask,
        prev: Option<&Frame>,
        curr: &Frame,
        components: &[ComponentStats],
    ) -> Result<MotionFeatures> {
        let cov = coverage(mask)?;
        let inten = match prev {
            Some(p) => intensity(p, curr, mask)?,
            None => 0.0,
        };
        let density = contour_density(components, mask.width(), mask.height())?;

        if self.history.len() == self.params.window {
            self.history.pop_front();
            self.component_counts.pop_front();
        }
        self.history.push_back(cov);
        self.component_counts.push_back(components.len());

        self.scratch.clear();
        self.scratch.extend(self.history.iter().copied());
        let window = &self.scratch[..];
        let (stab, tr) = if window.len() < 2 {
            (1.0, Trend::Stable)
        } else {
            (stability(window)?, trend(window, self.params.trend_eps)?)
        };
        Ok(MotionFeatures {
            frame_index: curr.index(),
            coverage: cov,
            mean_coverage: mean(window),
            intensity: inten,
            contour_density: density,
            component_count: components.len(),
            stability: stab,
            trend: tr,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::PixelBox;

    fn comp(label: u32) -> ComponentStats {
        ComponentStats {
            label,
            area: 1,
            bbox: PixelBox { x: 0, y: 0, w: 1, h: 1 },
            centroid: (0.0, 0.0),
        }
    }

    #[test]
    fn coverage_cases() {
        assert_eq!(coverage(&BinaryMask::new(4, 4)).unwrap(), 0.0);
        let full = BinaryMask::from_bits(3, 3, vec![true; 9]).unwrap();
        assert_eq!(coverage(&full).unwrap(), 1.0);
        let mut m = BinaryMask::new(8, 8);
        for y in 0..4 {
            for x in 0..4 {
                m.set(x, y, true);
            }
        }
        assert_eq!(coverage(&m).unwrap(), 0.25);
        assert!(coverage(&BinaryMask::new(0, 0)).is_err());
    }

    #[test]
    fn intensity_cases() {
        let a = Frame::filled(4, 4, PixelLayout::Gray, 0).unwrap();
        let b = Frame::filled(4, 4, PixelLayout::Gray, 255).unwrap();
        let all = BinaryMask::from_bits(4, 4, vec![true; 16]).unwrap();
        assert_eq!(intensity(&a, &a, &all).unwrap(), 0.0);
        assert_eq!(intensity(&a, &b, &all).unwrap(), 1.0);
        assert_eq!(intensity(&a, &b, &BinaryMask::new(4, 4)).unwrap(), 0.0);
        let small = Frame::filled(3, 4, PixelLayout::Gray, 0).unwrap();
        assert!(intensity(&small, &a, &all).is_err());
    }

    #[test]
    fn intensity_matches_double_loop() {
        let mut s = 7u32;
        let mut next = || {
            s = s.wrapping_mul(1_103_515_245).wrapping_add(12345);
            (s >> 16) as u8
        };
        let (w, h) = (13, 9);
        let p: Vec<u8> = (0..w * h).map(|_| next()).collect();
        let c: Vec<u8> = (0..w * h).map(|_| next()).collect();
        let bits: Vec<bool> = (0..w * h).map(|_| next() > 100).collect();
        let mask = BinaryMask::from_bits(w, h, bits).unwrap();
        let prev = Frame::gray(w, h, p).unwrap();
        let curr = Frame::gray(w, h, c).unwrap();
        let (mut sum, mut n) = (0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                if mask.get(x, y) {
                    sum += (f64::from(curr.get(x, y, 0)) - f64::from(prev.get(x, y, 0))).abs();
                    n += 1.0;
                }
            }
        }
        let expected = sum / n / 255.0;
        assert!((intensity(&prev, &curr, &mask).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn density_cases() {
        assert_eq!(contour_density(&[], 224, 224).unwrap(), 0.0);
        assert_eq!(contour_density(&[comp(1), comp(2)], 1000, 1000).unwrap(), 2.0);
        let d = contour_density(&[comp(1), comp(2), comp(3)], 224, 224).unwrap();
        assert!((d - 59.789).abs() < 1e-3);
    }

    #[test]
    fn stability_cases() {
        assert_eq!(stability(&[0.3; 6]).unwrap(), 1.0);
        assert_eq!(stability(&[0.42]).unwrap(), 1.0);
        assert_eq!(stability(&[0.0, 1.0, 0.0, 1.0]).unwrap(), 0.8);
        // population variance of [0.1, 0.2, 0.3] = 0.02 / 3
        let s = stability(&[0.1, 0.2, 0.3]).unwrap();
        assert!((s - 0.993_377).abs() < 1e-6);
        assert!(stability(&[]).is_err());
    }

    #[test]
    fn trend_cases() {
        assert_eq!(trend(&[0.2; 5], 0.002).unwrap(), Trend::Stable);
        let ramp: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        assert!((slope(&ramp).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(trend(&ramp, 0.002).unwrap(), Trend::Increasing);
        let down: Vec<f64> = ramp.iter().rev().copied().collect();
        assert_eq!(trend(&down, 0.002).unwrap(), Trend::Decreasing);
        assert!(trend(&[0.1], 0.002).is_err());
    }

    #[test]
    fn near_flat_trend_matches_normal_equations() {
        // slope = (n Σxy − Σx Σy) / (n Σx² − (Σx)²)
        let values = [0.050, 0.052, 0.049, 0.055, 0.051, 0.056, 0.053, 0.058, 0.054, 0.060];
        let n = values.len() as f64;
        let (mut sx, mut sy, mut sxy, mut sxx) = (0.0, 0.0, 0.0, 0.0);
        for (i, &y) in values.iter().enumerate() {
            let x = i as f64;
            sx += x;
            sy += y;
            sxy += x * y;
            sxx += x * x;
        }
        let oracle = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!((slope(&values).unwrap() - oracle).abs() < 1e-12);
        let expected = if oracle > 0.002 {
            Trend::Increasing
        } else if oracle < -0.002 {
            Trend::Decreasing
        } else {
            Trend::Stable
        };
        assert_eq!(trend(&values, 0.002).unwrap(), expected);
        // A noisy rise of ~0.001/frame stays below the threshold.
        assert_eq!(expected, Trend::Stable);
    }

    #[test]
    fn window_startup_and_eviction() {
        let mut w = MotionWindow::new(MotionParams::default()).unwrap();
        let f = Frame::filled(10, 10, PixelLayout::Gray, 9).unwrap();
        let mut m = BinaryMask::new(10, 10);
        m.set(1, 1, true);
        let first = w.step(&m, None, &f, &[]).unwrap();
        assert_eq!(first.stability, 1.0);
        assert_eq!(first.trend, Trend::Stable);
        assert_eq!(first.intensity, 0.0);
        for _ in 0..30 {
            let feat = w.step(&m, Some(&f), &f, &[]).unwrap();
            assert_eq!(feat.stability, 1.0);
            assert_eq!(feat.trend, Trend::Stable);
            assert!((feat.mean_coverage - 0.01).abs() < 1e-15);
        }
        assert_eq!(w.len(), 15);

        let mut single = MotionWindow::new(MotionParams {
            window: 1,
            ..Default::default()
        })
        .unwrap();
        let full = BinaryMask::from_bits(10, 10, vec![true; 100]).unwrap();
        for mask in [&m, &full, &m] {
            assert_eq!(single.step(mask, Some(&f), &f, &[]).unwrap().stability, 1.0);
        }
        assert!(MotionWindow::new(MotionParams {
            window: 0,
            ..Default::default()
        })
        .is_err());
    }
}
