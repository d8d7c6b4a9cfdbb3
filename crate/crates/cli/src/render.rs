//! Annotated output frames: detection boxes, a per-level score chart and a
//! level banner, drawn straight into an RGB buffer.

use ordinalflow::{imaging, CongestionLevel, Frame, PixelLayout, LEVELS};
use ordinalflow::providers::DetectionSet;

pub const BOX_COLOR: [u8; 3] = [0, 255, 0];

const LEVEL_COLORS: [[u8; 3]; LEVELS] = [
    [40, 170, 60],
    [150, 200, 50],
    [240, 200, 40],
    [240, 120, 30],
    [210, 30, 30],
];

/// Where the chart and banner go on a frame of a given size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChartLayout {
    /// Left edge of the first bar.
    pub x0: usize,
    /// Row just below the bars (bars grow upward from here).
    pub baseline: usize,
    pub chart_height: usize,
    pub bar_width: usize,
    pub gap: usize,
    pub banner_height: usize,
}

impl ChartLayout {
    pub fn for_frame(width: usize, height: usize) -> Self {
        let gap = 1;
        let bar_width = ((width / 4).saturating_sub(gap * (LEVELS - 1)) / LEVELS).max(1);
        Self {
            x0: 2.min(width),
            baseline: height.saturating_sub(2),
            chart_height: (height / 4).max(1),
            bar_width,
            gap,
            banner_height: (height / 20).max(1),
        }
    }

    pub fn bar_x(&self, level_index: usize) -> usize {
        self.x0 + level_index * (self.bar_width + self.gap)
    }
}

/// round(score / max * chart_height) for each level; zero when all scores are.
pub fn bar_heights(scores: &[f64; LEVELS], chart_height: usize) -> [usize; LEVELS] {
    let max = scores.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return [0; LEVELS];
    }
    scores.map(|s| (s / max * chart_height as f64 + 0.5).floor() as usize)
}

struct Canvas {
    width: usize,
    height: usize,
    px: Vec<u8>,
}

impl Canvas {
    fn put(&mut self, x: isize, y: isize, c: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            let i = 3 * (y as usize * self.width + x as usize);
            self.px[i..i + 3].copy_from_slice(&c);
        }
    }

    fn fill(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, c: [u8; 3]) {
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                self.put(x as isize, y as isize, c);
            }
        }
    }

    fn outline(&mut self, x0: isize, y0: isize, x1: isize, y1: isize, c: [u8; 3]) {
        for x in x0..=x1 {
            self.put(x, y0, c);
            self.put(x, y1, c);
        }
        for y in y0..=y1 {
            self.put(x0, y, c);
            self.put(x1, y, c);
        }
    }
}

fn to_rgb(frame: &Frame) -> Vec<u8> {
    match frame.layout() {
        PixelLayout::Gray => frame.pixels().iter().flat_map(|&g| [g, g, g]).collect(),
        PixelLayout::Rgb => frame.pixels().to_vec(),
        PixelLayout::Bgr => frame
            .pixels()
            .chunks_exact(3)
            .flat_map(|p| [p[2], p[1], p[0]])
            .collect(),
    }
}

/// Returns an RGB copy of `frame` with boxes, chart and banner drawn on it.
/// Pixels outside those regions keep their (grayscale-expanded) values.
pub fn render_annotated(
    frame: &Frame,
    detections: &DetectionSet,
    adjusted_scores: &[f64; LEVELS],
    level: CongestionLevel,
) -> Frame {
    let mut c = Canvas {
        width: frame.width(),
        height: frame.height(),
        px: to_rgb(frame),
    };
    for d in &detections.detections {
        let b = d.bbox;
        let (x0, y0) = (b.x.floor() as isize, b.y.floor() as isize);
        let x1 = (b.x + b.w).ceil() as isize - 1;
        let y1 = (b.y + b.h).ceil() as isize - 1;
        if x1 >= x0 && y1 >= y0 {
            c.outline(x0, y0, x1, y1, BOX_COLOR);
        }
    }

    let layout = ChartLayout::for_frame(c.width, c.height);
    let heights = bar_heights(adjusted_scores, layout.chart_height);
    for (i, h) in heights.iter().enumerate() {
        let x = layout.bar_x(i);
        let top = layout.baseline.saturating_sub(*h);
        c.fill(x, top, x + layout.bar_width, layout.baseline, LEVEL_COLORS[i]);
    }

    // banner: one cell per level, lit up to the predicted level
    let cell = (c.width / LEVELS).max(1);
    for i in 0..level.value() as usize {
        c.fill(i * cell, 0, (i + 1) * cell, layout.banner_height, LEVEL_COLORS[level.index()]);
    }

    Frame::new(c.width, c.height, PixelLayout::Rgb, c.px, frame.index())
        .expect("canvas keeps frame dimensions")
}

/// Same as [`render_annotated`] after resizing to the engine's working size.
pub fn render_at(
    frame: &Frame,
    width: usize,
    height: usize,
    detections: &DetectionSet,
    adjusted_scores: &[f64; LEVELS],
    level: CongestionLevel,
) -> ordinalflow::Result<Frame> {
    let resized = imaging::preprocess(frame, width, height)?;
    Ok(render_annotated(&resized, detections, adjusted_scores, level))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ordinalflow::providers::Detection;

    fn plain(w: usize, h: usize) -> Frame {
        Frame::gray(w, h, vec![128; w * h]).unwrap()
    }

    fn bar_height_on(img: &Frame, layout: &ChartLayout, i: usize) -> usize {
        let x = layout.bar_x(i);
        (0..layout.baseline)
            .rev()
            .take_while(|&y| img.get(x, y, 0) != 128 || img.get(x, y, 1) != 128)
            .count()
    }

    #[test]
    fn uniform_scores_equal_bars_no_boxes() {
        let f = plain(224, 224);
        let img = render_annotated(&f, &DetectionSet::default(), &[0.2; 5], CongestionLevel::MIN);
        let layout = ChartLayout::for_frame(224, 224);
        let hs: Vec<usize> = (0..5).map(|i| bar_height_on(&img, &layout, i)).collect();
        assert!(hs.iter().all(|&h| h == layout.chart_height), "{hs:?}");
        assert!(!img.pixels().chunks_exact(3).any(|p| p == BOX_COLOR));
    }

    #[test]
    fn tallest_bar_is_the_top_score() {
        let scores = [0.330, 0.019, 0.358, 0.225, 0.069];
        let img = render_annotated(
            &plain(224, 224),
            &DetectionSet::default(),
            &scores,
            CongestionLevel::new(3).unwrap(),
        );
        let layout = ChartLayout::for_frame(224, 224);
        let hs: Vec<usize> = (0..5).map(|i| bar_height_on(&img, &layout, i)).collect();
        let tallest = (0..5).max_by_key(|&i| (hs[i], std::cmp::Reverse(i))).unwrap();
        assert_eq!(tallest, 2);
        let max = 0.358;
        for (i, s) in scores.iter().enumerate() {
            let oracle = s / max * layout.chart_height as f64;
            assert!((hs[i] as f64 - oracle).abs() <= 1.0, "bar {i}: {} vs {oracle}", hs[i]);
        }
    }

    #[test]
    fn pixels_outside_drawings_untouched() {
        let f = plain(64, 48);
        let dets = DetectionSet {
            frame_index: 0,
            detections: vec![Detection::new(20.0, 20.0, 10.0, 6.0, 0.8).unwrap()],
        };
        let img = render_annotated(&f, &dets, &[0.1, 0.2, 0.3, 0.2, 0.1], CongestionLevel::new(3).unwrap());
        let layout = ChartLayout::for_frame(64, 48);
        let chart_right = layout.bar_x(4) + layout.bar_width;
        for y in 0..48 {
            for x in 0..64 {
                let in_box = (20..30).contains(&x) && (20..26).contains(&y)
                    && (x == 20 || x == 29 || y == 20 || y == 25);
                let in_chart = x >= layout.x0
                    && x < chart_right
                    && y < layout.baseline
                    && y >= layout.baseline - layout.chart_height;
                let in_banner = y < layout.banner_height;
                if in_box {
                    assert_eq!([img.get(x, y, 0), img.get(x, y, 1), img.get(x, y, 2)], BOX_COLOR);
                } else if !in_chart && !in_banner {
                    assert_eq!(img.get(x, y, 0), 128, "({x},{y})");
                    assert_eq!(img.get(x, y, 1), 128);
                }
            }
        }
        // box interior untouched
        assert_eq!(img.get(25, 23, 1), 128);
    }

    #[test]
    fn tiny_frames_do_not_panic() {
        let f = plain(3, 2);
        let dets = DetectionSet {
            frame_index: 0,
            detections: vec![Detection::new(0.0, 0.0, 50.0, 50.0, 0.5).unwrap()],
        };
        let img = render_annotated(&f, &dets, &[0.0; 5], CongestionLevel::MAX);
        assert_eq!(img.width(), 3);
    }

    #[test]
    fn heights_oracle() {
        assert_eq!(bar_heights(&[0.0; 5], 40), [0; 5]);
        assert_eq!(bar_heights(&[1.0, 0.5, 0.25, 0.0, 0.125], 8), [8, 4, 2, 0, 1]);
    }
}
