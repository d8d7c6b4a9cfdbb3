//! Raster types and pixel-level operations shared by the motion path.
//!
//! Everything here is a pure function of its inputs. Masks use the
//! convention that pixels outside the image are background.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channel arrangement of a [`Frame`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PixelLayout {
    Gray,
    Rgb,
    Bgr,
}

impl PixelLayout {
    pub fn channels(self) -> usize {
        match self {
            PixelLayout::Gray => 1,
            PixelLayout::Rgb | PixelLayout::Bgr => 3,
        }
    }
}

/// A single 8-bit image with its position in the stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    layout: PixelLayout,
    pixels: Vec<u8>,
    index: usize,
}

impl Frame {
    pub fn new(
        width: usize,
        height: usize,
        layout: PixelLayout,
        pixels: Vec<u8>,
        index: usize,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width * height * layout.channels();
        if pixels.len() != expected {
            return Err(Error::invalid(format!(
                "frame buffer holds {} bytes, expected {expected}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            layout,
            pixels,
            index,
        })
    }

    /// Single-channel frame with index 0.
    pub fn gray(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        Self::new(width, height, PixelLayout::Gray, pixels, 0)
    }

    pub fn filled(width: usize, height: usize, layout: PixelLayout, value: u8) -> Result<Self> {
        Self::new(
            width,
            height,
            layout,
            vec![value; width * height * layout.channels()],
            0,
        )
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn layout(&self) -> PixelLayout {
        self.layout
    }

    pub fn channels(&self) -> usize {
        self.layout.channels()
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, channel: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels() + channel]
    }

    fn same_dims(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Swaps BGR input to RGB, then bilinearly resizes to `target_w` x `target_h`.
///
/// Sample positions use pixel-center alignment and are clamped to the source
/// edge, so a same-size resize is the identity.
pub fn preprocess(frame: &Frame, target_w: usize, target_h: usize) -> Result<Frame> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::invalid(format!(
            "resize target must be positive, got {target_w}x{target_h}"
        )));
    }
    let rgb = match frame.layout {
        PixelLayout::Bgr => {
            let mut pixels = frame.pixels.clone();
            for px in pixels.chunks_exact_mut(3) {
                px.swap(0, 2);
            }
            Frame {
                width: frame.width,
                height: frame.height,
                layout: PixelLayout::Rgb,
                pixels,
                index: frame.index,
            }
        }
        _ => frame.clone(),
    };
    if rgb.width == target_w && rgb.height == target_h {
        return Ok(rgb);
    }

    let xs = sample_axis(rgb.width, target_w);
    let ys = sample_axis(rgb.height, target_h);
    let ch = rgb.channels();
    let mut out = Vec::with_capacity(target_w * target_h * ch);
    for &(y0, y1, fy) in &ys {
        let row0 = &rgb.pixels[y0 * rgb.width * ch..(y0 + 1) * rgb.width * ch];
        let row1 = &rgb.pixels[y1 * rgb.width * ch..(y1 + 1) * rgb.width * ch];
        for &(x0, x1, fx) in &xs {
            for c in 0..ch {
                let p00 = f64::from(row0[x0 * ch + c]);
                let p01 = f64::from(row0[x1 * ch + c]);
                let p10 = f64::from(row1[x0 * ch + c]);
                let p11 = f64::from(row1[x1 * ch + c]);
                let top = p00 + (p01 - p00) * fx;
                let bottom = p10 + (p11 - p10) * fx;
                let v = top + (bottom - top) * fy;
                out.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Frame::new(target_w, target_h, rgb.layout, out, frame.index)
}

fn sample_axis(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    let max = (src - 1) as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Luma conversion, `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn to_grayscale(frame: &Frame) -> Frame {
    let (r, b) = match frame.layout {
        PixelLayout::Gray => return frame.clone(),
        PixelLayout::Rgb => (0, 2),
        PixelLayout::Bgr => (2, 0),
    };
    let pixels = frame
        .pixels
        .chunks_exact(3)
        .map(|px| {
            let y = 0.299 * f64::from(px[r]) + 0.587 * f64::from(px[1]) + 0.114 * f64::from(px[b]);
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    Frame {
        width: frame.width,
        height: frame.height,
        layout: PixelLayout::Gray,
        pixels,
        index: frame.index,
    }
}

/// Row-major boolean image; `true` marks foreground.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::invalid(format!(
                "mask holds {} bits, expected {}",
                bits.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// True when every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.len() == other.bits.len()
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Intersection over union against another mask of equal size.
    /// Two empty masks have IoU 1.
    pub fn iou(&self, other: &BinaryMask) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            inter += usize::from(a && b);
            union += usize::from(a || b);
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelShape {
    Ellipse,
    Rect,
}

/// Symmetric structuring element, stored as one horizontal span per row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructuringElement {
    radius_x: usize,
    radius_y: usize,
    shape: KernelShape,
    // (dy, half-width of the span at that row)
    rows: Vec<(isize, isize)>,
}

impl StructuringElement {
    /// All offsets with `(dx/rx)^2 + (dy/ry)^2 <= 1`.
    pub fn ellipse(radius_x: usize, radius_y: usize) -> Self {
        let (rx, ry) = (radius_x as i64, radius_y as i64);
        let rows = (-ry..=ry)
            .map(|dy| {
                let half = (0..=rx)
                    .rev()
                    .find(|&dx| dx * dx * ry * ry + dy * dy * rx * rx <= rx * rx * ry * ry)
                    .unwrap_or(0);
                (dy as isize, half as isize)
            })
            .collect();
        Self {
            radius_x,
            radius_y,
            shape: KernelShape::Ellipse,
            rows,
        }
    }

    pub fn rect(radius_x: usize, radius_y: usize) -> Self {
        let ry = radius_y as isize;
        Self {
            radius_x,
            radius_y,
            shape: KernelShape::Rect,
            rows: (-ry..=ry).map(|dy| (dy, radius_x as isize)).collect(),
        }
    }

    pub fn shape(&self) -> KernelShape {
        self.shape
    }

    pub fn radius(&self) -> (usize, usize) {
        (self.radius_x, self.radius_y)
    }

    /// Every `(dx, dy)` covered by the element, row by row.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        self.rows
            .iter()
            .flat_map(|&(dy, h)| (-h..=h).map(move |dx| (dx, dy)))
            .collect()
    }
}

impl Default for StructuringElement {
    fn default() -> Self {
        Self::ellipse(2, 2)
    }
}

/// Per-row prefix counts of foreground pixels; row `y` occupies
/// `[y * (w + 1), (y + 1) * (w + 1))`.
fn row_prefix_counts(mask: &BinaryMask) -> Vec<u32> {
    let w = mask.width;
    let mut prefix = vec![0u32; mask.height * (w + 1)];
    for (y, row) in mask.bits.chunks_exact(w.max(1)).enumerate().take(mask.height) {
        let base = y * (w + 1);
        for (x, &b) in row.iter().enumerate() {
            prefix[base + x + 1] = prefix[base + x] + u32::from(b);
        }
    }
    prefix
}

/// Erosion with an explicit value for pixels outside the image.
pub fn erode_with_border(
    mask: &BinaryMask,
    se: &StructuringElement,
    outside: bool,
) -> BinaryMask {
    let (w, h) = (mask.width as isize, mask.height as isize);
    let prefix = row_prefix_counts(mask);
    let stride = mask.width + 1;
    let mut out = BinaryMask::new(mask.width, mask.height);
    for y in 0..h {
        for x in 0..w {
            let keep = se.rows.iter().all(|&(dy, half)| {
                let sy = y + dy;
                if sy < 0 || sy >= h {
                    return outside;
                }
                let (lo, hi) = (x - half, x + half);
                if (lo < 0 || hi >= w) && !outside {
                    return false;
                }
                let (clo, chi) = (lo.max(0) as usize, hi.min(w - 1) as usize);
                let base = sy as usize * stride;
                let ones = prefix[base + chi + 1] - prefix[base + clo];
                ones as usize == chi + 1 - clo
            });
            if keep {
                out.bits[(y * w + x) as usize] = true;
            }
        }
    }
    out
}

/// Dilation with an explicit value for pixels outside the image.
pub fn dilate_with_border(
    mask: &BinaryMask,
    se: &StructuringElement,
    outside: bool,
) -> BinaryMask {
    let (w, h) = (mask.width as isize, mask.height as isize);
    let prefix = row_prefix_counts(mask);
    let stride = mask.width + 1;
    let mut out = BinaryMask::new(mask.width, mask.height);
    for y in 0..h {
        for x in 0..w {
            let hit = se.rows.iter().any(|&(dy, half)| {
                let sy = y + dy;
                if sy < 0 || sy >= h {
                    return outside;
                }
                let (lo, hi) = (x - half, x + half);
                if (lo < 0 || hi >= w) && outside {
                    return true;
                }
                let (clo, chi) = (lo.max(0) as usize, hi.min(w - 1) as usize);
                let base = sy as usize * stride;
                prefix[base + chi + 1] > prefix[base + clo]
            });
            if hit {
                out.bits[(y * w + x) as usize] = true;
            }
        }
    }
    out
}

/// A pixel survives iff every element offset lands on foreground.
pub fn erode(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    erode_with_border(mask, se, false)
}

/// A pixel is set iff any element offset lands on foreground.
pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    dilate_with_border(mask, se, false)
}

/// Erosion followed by dilation; removes specks smaller than the element.
pub fn open(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    dilate(&erode(mask, se), se)
}

/// Dilation followed by erosion; fills holes smaller than the element.
///
/// The erosion step counts outside pixels as foreground, so foreground
/// touching the image edge is kept and `mask ⊆ close(mask)` holds.
pub fn close(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    erode_with_border(&dilate(mask, se), se, true)
}

/// Axis-aligned integer box, `x..x + w` by `y..y + h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    pub label: u32,
    pub area: usize,
    pub bbox: PixelBox,
    pub centroid: (f64, f64),
}

/// Per-pixel labels (0 = background or filtered out) plus component stats.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentLabels {
    pub labels: Vec<u32>,
    pub components: Vec<ComponentStats>,
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        let p = parent[i as usize];
        parent[i as usize] = parent[p as usize];
        i = p;
    }
    i
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// 8-connected labelling. Components smaller than `min_area` are dropped and
/// the survivors are numbered from 1 in raster order of their first pixel.
pub fn label_components(mask: &BinaryMask, min_area: usize) -> Result<ComponentLabels> {
    if min_area == 0 {
        return Err(Error::invalid("min_area must be at least 1"));
    }
    let (w, h) = (mask.width, mask.height);
    let mut provisional = vec![0u32; w * h];
    // parent[0] is unused so that 0 can mean "no label".
    let mut parent: Vec<u32> = vec![0];

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !mask.bits[i] {
                continue;
            }
            let mut neighbours = [0u32; 4];
            let mut n = 0;
            if x > 0 && provisional[i - 1] != 0 {
                neighbours[n] = provisional[i - 1];
                n += 1;
            }
            if y > 0 {
                let up = i - w;
                if x > 0 && provisional[up - 1] != 0 {
                    neighbours[n] = provisional[up - 1];
                    n += 1;
                }
                if provisional[up] != 0 {
                    neighbours[n] = provisional[up];
                    n += 1;
                }
                if x + 1 < w && provisional[up + 1] != 0 {
                    neighbours[n] = provisional[up + 1];
                    n += 1;
                }
            }
            if n == 0 {
                let label = parent.len() as u32;
                parent.push(label);
                provisional[i] = label;
            } else {
                let first = neighbours[0];
                for &other in &neighbours[1..n] {
                    union(&mut parent, first, other);
                }
                provisional[i] = first;
            }
        }
    }

    // Resolve roots and gather stats in raster order of first pixel.
    let mut slot_of_root = vec![u32::MAX; parent.len()];
    struct Acc {
        area: usize,
        min_x: usize,
        min_y: usize,
        max_x: usize,
        max_y: usize,
        sum_x: f64,
        sum_y: f64,
    }
    let mut accs: Vec<Acc> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if provisional[i] == 0 {
                continue;
            }
            let root = find(&mut parent, provisional[i]);
            let slot = &mut slot_of_root[root as usize];
            if *slot == u32::MAX {
                *slot = accs.len() as u32;
                accs.push(Acc {
                    area: 0,
                    min_x: x,
                    min_y: y,
                    max_x: x,
                    max_y: y,
                    sum_x: 0.0,
                    sum_y: 0.0,
                });
            }
            let acc = &mut accs[*slot as usize];
            acc.area += 1;
            acc.min_x = acc.min_x.min(x);
            acc.max_x = acc.max_x.max(x);
            acc.max_y = y;
            acc.sum_x += x as f64;
            acc.sum_y += y as f64;
            provisional[i] = *slot + 1;
        }
    }

    let mut final_label = vec![0u32; accs.len() + 1];
    let mut components = Vec::new();
    for (slot, acc) in accs.iter().enumerate() {
        if acc.area < min_area {
            continue;
        }
        let label = components.len() as u32 + 1;
        final_label[slot + 1] = label;
        components.push(ComponentStats {
            label,
            area: acc.area,
            bbox: PixelBox {
                x: acc.min_x,
                y: acc.min_y,
                w: acc.max_x - acc.min_x + 1,
                h: acc.max_y - acc.min_y + 1,
            },
            centroid: (acc.sum_x / acc.area as f64, acc.sum_y / acc.area as f64),
        });
    }
    for l in &mut provisional {
        *l = final_label[*l as usize];
    }
    Ok(ComponentLabels {
        labels: provisional,
        components,
    })
}

pub fn connected_components(mask: &BinaryMask, min_area: usize) -> Result<Vec<ComponentStats>> {
    Ok(label_components(mask, min_area)?.components)
}

/// Returns `true` when both frames share width and height.
pub fn same_dims(a: &Frame, b: &Frame) -> bool {
    a.same_dims(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, p: f64) -> BinaryMask {
        let bits = (0..w * h).map(|_| rng.random_bool(p)).collect();
        BinaryMask::from_bits(w, h, bits).unwrap()
    }

    fn naive_erode(m: &BinaryMask, se: &StructuringElement) -> BinaryMask {
        let mut out = BinaryMask::new(m.width(), m.height());
        for y in 0..m.height() as isize {
            for x in 0..m.width() as isize {
                let mut all = true;
                for (dx, dy) in se.offsets() {
                    let (sx, sy) = (x + dx, y + dy);
                    let inside = sx >= 0
                        && sy >= 0
                        && sx < m.width() as isize
                        && sy < m.height() as isize;
                    if !inside || !m.get(sx as usize, sy as usize) {
                        all = false;
                    }
                }
                out.set(x as usize, y as usize, all);
            }
        }
        out
    }

    fn naive_dilate(m: &BinaryMask, se: &StructuringElement) -> BinaryMask {
        let mut out = BinaryMask::new(m.width(), m.height());
        for y in 0..m.height() as isize {
            for x in 0..m.width() as isize {
                let mut any = false;
                for (dx, dy) in se.offsets() {
                    let (sx, sy) = (x + dx, y + dy);
                    let inside = sx >= 0
                        && sy >= 0
                        && sx < m.width() as isize
                        && sy < m.height() as isize;
                    if inside && m.get(sx as usize, sy as usize) {
                        any = true;
                    }
                }
                out.set(x as usize, y as usize, any);
            }
        }
        out
    }

    #[test]
    fn identity_resize_is_pixel_exact() {
        let pixels: Vec<u8> = (0..224 * 224).map(|i| (i * 7 % 251) as u8).collect();
        let f = Frame::gray(224, 224, pixels).unwrap();
        assert_eq!(preprocess(&f, 224, 224).unwrap(), f);
    }

    #[test]
    fn constant_frame_upscales_to_constant() {
        let f = Frame::filled(2, 2, PixelLayout::Gray, 77).unwrap();
        let out = preprocess(&f, 4, 4).unwrap();
        assert_eq!(out.width(), 4);
        assert!(out.pixels().iter().all(|&p| p == 77));
    }

    #[test]
    fn ramp_downscale_matches_hand_bilinear() {
        // v(x, y) = 10x + 40y; target centers land on source (0.5, 2.5).
        let pixels: Vec<u8> = (0..4)
            .flat_map(|y| (0..4).map(move |x| (10 * x + 40 * y) as u8))
            .collect();
        let f = Frame::gray(4, 4, pixels).unwrap();
        let out = preprocess(&f, 2, 2).unwrap();
        // (0.5,0.5): 0.25*(0+10+40+50) = 25, etc.
        assert_eq!(out.pixels(), &[25, 45, 105, 125]);
    }

    #[test]
    fn zero_target_rejected() {
        let f = Frame::filled(2, 2, PixelLayout::Gray, 0).unwrap();
        assert!(matches!(preprocess(&f, 0, 4), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn bgr_is_swapped_to_rgb() {
        let f = Frame::new(1, 1, PixelLayout::Bgr, vec![1, 2, 3], 5).unwrap();
        let out = preprocess(&f, 1, 1).unwrap();
        assert_eq!(out.layout(), PixelLayout::Rgb);
        assert_eq!(out.pixels(), &[3, 2, 1]);
        assert_eq!(out.index(), 5);
    }

    #[test]
    fn frame_invariants_enforced() {
        assert!(Frame::gray(0, 3, vec![]).is_err());
        assert!(Frame::new(2, 2, PixelLayout::Rgb, vec![0; 4], 0).is_err());
    }

    #[test]
    fn grayscale_luma() {
        let g = Frame::gray(2, 1, vec![3, 9]).unwrap();
        assert_eq!(to_grayscale(&g), g);
        let white = Frame::filled(1, 1, PixelLayout::Rgb, 255).unwrap();
        assert_eq!(to_grayscale(&white).pixels(), &[255]);
        let c = Frame::new(1, 1, PixelLayout::Rgb, vec![100, 50, 200], 0).unwrap();
        assert_eq!(to_grayscale(&c).pixels(), &[82]);
        let c = Frame::new(1, 1, PixelLayout::Bgr, vec![200, 50, 100], 0).unwrap();
        assert_eq!(to_grayscale(&c).pixels(), &[82]);
    }

    #[test]
    fn ellipse_offsets() {
        let se = StructuringElement::ellipse(2, 2);
        let offs = se.offsets();
        assert_eq!(offs.len(), 13);
        assert!(offs.contains(&(0, 0)));
        for &(dx, dy) in &offs {
            assert!(offs.contains(&(-dx, -dy)));
        }
        assert_eq!(StructuringElement::ellipse(0, 0).offsets(), vec![(0, 0)]);
        assert_eq!(StructuringElement::rect(1, 1).offsets().len(), 9);
    }

    #[test]
    fn empty_mask_is_fixed_point() {
        let m = BinaryMask::new(8, 8);
        let se = StructuringElement::default();
        assert_eq!(erode(&m, &se), m);
        assert_eq!(dilate(&m, &se), m);
    }

    #[test]
    fn single_pixel_with_square_element() {
        let se = StructuringElement::rect(1, 1);
        let mut m = BinaryMask::new(5, 5);
        m.set(2, 2, true);
        assert_eq!(erode(&m, &se).count(), 0);
        let d = dilate(&m, &se);
        assert_eq!(d.count(), 9);
        assert!((1..=3).all(|y| (1..=3).all(|x| d.get(x, y))));

        let mut corner = BinaryMask::new(5, 5);
        corner.set(0, 0, true);
        assert_eq!(dilate(&corner, &se).count(), 4);
    }

    #[test]
    fn open_removes_speck_close_fills_hole() {
        let se = StructuringElement::ellipse(2, 2);
        let mut speck = BinaryMask::new(9, 9);
        speck.set(4, 4, true);
        assert_eq!(open(&speck, &se).count(), 0);

        let mut block = BinaryMask::new(13, 13);
        for y in 3..10 {
            for x in 3..10 {
                block.set(x, y, true);
            }
        }
        block.set(6, 6, false);
        let closed = close(&block, &se);
        assert!(closed.get(6, 6));
        assert!(block.is_subset_of(&closed));
    }

    #[test]
    fn fast_morphology_matches_naive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for se in [
            StructuringElement::ellipse(2, 2),
            StructuringElement::ellipse(3, 1),
            StructuringElement::rect(1, 2),
        ] {
            for _ in 0..20 {
                let m = random_mask(&mut rng, 16, 16, 0.6);
                assert_eq!(erode(&m, &se), naive_erode(&m, &se));
                assert_eq!(dilate(&m, &se), naive_dilate(&m, &se));
            }
        }
    }

    #[test]
    fn morphology_algebra_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let se = StructuringElement::default();
        for _ in 0..30 {
            let m = random_mask(&mut rng, 20, 17, 0.55);
            let o = open(&m, &se);
            let c = close(&m, &se);
            assert!(o.is_subset_of(&m));
            assert!(m.is_subset_of(&c));
            assert_eq!(open(&o, &se), o);
            assert_eq!(close(&c, &se), c);
            let dual = erode_with_border(&m.complement(), &se, true).complement();
            assert_eq!(dilate(&m, &se), dual);
            let dual = dilate_with_border(&m.complement(), &se, true).complement();
            assert_eq!(erode(&m, &se), dual);
        }
    }

    #[test]
    fn components_basic() {
        let m = BinaryMask::new(6, 6);
        assert!(connected_components(&m, 1).unwrap().is_empty());
        assert!(connected_components(&m, 0).is_err());

        let mut m = BinaryMask::new(10, 5);
        for y in 1..4 {
            for x in 0..3 {
                m.set(x, y, true);
                m.set(x + 6, y, true);
            }
        }
        let comps = connected_components(&m, 1).unwrap();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].area, 9);
        assert_eq!(comps[1].area, 9);
        assert_eq!(comps[0].label, 1);
        assert_eq!(comps[1].bbox, PixelBox { x: 6, y: 1, w: 3, h: 3 });
        assert_eq!(comps[1].centroid, (7.0, 2.0));
        assert!(connected_components(&m, 10).unwrap().is_empty());
    }

    #[test]
    fn diagonal_pixels_join_under_8_connectivity() {
        let mut m = BinaryMask::new(4, 4);
        m.set(0, 0, true);
        m.set(1, 1, true);
        m.set(3, 0, true);
        m.set(2, 1, true);
        let comps = connected_components(&m, 1).unwrap();
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].area, 4);
    }
}
