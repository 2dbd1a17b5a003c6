//! Adaptive magnitude thresholding, morphological cleanup and region
//! extraction.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FlowField;
use crate::outlier_filter::Deviation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionParams {
    /// Trailing window (frames, including the current one) over which the
    /// per-frame mean and spread are averaged.
    pub history: usize,
    pub multiplier: f64,
    pub open_radius: usize,
    pub close_radius: usize,
    pub min_area: usize,
    pub deviation: Deviation,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            history: 5,
            multiplier: 5.0,
            open_radius: 1,
            close_radius: 1,
            min_area: 4,
            deviation: Deviation::RootMad,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        if self.history == 0 {
            return Err(Error::invalid("detection parameters", "history must be >= 1"));
        }
        if !(self.multiplier > 0.0 && self.multiplier.is_finite()) {
            return Err(Error::invalid("detection parameters", "multiplier must be > 0"));
        }
        if self.min_area == 0 {
            return Err(Error::invalid("detection parameters", "min_area must be >= 1"));
        }
        Ok(())
    }
}

/// Axis-aligned box in whole pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl BoundingBox {
    /// Whether a subpixel point lies within the box's pixel extent.
    pub fn contains(&self, row: f64, col: f64) -> bool {
        row >= self.top as f64 - 0.5
            && row <= (self.top + self.height) as f64 - 0.5
            && col >= self.left as f64 - 0.5
            && col <= (self.left + self.width) as f64 - 0.5
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.top as f64 + (self.height as f64 - 1.0) / 2.0,
            self.left as f64 + (self.width as f64 - 1.0) / 2.0,
        )
    }

    pub fn area(&self) -> usize {
        self.height * self.width
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let top = self.top.max(other.top);
        let left = self.left.max(other.left);
        let bottom = (self.top + self.height).min(other.top + other.height);
        let right = (self.left + self.width).min(other.left + other.width);
        if bottom <= top || right <= left {
            return 0.0;
        }
        let inter = ((bottom - top) * (right - left)) as f64;
        inter / ((self.area() + other.area()) as f64 - inter)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Mean pixel `(row, col)`.
    pub centroid: (f64, f64),
    pub bbox: BoundingBox,
    pub area: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameThreshold {
    pub mean: f64,
    pub spread: f64,
    /// Window-averaged threshold `mean + multiplier * spread`.
    pub threshold: f64,
}

#[derive(Debug, Clone)]
pub struct ThresholdResult {
    pub thresholds: Vec<FrameThreshold>,
    pub masks: Vec<Vec<bool>>,
}

/// Per-frame thresholds `T_i = M̄_i + k·σ̄_i` and the raw masks `‖F‖ > T_i`.
pub fn adaptive_threshold(field: &FlowField, params: &DetectionParams) -> Result<ThresholdResult> {
    params.validate()?;
    let mags = field.magnitude();
    let frame_stats: Vec<(f64, f64)> = (0..field.frames())
        .map(|t| {
            let m = mags.frame(t);
            let mean = m.iter().sum::<f64>() / m.len() as f64;
            (mean, params.deviation.spread(m, mean))
        })
        .collect();
    let mut thresholds = Vec::with_capacity(field.frames());
    let mut masks = Vec::with_capacity(field.frames());
    for t in 0..field.frames() {
        let start = (t + 1).saturating_sub(params.history);
        let window = &frame_stats[start..=t];
        let k = window.len() as f64;
        let mean = window.iter().map(|s| s.0).sum::<f64>() / k;
        let spread = window.iter().map(|s| s.1).sum::<f64>() / k;
        let threshold = mean + params.multiplier * spread;
        masks.push(mags.frame(t).iter().map(|v| *v > threshold).collect());
        thresholds.push(FrameThreshold {
            mean,
            spread,
            threshold,
        });
    }
    Ok(ThresholdResult { thresholds, masks })
}

/// Square-element erosion (`erode = true`) or dilation. Pixels outside the
/// image count as foreground for erosion and background for dilation, so
/// shapes touching the border are not eaten away.
fn morph(mask: &[bool], w: usize, h: usize, radius: usize, erode: bool) -> Vec<bool> {
    if radius == 0 {
        return mask.to_vec();
    }
    let r = radius as isize;
    let pass = |src: &[bool], horizontal: bool| -> Vec<bool> {
        let mut out = vec![false; src.len()];
        for row in 0..h as isize {
            for col in 0..w as isize {
                let mut acc = erode;
                for k in -r..=r {
                    let (rr, cc) = if horizontal { (row, col + k) } else { (row + k, col) };
                    let v = if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                        erode
                    } else {
                        src[rr as usize * w + cc as usize]
                    };
                    if erode {
                        acc &= v;
                    } else {
                        acc |= v;
                    }
                }
                out[row as usize * w + col as usize] = acc;
            }
        }
        out
    };
    let tmp = pass(mask, true);
    pass(&tmp, false)
}

pub fn erode(mask: &[bool], w: usize, h: usize, radius: usize) -> Vec<bool> {
    morph(mask, w, h, radius, true)
}

pub fn dilate(mask: &[bool], w: usize, h: usize, radius: usize) -> Vec<bool> {
    morph(mask, w, h, radius, false)
}

/// Opening with `open_radius` followed by closing with `close_radius`.
pub fn morph_cleanup(mask: &[bool], w: usize, h: usize, open_radius: usize, close_radius: usize) -> Vec<bool> {
    let opened = dilate(&erode(mask, w, h, open_radius), w, h, open_radius);
    erode(&dilate(&opened, w, h, close_radius), w, h, close_radius)
}

/// 8-connected components with at least `min_area` pixels, in raster order of
/// their first pixel.
pub fn extract_regions(mask: &[bool], w: usize, h: usize, min_area: usize) -> Vec<Region> {
    let mut seen = vec![false; mask.len()];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (mut area, mut sr, mut sc) = (0usize, 0.0, 0.0);
        let (mut top, mut left, mut bottom, mut right) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(i) = queue.pop_front() {
            let (r, c) = (i / w, i % w);
            area += 1;
            sr += r as f64;
            sc += c as f64;
            top = top.min(r);
            bottom = bottom.max(r);
            left = left.min(c);
            right = right.max(c);
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                        continue;
                    }
                    let j = nr as usize * w + nc as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        if area >= min_area {
            regions.push(Region {
                centroid: (sr / area as f64, sc / area as f64),
                bbox: BoundingBox {
                    top,
                    left,
                    height: bottom - top + 1,
                    width: right - left + 1,
                },
                area,
            });
        }
    }
    regions
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDetections {
    pub frame: usize,
    pub threshold: f64,
    pub regions: Vec<Region>,
}

/// Detections of a whole sequence. Masks are kept in memory only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<FrameDetections>,
    #[serde(skip)]
    pub masks: Vec<Vec<bool>>,
}

/// Thresholds `field`, cleans each mask and extracts its regions.
pub fn detect(field: &FlowField, params: &DetectionParams) -> Result<DetectionSet> {
    let (w, h) = (field.width(), field.height());
    let raw = adaptive_threshold(field, params)?;
    let mut frames = Vec::with_capacity(field.frames());
    let mut masks = Vec::with_capacity(field.frames());
    for (t, (mask, th)) in raw.masks.iter().zip(&raw.thresholds).enumerate() {
        let clean = morph_cleanup(mask, w, h, params.open_radius, params.close_radius);
        frames.push(FrameDetections {
            frame: t,
            threshold: th.threshold,
            regions: extract_regions(&clean, w, h, params.min_area),
        });
        masks.push(clean);
    }
    Ok(DetectionSet {
        width: w,
        height: h,
        frames,
        masks,
    })
}
