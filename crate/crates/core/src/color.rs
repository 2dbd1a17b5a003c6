//! Flow visualization on the Middlebury color wheel.
//!
//! The wheel has 55 hue bins (red→yellow 15, yellow→green 6, green→cyan 4,
//! cyan→blue 11, blue→magenta 13, magenta→red 6). Vector angle selects the
//! hue; normalized magnitude blends from white (zero motion) to the fully
//! saturated wheel color (maximum magnitude). Magnitudes above the maximum
//! are darkened.

use std::f64::consts::PI;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::field::FlowField;

fn color_wheel() -> Vec<[f64; 3]> {
    const SEGMENTS: [(usize, [f64; 3], [f64; 3]); 6] = [
        (15, [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]),
        (6, [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]),
        (4, [0.0, 1.0, 0.0], [0.0, 1.0, 1.0]),
        (11, [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]),
        (13, [0.0, 0.0, 1.0], [1.0, 0.0, 1.0]),
        (6, [1.0, 0.0, 1.0], [1.0, 0.0, 0.0]),
    ];
    let mut wheel = Vec::with_capacity(55);
    for (n, from, to) in SEGMENTS {
        for i in 0..n {
            let t = i as f64 / n as f64;
            wheel.push([0, 1, 2].map(|k| from[k] + (to[k] - from[k]) * t));
        }
    }
    wheel
}

/// RGB color of one vector after dividing by the normalization magnitude.
pub fn vector_color(u: f64, v: f64) -> [u8; 3] {
    let wheel = color_wheel();
    let ncols = wheel.len();
    let rad = u.hypot(v);
    let angle = (-v).atan2(-u) / PI;
    let fk = (angle + 1.0) / 2.0 * (ncols - 1) as f64;
    let k0 = (fk.floor() as usize).min(ncols - 1);
    let k1 = (k0 + 1) % ncols;
    let f = fk - k0 as f64;
    [0, 1, 2].map(|c| {
        let col = (1.0 - f) * wheel[k0][c] + f * wheel[k1][c];
        let col = if rad <= 1.0 {
            1.0 - rad * (1.0 - col)
        } else {
            col * 0.75
        };
        (255.0 * col).round().clamp(0.0, 255.0) as u8
    })
}

/// Renders frame `frame` of `flow`. Magnitudes are normalized by
/// `max_magnitude` when given, otherwise by the frame's own maximum.
pub fn colorize_flow(flow: &FlowField, frame: usize, max_magnitude: Option<f64>) -> Result<RgbImage> {
    if frame >= flow.frames() {
        return Err(Error::OutOfRange {
            index: frame,
            len: flow.frames(),
        });
    }
    let vx = flow.frame_vx(frame);
    let vy = flow.frame_vy(frame);
    let norm = max_magnitude.unwrap_or_else(|| {
        vx.iter()
            .zip(vy)
            .map(|(x, y)| x.hypot(*y))
            .fold(0.0, f64::max)
    });
    let scale = if norm > 0.0 { 1.0 / norm } else { 0.0 };
    let w = flow.width();
    Ok(RgbImage::from_fn(w as u32, flow.height() as u32, |c, r| {
        let i = r as usize * w + c as usize;
        Rgb(vector_color(vx[i] * scale, vy[i] * scale))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_frame_is_white() {
        let img = colorize_flow(&FlowField::zeros(8, 8, 1), 0, None).unwrap();
        assert!(img.pixels().all(|p| p.0 == [255, 255, 255]));
    }

    #[test]
    fn uniform_flow_is_single_hue() {
        let img = colorize_flow(&FlowField::uniform(8, 8, 1, 1.0, 0.0), 0, None).unwrap();
        let first = img.get_pixel(0, 0).0;
        assert!(img.pixels().all(|p| p.0 == first));
        assert_ne!(first, [255, 255, 255]);
    }

    #[test]
    fn max_magnitude_pixel_is_fully_saturated() {
        let mut vx = vec![0.25; 16];
        vx[5] = 2.0;
        let flow = FlowField::new(4, 4, 1, vx, vec![0.0; 16]).unwrap();
        let img = colorize_flow(&flow, 0, None).unwrap();
        let p = img.get_pixel(1, 1).0;
        // a saturated wheel color has at least one channel at zero
        assert_eq!(*p.iter().min().unwrap(), 0, "{p:?}");
        let q = img.get_pixel(0, 0).0;
        assert!(*q.iter().min().unwrap() > 0);
    }

    #[test]
    fn opposite_directions_differ() {
        assert_ne!(vector_color(1.0, 0.0), vector_color(-1.0, 0.0));
        assert_ne!(vector_color(0.0, 1.0), vector_color(0.0, -1.0));
    }

    #[test]
    fn frame_out_of_range() {
        assert!(matches!(
            colorize_flow(&FlowField::zeros(8, 8, 2), 2, None),
            Err(Error::OutOfRange { index: 2, len: 2 })
        ));
    }
}
