//! Dense Horn–Schunck optical flow with coarse-to-fine warping.
//!
//! Each frame pair is solved on an image pyramid. At every level the second
//! frame is warped toward the first with the current flow estimate, the
//! brightness-constancy constraint is linearized around that estimate and the
//! Horn–Schunck Euler–Lagrange equations are relaxed with a fixed number of
//! Jacobi sweeps. Intensities are scaled to `[0, 255]` before solving so that
//! `alpha` follows the usual 8-bit convention.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FlowField, ImageSequence};
use crate::filter::{gaussian_smooth, Boundary};

const MIN_LEVEL_SIDE: usize = 4;
const INTENSITY_SCALE: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HornSchunckParams {
    /// Smoothness weight.
    pub alpha: f64,
    /// Jacobi sweeps per warp.
    pub iterations: usize,
    pub pyramid_levels: usize,
    /// Size ratio between successive pyramid levels.
    pub pyramid_scale: f64,
    /// Warp/relinearize passes per pyramid level.
    pub warps: usize,
}

impl Default for HornSchunckParams {
    fn default() -> Self {
        Self {
            alpha: 15.0,
            iterations: 200,
            pyramid_levels: 3,
            pyramid_scale: 0.5,
            warps: 2,
        }
    }
}

impl HornSchunckParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Err(Error::invalid("Horn-Schunck parameters", reason));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be > 0");
        }
        if self.iterations == 0 {
            return bad("iterations must be >= 1");
        }
        if self.pyramid_levels == 0 {
            return bad("pyramid_levels must be >= 1");
        }
        if !(self.pyramid_scale > 0.0 && self.pyramid_scale < 1.0) {
            return bad("pyramid_scale must lie in (0, 1)");
        }
        if self.warps == 0 {
            return bad("warps must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    #[inline]
    fn at(&self, r: isize, c: isize) -> f64 {
        let r = r.clamp(0, self.h as isize - 1) as usize;
        let c = c.clamp(0, self.w as isize - 1) as usize;
        self.data[r * self.w + c]
    }

    /// Bilinear sample at fractional `(row, col)`, replicate boundary.
    fn sample(&self, row: f64, col: f64) -> f64 {
        let r0 = row.floor();
        let c0 = col.floor();
        let fr = row - r0;
        let fc = col - c0;
        let (r0, c0) = (r0 as isize, c0 as isize);
        let a = self.at(r0, c0);
        let b = self.at(r0, c0 + 1);
        let c = self.at(r0 + 1, c0);
        let d = self.at(r0 + 1, c0 + 1);
        (1.0 - fr) * ((1.0 - fc) * a + fc * b) + fr * ((1.0 - fc) * c + fc * d)
    }

    /// Resamples to `w x h` with pixel-centre alignment.
    fn resize(&self, w: usize, h: usize) -> Plane {
        let sy = self.h as f64 / h as f64;
        let sx = self.w as f64 / w as f64;
        let mut data = Vec::with_capacity(w * h);
        for r in 0..h {
            let fr = (r as f64 + 0.5) * sy - 0.5;
            for c in 0..w {
                let fc = (c as f64 + 0.5) * sx - 0.5;
                data.push(self.sample(fr, fc));
            }
        }
        Plane { w, h, data }
    }

    fn downsample(&self, w: usize, h: usize, scale: f64) -> Plane {
        let sigma = 0.5 / scale;
        let blurred = Plane {
            w: self.w,
            h: self.h,
            data: gaussian_smooth(&self.data, self.w, self.h, sigma, sigma, Boundary::Replicate),
        };
        blurred.resize(w, h)
    }
}

/// Level sizes from finest to coarsest, dropping levels smaller than 4x4.
fn pyramid_sizes(w: usize, h: usize, params: &HornSchunckParams) -> Result<Vec<(usize, usize)>> {
    if w < MIN_LEVEL_SIDE || h < MIN_LEVEL_SIDE {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min: MIN_LEVEL_SIDE,
        });
    }
    let mut sizes = vec![(w, h)];
    for k in 1..params.pyramid_levels {
        let f = params.pyramid_scale.powi(k as i32);
        let lw = (w as f64 * f).round() as usize;
        let lh = (h as f64 * f).round() as usize;
        if lw < MIN_LEVEL_SIDE || lh < MIN_LEVEL_SIDE {
            break;
        }
        sizes.push((lw, lh));
    }
    Ok(sizes)
}

/// HS neighbourhood average: edge neighbours 1/6, diagonal neighbours 1/12.
fn neighbour_average(p: &[f64], w: usize, h: usize, out: &mut [f64]) {
    out.par_chunks_mut(w).enumerate().for_each(|(r, row)| {
        let r = r as isize;
        let at = |rr: isize, cc: isize| {
            let rr = rr.clamp(0, h as isize - 1) as usize;
            let cc = cc.clamp(0, w as isize - 1) as usize;
            p[rr * w + cc]
        };
        for (c, o) in row.iter_mut().enumerate() {
            let c = c as isize;
            let edge = at(r - 1, c) + at(r + 1, c) + at(r, c - 1) + at(r, c + 1);
            let diag = at(r - 1, c - 1) + at(r - 1, c + 1) + at(r + 1, c - 1) + at(r + 1, c + 1);
            *o = edge / 6.0 + diag / 12.0;
        }
    });
}

/// Refines `(u, v)` on one level in place.
fn solve_level(i1: &Plane, i2: &Plane, u: &mut Vec<f64>, v: &mut Vec<f64>, params: &HornSchunckParams) {
    let (w, h) = (i1.w, i1.h);
    let n = w * h;
    let alpha2 = params.alpha * params.alpha;
    let mut ubar = vec![0.0; n];
    let mut vbar = vec![0.0; n];
    for _ in 0..params.warps {
        let u0 = u.clone();
        let v0 = v.clone();
        let mut warped = Plane { w, h, data: vec![0.0; n] };
        // Pixels whose match falls outside the second frame get no data term.
        let mut inside = vec![true; n];
        let (rmax, cmax) = ((h - 1) as f64, (w - 1) as f64);
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                let (wr, wc) = (r as f64 + v0[i], c as f64 + u0[i]);
                inside[i] = (0.0..=rmax).contains(&wr) && (0.0..=cmax).contains(&wc);
                warped.data[i] = i2.sample(wr, wc);
            }
        }
        let mut ix = vec![0.0; n];
        let mut iy = vec![0.0; n];
        let mut it = vec![0.0; n];
        for r in 0..h as isize {
            for c in 0..w as isize {
                let i = r as usize * w + c as usize;
                let dx1 = (i1.at(r, c + 1) - i1.at(r, c - 1)) / 2.0;
                let dx2 = (warped.at(r, c + 1) - warped.at(r, c - 1)) / 2.0;
                let dy1 = (i1.at(r + 1, c) - i1.at(r - 1, c)) / 2.0;
                let dy2 = (warped.at(r + 1, c) - warped.at(r - 1, c)) / 2.0;
                if inside[i] {
                    ix[i] = 0.5 * (dx1 + dx2);
                    iy[i] = 0.5 * (dy1 + dy2);
                    it[i] = warped.data[i] - i1.data[i];
                }
            }
        }
        for _ in 0..params.iterations {
            neighbour_average(u, w, h, &mut ubar);
            neighbour_average(v, w, h, &mut vbar);
            u.par_iter_mut()
                .zip(v.par_iter_mut())
                .enumerate()
                .for_each(|(i, (ui, vi))| {
                    let resid = ix[i] * (ubar[i] - u0[i]) + iy[i] * (vbar[i] - v0[i]) + it[i];
                    let k = resid / (alpha2 + ix[i] * ix[i] + iy[i] * iy[i]);
                    *ui = ubar[i] - ix[i] * k;
                    *vi = vbar[i] - iy[i] * k;
                });
        }
    }
}

/// Flow from `frame0` to `frame1` (both row-major `w x h`, values in `[0, 1]`).
pub fn flow_pair(
    frame0: &[f64],
    frame1: &[f64],
    w: usize,
    h: usize,
    params: &HornSchunckParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    params.validate()?;
    let sizes = pyramid_sizes(w, h, params)?;
    let scale = |f: &[f64]| Plane {
        w,
        h,
        data: f.iter().map(|v| v * INTENSITY_SCALE).collect(),
    };
    let mut p0 = vec![scale(frame0)];
    let mut p1 = vec![scale(frame1)];
    for &(lw, lh) in &sizes[1..] {
        let prev0 = p0.last().unwrap();
        let prev1 = p1.last().unwrap();
        let s = lw as f64 / prev0.w as f64;
        let n0 = prev0.downsample(lw, lh, s);
        let n1 = prev1.downsample(lw, lh, s);
        p0.push(n0);
        p1.push(n1);
    }

    let (cw, ch) = *sizes.last().unwrap();
    let mut u = vec![0.0; cw * ch];
    let mut v = vec![0.0; cw * ch];
    for level in (0..sizes.len()).rev() {
        let (lw, lh) = sizes[level];
        if u.len() != lw * lh {
            let (pw, ph) = sizes[level + 1];
            let up = |f: Vec<f64>, gain: f64| {
                Plane { w: pw, h: ph, data: f }
                    .resize(lw, lh)
                    .data
                    .into_iter()
                    .map(|x| x * gain)
                    .collect::<Vec<_>>()
            };
            u = up(u, lw as f64 / pw as f64);
            v = up(v, lh as f64 / ph as f64);
        }
        solve_level(&p0[level], &p1[level], &mut u, &mut v, params);
    }
    Ok((u, v))
}

/// Forward flow between every pair of consecutive frames.
pub fn compute_flow(seq: &ImageSequence, params: &HornSchunckParams) -> Result<FlowField> {
    params.validate()?;
    let (w, h) = (seq.width(), seq.height());
    let pairs: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..seq.frames() - 1)
        .into_par_iter()
        .map(|t| flow_pair(seq.frame(t), seq.frame(t + 1), w, h, params))
        .collect();
    let mut vx = Vec::with_capacity(w * h * (seq.frames() - 1));
    let mut vy = Vec::with_capacity(vx.capacity());
    for p in pairs {
        let (u, v) = p?;
        vx.extend(u);
        vy.extend(v);
    }
    FlowField::new(w, h, seq.frames() - 1, vx, vy)
}
