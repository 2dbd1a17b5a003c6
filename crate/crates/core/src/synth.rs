//! Procedural scenes with exactly known egomotion, turbulence and object
//! ground truth.
//!
//! A scene has `frames` images and `frames - 1` flow frames. Flow frame `t`
//! carries pixels of image `t` to image `t + 1`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::camera_motion::{eval_motion_model, MotionParams};
use crate::detection::BoundingBox;
use crate::error::{Error, Result};
use crate::evaluation::GroundTruth;
use crate::field::{FlowField, ImageSequence, PixelGrid};
use crate::filter::{gaussian_smooth, Boundary};
use crate::tracking::{TrackPoint, TrackRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TurbulenceSpec {
    /// Peak displacement scale, pixels/frame.
    pub amplitude: f64,
    /// Standard deviation of the spatial smoothing of the noise, pixels.
    pub correlation_length: f64,
    /// Cycles per frame.
    pub temporal_frequency: f64,
}

impl Default for TurbulenceSpec {
    fn default() -> Self {
        Self {
            amplitude: 0.0,
            correlation_length: 0.5,
            temporal_frequency: 0.4,
        }
    }
}

/// A textured disk moving along `start + velocity t + acceleration t^2 / 2`
/// (row, col), plus the camera flow at its centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub start: [f64; 2],
    pub velocity: [f64; 2],
    #[serde(default)]
    pub acceleration: [f64; 2],
    pub radius: f64,
    /// Mean intensity of the disk.
    #[serde(default = "default_intensity")]
    pub intensity: f64,
}

fn default_intensity() -> f64 {
    0.85
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    /// Image frames.
    pub frames: usize,
    /// Defaults to `max(width, height)`.
    pub focal: Option<f64>,
    /// One entry per flow frame, or a single entry used for all of them.
    pub motion: Vec<MotionParams>,
    pub turbulence: TurbulenceSpec,
    pub objects: Vec<ObjectSpec>,
    /// Standard deviation of the finest texture octave, pixels.
    pub texture_scale: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            frames: 24,
            focal: None,
            motion: vec![MotionParams::default()],
            turbulence: TurbulenceSpec::default(),
            objects: Vec::new(),
            texture_scale: 2.0,
            seed: 0,
        }
    }
}

impl SceneSpec {
    /// Camera pan with zoom and roll, turbulence at 1.5 times the object
    /// speed, one object crossing the field of view.
    pub fn default_scene(seed: u64) -> Self {
        let speed = 1.0;
        Self {
            width: 192,
            height: 192,
            frames: 24,
            focal: None,
            motion: vec![MotionParams {
                omega_x_over_f: 1e-5,
                omega_y_over_f: -1.5e-5,
                omega_z: 1e-3,
                tx_f_over_z: 0.3,
                ty_f_over_z: 0.2,
                tz_over_z: 1e-3,
            }],
            turbulence: TurbulenceSpec {
                amplitude: 1.5 * speed,
                ..TurbulenceSpec::default()
            },
            objects: vec![ObjectSpec {
                start: [67.0, 14.0],
                velocity: [0.2 * speed, speed],
                acceleration: [0.0, 0.0],
                radius: 10.0,
                intensity: 0.9,
            }],
            texture_scale: 2.0,
            seed,
        }
    }

    pub fn flow_frames(&self) -> usize {
        self.frames - 1
    }

    pub fn grid(&self) -> Result<PixelGrid> {
        match self.focal {
            Some(f) => PixelGrid::new(self.width, self.height, f),
            None => PixelGrid::with_default_focal(self.width, self.height),
        }
    }

    pub fn motion_at(&self, t: usize) -> MotionParams {
        if self.motion.len() == 1 {
            self.motion[0]
        } else {
            self.motion[t]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(Error::TooSmall {
                width: self.width,
                height: self.height,
                min: 8,
            });
        }
        if self.frames < 2 {
            return Err(Error::invalid("scene", "at least 2 frames are required"));
        }
        if self.motion.len() != 1 && self.motion.len() != self.flow_frames() {
            return Err(Error::invalid(
                "scene",
                format!("motion needs 1 or {} entries, got {}", self.flow_frames(), self.motion.len()),
            ));
        }
        if !self.motion.iter().all(MotionParams::is_finite) {
            return Err(Error::NonFinite("scene motion"));
        }
        let t = &self.turbulence;
        if !(t.amplitude >= 0.0 && t.amplitude.is_finite()) {
            return Err(Error::invalid("turbulence", "amplitude must be >= 0"));
        }
        if !(t.correlation_length > 0.0 && t.correlation_length.is_finite() && t.temporal_frequency.is_finite()) {
            return Err(Error::invalid("turbulence", "correlation length must be > 0"));
        }
        if !(self.texture_scale > 0.0 && self.texture_scale.is_finite()) {
            return Err(Error::invalid("scene", "texture_scale must be > 0"));
        }
        for o in &self.objects {
            let finite = o.start.iter().chain(&o.velocity).chain(&o.acceleration).all(|v| v.is_finite());
            if !finite || !(o.radius > 0.0) || !(0.0..=1.0).contains(&o.intensity) {
                return Err(Error::invalid("scene", "object needs finite motion, radius > 0, intensity in [0, 1]"));
            }
        }
        self.grid().map(|_| ())
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn white_noise(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Zero-mean vector noise smoothed with `sigma`, scaled to RMS magnitude `rms`.
fn smooth_vector_noise(w: usize, h: usize, sigma: f64, rms: f64, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let mut planes = [white_noise(w * h, rng), white_noise(w * h, rng)].map(|p| gaussian_smooth(&p, w, h, sigma, sigma, Boundary::Reflect));
    for p in planes.iter_mut() {
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        p.iter_mut().for_each(|v| *v -= mean);
    }
    let energy: f64 = planes[0].iter().chain(planes[1].iter()).map(|v| v * v).sum::<f64>() / (w * h) as f64;
    let scale = if energy > 0.0 { rms / energy.sqrt() } else { 0.0 };
    let [a, b] = planes;
    (a.into_iter().map(|v| v * scale).collect(), b.into_iter().map(|v| v * scale).collect())
}

/// Egomotion flow of every flow frame.
pub fn gen_camera_flow(spec: &SceneSpec) -> Result<FlowField> {
    spec.validate()?;
    let grid = spec.grid()?;
    let frames: Vec<FlowField> = (0..spec.flow_frames()).map(|t| eval_motion_model(&spec.motion_at(t), &grid)).collect();
    FlowField::stack(&frames)
}

/// `A (N1 m_c(t) + N2 m_s(t))` with `N1`, `N2` smoothed vector noise of RMS
/// magnitude `1/sqrt(2)` and `m_c`, `m_s` the cosine and sine of
/// `2 pi f t` with their temporal means removed, so every pixel has zero
/// temporal mean.
pub fn gen_turbulence(spec: &SceneSpec) -> Result<FlowField> {
    spec.validate()?;
    let (w, h, n) = (spec.width, spec.height, spec.flow_frames());
    let t = &spec.turbulence;
    if t.amplitude == 0.0 {
        return Ok(FlowField::zeros(w, h, n));
    }
    let mut r = rng(spec.seed, 1);
    let rms = std::f64::consts::FRAC_1_SQRT_2;
    let (c_x, c_y) = smooth_vector_noise(w, h, t.correlation_length, rms, &mut r);
    let (s_x, s_y) = smooth_vector_noise(w, h, t.correlation_length, rms, &mut r);
    let phase = |k: usize| 2.0 * std::f64::consts::PI * t.temporal_frequency * k as f64;
    let mut mc: Vec<f64> = (0..n).map(|k| phase(k).cos()).collect();
    let mut ms: Vec<f64> = (0..n).map(|k| phase(k).sin()).collect();
    for m in [&mut mc, &mut ms] {
        let mean = m.iter().sum::<f64>() / n as f64;
        m.iter_mut().for_each(|v| *v -= mean);
    }
    let len = w * h;
    let mut vx = Vec::with_capacity(len * n);
    let mut vy = Vec::with_capacity(len * n);
    for k in 0..n {
        let (a, b) = (t.amplitude * mc[k], t.amplitude * ms[k]);
        vx.extend((0..len).map(|i| a * c_x[i] + b * s_x[i]));
        vy.extend((0..len).map(|i| a * c_y[i] + b * s_y[i]));
    }
    FlowField::new(w, h, n, vx, vy)
}

/// Grey-level texture raster with values in `[0, 1]`.
pub struct Texture {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Texture {
    /// Two octaves of smoothed noise (`scale` and `3 scale`), mean 0.5.
    pub fn generate(width: usize, height: usize, scale: f64, seed: u64, stream: u64) -> Self {
        let mut r = rng(seed, stream);
        let fine = gaussian_smooth(&white_noise(width * height, &mut r), width, height, scale, scale, Boundary::Reflect);
        let coarse = gaussian_smooth(&white_noise(width * height, &mut r), width, height, 3.0 * scale, 3.0 * scale, Boundary::Reflect);
        let std = |p: &[f64]| (p.iter().map(|v| v * v).sum::<f64>() / p.len() as f64).sqrt().max(1e-12);
        let (sf, sc) = (std(&fine), std(&coarse));
        let data = fine
            .iter()
            .zip(&coarse)
            .map(|(a, b)| (0.5 + 0.12 * a / sf + 0.08 * b / sc).clamp(0.0, 1.0))
            .collect();
        Self { width, height, data }
    }

    /// Bilinear sample with replicated edges.
    pub fn sample(&self, row: f64, col: f64) -> f64 {
        let r = row.clamp(0.0, (self.height - 1) as f64);
        let c = col.clamp(0.0, (self.width - 1) as f64);
        let (r0, c0) = (r.floor() as usize, c.floor() as usize);
        let (r1, c1) = ((r0 + 1).min(self.height - 1), (c0 + 1).min(self.width - 1));
        let (fr, fc) = (r - r0 as f64, c - c0 as f64);
        let at = |r: usize, c: usize| self.data[r * self.width + c];
        (1.0 - fr) * ((1.0 - fc) * at(r0, c0) + fc * at(r0, c1)) + fr * ((1.0 - fc) * at(r1, c0) + fc * at(r1, c1))
    }
}

/// Cumulative displacement `D_t = sum_{s<t} V_s` for image frames `0..=n`.
fn cumulative(flow: &FlowField) -> Vec<(Vec<f64>, Vec<f64>)> {
    let len = flow.frame_len();
    let mut acc = vec![(vec![0.0; len], vec![0.0; len])];
    for t in 0..flow.frames() {
        let (px, py) = acc.last().expect("non-empty");
        let dx = px.iter().zip(flow.frame_vx(t)).map(|(a, b)| a + b).collect();
        let dy = py.iter().zip(flow.frame_vy(t)).map(|(a, b)| a + b).collect();
        acc.push((dx, dy));
    }
    acc
}

/// Backward-warps a generated texture through the cumulative `flow`:
/// image `t` at pixel `p` is the texture at `p - D_t(p)`.
pub fn warp_sequence(flow: &FlowField, texture_scale: f64, seed: u64) -> Result<ImageSequence> {
    let (w, h) = (flow.width(), flow.height());
    let disp = cumulative(flow);
    let reach = disp
        .iter()
        .flat_map(|(x, y)| x.iter().chain(y))
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let pad = reach.ceil() as usize + 2;
    let tex = Texture::generate(w + 2 * pad, h + 2 * pad, texture_scale, seed, 2);
    let frames = disp
        .iter()
        .map(|(dx, dy)| {
            (0..w * h)
                .map(|i| {
                    let (r, c) = ((i / w) as f64, (i % w) as f64);
                    tex.sample(r - dy[i] + pad as f64, c - dx[i] + pad as f64)
                })
                .collect()
        })
        .collect();
    ImageSequence::from_frames(w, h, frames)
}

fn object_center(o: &ObjectSpec, camera: &[FlowField], grid: &PixelGrid, t: usize) -> Vec<(f64, f64)> {
    let mut centers = Vec::with_capacity(t + 1);
    let (mut r, mut c) = (o.start[0], o.start[1]);
    centers.push((r, c));
    for (s, cam) in camera.iter().enumerate().take(t) {
        let (cx, cy) = camera_at(cam, grid, r, c);
        let tf = s as f64 + 0.5;
        r += cy + o.velocity[0] + o.acceleration[0] * tf;
        c += cx + o.velocity[1] + o.acceleration[1] * tf;
        centers.push((r, c));
    }
    centers
}

/// Egomotion at a sub-pixel position, bilinear in the sampled field.
fn camera_at(cam: &FlowField, grid: &PixelGrid, row: f64, col: f64) -> (f64, f64) {
    let (w, h) = (grid.width(), grid.height());
    let r = row.clamp(0.0, (h - 1) as f64);
    let c = col.clamp(0.0, (w - 1) as f64);
    let (r0, c0) = (r.floor() as usize, c.floor() as usize);
    let (r1, c1) = ((r0 + 1).min(h - 1), (c0 + 1).min(w - 1));
    let (fr, fc) = (r - r0 as f64, c - c0 as f64);
    let lerp = |p: &[f64]| {
        let at = |r: usize, c: usize| p[r * w + c];
        (1.0 - fr) * ((1.0 - fc) * at(r0, c0) + fc * at(r0, c1)) + fr * ((1.0 - fc) * at(r1, c0) + fc * at(r1, c1))
    };
    (lerp(cam.vx()), lerp(cam.vy()))
}

/// Antialiased disk coverage.
fn coverage(dist: f64, radius: f64) -> f64 {
    (radius + 0.5 - dist).clamp(0.0, 1.0)
}

/// Tight box around pixels with nonzero coverage, or an error when the disk
/// leaves the image.
fn support_box(center: (f64, f64), radius: f64, w: usize, h: usize) -> Option<BoundingBox> {
    let ext = radius + 0.5;
    let (r, c) = center;
    let lo_r = (r - ext).floor().max(0.0) as isize;
    let hi_r = (r + ext).ceil() as isize;
    let lo_c = (c - ext).floor().max(0.0) as isize;
    let hi_c = (c + ext).ceil() as isize;
    let (mut top, mut left, mut bottom, mut right) = (isize::MAX, isize::MAX, isize::MIN, isize::MIN);
    for pr in lo_r..=hi_r {
        for pc in lo_c..=hi_c {
            let d = ((pr as f64 - r).powi(2) + (pc as f64 - c).powi(2)).sqrt();
            if coverage(d, radius) > 0.0 {
                top = top.min(pr);
                bottom = bottom.max(pr);
                left = left.min(pc);
                right = right.max(pc);
            }
        }
    }
    if top < 0 || left < 0 || bottom >= h as isize || right >= w as isize || r - ext < -0.5 || c - ext < -0.5 {
        return None;
    }
    Some(BoundingBox {
        top: top as usize,
        left: left as usize,
        height: (bottom - top + 1) as usize,
        width: (right - left + 1) as usize,
    })
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub images: ImageSequence,
    pub true_flow: FlowField,
    pub camera_flow: FlowField,
    pub turbulence: FlowField,
    pub ground_truth: GroundTruth,
}

/// Renders the scene. The background is the texture backward-warped through
/// camera plus turbulence flow; objects are textured disks composited on
/// top. Inside an object (coverage at least one half) the true flow is the
/// object's displacement.
pub fn gen_sequence(spec: &SceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let grid = spec.grid()?;
    let (w, h, n) = (spec.width, spec.height, spec.flow_frames());
    let camera = gen_camera_flow(spec)?;
    let turbulence = gen_turbulence(spec)?;
    let background = camera.add(&turbulence)?;
    let bg = warp_sequence(&background, spec.texture_scale, spec.seed)?;

    let cam_frames: Vec<FlowField> = (0..n).map(|t| camera.frame(t)).collect();
    let mut images: Vec<Vec<f64>> = (0..=n).map(|t| bg.frame(t).to_vec()).collect();
    let (mut vx, mut vy) = background.into_parts();
    let mut tracks = Vec::new();

    for (k, o) in spec.objects.iter().enumerate() {
        let centers = object_center(o, &cam_frames, &grid, n);
        let size = (2.0 * o.radius).ceil() as usize + 8;
        let tex = Texture::generate(size, size, spec.texture_scale, spec.seed, 16 + k as u64);
        let half = size as f64 / 2.0;
        let mut points = Vec::with_capacity(n + 1);
        for (t, &(cr, cc)) in centers.iter().enumerate() {
            let bbox = support_box((cr, cc), o.radius, w, h).ok_or_else(|| {
                Error::invalid("scene", format!("object {k} leaves the image at frame {t} (centre {cr:.2}, {cc:.2})"))
            })?;
            for r in bbox.top..bbox.top + bbox.height {
                for c in bbox.left..bbox.left + bbox.width {
                    let (dr, dc) = (r as f64 - cr, c as f64 - cc);
                    let a = coverage(dr.hypot(dc), o.radius);
                    if a <= 0.0 {
                        continue;
                    }
                    let value = (o.intensity + 0.5 * (tex.sample(dr + half, dc + half) - 0.5)).clamp(0.0, 1.0);
                    let px = &mut images[t][r * w + c];
                    *px = (1.0 - a) * *px + a * value;
                    if t < n && a >= 0.5 {
                        let i = t * w * h + r * w + c;
                        vx[i] = centers[t + 1].1 - cc;
                        vy[i] = centers[t + 1].0 - cr;
                    }
                }
            }
            points.push(TrackPoint {
                frame: t,
                row: Some(cr),
                col: Some(cc),
                bbox,
                matched: true,
            });
        }
        tracks.push(TrackRecord { id: k as u64, frames: points });
    }

    Ok(SyntheticScene {
        images: ImageSequence::from_frames(w, h, images)?,
        true_flow: FlowField::new(w, h, n, vx, vy)?,
        camera_flow: camera,
        turbulence,
        ground_truth: GroundTruth { tracks },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(frames: usize) -> SceneSpec {
        SceneSpec {
            width: 32,
            height: 32,
            frames,
            ..SceneSpec::default()
        }
    }

    #[test]
    fn zero_motion_gives_zero_flow() {
        let f = gen_camera_flow(&spec(4)).unwrap();
        assert_eq!(f.max_abs(), 0.0);
        assert_eq!(f.frames(), 3);
    }

    #[test]
    fn pure_roll_matches_model() {
        let mut s = SceneSpec {
            width: 65,
            height: 65,
            frames: 2,
            ..SceneSpec::default()
        };
        s.motion = vec![MotionParams {
            omega_z: 0.01,
            ..MotionParams::default()
        }];
        let f = gen_camera_flow(&s).unwrap();
        for (r, c) in [(32, 32), (32, 40), (10, 32), (0, 64)] {
            let (x, y) = (c as f64 - 32.0, r as f64 - 32.0);
            assert_eq!(f.get(r, c, 0), (0.01 * y, -0.01 * x));
        }
        assert_eq!(f.frame(0), eval_motion_model(&s.motion[0], &s.grid().unwrap()));
    }

    #[test]
    fn turbulence_zero_amplitude_is_zero() {
        assert_eq!(gen_turbulence(&spec(6)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn turbulence_zero_temporal_mean_and_rms() {
        let mut s = spec(17);
        s.turbulence.amplitude = 1.0;
        let f = gen_turbulence(&s).unwrap();
        let (len, n) = (f.frame_len(), f.frames());
        let mut worst = 0.0f64;
        for i in 0..len {
            let mx: f64 = (0..n).map(|t| f.vx()[t * len + i]).sum::<f64>() / n as f64;
            let my: f64 = (0..n).map(|t| f.vy()[t * len + i]).sum::<f64>() / n as f64;
            worst = worst.max(mx.abs()).max(my.abs());
        }
        assert!(worst < 1e-9, "{worst}");
        let rms = (f.energy() / (len * n) as f64).sqrt();
        let target = std::f64::consts::FRAC_1_SQRT_2;
        assert!((rms - target).abs() < 0.1 * target, "{rms}");
        assert_eq!(f, gen_turbulence(&s).unwrap());
    }

    #[test]
    fn static_scene_frames_identical() {
        let s = gen_sequence(&spec(4)).unwrap();
        for t in 1..4 {
            assert_eq!(s.images.frame(t), s.images.frame(0));
        }
    }

    #[test]
    fn object_ground_truth_advances() {
        let mut s = spec(6);
        s.objects.push(ObjectSpec {
            start: [10.0, 6.0],
            velocity: [0.0, 2.0],
            acceleration: [0.0, 0.0],
            radius: 2.0,
            intensity: 0.9,
        });
        let scene = gen_sequence(&s).unwrap();
        let pts = &scene.ground_truth.tracks[0].frames;
        assert_eq!(pts.len(), 6);
        for w in pts.windows(2) {
            assert_eq!(w[1].col.unwrap() - w[0].col.unwrap(), 2.0);
            assert_eq!(w[1].bbox.left - w[0].bbox.left, 2);
        }
        assert_eq!(pts[0].bbox, BoundingBox { top: 8, left: 4, height: 5, width: 5 });
        assert_eq!(scene.true_flow.get(10, 6, 0), (2.0, 0.0));
    }

    #[test]
    fn object_leaving_image_is_an_error() {
        let mut s = spec(10);
        s.objects.push(ObjectSpec {
            start: [10.0, 20.0],
            velocity: [0.0, 2.0],
            acceleration: [0.0, 0.0],
            radius: 2.0,
            intensity: 0.9,
        });
        assert!(gen_sequence(&s).is_err());
    }

    #[test]
    fn default_scene_is_valid_and_deterministic() {
        let s = SceneSpec::default_scene(3);
        let a = gen_sequence(&s).unwrap();
        let b = gen_sequence(&s).unwrap();
        assert_eq!(a.images, b.images);
        assert_eq!(a.true_flow, b.true_flow);
    }
}
