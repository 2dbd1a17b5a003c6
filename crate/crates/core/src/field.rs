//! Field containers shared by every pipeline stage.
//!
//! All fields use one storage order: row-major within a frame, frames
//! contiguous. Index of `(row, col, frame)` is `(frame * height + row) * width + col`.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MIN_IMAGE_SIDE: usize = 8;

#[inline]
fn frame_len(width: usize, height: usize) -> usize {
    width * height
}

/// Grayscale intensity sequence with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSequence {
    width: usize,
    height: usize,
    frames: usize,
    data: Vec<f64>,
}

impl ImageSequence {
    pub fn new(width: usize, height: usize, frames: usize, data: Vec<f64>) -> Result<Self> {
        if width < MIN_IMAGE_SIDE || height < MIN_IMAGE_SIDE {
            return Err(Error::TooSmall {
                width,
                height,
                min: MIN_IMAGE_SIDE,
            });
        }
        if frames < 2 {
            return Err(Error::invalid("image sequence", format!("{frames} frames, need at least 2")));
        }
        if data.len() != width * height * frames {
            return Err(Error::invalid(
                "image sequence",
                format!("data length {} != {}x{}x{}", data.len(), width, height, frames),
            ));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::invalid("image sequence", format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            frames,
            data,
        })
    }

    pub fn from_frames(width: usize, height: usize, frames: Vec<Vec<f64>>) -> Result<Self> {
        let n = frames.len();
        let data = frames.into_iter().flatten().collect();
        Self::new(width, height, n, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let n = frame_len(self.width, self.height);
        &self.data[t * n..(t + 1) * n]
    }
}

/// Dense spatio-temporal displacement field in pixels/frame.
///
/// `vx` is the displacement along columns (image x), `vy` along rows (image y).
/// Frame `t` of a pairwise flow maps image frame `t` to image frame `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    frames: usize,
    vx: Vec<f64>,
    vy: Vec<f64>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, frames: usize, vx: Vec<f64>, vy: Vec<f64>) -> Result<Self> {
        let n = width * height * frames;
        if vx.len() != n || vy.len() != n {
            return Err(Error::invalid(
                "flow field",
                format!("component lengths {}/{} != {}x{}x{}", vx.len(), vy.len(), width, height, frames),
            ));
        }
        if vx.iter().chain(vy.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("flow field"));
        }
        Ok(Self {
            width,
            height,
            frames,
            vx,
            vy,
        })
    }

    pub fn zeros(width: usize, height: usize, frames: usize) -> Self {
        let n = width * height * frames;
        Self {
            width,
            height,
            frames,
            vx: vec![0.0; n],
            vy: vec![0.0; n],
        }
    }

    /// Same vector `(vx, vy)` at every pixel of every frame.
    pub fn uniform(width: usize, height: usize, frames: usize, vx: f64, vy: f64) -> Self {
        let n = width * height * frames;
        Self {
            width,
            height,
            frames,
            vx: vec![vx; n],
            vy: vec![vy; n],
        }
    }

    /// Stacks single-frame fields of equal size along time.
    pub fn stack(frames: &[FlowField]) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("flow field", "cannot stack zero frames"))?;
        let (w, h) = (first.width, first.height);
        let mut vx = Vec::with_capacity(w * h * frames.len());
        let mut vy = Vec::with_capacity(w * h * frames.len());
        let mut total = 0;
        for f in frames {
            if f.width != w || f.height != h {
                return Err(Error::invalid("flow field", "stacked frames differ in size"));
            }
            vx.extend_from_slice(&f.vx);
            vy.extend_from_slice(&f.vy);
            total += f.frames;
        }
        Ok(Self {
            width: w,
            height: h,
            frames: total,
            vx,
            vy,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn frame_len(&self) -> usize {
        frame_len(self.width, self.height)
    }

    pub fn vx(&self) -> &[f64] {
        &self.vx
    }

    pub fn vy(&self) -> &[f64] {
        &self.vy
    }

    pub fn index(&self, row: usize, col: usize, frame: usize) -> usize {
        (frame * self.height + row) * self.width + col
    }

    pub fn get(&self, row: usize, col: usize, frame: usize) -> (f64, f64) {
        let i = self.index(row, col, frame);
        (self.vx[i], self.vy[i])
    }

    pub fn frame_vx(&self, t: usize) -> &[f64] {
        let n = self.frame_len();
        &self.vx[t * n..(t + 1) * n]
    }

    pub fn frame_vy(&self, t: usize) -> &[f64] {
        let n = self.frame_len();
        &self.vy[t * n..(t + 1) * n]
    }

    /// Copies frame `t` into a standalone single-frame field.
    pub fn frame(&self, t: usize) -> FlowField {
        FlowField {
            width: self.width,
            height: self.height,
            frames: 1,
            vx: self.frame_vx(t).to_vec(),
            vy: self.frame_vy(t).to_vec(),
        }
    }

    pub(crate) fn frame_mut(&mut self, t: usize) -> (&mut [f64], &mut [f64]) {
        let n = self.frame_len();
        (&mut self.vx[t * n..(t + 1) * n], &mut self.vy[t * n..(t + 1) * n])
    }

    pub(crate) fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.vx, self.vy)
    }

    pub fn same_shape(&self, other: &FlowField) -> bool {
        self.width == other.width && self.height == other.height && self.frames == other.frames
    }

    fn zip_with(&self, other: &FlowField, op: impl Fn(f64, f64) -> f64) -> Result<FlowField> {
        if !self.same_shape(other) {
            return Err(Error::invalid(
                "flow field",
                format!(
                    "shape {}x{}x{} vs {}x{}x{}",
                    self.width, self.height, self.frames, other.width, other.height, other.frames
                ),
            ));
        }
        let vx = self.vx.iter().zip(&other.vx).map(|(a, b)| op(*a, *b)).collect();
        let vy = self.vy.iter().zip(&other.vy).map(|(a, b)| op(*a, *b)).collect();
        Ok(FlowField {
            width: self.width,
            height: self.height,
            frames: self.frames,
            vx,
            vy,
        })
    }

    pub fn sub(&self, other: &FlowField) -> Result<FlowField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &FlowField) -> Result<FlowField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scaled(&self, c: f64) -> FlowField {
        FlowField {
            width: self.width,
            height: self.height,
            frames: self.frames,
            vx: self.vx.iter().map(|v| v * c).collect(),
            vy: self.vy.iter().map(|v| v * c).collect(),
        }
    }

    /// Per-pixel Euclidean norm `sqrt(vx² + vy²)`.
    pub fn magnitude(&self) -> ScalarField {
        let data = self
            .vx
            .iter()
            .zip(&self.vy)
            .map(|(x, y)| x.hypot(*y))
            .collect();
        ScalarField {
            width: self.width,
            height: self.height,
            frames: self.frames,
            data,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.vx
            .iter()
            .chain(self.vy.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Sum of squared vector lengths.
    pub fn energy(&self) -> f64 {
        self.vx.iter().zip(&self.vy).map(|(x, y)| x * x + y * y).sum()
    }
}

/// Per-pixel magnitude of a flow field.
pub fn flow_magnitude(flow: &FlowField) -> ScalarField {
    flow.magnitude()
}

/// Real scalar field with the same layout as [`FlowField`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    frames: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(width: usize, height: usize, frames: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * frames {
            return Err(Error::invalid("scalar field", "data length does not match shape"));
        }
        Ok(Self {
            width,
            height,
            frames,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let n = frame_len(self.width, self.height);
        &self.data[t * n..(t + 1) * n]
    }
}

/// Flow encoded as `vx + i·vy`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    width: usize,
    height: usize,
    frames: usize,
    data: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(width: usize, height: usize, frames: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != width * height * frames {
            return Err(Error::invalid("complex field", "data length does not match shape"));
        }
        Ok(Self {
            width,
            height,
            frames,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, frames: usize) -> Self {
        Self {
            width,
            height,
            frames,
            data: vec![Complex64::new(0.0, 0.0); width * height * frames],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    /// `sqrt(Σ|z|²)`, unnormalized.
    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn l2_distance(&self, other: &ComplexField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn zip_map(&self, other: &ComplexField, op: impl Fn(Complex64, Complex64) -> Complex64) -> ComplexField {
        debug_assert_eq!(self.data.len(), other.data.len());
        ComplexField {
            width: self.width,
            height: self.height,
            frames: self.frames,
            data: self.data.iter().zip(&other.data).map(|(a, b)| op(*a, *b)).collect(),
        }
    }

    pub fn to_flow(&self) -> Result<FlowField> {
        let vx = self.data.iter().map(|z| z.re).collect();
        let vy = self.data.iter().map(|z| z.im).collect();
        FlowField::new(self.width, self.height, self.frames, vx, vy)
    }
}

impl From<&FlowField> for ComplexField {
    fn from(flow: &FlowField) -> Self {
        ComplexField {
            width: flow.width,
            height: flow.height,
            frames: flow.frames,
            data: flow
                .vx
                .iter()
                .zip(&flow.vy)
                .map(|(x, y)| Complex64::new(*x, *y))
                .collect(),
        }
    }
}

/// Image-plane coordinates centred on the principal point, in pixels.
///
/// `x` runs along columns and `y` along rows; for a grid of `n` samples the
/// coordinate of index `i` is `i - (n - 1) / 2`, so both coordinate means are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelGrid {
    width: usize,
    height: usize,
    focal: f64,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize, focal: f64) -> Result<Self> {
        if !(focal > 0.0 && focal.is_finite()) {
            return Err(Error::invalid("pixel grid", format!("focal length {focal} must be > 0")));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("pixel grid", "empty grid"));
        }
        Ok(Self { width, height, focal })
    }

    /// Grid whose focal length defaults to `max(width, height)` pixels.
    pub fn with_default_focal(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, width.max(height) as f64)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn focal(&self) -> f64 {
        self.focal
    }

    #[inline]
    pub fn x(&self, col: usize) -> f64 {
        col as f64 - (self.width as f64 - 1.0) / 2.0
    }

    #[inline]
    pub fn y(&self, row: usize) -> f64 {
        row as f64 - (self.height as f64 - 1.0) / 2.0
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.width).map(|c| self.x(c)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.height).map(|r| self.y(r)).collect()
    }
}
