//! Camera egomotion flow: the rigid-body pinhole forward model, its closed-form
//! inversion under constant depth, and an empirical low-pass alternative.
//!
//! With image coordinates `(x, y)` centred on the principal point, focal
//! length `f` and constant depth `Z`, a camera translating by `T` and rotating
//! by `ω` induces
//!
//! ```text
//! Vx = (Tz x − Tx f)/Z + ωx xy/f − ωy (f + x²/f) + ωz y
//! Vy = (Tz y − Ty f)/Z + ωx (f + y²/f) − ωy xy/f − ωz x
//! ```
//!
//! Only the grouped ratios in [`MotionParams`] are identifiable from flow.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FlowField, PixelGrid};
use crate::filter::{gaussian_smooth, Boundary};

/// Default divisor of the smoothing rule `sigma = axis length / 7`.
pub const DEFAULT_SMOOTHING_DIVISOR: f64 = 7.0;

/// Per-frame egomotion in the grouped form that the flow model depends on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionParams {
    /// `ωx / f`, 1/(frame·pixel).
    pub omega_x_over_f: f64,
    /// `ωy / f`, 1/(frame·pixel).
    pub omega_y_over_f: f64,
    /// Roll rate `ωz`, 1/frame.
    pub omega_z: f64,
    /// `Tx f / Z`, pixels/frame.
    pub tx_f_over_z: f64,
    /// `Ty f / Z`, pixels/frame.
    pub ty_f_over_z: f64,
    /// `Tz / Z`, 1/frame.
    pub tz_over_z: f64,
}

impl MotionParams {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.omega_x_over_f,
            self.omega_y_over_f,
            self.omega_z,
            self.tx_f_over_z,
            self.ty_f_over_z,
            self.tz_over_z,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            omega_x_over_f: a[0],
            omega_y_over_f: a[1],
            omega_z: a[2],
            tx_f_over_z: a[3],
            ty_f_over_z: a[4],
            tz_over_z: a[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    /// Rotation-only part (translations zeroed).
    pub fn rotation(&self) -> Self {
        Self {
            tx_f_over_z: 0.0,
            ty_f_over_z: 0.0,
            tz_over_z: 0.0,
            ..*self
        }
    }

    /// Translation-only part (rotations zeroed).
    pub fn translation(&self) -> Self {
        Self {
            omega_x_over_f: 0.0,
            omega_y_over_f: 0.0,
            omega_z: 0.0,
            ..*self
        }
    }
}

impl std::ops::Add for MotionParams {
    type Output = MotionParams;

    fn add(self, rhs: Self) -> Self {
        let (a, b) = (self.as_array(), rhs.as_array());
        Self::from_array(std::array::from_fn(|i| a[i] + b[i]))
    }
}

/// Gaussian widths in pixels along the row (vertical) and column
/// (horizontal) axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingSpec {
    pub sigma_rows: f64,
    pub sigma_cols: f64,
}

impl SmoothingSpec {
    pub fn new(sigma_rows: f64, sigma_cols: f64) -> Result<Self> {
        let s = Self { sigma_rows, sigma_cols };
        s.validate()?;
        Ok(s)
    }

    /// Each axis' sigma is that axis' length divided by `divisor`.
    pub fn from_divisor(width: usize, height: usize, divisor: f64) -> Result<Self> {
        Self::new(height as f64 / divisor, width as f64 / divisor)
    }

    /// `height / 7` vertically and `width / 7` horizontally.
    pub fn for_size(width: usize, height: usize) -> Self {
        Self::from_divisor(width, height, DEFAULT_SMOOTHING_DIVISOR).expect("positive dimensions")
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_rows > 0.0 && self.sigma_cols > 0.0 && self.sigma_rows.is_finite() && self.sigma_cols.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("smoothing", "sigmas must be positive and finite"))
        }
    }
}

/// Evaluates the egomotion flow for one frame on `grid`.
pub fn eval_motion_model(params: &MotionParams, grid: &PixelGrid) -> FlowField {
    let (w, h) = (grid.width(), grid.height());
    let f2 = grid.focal() * grid.focal();
    let p = params;
    let mut vx = Vec::with_capacity(w * h);
    let mut vy = Vec::with_capacity(w * h);
    for r in 0..h {
        let y = grid.y(r);
        for c in 0..w {
            let x = grid.x(c);
            vx.push(
                p.tz_over_z * x - p.tx_f_over_z + p.omega_x_over_f * x * y
                    - p.omega_y_over_f * (f2 + x * x)
                    + p.omega_z * y,
            );
            vy.push(
                p.tz_over_z * y - p.ty_f_over_z + p.omega_x_over_f * (f2 + y * y)
                    - p.omega_y_over_f * x * y
                    - p.omega_z * x,
            );
        }
    }
    FlowField::new(w, h, 1, vx, vy).expect("finite parameters give a finite field")
}

/// Egomotion flow for a sequence of per-frame parameters.
pub fn eval_motion_sequence(params: &[MotionParams], grid: &PixelGrid) -> Result<FlowField> {
    let frames: Vec<FlowField> = params.iter().map(|p| eval_motion_model(p, grid)).collect();
    FlowField::stack(&frames)
}

#[derive(Debug, Clone)]
pub struct AnalyticEstimate {
    pub params: Vec<MotionParams>,
    pub model: FlowField,
    pub compensated: FlowField,
}

#[derive(Debug, Clone)]
pub struct EmpiricalEstimate {
    pub model: FlowField,
    pub compensated: FlowField,
}

/// Mean of `f(r, c)` over rows/cols `[margin, n - margin)`.
fn interior_mean(w: usize, h: usize, margin: usize, f: impl Fn(usize, usize) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in margin..h - margin {
        for c in margin..w - margin {
            sum += f(r, c);
            n += 1;
        }
    }
    sum / n as f64
}

/// Closed-form parameters of one frame.
///
/// Derivatives are central differences of the Gaussian-smoothed field;
/// averages run over the interior one pixel in from the border (two pixels
/// for the second derivatives of the curl). The smoothing extends each line
/// by a fitted quadratic, so it is exact on the quadratic egomotion model up to
/// constant offsets, which the derivatives discard. Mean flows in the
/// translation step are taken from the unsmoothed field.
pub fn estimate_frame(vx: &[f64], vy: &[f64], grid: &PixelGrid, smoothing: &SmoothingSpec) -> MotionParams {
    let (w, h) = (grid.width(), grid.height());
    let sx = gaussian_smooth(vx, w, h, smoothing.sigma_rows, smoothing.sigma_cols, Boundary::Quadratic);
    let sy = gaussian_smooth(vy, w, h, smoothing.sigma_rows, smoothing.sigma_cols, Boundary::Quadratic);
    let at = |p: &[f64], r: usize, c: usize| p[r * w + c];

    let mut curl = vec![0.0; w * h];
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            curl[r * w + c] = (at(&sy, r, c + 1) - at(&sy, r, c - 1)) / 2.0
                - (at(&sx, r + 1, c) - at(&sx, r - 1, c)) / 2.0;
        }
    }
    let omega_z = -0.5 * interior_mean(w, h, 1, |r, c| curl[r * w + c]);
    let omega_x_over_f = -interior_mean(w, h, 2, |r, c| (at(&curl, r, c + 1) - at(&curl, r, c - 1)) / 2.0);
    let omega_y_over_f = -interior_mean(w, h, 2, |r, c| (at(&curl, r + 1, c) - at(&curl, r - 1, c)) / 2.0);

    let f2 = grid.focal() * grid.focal();
    let mean_vx = interior_mean(w, h, 1, |r, c| at(vx, r, c));
    let mean_vy = interior_mean(w, h, 1, |r, c| at(vy, r, c));
    let tx_f_over_z = interior_mean(w, h, 1, |_, c| {
        let x = grid.x(c);
        -omega_y_over_f * (f2 + x * x)
    }) - mean_vx;
    let ty_f_over_z = interior_mean(w, h, 1, |r, _| {
        let y = grid.y(r);
        omega_x_over_f * (f2 + y * y)
    }) - mean_vy;

    let div = interior_mean(w, h, 1, |r, c| {
        (at(&sx, r, c + 1) - at(&sx, r, c - 1)) / 2.0 + (at(&sy, r + 1, c) - at(&sy, r - 1, c)) / 2.0
    });
    let tz_over_z = 0.5 * div;

    MotionParams {
        omega_x_over_f,
        omega_y_over_f,
        omega_z,
        tx_f_over_z,
        ty_f_over_z,
        tz_over_z,
    }
}

fn check_grid(flow: &FlowField, grid: &PixelGrid) -> Result<()> {
    if grid.width() != flow.width() || grid.height() != flow.height() {
        return Err(Error::invalid(
            "pixel grid",
            format!(
                "grid {}x{} does not match flow {}x{}",
                grid.width(),
                grid.height(),
                flow.width(),
                flow.height()
            ),
        ));
    }
    if flow.width() < 8 || flow.height() < 8 {
        return Err(Error::TooSmall {
            width: flow.width(),
            height: flow.height(),
            min: 8,
        });
    }
    Ok(())
}

/// Estimates per-frame egomotion, renders it and subtracts it from `flow`.
pub fn estimate_analytic(flow: &FlowField, grid: &PixelGrid, smoothing: &SmoothingSpec) -> Result<AnalyticEstimate> {
    check_grid(flow, grid)?;
    smoothing.validate()?;
    if flow.vx().iter().chain(flow.vy()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("flow"));
    }
    let params: Vec<MotionParams> = (0..flow.frames())
        .into_par_iter()
        .map(|t| estimate_frame(flow.frame_vx(t), flow.frame_vy(t), grid, smoothing))
        .collect();
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("estimated motion parameters"));
    }
    let model = eval_motion_sequence(&params, grid)?;
    let compensated = flow.sub(&model)?;
    Ok(AnalyticEstimate {
        params,
        model,
        compensated,
    })
}

/// Per-frame, per-component Gaussian low-pass of `flow` as the egomotion model.
///
/// The smoothing mirrors at the border (half-sample symmetric), which keeps
/// the spatial mean of each frame unchanged.
pub fn estimate_empirical(flow: &FlowField, smoothing: &SmoothingSpec) -> Result<EmpiricalEstimate> {
    smoothing.validate()?;
    let (w, h) = (flow.width(), flow.height());
    let planes: Vec<(Vec<f64>, Vec<f64>)> = (0..flow.frames())
        .into_par_iter()
        .map(|t| {
            let s = |p: &[f64]| gaussian_smooth(p, w, h, smoothing.sigma_rows, smoothing.sigma_cols, Boundary::Reflect);
            (s(flow.frame_vx(t)), s(flow.frame_vy(t)))
        })
        .collect();
    let (vx, vy): (Vec<Vec<f64>>, Vec<Vec<f64>>) = planes.into_iter().unzip();
    let model = FlowField::new(w, h, flow.frames(), vx.concat(), vy.concat())?;
    let compensated = flow.sub(&model)?;
    Ok(EmpiricalEstimate { model, compensated })
}
