//! Separable, multilevel, periodized orthogonal wavelet transform of complex
//! 3D fields.
//!
//! The same 1D filter pair runs along columns, rows and frames. Each level
//! transforms the low-low-low block left by the previous one (Mallat layout),
//! so all coefficients live in one array the size of the padded field. Real
//! and imaginary parts go through the real filters together.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletFamily {
    Haar,
    /// Daubechies, 4 taps.
    Db2,
    /// Daubechies, 8 taps.
    Db4,
}

impl WaveletFamily {
    /// Analysis low-pass filter.
    pub fn lowpass(&self) -> Vec<f64> {
        match self {
            WaveletFamily::Haar => vec![std::f64::consts::FRAC_1_SQRT_2; 2],
            WaveletFamily::Db2 => {
                let s3 = 3f64.sqrt();
                let d = 4.0 * 2f64.sqrt();
                vec![(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d]
            }
            WaveletFamily::Db4 => vec![
                0.230_377_813_308_855_23,
                0.714_846_570_552_541_5,
                0.630_880_767_929_590_4,
                -0.027_983_769_416_983_85,
                -0.187_034_811_718_881_14,
                0.030_841_381_835_986_965,
                0.032_883_011_666_982_945,
                -0.010_597_401_784_997_278,
            ],
        }
    }

    /// Quadrature-mirror high-pass: `g[k] = (-1)^k h[L-1-k]`.
    pub fn highpass(&self) -> Vec<f64> {
        let h = self.lowpass();
        let n = h.len();
        (0..n)
            .map(|k| if k % 2 == 0 { h[n - 1 - k] } else { -h[n - 1 - k] })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extension {
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveletSpec {
    pub family: WaveletFamily,
    /// `None` selects `floor(log2(min dimension)) - 1`, at least 1.
    pub levels: Option<usize>,
    pub extension: Extension,
}

impl Default for WaveletSpec {
    fn default() -> Self {
        Self {
            family: WaveletFamily::Db2,
            levels: None,
            extension: Extension::Periodic,
        }
    }
}

fn floor_log2(n: usize) -> usize {
    (usize::BITS - 1 - n.leading_zeros()) as usize
}

impl WaveletSpec {
    pub fn validate(&self) -> Result<()> {
        if self.levels == Some(0) {
            return Err(Error::invalid("wavelet spec", "levels must be >= 1"));
        }
        Ok(())
    }

    /// Levels actually used for a field of the given shape: the requested
    /// (or default) depth, reduced until every dimension has at least
    /// `2^levels` samples.
    pub fn resolve_levels(&self, dims: [usize; 3]) -> Result<usize> {
        self.validate()?;
        let min = dims.iter().copied().min().unwrap_or(0);
        if min < 2 {
            return Err(Error::invalid(
                "wavelet spec",
                format!("dimensions {dims:?} too small for a single level"),
            ));
        }
        let max_levels = floor_log2(min);
        let wanted = self.levels.unwrap_or_else(|| max_levels.saturating_sub(1).max(1));
        Ok(wanted.min(max_levels))
    }
}

/// Wavelet coefficients plus the bookkeeping needed to invert exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    /// Padded shape `[width, height, frames]`.
    dims: [usize; 3],
    /// Shape of the field before padding.
    original: [usize; 3],
    levels: usize,
    data: Vec<Complex64>,
}

impl Coefficients {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn padded_dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn original_dims(&self) -> [usize; 3] {
        self.original
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Coefficients {
        Coefficients {
            data: self.data.iter().map(|z| f(*z)).collect(),
            ..self.clone_shape()
        }
    }

    fn clone_shape(&self) -> Coefficients {
        Coefficients {
            dims: self.dims,
            original: self.original,
            levels: self.levels,
            data: Vec::new(),
        }
    }
}

/// A linear frame in which the decomposition shrinks coefficients.
pub trait FieldTransform {
    fn forward(&self, field: &ComplexField) -> Result<Coefficients>;
    fn inverse(&self, coeffs: &Coefficients) -> Result<ComplexField>;
}

impl FieldTransform for WaveletSpec {
    fn forward(&self, field: &ComplexField) -> Result<Coefficients> {
        wavelet3d(field, self)
    }

    fn inverse(&self, coeffs: &Coefficients) -> Result<ComplexField> {
        inverse_wavelet3d(coeffs, self)
    }
}

fn analysis_1d(x: &[Complex64], lo: &[f64], hi: &[f64], out: &mut [Complex64]) {
    let n = x.len();
    let half = n / 2;
    for k in 0..half {
        let mut a = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for j in 0..lo.len() {
            let s = x[(2 * k + j) % n];
            a += s * lo[j];
            d += s * hi[j];
        }
        out[k] = a;
        out[half + k] = d;
    }
}

fn synthesis_1d(c: &[Complex64], lo: &[f64], hi: &[f64], out: &mut [Complex64]) {
    let n = c.len();
    let half = n / 2;
    out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
    for k in 0..half {
        let a = c[k];
        let d = c[half + k];
        for j in 0..lo.len() {
            out[(2 * k + j) % n] += a * lo[j] + d * hi[j];
        }
    }
}

/// Applies `op` to every line along `axis` of the block `[0, size)` inside an
/// array of shape `dims`.
fn for_each_line(
    data: &mut [Complex64],
    dims: [usize; 3],
    size: [usize; 3],
    axis: usize,
    op: &dyn Fn(&[Complex64], &mut [Complex64]),
) {
    let [nx, ny, _] = dims;
    let idx = |x: usize, y: usize, t: usize| (t * ny + y) * nx + x;
    let len = size[axis];
    let mut line = vec![Complex64::new(0.0, 0.0); len];
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    let (a, b) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    for i in 0..size[a] {
        for j in 0..size[b] {
            let pos = |k: usize| {
                let mut p = [0; 3];
                p[axis] = k;
                p[a] = i;
                p[b] = j;
                idx(p[0], p[1], p[2])
            };
            for (k, l) in line.iter_mut().enumerate() {
                *l = data[pos(k)];
            }
            op(&line, &mut out);
            for (k, o) in out.iter().enumerate() {
                data[pos(k)] = *o;
            }
        }
    }
}

/// Forward transform, periodically padding each dimension up to a multiple
/// of `2^levels`.
pub fn wavelet3d(field: &ComplexField, spec: &WaveletSpec) -> Result<Coefficients> {
    let original = [field.width(), field.height(), field.frames()];
    let levels = spec.resolve_levels(original)?;
    let block = 1usize << levels;
    let dims = original.map(|n| n.div_ceil(block) * block);
    let [nx, ny, nt] = dims;
    let [ox, oy, ot] = original;
    let src = field.data();
    let mut data = Vec::with_capacity(nx * ny * nt);
    for t in 0..nt {
        for y in 0..ny {
            for x in 0..nx {
                data.push(src[((t % ot) * oy + y % oy) * ox + x % ox]);
            }
        }
    }

    let lo = spec.family.lowpass();
    let hi = spec.family.highpass();
    let analyse = |x: &[Complex64], out: &mut [Complex64]| analysis_1d(x, &lo, &hi, out);
    let mut size = dims;
    for _ in 0..levels {
        for axis in 0..3 {
            for_each_line(&mut data, dims, size, axis, &analyse);
        }
        size = size.map(|s| s / 2);
    }
    Ok(Coefficients {
        dims,
        original,
        levels,
        data,
    })
}

/// Inverse transform, cropping back to the original shape.
pub fn inverse_wavelet3d(coeffs: &Coefficients, spec: &WaveletSpec) -> Result<ComplexField> {
    let dims = coeffs.dims;
    let levels = coeffs.levels;
    if coeffs.data.len() != dims.iter().product::<usize>() {
        return Err(Error::invalid("wavelet coefficients", "data length does not match shape"));
    }
    let lo = spec.family.lowpass();
    let hi = spec.family.highpass();
    let synthesise = |c: &[Complex64], out: &mut [Complex64]| synthesis_1d(c, &lo, &hi, out);
    let mut data = coeffs.data.clone();
    for level in (0..levels).rev() {
        let size = dims.map(|s| s >> level);
        for axis in (0..3).rev() {
            for_each_line(&mut data, dims, size, axis, &synthesise);
        }
    }
    let [nx, ny, _] = dims;
    let [ox, oy, ot] = coeffs.original;
    let mut out = Vec::with_capacity(ox * oy * ot);
    for t in 0..ot {
        for y in 0..oy {
            let start = (t * ny + y) * nx;
            out.extend_from_slice(&data[start..start + ox]);
        }
    }
    ComplexField::new(ox, oy, ot, out)
}
