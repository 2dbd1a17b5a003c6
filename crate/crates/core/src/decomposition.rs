//! Geometric/oscillatory split of a flow by alternating complex
//! soft-shrinkage in a wavelet frame.
//!
//! The flow is treated as the complex field `Ṽ = Vx + i·Vy`. Starting from
//! `u⁰ = v⁰ = 0`, each iteration computes
//!
//! ```text
//! vⁿ⁺¹ = Ṽ − uⁿ − W⁻¹ CShrink(W(Ṽ − uⁿ), 2μ)
//! uⁿ⁺¹ = W⁻¹ CShrink(W(Ṽ − vⁿ), 2λ)
//! ```
//!
//! until `max(‖uⁿ⁺¹ − uⁿ‖, ‖vⁿ⁺¹ − vⁿ‖) < tol` or the iteration cap is hit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, FlowField};
use crate::wavelet::{FieldTransform, WaveletSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShrinkageParams {
    pub lambda: f64,
    pub mu: f64,
    pub max_iterations: usize,
    /// Absolute L² change that ends the iteration.
    pub convergence_tol: f64,
}

impl Default for ShrinkageParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 1.0,
            max_iterations: 5,
            convergence_tol: 1e-4,
        }
    }
}

impl ShrinkageParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda > 0.0
            && self.mu > 0.0
            && self.max_iterations >= 1
            && self.convergence_tol > 0.0
            && self.lambda.is_finite()
            && self.mu.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                "shrinkage parameters",
                "lambda, mu and tolerance must be > 0 and max_iterations >= 1",
            ))
        }
    }
}

/// Complex soft threshold: `max(0, |z| − t)·e^{iθ}`.
#[inline]
pub fn cshrink(z: Complex64, threshold: f64) -> Complex64 {
    if threshold == 0.0 {
        return z;
    }
    let mag = z.norm();
    if mag <= threshold {
        Complex64::new(0.0, 0.0)
    } else {
        z * ((mag - threshold) / mag)
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Geometric component.
    pub u: FlowField,
    /// Oscillatory component.
    pub v: FlowField,
    pub iterations: usize,
    /// Stop metric of the last iteration.
    pub final_change: f64,
}

fn shrink_in(transform: &impl FieldTransform, field: &ComplexField, threshold: f64) -> Result<ComplexField> {
    let mut c = transform.forward(field)?;
    c.data_mut().iter_mut().for_each(|z| *z = cshrink(*z, threshold));
    transform.inverse(&c)
}

/// Decomposes with the separable wavelet transform described by `spec`.
pub fn decompose(vc: &FlowField, params: &ShrinkageParams, spec: &WaveletSpec) -> Result<Decomposition> {
    decompose_with(vc, params, spec)
}

/// Half-sample symmetric index into `0..n`.
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Mirror-extends `field` by `pad = [x, y, t]` samples on both sides of each
/// axis.
pub fn mirror_extend(field: &FlowField, pad: [usize; 3]) -> FlowField {
    let (w, h, n) = (field.width(), field.height(), field.frames());
    let (ew, eh, en) = (w + 2 * pad[0], h + 2 * pad[1], n + 2 * pad[2]);
    let mut vx = Vec::with_capacity(ew * eh * en);
    let mut vy = Vec::with_capacity(ew * eh * en);
    for t in 0..en {
        let st = mirror(t as isize - pad[2] as isize, n);
        for r in 0..eh {
            let sr = mirror(r as isize - pad[1] as isize, h);
            for c in 0..ew {
                let sc = mirror(c as isize - pad[0] as isize, w);
                let i = field.index(sr, sc, st);
                vx.push(field.vx()[i]);
                vy.push(field.vy()[i]);
            }
        }
    }
    FlowField::new(ew, eh, en, vx, vy).expect("copied finite values")
}

/// Inverse of [`mirror_extend`]: the centre block of shape `w x h x n`.
pub fn crop(field: &FlowField, pad: [usize; 3], w: usize, h: usize, n: usize) -> FlowField {
    let mut vx = Vec::with_capacity(w * h * n);
    let mut vy = Vec::with_capacity(w * h * n);
    for t in 0..n {
        for r in 0..h {
            let i = field.index(r + pad[1], pad[0], t + pad[2]);
            vx.extend_from_slice(&field.vx()[i..i + w]);
            vy.extend_from_slice(&field.vy()[i..i + w]);
        }
    }
    FlowField::new(w, h, n, vx, vy).expect("copied finite values")
}

/// [`decompose`] applied to the field mirror-extended by `pad` samples per
/// side (each clamped to the axis length), then cropped back. The
/// periodized transform then sees no jump where opposite edges wrap.
pub fn decompose_mirrored(vc: &FlowField, params: &ShrinkageParams, spec: &WaveletSpec, pad: usize) -> Result<Decomposition> {
    if pad == 0 {
        return decompose(vc, params, spec);
    }
    let (w, h, n) = (vc.width(), vc.height(), vc.frames());
    let p = [pad.min(w), pad.min(h), pad.min(n)];
    let d = decompose(&mirror_extend(vc, p), params, spec)?;
    Ok(Decomposition {
        u: crop(&d.u, p, w, h, n),
        v: crop(&d.v, p, w, h, n),
        ..d
    })
}

/// Decomposes in an arbitrary linear frame.
pub fn decompose_with(vc: &FlowField, params: &ShrinkageParams, transform: &impl FieldTransform) -> Result<Decomposition> {
    params.validate()?;
    if vc.vx().iter().chain(vc.vy()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("compensated flow"));
    }
    let target = ComplexField::from(vc);
    let (w, h, t) = (vc.width(), vc.height(), vc.frames());
    let mut u = ComplexField::zeros(w, h, t);
    let mut v = ComplexField::zeros(w, h, t);
    let mut iterations = 0;
    let mut change;
    loop {
        let resid_u = target.zip_map(&u, |a, b| a - b);
        let kept = shrink_in(transform, &resid_u, 2.0 * params.mu)?;
        let v_next = resid_u.zip_map(&kept, |a, b| a - b);

        let resid_v = target.zip_map(&v, |a, b| a - b);
        let u_next = shrink_in(transform, &resid_v, 2.0 * params.lambda)?;

        change = u_next.l2_distance(&u).max(v_next.l2_distance(&v));
        u = u_next;
        v = v_next;
        iterations += 1;
        if change < params.convergence_tol || iterations >= params.max_iterations {
            break;
        }
    }
    Ok(Decomposition {
        u: u.to_flow()?,
        v: v.to_flow()?,
        iterations,
        final_change: change,
    })
}
