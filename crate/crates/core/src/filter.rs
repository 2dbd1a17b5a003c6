//! Separable Gaussian smoothing with explicit boundary extension.

use nalgebra::{Matrix3, Vector3};

/// How samples beyond the edge of a line are synthesised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Repeat the edge sample.
    Replicate,
    /// Half-sample symmetric mirror (`… b a | a b c … | c b …`). With a
    /// symmetric normalized kernel the smoothing operator is self-adjoint,
    /// so the spatial sum of a field is preserved.
    Reflect,
    /// Extrapolate the least-squares quadratic fitted to the samples nearest
    /// each edge. Smoothing then maps any quadratic polynomial to itself plus
    /// a constant.
    Quadratic,
}

/// Normalized Gaussian taps truncated at `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / denom).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

fn reflect_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Least-squares quadratic through `(t, values[t])`, returned as a closure
/// in the same local coordinate.
fn fit_quadratic(values: &[f64], origin: f64) -> impl Fn(f64) -> f64 {
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for (i, v) in values.iter().enumerate() {
        let t = i as f64 - origin;
        let row = Vector3::new(1.0, t, t * t);
        ata += row * row.transpose();
        atb += row * *v;
    }
    let coef = ata
        .lu()
        .solve(&atb)
        .unwrap_or_else(|| Vector3::new(values.iter().sum::<f64>() / values.len() as f64, 0.0, 0.0));
    move |t: f64| {
        let t = t - origin;
        coef[0] + coef[1] * t + coef[2] * t * t
    }
}

/// Writes `line` padded by `pad` samples per side into `out`.
fn extend_line(line: &[f64], pad: usize, mode: Boundary, out: &mut Vec<f64>) {
    let n = line.len();
    out.clear();
    out.reserve(n + 2 * pad);
    match mode {
        Boundary::Replicate => {
            out.extend(std::iter::repeat_n(line[0], pad));
            out.extend_from_slice(line);
            out.extend(std::iter::repeat_n(line[n - 1], pad));
        }
        Boundary::Reflect => {
            for i in -(pad as isize)..(n + pad) as isize {
                out.push(line[reflect_index(i, n)]);
            }
        }
        Boundary::Quadratic => {
            if n < 3 {
                return extend_line(line, pad, Boundary::Replicate, out);
            }
            let m = n.min((pad + 1).max(3));
            let left = fit_quadratic(&line[..m], (m as f64 - 1.0) / 2.0);
            let right = fit_quadratic(&line[n - m..], (m as f64 - 1.0) / 2.0);
            for k in (1..=pad).rev() {
                out.push(left(-(k as f64)));
            }
            out.extend_from_slice(line);
            for k in 1..=pad {
                out.push(right((m - 1 + k) as f64));
            }
        }
    }
}

/// Convolves one line with a symmetric odd-length kernel.
pub fn convolve_line(line: &[f64], kernel: &[f64], mode: Boundary, out: &mut [f64]) {
    let pad = kernel.len() / 2;
    let mut ext = Vec::new();
    extend_line(line, pad, mode, &mut ext);
    for (i, o) in out.iter_mut().enumerate() {
        *o = ext[i..i + kernel.len()]
            .iter()
            .zip(kernel)
            .map(|(a, b)| a * b)
            .sum();
    }
}

/// Smooths one row-major `width x height` plane: horizontally with
/// `sigma_cols`, then vertically with `sigma_rows`.
pub fn gaussian_smooth(
    plane: &[f64],
    width: usize,
    height: usize,
    sigma_rows: f64,
    sigma_cols: f64,
    mode: Boundary,
) -> Vec<f64> {
    debug_assert_eq!(plane.len(), width * height);
    let kx = gaussian_kernel(sigma_cols);
    let ky = gaussian_kernel(sigma_rows);
    let mut tmp = vec![0.0; plane.len()];
    for r in 0..height {
        convolve_line(
            &plane[r * width..(r + 1) * width],
            &kx,
            mode,
            &mut tmp[r * width..(r + 1) * width],
        );
    }
    let mut out = vec![0.0; plane.len()];
    let mut col = vec![0.0; height];
    let mut res = vec![0.0; height];
    for c in 0..width {
        for r in 0..height {
            col[r] = tmp[r * width + c];
        }
        convolve_line(&col, &ky, mode, &mut res);
        for r in 0..height {
            out[r * width + c] = res[r];
        }
    }
    out
}
