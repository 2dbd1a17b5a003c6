#![allow(dead_code)]

use turbtrack_core::synth::{gen_sequence, SceneSpec, SyntheticScene};
use turbtrack_core::{FlowField, MotionParams};

/// Textured scene translating uniformly by `(dx, dy)` pixels per frame.
pub fn translation(size: usize, frames: usize, dx: f64, dy: f64, seed: u64) -> SyntheticScene {
    let spec = SceneSpec {
        width: size,
        height: size,
        frames,
        motion: vec![MotionParams {
            tx_f_over_z: -dx,
            ty_f_over_z: -dy,
            ..Default::default()
        }],
        seed,
        ..SceneSpec::default()
    };
    gen_sequence(&spec).unwrap()
}

/// Mean endpoint error over pixels at least `margin` from the border.
pub fn mean_epe(a: &FlowField, b: &FlowField, margin: usize) -> f64 {
    let (w, h) = (a.width(), a.height());
    let (mut sum, mut n) = (0.0, 0usize);
    for t in 0..a.frames() {
        for r in margin..h - margin {
            for c in margin..w - margin {
                let (ax, ay) = a.get(r, c, t);
                let (bx, by) = b.get(r, c, t);
                sum += (ax - bx).hypot(ay - by);
                n += 1;
            }
        }
    }
    sum / n as f64
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Leave-one-out outlier frames written out term by term,
/// with the per-frame statistic taken as the largest vector magnitude.
pub fn outlier_oracle(flow: &FlowField, kappa: f64) -> Vec<usize> {
    let n = flow.frames();
    let mut stat = Vec::new();
    for t in 0..n {
        let mut m: f64 = 0.0;
        for i in 0..flow.frame_len() {
            let (x, y) = (flow.frame_vx(t)[i], flow.frame_vy(t)[i]);
            m = m.max((x * x + y * y).sqrt());
        }
        stat.push(m);
    }
    let mut loo = Vec::new();
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if j != i {
                s += stat[j];
            }
        }
        loo.push(s / (n as f64 - 1.0));
    }
    let mean = loo.iter().sum::<f64>() / n as f64;
    let mut dev = 0.0;
    for m in &loo {
        dev += (mean - m).abs();
    }
    let spread = (dev / (n as f64 - 1.0)).sqrt();
    (0..n).filter(|&i| (loo[i] - mean).abs() > kappa * spread).collect()
}

/// Flow whose frame `t` is the uniform vector `(stats[t], 0)`.
pub fn flow_with_stats(stats: &[f64]) -> FlowField {
    let (w, h) = (4, 4);
    let vx = stats.iter().flat_map(|s| std::iter::repeat_n(*s, w * h)).collect();
    FlowField::new(w, h, stats.len(), vx, vec![0.0; w * h * stats.len()]).unwrap()
}

/// 20 frames near 1 with spikes of 1000 at frames 3 and 17 (and optionally at 4).
pub fn planted_spikes(seed: u64, spikes: &[usize]) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut s: Vec<f64> = (0..20).map(|_| rng.random_range(0.95..1.05)).collect();
    for &i in spikes {
        s[i] = 1000.0;
    }
    s
}
