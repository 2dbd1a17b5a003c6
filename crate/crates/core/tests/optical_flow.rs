mod common;

use proptest::prelude::*;
use turbtrack_core::optical_flow::flow_pair;
use turbtrack_core::{compute_flow, HornSchunckParams, ImageSequence};

fn mirror(frame: &[f64], w: usize) -> Vec<f64> {
    frame.chunks(w).flat_map(|row| row.iter().rev().copied()).collect()
}

fn total_variation(f: &[f64], w: usize, h: usize) -> f64 {
    let mut tv = 0.0;
    for r in 0..h {
        for c in 0..w {
            let v = f[r * w + c];
            if c + 1 < w {
                tv += (f[r * w + c + 1] - v).abs();
            }
            if r + 1 < h {
                tv += (f[(r + 1) * w + c] - v).abs();
            }
        }
    }
    tv
}

#[test]
fn zero_temporal_change_gives_zero_flow() {
    let s = common::translation(40, 2, 0.0, 0.0, 4);
    let seq = ImageSequence::from_frames(40, 40, vec![s.images.frame(0).to_vec(); 3]).unwrap();
    let flow = compute_flow(&seq, &HornSchunckParams::default()).unwrap();
    assert_eq!(flow.frames(), 2);
    assert!(flow.max_abs() < 1e-6);
}

#[test]
fn mirroring_negates_horizontal_flow() {
    let w = 48;
    let s = common::translation(w, 2, 1.3, -0.6, 9);
    let p = HornSchunckParams::default();
    let (f0, f1) = (s.images.frame(0), s.images.frame(1));
    let (u, v) = flow_pair(f0, f1, w, w, &p).unwrap();
    let (mu, mv) = flow_pair(&mirror(f0, w), &mirror(f1, w), w, w, &p).unwrap();
    let (mu, mv) = (mirror(&mu, w), mirror(&mv, w));
    let mut worst: f64 = 0.0;
    for r in 0..w {
        for c in 1..w - 1 {
            let i = r * w + c;
            worst = worst.max((u[i] + mu[i]).abs()).max((v[i] - mv[i]).abs());
        }
    }
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn larger_alpha_never_adds_variation() {
    let w = 48;
    let s = common::translation(w, 2, 0.0, 0.0, 2);
    // Noisy second frame so the data term alone would give a rough field.
    let noisy: Vec<f64> = s
        .images
        .frame(0)
        .iter()
        .enumerate()
        .map(|(i, v)| (v + 0.03 * ((i * 7919 % 13) as f64 / 6.0 - 1.0)).clamp(0.0, 1.0))
        .collect();
    let mut last = f64::INFINITY;
    for alpha in [2.0, 5.0, 15.0, 40.0, 100.0] {
        let p = HornSchunckParams {
            alpha,
            ..Default::default()
        };
        let (u, v) = flow_pair(s.images.frame(0), &noisy, w, w, &p).unwrap();
        let tv = total_variation(&u, w, w) + total_variation(&v, w, w);
        assert!(tv <= last * (1.0 + 1e-9), "alpha {alpha}: {tv} > {last}");
        last = tv;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn small_translations_are_recovered(dx in -2.0f64..2.0, dy in -2.0f64..2.0, seed in 0u64..1000) {
        let s = common::translation(64, 3, dx, dy, seed);
        let flow = compute_flow(&s.images, &HornSchunckParams::default()).unwrap();
        let epe = common::mean_epe(&flow, &s.true_flow, 0);
        prop_assert!(epe <= 0.2, "shift ({dx:.2}, {dy:.2}) epe {epe}");
    }
}
