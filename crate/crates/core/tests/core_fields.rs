use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};
use proptest::prelude::*;
use turbtrack_core::io::{decode_flow, encode_flow, load_sequence, LUMA_WEIGHTS};
use turbtrack_core::{Error, FlowField, PixelGrid};

fn gray8(dir: &Path, name: &str, w: u32, h: u32, f: impl Fn(u32, u32) -> u8) {
    ImageBuffer::from_fn(w, h, |x, y| Luma([f(x, y)])).save(dir.join(name)).unwrap();
}

#[test]
fn loads_full_size_sequence() {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..100 {
        gray8(dir.path(), &format!("f{i:03}.png"), 512, 512, |x, y| ((x + y + i) % 256) as u8);
    }
    let seq = load_sequence(dir.path(), "*.png").unwrap();
    assert_eq!((seq.width(), seq.height(), seq.frames()), (512, 512, 100));
    assert_eq!(seq.frame(3)[1], 4.0 / 255.0);
}

#[test]
fn identical_frames_load_identically() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.png", "b.png"] {
        gray8(dir.path(), name, 8, 8, |x, y| (x * 30 + y) as u8);
    }
    let seq = load_sequence(dir.path(), "*.png").unwrap();
    assert_eq!(seq.frame(0), seq.frame(1));
}

#[test]
fn dimension_mismatch_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    gray8(dir.path(), "1.png", 8, 8, |_, _| 0);
    gray8(dir.path(), "2.png", 10, 10, |_, _| 0);
    gray8(dir.path(), "3.png", 8, 8, |_, _| 0);
    match load_sequence(dir.path(), "*.png") {
        Err(Error::DimensionMismatch { path, found_w, .. }) => {
            assert!(path.ends_with("2.png"));
            assert_eq!(found_w, 10);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn load_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_sequence(dir.path(), "*.png"), Err(Error::NoFilesMatched { .. })));
    gray8(dir.path(), "a.png", 8, 8, |_, _| 0);
    std::fs::write(dir.path().join("b.png"), b"not a png").unwrap();
    match load_sequence(dir.path(), "*.png") {
        Err(Error::Undecodable { path, .. }) => assert!(path.ends_with("b.png")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn frames_follow_filename_order_and_pattern() {
    let dir = tempfile::tempdir().unwrap();
    gray8(dir.path(), "frame_10.png", 8, 8, |_, _| 10);
    gray8(dir.path(), "frame_02.png", 8, 8, |_, _| 2);
    gray8(dir.path(), "frame_01.png", 8, 8, |_, _| 1);
    gray8(dir.path(), "other.png", 8, 8, |_, _| 99);
    let seq = load_sequence(dir.path(), "frame_*.png").unwrap();
    let firsts: Vec<f64> = (0..3).map(|t| seq.frame(t)[0] * 255.0).collect();
    assert_eq!(firsts, vec![1.0, 2.0, 10.0]);
}

#[test]
fn rgb_and_sixteen_bit_conversion() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.png", "b.png"] {
        ImageBuffer::from_fn(8, 8, |_, _| Rgb([200u8, 100, 50])).save(dir.path().join(name)).unwrap();
    }
    let seq = load_sequence(dir.path(), "*.png").unwrap();
    let want = (LUMA_WEIGHTS[0] * 200.0 + LUMA_WEIGHTS[1] * 100.0 + LUMA_WEIGHTS[2] * 50.0) / 255.0;
    assert!((seq.frame(0)[0] - want).abs() < 1e-12);

    let dir = tempfile::tempdir().unwrap();
    for name in ["a.png", "b.png"] {
        ImageBuffer::from_fn(8, 8, |_, _| Luma([65535u16])).save(dir.path().join(name)).unwrap();
    }
    let seq = load_sequence(dir.path(), "*.png").unwrap();
    assert_eq!(seq.frame(1)[5], 1.0);
}

#[test]
fn flow_file_layout() {
    let mut vx = vec![0.0; 2 * 3 * 2];
    let mut vy = vx.clone();
    // (row 1, col 0, frame 1)
    vx[(3 + 1) * 2] = 3.5;
    vy[(3 + 1) * 2] = -0.25;
    let flow = FlowField::new(2, 3, 2, vx, vy).unwrap();
    let bytes = encode_flow(&flow);
    assert_eq!(&bytes[..4], b"TFL1");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
    assert_eq!(bytes.len(), 16 + 12 * 8);
    let rec = 16 + 8 * ((3 + 1) * 2);
    assert_eq!(f32::from_le_bytes(bytes[rec..rec + 4].try_into().unwrap()), 3.5);
    assert_eq!(f32::from_le_bytes(bytes[rec + 4..rec + 8].try_into().unwrap()), -0.25);
    assert_eq!(decode_flow(&bytes, Path::new("mem")).unwrap(), flow);
}

proptest! {
    #[test]
    fn grid_coordinates_are_centred(w in 1usize..300, h in 1usize..300) {
        let g = PixelGrid::with_default_focal(w, h).unwrap();
        let mx: f64 = g.xs().iter().sum::<f64>() / w as f64;
        let my: f64 = g.ys().iter().sum::<f64>() / h as f64;
        prop_assert!(mx.abs() < 1e-12 && my.abs() < 1e-12);
        if w % 2 == 1 {
            prop_assert_eq!(g.x(w / 2), 0.0);
        } else {
            prop_assert_eq!(g.x(w / 2), 0.5);
        }
    }
}
