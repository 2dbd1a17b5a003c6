//! Sequence loading, the binary flow format and PNG/JSON writers.
//!
//! Flow file layout (all little-endian):
//!
//! ```text
//! "TFL1" | u32 width | u32 height | u32 frames | frames*height*width * (f32 vx, f32 vy)
//! ```
//!
//! Records are frame-major, then row-major. Values are stored as `f32`, so a
//! round trip is bit-exact for fields whose components are representable in
//! single precision and rounds to nearest otherwise.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, RgbImage};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{FlowField, ImageSequence};

pub const FLOW_MAGIC: &[u8; 4] = b"TFL1";
const HEADER_LEN: usize = 16;

/// ITU-R BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Loads every file in `dir` whose name matches the glob `pattern`, in
/// lexicographic filename order, as a grayscale sequence in `[0, 1]`.
pub fn load_sequence(dir: &Path, pattern: &str) -> Result<ImageSequence> {
    let glob = glob::Pattern::new(pattern)
        .map_err(|e| Error::invalid("file pattern", format!("{pattern:?}: {e}")))?;
    let entries = fs::read_dir(dir).map_err(|e| Error::io(format!("reading {}", dir.display()), e))?;
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(format!("reading {}", dir.display()), e))?;
        let path = entry.path();
        let matches = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| glob.matches(n));
        if matches && path.is_file() {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    if files.len() < 2 {
        return Err(Error::NoFilesMatched {
            dir: dir.to_path_buf(),
            pattern: pattern.to_string(),
        });
    }

    let mut dims: Option<(usize, usize)> = None;
    let mut frames = Vec::with_capacity(files.len());
    for path in &files {
        let img = image::open(path).map_err(|e| Error::Undecodable {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        match dims {
            None => dims = Some((w, h)),
            Some((ew, eh)) if (ew, eh) != (w, h) => {
                return Err(Error::DimensionMismatch {
                    path: path.clone(),
                    expected_w: ew,
                    expected_h: eh,
                    found_w: w,
                    found_h: h,
                })
            }
            Some(_) => {}
        }
        frames.push(to_luma(&img));
    }
    let (w, h) = dims.expect("at least two files");
    ImageSequence::from_frames(w, h, frames)
}

fn to_luma(img: &DynamicImage) -> Vec<f64> {
    let [wr, wg, wb] = LUMA_WEIGHTS;
    match img {
        DynamicImage::ImageLuma8(g) => g.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(g) => g.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageLumaA8(g) => g.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA16(g) => g.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => img
            .to_rgb16()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0;
                ((wr * r as f64 + wg * g as f64 + wb * b as f64) / 65535.0).clamp(0.0, 1.0)
            })
            .collect(),
        _ => img
            .to_rgb8()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0;
                ((wr * r as f64 + wg * g as f64 + wb * b as f64) / 255.0).clamp(0.0, 1.0)
            })
            .collect(),
    }
}

/// Serializes `flow` into the binary flow format.
pub fn encode_flow(flow: &FlowField) -> Vec<u8> {
    let n = flow.vx().len();
    let mut buf = Vec::with_capacity(HEADER_LEN + n * 8);
    buf.extend_from_slice(FLOW_MAGIC);
    for d in [flow.width(), flow.height(), flow.frames()] {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for (x, y) in flow.vx().iter().zip(flow.vy()) {
        buf.extend_from_slice(&(*x as f32).to_le_bytes());
        buf.extend_from_slice(&(*y as f32).to_le_bytes());
    }
    buf
}

pub fn decode_flow(bytes: &[u8], path: &Path) -> Result<FlowField> {
    if bytes.len() < 4 || &bytes[..4] != FLOW_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (w, h, t) = (word(0), word(1), word(2));
    let n = w * h * t;
    let expected = HEADER_LEN + n * 8;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    let mut vx = Vec::with_capacity(n);
    let mut vy = Vec::with_capacity(n);
    for rec in bytes[HEADER_LEN..expected].chunks_exact(8) {
        vx.push(f32::from_le_bytes(rec[..4].try_into().unwrap()) as f64);
        vy.push(f32::from_le_bytes(rec[4..].try_into().unwrap()) as f64);
    }
    FlowField::new(w, h, t, vx, vy)
}

pub fn write_flow(flow: &FlowField, path: &Path) -> Result<()> {
    let bytes = encode_flow(flow);
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_flow(path: &Path) -> Result<FlowField> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_flow(&bytes, path)
}

pub fn write_rgb_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| Error::Undecodable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Writes a binary mask as an 8-bit PNG (0 or 255).
pub fn write_mask_png(mask: &[bool], width: usize, height: usize, path: &Path) -> Result<()> {
    let img = GrayImage::from_fn(width as u32, height as u32, |c, r| {
        image::Luma([if mask[r as usize * width + c as usize] { 255 } else { 0 }])
    });
    img.save(path).map_err(|e| Error::Undecodable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Writes one frame of an intensity sequence as an 8-bit PNG.
pub fn write_gray_png(frame: &[f64], width: usize, height: usize, path: &Path) -> Result<()> {
    let img = GrayImage::from_fn(width as u32, height as u32, |c, r| {
        let v = frame[r as usize * width + c as usize];
        image::Luma([(v.clamp(0.0, 1.0) * 255.0).round() as u8])
    });
    img.save(path).map_err(|e| Error::Undecodable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Serde(e.to_string()))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
}
