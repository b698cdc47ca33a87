//! Portable float map rasters: magic `Pf` (grayscale) or `PF` (color),
//! ASCII dimensions, scale header `-1.0` marking little-endian samples, then
//! raw f32 rows stored bottom-up.

use std::fs;
use std::path::Path;

use crate::raster::{DepthRaster, Grid, ImageRaster, PixelMask};

use super::IoError;

/// Decoded raster payload, rows rearranged top-down.
#[derive(Debug, Clone, PartialEq)]
pub struct PfmData {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    /// Row-major, top-down, channel-interleaved.
    pub samples: Vec<f32>,
}

fn encode(magic: &str, width: u32, height: u32, channels: u32, samples: &[f32]) -> Vec<u8> {
    assert_eq!(samples.len(), (width * height * channels) as usize);
    let mut out = format!("{magic}\n{width} {height}\n-1.0\n").into_bytes();
    let row_len = (width * channels) as usize;
    for y in (0..height as usize).rev() {
        for s in &samples[y * row_len..(y + 1) * row_len] {
            out.extend_from_slice(&s.to_le_bytes());
        }
    }
    out
}

fn decode(bytes: &[u8]) -> Result<PfmData, String> {
    let mut pos = 0usize;
    let mut token = || -> Result<String, String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".to_string());
        }
        String::from_utf8(bytes[start..pos].to_vec()).map_err(|_| "non-ASCII header".to_string())
    };
    let magic = token()?;
    let channels = match magic.as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(format!("unknown magic {other:?}, expected Pf or PF")),
    };
    let width: u32 = token()?.parse().map_err(|e| format!("bad width: {e}"))?;
    let height: u32 = token()?.parse().map_err(|e| format!("bad height: {e}"))?;
    if width == 0 || height == 0 {
        return Err(format!("empty raster {width}x{height}"));
    }
    let scale: f64 = token()?.parse().map_err(|e| format!("bad scale: {e}"))?;
    if scale >= 0.0 {
        return Err(format!(
            "scale {scale} marks big-endian data, which is not supported"
        ));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("missing whitespace after the scale header".to_string());
    }
    pos += 1;
    let data = &bytes[pos..];
    let expected = (width * height * channels) as usize * 4;
    if data.len() != expected {
        return Err(format!(
            "expected {expected} sample bytes, found {}",
            data.len()
        ));
    }
    let row_len = (width * channels) as usize;
    let mut samples = vec![0.0f32; (width * height * channels) as usize];
    for (file_row, chunk) in data.chunks_exact(row_len * 4).enumerate() {
        let y = height as usize - 1 - file_row;
        let row = &mut samples[y * row_len..(y + 1) * row_len];
        for (s, b) in row.iter_mut().zip(chunk.chunks_exact(4)) {
            *s = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        }
    }
    Ok(PfmData {
        width,
        height,
        channels,
        samples,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    fs::write(path, bytes).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn format_err(path: &Path, detail: impl ToString) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    }
}

pub fn read(path: &Path) -> Result<PfmData, IoError> {
    decode(&read_file(path)?).map_err(|d| format_err(path, d))
}

/// Writes a dense scalar raster; values pass through unchanged.
pub fn write_gray(path: &Path, grid: &Grid<f64>) -> Result<(), IoError> {
    let samples: Vec<f32> = grid.data().iter().map(|&v| v as f32).collect();
    write_file(
        path,
        &encode("Pf", grid.width(), grid.height(), 1, &samples),
    )
}

pub fn read_gray(path: &Path) -> Result<Grid<f64>, IoError> {
    let pfm = read(path)?;
    if pfm.channels != 1 {
        return Err(format_err(path, "expected a grayscale (Pf) raster"));
    }
    Grid::from_vec(
        pfm.width,
        pfm.height,
        pfm.samples.iter().map(|&s| s as f64).collect(),
    )
    .map_err(|e| format_err(path, e))
}

/// Writes a depth raster; invalid pixels become 0.
pub fn write_depth(path: &Path, depth: &DepthRaster) -> Result<(), IoError> {
    let samples: Vec<f32> = (0..depth.height())
        .flat_map(|y| (0..depth.width()).map(move |x| (x, y)))
        .map(|(x, y)| {
            if depth.is_valid(x, y) {
                depth.at(x, y) as f32
            } else {
                0.0
            }
        })
        .collect();
    write_file(
        path,
        &encode("Pf", depth.width(), depth.height(), 1, &samples),
    )
}

/// Reads a depth raster; non-positive or non-finite samples become invalid
/// pixels.
pub fn read_depth(path: &Path) -> Result<DepthRaster, IoError> {
    Ok(DepthRaster::from_values(read_gray(path)?))
}

/// Writes a binary mask as 1.0 / 0.0 samples.
pub fn write_mask(path: &Path, mask: &PixelMask) -> Result<(), IoError> {
    let samples: Vec<f32> = mask
        .data()
        .iter()
        .map(|&m| if m { 1.0 } else { 0.0 })
        .collect();
    write_file(
        path,
        &encode("Pf", mask.width(), mask.height(), 1, &samples),
    )
}

pub fn read_mask(path: &Path) -> Result<PixelMask, IoError> {
    let gray = read_gray(path)?;
    Grid::from_vec(
        gray.width(),
        gray.height(),
        gray.data().iter().map(|&v| v > 0.5).collect(),
    )
    .map_err(|e| format_err(path, e))
}

/// Writes a color image as a PF raster.
pub fn write_image(path: &Path, image: &ImageRaster) -> Result<(), IoError> {
    let mut samples = Vec::with_capacity(image.pixels().len() * 3);
    for p in image.pixels().data() {
        samples.extend(p.iter().map(|&c| c as f32));
    }
    write_file(
        path,
        &encode("PF", image.width(), image.height(), 3, &samples),
    )
}

/// Reads a color image; samples must lie in [0, 1].
pub fn read_image(path: &Path) -> Result<ImageRaster, IoError> {
    let pfm = read(path)?;
    if pfm.channels != 3 {
        return Err(format_err(path, "expected a color (PF) raster"));
    }
    let pixels: Vec<[f64; 3]> = pfm
        .samples
        .chunks_exact(3)
        .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
        .collect();
    ImageRaster::from_pixels_checked(pfm.width, pfm.height, pixels).map_err(|e| format_err(path, e))
}
