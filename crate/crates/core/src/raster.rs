//! Dense per-pixel containers: scalar grids, depth rasters, RGB rasters.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("raster dimensions must be non-zero, got {width}x{height}")]
    EmptyRaster { width: u32, height: u32 },
    #[error("raster data length {len} does not match {width}x{height}")]
    LengthMismatch { len: usize, width: u32, height: u32 },
    #[error("{what} contains a non-finite value at pixel ({u}, {v})")]
    NonFinite { what: &'static str, u: u32, v: u32 },
    #[error("image intensity {value} at pixel ({u}, {v}) is outside [0, 1]")]
    IntensityRange { value: f64, u: u32, v: u32 },
}

/// Row-major fixed-size grid; index `(x, y)` maps to `y * width + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: u32,
    height: u32,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn new_fill(width: u32, height: u32, fill: T) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyRaster { width, height });
        }
        Ok(Grid {
            width,
            height,
            data: vec![fill; (width as usize) * (height as usize)],
        })
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<T>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyRaster { width, height });
        }
        if data.len() != (width as usize) * (height as usize) {
            return Err(RasterError::LengthMismatch {
                len: data.len(),
                width,
                height,
            });
        }
        Ok(Grid {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> T,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyRaster { width, height });
        }
        let mut data = Vec::with_capacity((width as usize) * (height as usize));
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Grid {
            width,
            height,
            data,
        })
    }
}

impl<T> Grid<T> {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn idx(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height, "({x},{y}) out of bounds");
        (y as usize) * (self.width as usize) + (x as usize)
    }

    pub fn get(&self, x: u32, y: u32) -> &T {
        &self.data[self.idx(x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, value: T) {
        let i = self.idx(x, y);
        self.data[i] = value;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

impl<T: Copy> Grid<T> {
    pub fn at(&self, x: u32, y: u32) -> T {
        self.data[self.idx(x, y)]
    }
}

/// Per-pixel metric depth with an explicit validity flag. Valid entries are
/// finite and strictly positive; invalid entries are stored as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthRaster {
    values: Grid<f64>,
    valid: Grid<bool>,
}

impl DepthRaster {
    /// Builds from raw values, marking entries valid where finite and > 0.
    pub fn from_values(values: Grid<f64>) -> Self {
        let valid = Grid::from_fn(values.width(), values.height(), |x, y| {
            let v = values.at(x, y);
            v.is_finite() && v > 0.0
        })
        .expect("values grid is non-empty");
        DepthRaster { values, valid }
    }

    pub fn new_invalid(width: u32, height: u32) -> Result<Self, RasterError> {
        Ok(DepthRaster {
            values: Grid::new_fill(width, height, 0.0)?,
            valid: Grid::new_fill(width, height, false)?,
        })
    }

    pub fn constant(width: u32, height: u32, depth: f64) -> Result<Self, RasterError> {
        assert!(
            depth.is_finite() && depth > 0.0,
            "constant depth must be positive"
        );
        Ok(DepthRaster {
            values: Grid::new_fill(width, height, depth)?,
            valid: Grid::new_fill(width, height, true)?,
        })
    }

    pub fn width(&self) -> u32 {
        self.values.width()
    }

    pub fn height(&self) -> u32 {
        self.values.height()
    }

    pub fn at(&self, x: u32, y: u32) -> f64 {
        self.values.at(x, y)
    }

    pub fn is_valid(&self, x: u32, y: u32) -> bool {
        self.valid.at(x, y)
    }

    /// Sets a valid depth; panics on non-positive or non-finite input.
    pub fn set(&mut self, x: u32, y: u32, depth: f64) {
        assert!(
            depth.is_finite() && depth > 0.0,
            "depth must be positive, got {depth}"
        );
        self.values.set(x, y, depth);
        self.valid.set(x, y, true);
    }

    pub fn clear(&mut self, x: u32, y: u32) {
        self.values.set(x, y, 0.0);
        self.valid.set(x, y, false);
    }

    pub fn values(&self) -> &Grid<f64> {
        &self.values
    }

    pub fn valid_count(&self) -> usize {
        self.valid.data().iter().filter(|v| **v).count()
    }

    /// Bilinear resize with pixel-center alignment; used to bring coarse
    /// decoder scales up to full resolution. Validity is ignored: callers
    /// resize dense rasters only.
    pub fn resize_bilinear(&self, width: u32, height: u32) -> Result<DepthRaster, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyRaster { width, height });
        }
        let sx = self.width() as f64 / width as f64;
        let sy = self.height() as f64 / height as f64;
        let values = Grid::from_fn(width, height, |x, y| {
            let u = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width() - 1) as f64);
            let v = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height() - 1) as f64);
            let (x0, y0) = (u.floor() as u32, v.floor() as u32);
            let (x1, y1) = (
                (x0 + 1).min(self.width() - 1),
                (y0 + 1).min(self.height() - 1),
            );
            let (fu, fv) = (u - x0 as f64, v - y0 as f64);
            self.at(x0, y0) * (1.0 - fu) * (1.0 - fv)
                + self.at(x1, y0) * fu * (1.0 - fv)
                + self.at(x0, y1) * (1.0 - fu) * fv
                + self.at(x1, y1) * fu * fv
        })?;
        Ok(DepthRaster::from_values(values))
    }
}

/// Three-channel image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRaster {
    pixels: Grid<[f64; 3]>,
}

impl ImageRaster {
    pub fn new_fill(width: u32, height: u32, rgb: [f64; 3]) -> Result<Self, RasterError> {
        Ok(ImageRaster {
            pixels: Grid::new_fill(width, height, rgb)?,
        })
    }

    pub fn from_fn(
        width: u32,
        height: u32,
        f: impl FnMut(u32, u32) -> [f64; 3],
    ) -> Result<Self, RasterError> {
        Ok(ImageRaster {
            pixels: Grid::from_fn(width, height, f)?,
        })
    }

    /// Builds from raw pixels, rejecting non-finite or out-of-range values.
    pub fn from_pixels_checked(
        width: u32,
        height: u32,
        pixels: Vec<[f64; 3]>,
    ) -> Result<Self, RasterError> {
        let grid = Grid::from_vec(width, height, pixels)?;
        for y in 0..height {
            for x in 0..width {
                for c in grid.at(x, y) {
                    if !c.is_finite() {
                        return Err(RasterError::NonFinite {
                            what: "image",
                            u: x,
                            v: y,
                        });
                    }
                    if !(0.0..=1.0).contains(&c) {
                        return Err(RasterError::IntensityRange {
                            value: c,
                            u: x,
                            v: y,
                        });
                    }
                }
            }
        }
        Ok(ImageRaster { pixels: grid })
    }

    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }

    pub fn at(&self, x: u32, y: u32) -> [f64; 3] {
        self.pixels.at(x, y)
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [f64; 3]) {
        self.pixels.set(x, y, rgb);
    }

    pub fn pixels(&self) -> &Grid<[f64; 3]> {
        &self.pixels
    }

    /// Bilinear sample at a continuous coordinate. The caller must keep
    /// `(u, v)` within `[0, width-1] x [0, height-1]`; corner indices are
    /// clamped so exact edge coordinates are safe.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> [f64; 3] {
        debug_assert!(
            u >= 0.0 && u <= (self.width() - 1) as f64,
            "u={u} out of sample range"
        );
        debug_assert!(
            v >= 0.0 && v <= (self.height() - 1) as f64,
            "v={v} out of sample range"
        );
        let (x0, y0) = (u.floor() as u32, v.floor() as u32);
        let (x1, y1) = (
            (x0 + 1).min(self.width() - 1),
            (y0 + 1).min(self.height() - 1),
        );
        let (fu, fv) = (u - x0 as f64, v - y0 as f64);
        let (p00, p10) = (self.at(x0, y0), self.at(x1, y0));
        let (p01, p11) = (self.at(x0, y1), self.at(x1, y1));
        let mut out = [0.0; 3];
        for c in 0..3 {
            out[c] = p00[c] * (1.0 - fu) * (1.0 - fv)
                + p10[c] * fu * (1.0 - fv)
                + p01[c] * (1.0 - fu) * fv
                + p11[c] * fu * fv;
        }
        out
    }
}

/// Per-pixel boolean mask.
pub type PixelMask = Grid<bool>;
