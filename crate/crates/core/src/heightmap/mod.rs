//! Grid containers and the image operations used by grasp search.
//!
//! All grids are row-major with `(x, y)` = `(column, row)`. Pixel `(x, y)`
//! covers `[x·res, (x+1)·res) × [y·res, (y+1)·res)` in millimetres, so its
//! centre sits at `((x + 0.5)·res, (y + 0.5)·res)`.

mod capture;
mod filter;
mod format;
mod rotate;

pub use capture::{capture, CaptureConfig};
pub use filter::{maximum_filter, sliding_max};
pub use rotate::{cached_indices, gather, rotate_grid, rotate_heightmap, RotationFrame};

use crate::{Error, Result};

/// Heightmap resolution used throughout, in mm per pixel.
pub const DEFAULT_RESOLUTION_MM: f64 = 5.0;

/// Colour of the empty belt, both in the working area and the drop zone.
pub const BELT_GRAY: [u8; 3] = [110, 110, 110];

/// Top-down heights in mm above the belt.
#[derive(Debug, Clone, PartialEq)]
pub struct Heightmap {
    width: usize,
    height: usize,
    resolution: f64,
    data: Vec<f64>,
}

impl Heightmap {
    /// A flat map at belt level.
    pub fn zeros(width: usize, height: usize, resolution: f64) -> Self {
        Self::filled(width, height, resolution, 0.0)
    }

    pub fn filled(width: usize, height: usize, resolution: f64, value: f64) -> Self {
        assert!(resolution > 0.0, "resolution must be positive");
        assert!(value >= 0.0, "heights are non-negative");
        Heightmap {
            width,
            height,
            resolution,
            data: vec![value; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, resolution: f64, data: Vec<f64>) -> Result<Self> {
        if !(resolution > 0.0) {
            return Err(Error::Format(format!("resolution must be positive, got {resolution}")));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Format(format!("invalid height {bad}")));
        }
        Ok(Heightmap {
            width,
            height,
            resolution,
            data,
        })
    }

    /// For grids derived from an already valid heightmap.
    pub(crate) fn from_valid(width: usize, height: usize, resolution: f64, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Heightmap { width, height, resolution, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Reads with belt level outside the map.
    #[inline]
    pub fn get_or_zero(&self, x: isize, y: isize) -> f64 {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            0.0
        } else {
            self.data[y as usize * self.width + x as usize]
        }
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        debug_assert!(v >= 0.0);
        self.data[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn max_height(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Pixel centre in mm.
    pub fn px_to_mm(&self, p: f64) -> f64 {
        (p + 0.5) * self.resolution
    }

    pub fn mm_to_px(&self, m: f64) -> f64 {
        m / self.resolution - 0.5
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgbMap {
    width: usize,
    height: usize,
    data: Vec<[u8; 3]>,
}

impl RgbMap {
    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        RgbMap {
            width,
            height,
            data: vec![color; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<[u8; 3]>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: data.len(),
            });
        }
        Ok(RgbMap {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[[u8; 3]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: [u8; 3]) {
        self.data[y * self.width + x] = c;
    }
}

/// `true` marks cells hidden from the camera. The companion heightmap
/// stores the maximum height the hidden volume could have there.
#[derive(Debug, Clone, PartialEq)]
pub struct UnknownMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl UnknownMask {
    pub fn known(width: usize, height: usize) -> Self {
        UnknownMask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: data.len(),
            });
        }
        Ok(UnknownMask {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }
}
