//! Multi-channel float image planes and sub-pixel sampling.
//!
//! Pixel centers sit at integer coordinates: pixel `(col, row)` covers
//! `[col - 0.5, col + 0.5) x [row - 0.5, row + 0.5)`. Storage is `f32`, row
//! major, channels interleaved, row 0 at the top.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

/// Integer anchor of a bilinear sampling footprint (the top-left sample).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BilinearCell {
    pub x0: usize,
    pub y0: usize,
}

impl Plane {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Plane::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Plane {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} samples for a {width}x{height}x{channels} plane",
                data.len()
            )));
        }
        Ok(Plane {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    fn offset(&self, col: usize, row: usize) -> usize {
        (row * self.width + col) * self.channels
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize, ch: usize) -> f32 {
        self.data[self.offset(col, row) + ch]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, ch: usize, v: f32) {
        let o = self.offset(col, row) + ch;
        self.data[o] = v;
    }

    pub fn pixel(&self, col: usize, row: usize) -> &[f32] {
        let o = self.offset(col, row);
        &self.data[o..o + self.channels]
    }

    /// True when `(x, y)` falls on a pixel of this plane.
    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= -0.5 && y >= -0.5 && x < self.width as f64 - 0.5 && y < self.height as f64 - 0.5
    }

    /// Pixel nearest to `(x, y)`, clamped to the plane.
    #[inline]
    pub fn nearest_pixel(&self, x: f64, y: f64) -> (usize, usize) {
        let col = libm::floor(x + 0.5).clamp(0.0, (self.width - 1) as f64) as usize;
        let row = libm::floor(y + 0.5).clamp(0.0, (self.height - 1) as f64) as usize;
        (col, row)
    }

    #[inline]
    fn clamp_coords(&self, x: f64, y: f64) -> (f64, f64) {
        (
            x.clamp(0.0, (self.width - 1) as f64),
            y.clamp(0.0, (self.height - 1) as f64),
        )
    }

    /// The 2x2 footprint bilinear interpolation would use at `(x, y)`.
    #[inline]
    pub fn bilinear_cell(&self, x: f64, y: f64) -> BilinearCell {
        let (x, y) = self.clamp_coords(x, y);
        let x0 = (libm::floor(x) as usize).min(self.width.saturating_sub(2));
        let y0 = (libm::floor(y) as usize).min(self.height.saturating_sub(2));
        BilinearCell { x0, y0 }
    }

    /// Bilinear sample of channel `ch`; coordinates are clamped to the plane.
    #[inline]
    pub fn sample_bilinear(&self, x: f64, y: f64, ch: usize) -> f64 {
        let cell = self.bilinear_cell(x, y);
        self.sample_bilinear_in(cell, x, y, ch)
    }

    /// Bilinear sample evaluated with the weights of a fixed footprint.
    ///
    /// Outside the footprint this extrapolates the cell's bilinear patch, which
    /// keeps the sampled value a smooth function of `(x, y)` under small
    /// perturbations of a point whose footprint was chosen beforehand.
    #[inline]
    pub fn sample_bilinear_in(&self, cell: BilinearCell, x: f64, y: f64, ch: usize) -> f64 {
        let (x, y) = self.clamp_coords(x, y);
        let x1 = (cell.x0 + 1).min(self.width - 1);
        let y1 = (cell.y0 + 1).min(self.height - 1);
        let fx = x - cell.x0 as f64;
        let fy = y - cell.y0 as f64;
        let v00 = self.get(cell.x0, cell.y0, ch) as f64;
        let v10 = self.get(x1, cell.y0, ch) as f64;
        let v01 = self.get(cell.x0, y1, ch) as f64;
        let v11 = self.get(x1, y1, ch) as f64;
        let top = v00 + (v10 - v00) * fx;
        let bottom = v01 + (v11 - v01) * fx;
        top + (bottom - top) * fy
    }

    pub fn sample_bilinear_rgb(&self, x: f64, y: f64) -> [f64; 3] {
        let cell = self.bilinear_cell(x, y);
        self.sample_bilinear_rgb_in(cell, x, y)
    }

    pub fn sample_bilinear_rgb_in(&self, cell: BilinearCell, x: f64, y: f64) -> [f64; 3] {
        [
            self.sample_bilinear_in(cell, x, y, 0),
            self.sample_bilinear_in(cell, x, y, 1),
            self.sample_bilinear_in(cell, x, y, 2),
        ]
    }

    pub fn sample_nearest(&self, x: f64, y: f64, ch: usize) -> f64 {
        let (c, r) = self.nearest_pixel(x, y);
        self.get(c, r, ch) as f64
    }

    /// Per-channel mean over all pixels.
    pub fn channel_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0f64; self.channels];
        for px in self.data.chunks_exact(self.channels) {
            for (s, v) in sums.iter_mut().zip(px) {
                *s += *v as f64;
            }
        }
        let n = (self.width * self.height).max(1) as f64;
        sums.iter().map(|s| s / n).collect()
    }
}
