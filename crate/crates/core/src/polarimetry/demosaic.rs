//! Bilinear demosaicking of a 4x4 color-polarization mosaic.
//!
//! Supported layouts place the four polarizer angles in every 2x2 block at
//! fixed in-block offsets and give each 2x2 block a single color filter, the
//! blocks themselves forming a Bayer pattern. Decoding extracts one
//! half-resolution Bayer image per polarizer angle, interpolates color
//! bilinearly on it, then upsamples each angle back to full resolution with
//! bilinear interpolation anchored at that angle's true sample positions.

use alloc::format;
use alloc::vec::Vec;

use super::{PolarizationImageSet, DeriveStats};
use crate::error::{Error, Result};
use crate::image::Plane;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ColorFilter {
    R,
    G,
    B,
}

impl ColorFilter {
    pub fn channel(self) -> usize {
        match self {
            ColorFilter::R => 0,
            ColorFilter::G => 1,
            ColorFilter::B => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolarizerAngle {
    Deg0,
    Deg45,
    Deg90,
    Deg135,
}

impl PolarizerAngle {
    pub fn index(self) -> usize {
        match self {
            PolarizerAngle::Deg0 => 0,
            PolarizerAngle::Deg45 => 1,
            PolarizerAngle::Deg90 => 2,
            PolarizerAngle::Deg135 => 3,
        }
    }

    pub fn degrees(self) -> u32 {
        [0, 45, 90, 135][self.index()]
    }

    pub fn from_degrees(d: u32) -> Option<Self> {
        match d {
            0 => Some(PolarizerAngle::Deg0),
            45 => Some(PolarizerAngle::Deg45),
            90 => Some(PolarizerAngle::Deg90),
            135 => Some(PolarizerAngle::Deg135),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatternCell {
    pub row: usize,
    pub col: usize,
    pub color: ColorFilter,
    pub angle: PolarizerAngle,
}

/// 4x4 table mapping mosaic cell to (color filter, polarizer angle).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MosaicPattern {
    cells: [[(ColorFilter, PolarizerAngle); 4]; 4],
}

/// Structure recovered from a supported [`MosaicPattern`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    /// In-block `(row, col)` offset of each polarizer angle, indexed by [`PolarizerAngle::index`].
    pub angle_offsets: [(usize, usize); 4],
    /// Color of each 2x2 block within the 4x4 tile.
    pub block_colors: [[ColorFilter; 2]; 2],
}

impl MosaicPattern {
    pub fn from_cells(cells: &[PatternCell]) -> Result<Self> {
        if cells.len() != 16 {
            return Err(Error::UnknownPattern(format!(
                "expected 16 cells, got {}",
                cells.len()
            )));
        }
        let mut table = [[None; 4]; 4];
        for c in cells {
            if c.row >= 4 || c.col >= 4 {
                return Err(Error::UnknownPattern(format!(
                    "cell ({}, {}) outside the 4x4 tile",
                    c.row, c.col
                )));
            }
            if table[c.row][c.col].replace((c.color, c.angle)).is_some() {
                return Err(Error::UnknownPattern(format!(
                    "cell ({}, {}) given twice",
                    c.row, c.col
                )));
            }
        }
        let mut out = [[(ColorFilter::G, PolarizerAngle::Deg0); 4]; 4];
        for (r, row) in table.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                out[r][c] = v.expect("16 distinct in-range cells cover the tile");
            }
        }
        let p = MosaicPattern { cells: out };
        p.layout()?;
        Ok(p)
    }

    /// Quad-Bayer polarization layout of IMX250MYR-type sensors:
    /// `[90, 45; 135, 0]` polarizers inside each 2x2 block, blocks in RGGB order.
    pub fn imx250myr() -> Self {
        let angles = [
            [PolarizerAngle::Deg90, PolarizerAngle::Deg45],
            [PolarizerAngle::Deg135, PolarizerAngle::Deg0],
        ];
        let colors = [[ColorFilter::R, ColorFilter::G], [ColorFilter::G, ColorFilter::B]];
        let mut cells = [[(ColorFilter::G, PolarizerAngle::Deg0); 4]; 4];
        for (r, row) in cells.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = (colors[r / 2][c / 2], angles[r % 2][c % 2]);
            }
        }
        MosaicPattern { cells }
    }

    pub fn cell(&self, row: usize, col: usize) -> (ColorFilter, PolarizerAngle) {
        self.cells[row % 4][col % 4]
    }

    pub fn cells(&self) -> Vec<PatternCell> {
        let mut v = Vec::with_capacity(16);
        for row in 0..4 {
            for col in 0..4 {
                let (color, angle) = self.cells[row][col];
                v.push(PatternCell { row, col, color, angle });
            }
        }
        v
    }

    pub fn layout(&self) -> Result<BlockLayout> {
        let mut offsets: [Option<(usize, usize)>; 4] = [None; 4];
        let mut block_colors = [[ColorFilter::G; 2]; 2];
        for by in 0..2 {
            for bx in 0..2 {
                let color = self.cells[2 * by][2 * bx].0;
                block_colors[by][bx] = color;
                let mut seen = [false; 4];
                for oy in 0..2 {
                    for ox in 0..2 {
                        let (c, a) = self.cells[2 * by + oy][2 * bx + ox];
                        if c != color {
                            return Err(Error::UnknownPattern(format!(
                                "2x2 block ({by}, {bx}) mixes color filters"
                            )));
                        }
                        let i = a.index();
                        if seen[i] {
                            return Err(Error::UnknownPattern(format!(
                                "2x2 block ({by}, {bx}) repeats the {} degree polarizer",
                                a.degrees()
                            )));
                        }
                        seen[i] = true;
                        match offsets[i] {
                            None => offsets[i] = Some((oy, ox)),
                            Some(o) if o == (oy, ox) => {}
                            Some(_) => {
                                return Err(Error::UnknownPattern(format!(
                                    "{} degree polarizer moves between blocks",
                                    a.degrees()
                                )))
                            }
                        }
                    }
                }
            }
        }
        let greens = block_colors
            .iter()
            .flatten()
            .filter(|c| **c == ColorFilter::G)
            .count();
        let diag_green = block_colors[0][0] == block_colors[1][1]
            || block_colors[0][1] == block_colors[1][0];
        let has_r = block_colors.iter().flatten().any(|c| *c == ColorFilter::R);
        let has_b = block_colors.iter().flatten().any(|c| *c == ColorFilter::B);
        if greens != 2 || !diag_green || !has_r || !has_b {
            return Err(Error::UnknownPattern(
                "2x2 blocks do not form a Bayer arrangement".into(),
            ));
        }
        Ok(BlockLayout {
            angle_offsets: offsets.map(|o| o.expect("every block holds all four angles")),
            block_colors,
        })
    }
}

/// Decodes a single-channel raw mosaic into a [`PolarizationImageSet`].
pub fn demosaic(raw: &Plane, pattern: &MosaicPattern) -> Result<(PolarizationImageSet, DeriveStats)> {
    let (w, h) = raw.dims();
    if raw.channels() != 1 {
        return Err(Error::InvalidInput(format!(
            "raw mosaic must have one channel, got {}",
            raw.channels()
        )));
    }
    if w == 0 || h == 0 || w % 4 != 0 || h % 4 != 0 {
        return Err(Error::Dimension {
            width: w,
            height: h,
            multiple: 4,
        });
    }
    let layout = pattern.layout()?;
    let (hw, hh) = (w / 2, h / 2);
    let directions = [0usize, 1, 2, 3].map(|a| {
        let (oy, ox) = layout.angle_offsets[a];
        let mut bayer = Plane::new(hw, hh, 1);
        for by in 0..hh {
            for bx in 0..hw {
                bayer.set(bx, by, 0, raw.get(2 * bx + ox, 2 * by + oy, 0));
            }
        }
        let color = interpolate_bayer(&bayer, &layout.block_colors);
        upsample(&color, oy, ox, w, h)
    });
    PolarizationImageSet::from_directions(directions)
}

/// Bilinear Bayer interpolation: each missing color is the tent-weighted mean of
/// same-color samples in the 3x3 neighborhood (weights 4/2/1 for center/edge/corner).
fn interpolate_bayer(bayer: &Plane, colors: &[[ColorFilter; 2]; 2]) -> Plane {
    let (w, h) = bayer.dims();
    let mut out = Plane::new(w, h, 3);
    for y in 0..h {
        for x in 0..w {
            let mut sum = [0.0f64; 3];
            let mut wsum = [0.0f64; 3];
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (sx, sy) = (x as i64 + dx, y as i64 + dy);
                    if sx < 0 || sy < 0 || sx >= w as i64 || sy >= h as i64 {
                        continue;
                    }
                    let ch = colors[(sy % 2) as usize][(sx % 2) as usize].channel();
                    let wt = ((2 - dx.abs()) * (2 - dy.abs())) as f64;
                    sum[ch] += wt * bayer.get(sx as usize, sy as usize, 0) as f64;
                    wsum[ch] += wt;
                }
            }
            let own = colors[y % 2][x % 2].channel();
            for ch in 0..3 {
                let v = if ch == own {
                    bayer.get(x, y, 0) as f64
                } else if wsum[ch] > 0.0 {
                    sum[ch] / wsum[ch]
                } else {
                    0.0
                };
                out.set(x, y, ch, v as f32);
            }
        }
    }
    out
}

/// Upsamples a half-resolution plane whose sample `(bx, by)` sits at full-resolution
/// pixel `(2 bx + ox, 2 by + oy)`.
fn upsample(half: &Plane, oy: usize, ox: usize, w: usize, h: usize) -> Plane {
    let mut out = Plane::new(w, h, half.channels());
    for y in 0..h {
        for x in 0..w {
            let hx = (x as f64 - ox as f64) / 2.0;
            let hy = (y as f64 - oy as f64) / 2.0;
            for ch in 0..half.channels() {
                out.set(x, y, ch, half.sample_bilinear(hx, hy, ch) as f32);
            }
        }
    }
    out
}
