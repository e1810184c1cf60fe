//! Bar-grid geometry: how `m` features map onto a `W x H` canvas.
//!
//! Features fill a grid of `r` rows by `c = ceil(m / r)` columns, row-major.
//! Each feature owns a cell of `b = W / c` by `h = H / r` real-valued pixels;
//! its bar grows left-to-right from the cell's left edge, with width
//! proportional to the normalized value.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// An RGB color.
pub type Rgb = [u8; 3];

/// Canvas background. Bars are drawn against white.
pub const BACKGROUND: Rgb = [255, 255, 255];

/// Resolved geometry and palette for one feature count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    /// Canvas width in pixels.
    pub width: u32,
    /// Canvas height in pixels.
    pub height: u32,
    /// Effective row count. May be lower than requested: rows that would
    /// stay completely empty are dropped (see [`make_layout`]).
    pub rows: u32,
    /// Rows as requested by the caller.
    pub rows_requested: u32,
    /// Bars per row, `ceil(m / rows_requested)`.
    pub cols: u32,
    /// Maximum bar width in real pixels, `width / cols`.
    pub bar_width: f64,
    /// Bar height in real pixels, `height / rows`.
    pub bar_height: f64,
    /// Feature count.
    pub m: u32,
    /// One color per feature.
    pub palette: Vec<Rgb>,
    /// Background color.
    pub background: Rgb,
    /// Seed the palette was generated from.
    pub palette_seed: u64,
}

/// Where one feature's bar lives on the canvas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarPlacement {
    /// 0-based feature index.
    pub feature: usize,
    /// 0-based grid row.
    pub row: u32,
    /// 0-based grid column.
    pub col: u32,
    /// Left edge of the cell, real pixels.
    pub x_start: f64,
    /// Top edge of the cell, real pixels.
    pub y_start: f64,
    /// Bar width, `value * bar_width`, real pixels.
    pub width: f64,
    /// Bar height (= cell height), real pixels.
    pub height: f64,
}

/// Compute the layout for `m` features arranged in (up to) `r` rows.
///
/// `c = ceil(m / r)` columns are allocated; the effective row count is then
/// `ceil(m / c)`, which never exceeds `r` and leaves no row completely empty
/// (the column count is unchanged by this reduction). Bar height divides the
/// canvas among the effective rows.
///
/// The palette assigns each feature a hue evenly spaced around the HSV hue
/// circle at full saturation and value, rotated by a seeded offset; colors are
/// guaranteed distinct from each other and from the background.
pub fn make_layout(
    m: u32,
    r: u32,
    width: u32,
    height: u32,
    palette_seed: u64,
) -> Result<LayoutSpec> {
    if m == 0 {
        return Err(Error::Config("layout requires at least one feature".into()));
    }
    if r == 0 || r > m {
        return Err(Error::Config(format!(
            "row count {r} outside 1..={m} (feature count)"
        )));
    }
    let cols = m.div_ceil(r);
    let rows = m.div_ceil(cols);
    debug_assert_eq!(m.div_ceil(rows), cols);
    if width < cols {
        return Err(Error::Config(format!(
            "canvas width {width} cannot fit {cols} bar columns"
        )));
    }
    if height < rows {
        return Err(Error::Config(format!(
            "canvas height {height} cannot fit {rows} bar rows"
        )));
    }
    Ok(LayoutSpec {
        width,
        height,
        rows,
        rows_requested: r,
        cols,
        bar_width: f64::from(width) / f64::from(cols),
        bar_height: f64::from(height) / f64::from(rows),
        m,
        palette: make_palette(m, palette_seed),
        background: BACKGROUND,
        palette_seed,
    })
}

impl LayoutSpec {
    /// Grid cell of a 0-based feature index.
    pub fn cell(&self, feature: usize) -> (u32, u32) {
        let j = feature as u32;
        (j / self.cols, j % self.cols)
    }

    /// Placement of one feature's bar for a normalized value.
    pub fn placement(&self, feature: usize, value: f64) -> BarPlacement {
        let (row, col) = self.cell(feature);
        BarPlacement {
            feature,
            row,
            col,
            x_start: f64::from(col) * self.bar_width,
            y_start: f64::from(row) * self.bar_height,
            width: value.clamp(0.0, 1.0) * self.bar_width,
            height: self.bar_height,
        }
    }
}

/// Place every feature of one sample. Values are clamped to `[0, 1]`.
pub fn place_bars(sample: &[f64], layout: &LayoutSpec) -> Result<Vec<BarPlacement>> {
    if sample.len() != layout.m as usize {
        return Err(Error::Config(format!(
            "sample has {} values, layout expects {}",
            sample.len(),
            layout.m
        )));
    }
    Ok(sample
        .iter()
        .enumerate()
        .map(|(j, &v)| layout.placement(j, v))
        .collect())
}

/// Evenly spaced hues at full saturation/value, rotated by a seeded offset.
/// Collisions after 8-bit quantization (possible for very large `m`) are
/// resolved by stepping the value channel down.
fn make_palette(m: u32, palette_seed: u64) -> Vec<Rgb> {
    let offset: f64 = RngStream::from_root(palette_seed)
        .child("palette")
        .rng()
        .random();
    let mut used: HashSet<Rgb> = HashSet::with_capacity(m as usize + 1);
    used.insert(BACKGROUND);
    let mut palette = Vec::with_capacity(m as usize);
    for j in 0..m {
        let hue = (f64::from(j) / f64::from(m) + offset).fract();
        let mut value = 1.0;
        let mut color = hsv_to_rgb(hue, 1.0, value);
        while !used.insert(color) {
            value -= 1.0 / 255.0;
            assert!(value > 0.25, "palette exhausted at {m} colors");
            color = hsv_to_rgb(hue, 1.0, value);
        }
        palette.push(color);
    }
    palette
}

/// Standard HSV -> RGB with h in [0,1), s and v in [0,1].
fn hsv_to_rgb(h: f64, s: f64, v: f64) -> Rgb {
    let h6 = (h.fract() + 1.0).fract() * 6.0;
    let sector = h6.floor() as u32 % 6;
    let f = h6 - h6.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [
        (r * 255.0).round() as u8,
        (g * 255.0).round() as u8,
        (b * 255.0).round() as u8,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_features_single_row() {
        let l = make_layout(9, 1, 224, 224, 0).unwrap();
        assert_eq!(l.cols, 9);
        assert!((l.bar_width - 224.0 / 9.0).abs() < 1e-12);
        assert_eq!(l.bar_height, 224.0);
        assert_eq!(l.rows, 1);
    }

    #[test]
    fn forty_features_four_rows() {
        let l = make_layout(40, 4, 224, 224, 0).unwrap();
        assert_eq!(l.cols, 10);
        assert!((l.bar_width - 22.4).abs() < 1e-12);
        assert!((l.bar_height - 56.0).abs() < 1e-12);
    }

    #[test]
    fn satellite_single_row() {
        let l = make_layout(37, 1, 224, 224, 0).unwrap();
        assert_eq!(l.cols, 37);
    }

    #[test]
    fn empty_trailing_rows_are_dropped() {
        // 37 features at 16 requested rows fit in 13 rows of 3.
        let l = make_layout(37, 16, 224, 224, 0).unwrap();
        assert_eq!(l.cols, 3);
        assert_eq!(l.rows, 13);
        assert_eq!(l.rows_requested, 16);
        assert!((l.rows - 1) * l.cols < l.m);
        assert!(l.rows * l.cols >= l.m);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(make_layout(5, 6, 224, 224, 0).is_err());
        assert!(make_layout(0, 1, 224, 224, 0).is_err());
        assert!(make_layout(300, 1, 224, 224, 0).is_err()); // 300 cols > 224 px
        assert!(make_layout(8, 8, 224, 4, 0).is_err()); // 8 rows > 4 px tall
    }

    #[test]
    fn row_major_indexing() {
        // 10 features, 2 rows, 5 cols: 1-based feature 7 sits at row 2, col 2.
        let l = make_layout(10, 2, 224, 224, 0).unwrap();
        assert_eq!(l.cols, 5);
        let p = l.placement(6, 0.5);
        assert_eq!((p.row, p.col), (1, 1));
        assert!((p.x_start - l.bar_width).abs() < 1e-12);
        assert!((p.y_start - l.bar_height).abs() < 1e-12);
    }

    #[test]
    fn extreme_values_span_the_cell() {
        let l = make_layout(9, 1, 224, 224, 0).unwrap();
        assert_eq!(l.placement(3, 0.0).width, 0.0);
        assert!((l.placement(3, 1.0).width - l.bar_width).abs() < 1e-12);
    }

    #[test]
    fn palette_is_distinct_and_seeded() {
        let l = make_layout(64, 1, 224, 224, 7).unwrap();
        let colors: HashSet<Rgb> = l.palette.iter().copied().collect();
        assert_eq!(colors.len(), 64);
        assert!(!colors.contains(&BACKGROUND));

        let again = make_layout(64, 1, 224, 224, 7).unwrap();
        assert_eq!(l.palette, again.palette);
        let other = make_layout(64, 1, 224, 224, 8).unwrap();
        assert_ne!(l.palette, other.palette);
    }

    #[test]
    fn palette_stays_distinct_at_large_m() {
        let l = make_layout(4000, 1, 4000, 224, 3).unwrap();
        let colors: HashSet<Rgb> = l.palette.iter().copied().collect();
        assert_eq!(colors.len(), 4000);
    }

    #[test]
    fn hsv_corners() {
        assert_eq!(hsv_to_rgb(0.0, 1.0, 1.0), [255, 0, 0]);
        assert_eq!(hsv_to_rgb(1.0 / 3.0, 1.0, 1.0), [0, 255, 0]);
        assert_eq!(hsv_to_rgb(2.0 / 3.0, 1.0, 1.0), [0, 0, 255]);
        assert_eq!(hsv_to_rgb(0.5, 0.0, 1.0), [255, 255, 255]);
    }
}
