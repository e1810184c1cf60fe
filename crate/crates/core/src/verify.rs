//! Decoder oracle: invert a bar image back to approximate normalized feature
//! values. Used to check that rasterization round-trips and that augmentation
//! perturbs values only within bounds.

use rayon::prelude::*;
use serde::Serialize;

use crate::augment::{augment_image, AugmentConfig};
use crate::error::{Error, Result};
use crate::ingest::NormalizedTable;
use crate::layout::LayoutSpec;
use crate::raster::{rasterize, ImageCanvas};
use crate::rng::RngStream;

/// Channel threshold below which a pixel counts as background (0..255 units).
const FOREGROUND_THRESHOLD: f64 = 8.0;

/// Decoded per-feature estimates with per-feature row agreement.
#[derive(Debug, Clone)]
pub struct DecodedSample {
    /// Estimated normalized values, one per feature, in `[0, 1]`.
    pub values: Vec<f64>,
    /// Fraction of scanned pixel rows whose measured width lies within one
    /// pixel of the cell's median width.
    pub confidence: Vec<f64>,
}

/// Measure each cell's bar width and divide by the maximum bar width.
///
/// Every pixel row fully inside the cell is scanned; a pixel's foreground
/// coverage is its maximum channel distance from the background, credited
/// linearly against the feature color's distance and capped by the pixel's
/// geometric overlap with the cell (so a neighboring bar bleeding into a
/// shared boundary pixel cannot count for more than that sliver). The
/// per-cell estimate is the median across rows, which tolerates individual
/// rows displaced by elastic warping.
pub fn decode(img: &ImageCanvas, layout: &LayoutSpec) -> Result<DecodedSample> {
    if img.width != layout.width || img.height != layout.height {
        return Err(Error::Config(format!(
            "image is {}x{}, layout expects {}x{}",
            img.width, img.height, layout.width, layout.height
        )));
    }
    let m = layout.m as usize;
    let b = layout.bar_width;
    let h = layout.bar_height;
    let bg = layout.background;
    let eps = 1e-7;

    let mut values = Vec::with_capacity(m);
    let mut confidence = Vec::with_capacity(m);
    for j in 0..m {
        let (row, col) = layout.cell(j);
        let color = layout.palette[j];
        let full_dist = (0..3)
            .map(|ch| (f64::from(color[ch]) - f64::from(bg[ch])).abs())
            .fold(0.0f64, f64::max);
        debug_assert!(full_dist > FOREGROUND_THRESHOLD);

        let y_lo = f64::from(row) * h;
        let y_hi = y_lo + h;
        let x_lo = f64::from(col) * b;
        let x_hi = x_lo + b;

        // Pixel rows fully inside the cell.
        let iy0 = (y_lo - eps).ceil().max(0.0) as u32;
        let mut rows_px: Vec<u32> = (iy0..layout.height)
            .take_while(|&iy| f64::from(iy) + 1.0 <= y_hi + eps)
            .collect();
        if rows_px.is_empty() {
            // Degenerate sub-pixel-high cells: fall back to the center row.
            rows_px.push(
                ((y_lo + y_hi) * 0.5)
                    .floor()
                    .clamp(0.0, f64::from(layout.height - 1)) as u32,
            );
        }

        // Pixel columns overlapping the cell at all.
        let ix0 = x_lo.floor().max(0.0) as u32;
        let ix1 = (x_hi.ceil() as u32).min(layout.width);

        let mut widths: Vec<f64> = Vec::with_capacity(rows_px.len());
        for &iy in &rows_px {
            let mut width = 0.0f64;
            for ix in ix0..ix1 {
                let px = img.get(ix, iy);
                let d = (0..3)
                    .map(|ch| (f64::from(px[ch]) - f64::from(bg[ch])).abs())
                    .fold(0.0f64, f64::max);
                if d <= FOREGROUND_THRESHOLD {
                    continue;
                }
                let obs = (d / full_dist).min(1.0);
                let overlap = (x_hi.min(f64::from(ix) + 1.0) - x_lo.max(f64::from(ix))).max(0.0);
                width += obs.min(overlap);
            }
            widths.push(width);
        }

        let med = median(&mut widths.clone());
        let agree = widths.iter().filter(|w| (**w - med).abs() <= 1.0).count();
        values.push((med / b).clamp(0.0, 1.0));
        confidence.push(agree as f64 / widths.len() as f64);
    }
    Ok(DecodedSample { values, confidence })
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Decode deviations aggregated per feature, for clean and augmented images.
#[derive(Debug, Clone, Serialize)]
pub struct FeatureDeviation {
    pub feature: String,
    pub clean_mean: f64,
    pub clean_max: f64,
    pub aug_mean: f64,
    pub aug_max: f64,
}

/// Round-trip report over a whole table.
#[derive(Debug, Clone, Serialize)]
pub struct RoundtripReport {
    pub per_feature: Vec<FeatureDeviation>,
    pub clean_mean: f64,
    pub clean_max: f64,
    pub aug_mean: f64,
    pub aug_max: f64,
    pub n_clean: usize,
    pub n_aug: usize,
}

/// Rasterize, decode, and compare: every row once cleanly, plus `n_trials`
/// augmented draws cycling through the rows (trial `t` augments row
/// `t % n` with copy index `t / n`). Deterministic for a fixed seed.
pub fn roundtrip_report(
    table: &NormalizedTable,
    layout: &LayoutSpec,
    cfg: &AugmentConfig,
    n_trials: usize,
    seed: u64,
) -> Result<RoundtripReport> {
    if n_trials < 1 {
        return Err(Error::Config(
            "roundtrip_report requires n_trials >= 1".into(),
        ));
    }
    cfg.validate()?;
    let n = table.n_rows();
    let m = table.n_features();

    let clean: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let sample = table.row(i);
            let img = rasterize(&sample, layout)?;
            let decoded = decode(&img, layout)?;
            Ok(abs_dev(&decoded.values, &sample))
        })
        .collect::<Result<_>>()?;

    let root = RngStream::from_root(seed).child("augment");
    let augmented: Vec<Vec<f64>> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let i = t % n;
            let aug_idx = (t / n) as u64;
            let sample = table.row(i);
            let img = rasterize(&sample, layout)?;
            let stream = root.child_index(i as u64).child_index(aug_idx);
            let aug = augment_image(&img, cfg, &stream);
            let decoded = decode(&aug, layout)?;
            Ok(abs_dev(&decoded.values, &sample))
        })
        .collect::<Result<_>>()?;

    let mut per_feature = Vec::with_capacity(m);
    for j in 0..m {
        per_feature.push(FeatureDeviation {
            feature: table.feature_names[j].clone(),
            clean_mean: mean_of(&clean, j),
            clean_max: max_of(&clean, j),
            aug_mean: mean_of(&augmented, j),
            aug_max: max_of(&augmented, j),
        });
    }
    let all = |rows: &[Vec<f64>]| {
        let total: f64 = rows.iter().flat_map(|r| r.iter()).sum();
        let count = rows.len() * m;
        let max = rows
            .iter()
            .flat_map(|r| r.iter().copied())
            .fold(0.0f64, f64::max);
        (total / count as f64, max)
    };
    let (clean_mean, clean_max) = all(&clean);
    let (aug_mean, aug_max) = all(&augmented);
    Ok(RoundtripReport {
        per_feature,
        clean_mean,
        clean_max,
        aug_mean,
        aug_max,
        n_clean: n,
        n_aug: n_trials,
    })
}

fn abs_dev(decoded: &[f64], truth: &[f64]) -> Vec<f64> {
    decoded
        .iter()
        .zip(truth)
        .map(|(d, t)| (d - t).abs())
        .collect()
}

fn mean_of(rows: &[Vec<f64>], j: usize) -> f64 {
    rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64
}

fn max_of(rows: &[Vec<f64>], j: usize) -> f64 {
    rows.iter().map(|r| r[j]).fold(0.0, f64::max)
}
