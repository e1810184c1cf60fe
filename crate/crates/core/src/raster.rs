//! Rasterization of bar placements into 8-bit RGB canvases, plus
//! byte-deterministic PNG I/O.
//!
//! Rectangles are composited by exact pixel-coverage: a pixel only partially
//! overlapped by a bar blends the bar color with whatever else covers it
//! (background, or the neighboring bar at a shared cell boundary) in
//! proportion to the overlapped area. This keeps sub-pixel bar widths
//! measurable instead of rounding them away.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use crate::error::{Error, Result};
use crate::layout::{BarPlacement, LayoutSpec, Rgb};

/// Fixed-size 8-bit RGB pixel buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageCanvas {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB triples, length `3 * width * height`.
    pub pixels: Vec<u8>,
}

impl ImageCanvas {
    /// Canvas filled with a solid color.
    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        let mut pixels = Vec::with_capacity(3 * width as usize * height as usize);
        for _ in 0..(width as usize * height as usize) {
            pixels.extend_from_slice(&color);
        }
        ImageCanvas {
            width,
            height,
            pixels,
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, color: Rgb) {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        self.pixels[i..i + 3].copy_from_slice(&color);
    }
}

/// Overlap of the unit pixel `[i, i+1)` with the real interval `[lo, hi)`.
#[inline]
fn coverage(i: u32, lo: f64, hi: f64) -> f64 {
    let a = f64::from(i);
    (hi.min(a + 1.0) - lo.max(a)).max(0.0)
}

/// Render one sample's bars onto a fresh background canvas.
///
/// Placements are composited in feature order regardless of input order, and
/// each pixel's final color is `sum(cov_j * color_j) + (1 - sum(cov_j)) * bg`
/// with `cov_j` the exact fraction of the pixel covered by bar `j`. Bars of
/// distinct features never overlap, so the coverage sum never exceeds one.
pub fn rasterize_placements(placements: &[BarPlacement], layout: &LayoutSpec) -> ImageCanvas {
    let (w, h) = (layout.width, layout.height);
    let bg = [
        f64::from(layout.background[0]),
        f64::from(layout.background[1]),
        f64::from(layout.background[2]),
    ];
    // f64 accumulation keeps the 8-bit rounding exact for full coverage.
    let mut acc = vec![0.0f64; 3 * w as usize * h as usize];
    let mut cov_total = vec![0.0f64; w as usize * h as usize];

    let mut ordered: Vec<&BarPlacement> = placements.iter().collect();
    ordered.sort_by_key(|p| p.feature);

    for p in ordered {
        if p.width <= 0.0 {
            continue;
        }
        let color = layout.palette[p.feature];
        let (x_lo, x_hi) = (p.x_start, p.x_start + p.width);
        let (y_lo, y_hi) = (p.y_start, p.y_start + p.height);
        let ix0 = x_lo.floor().max(0.0) as u32;
        let ix1 = (x_hi.ceil() as u32).min(w);
        let iy0 = y_lo.floor().max(0.0) as u32;
        let iy1 = (y_hi.ceil() as u32).min(h);
        for iy in iy0..iy1 {
            let cy = coverage(iy, y_lo, y_hi);
            if cy <= 0.0 {
                continue;
            }
            for ix in ix0..ix1 {
                let c = cy * coverage(ix, x_lo, x_hi);
                if c <= 0.0 {
                    continue;
                }
                let pi = iy as usize * w as usize + ix as usize;
                cov_total[pi] += c;
                for ch in 0..3 {
                    acc[3 * pi + ch] += c * f64::from(color[ch]);
                }
            }
        }
    }

    let mut canvas = ImageCanvas::filled(w, h, layout.background);
    for pi in 0..cov_total.len() {
        let c = cov_total[pi];
        if c <= 0.0 {
            continue;
        }
        for ch in 0..3 {
            let v = acc[3 * pi + ch] + (1.0 - c) * bg[ch];
            canvas.pixels[3 * pi + ch] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    canvas
}

/// Rasterize one normalized sample.
pub fn rasterize(sample: &[f64], layout: &LayoutSpec) -> Result<ImageCanvas> {
    let placements = crate::layout::place_bars(sample, layout)?;
    Ok(rasterize_placements(&placements, layout))
}

/// Encode to PNG bytes with fixed settings for byte determinism: 8-bit RGB
/// without alpha, fast compression, `Sub` row filter, no ancillary chunks
/// (no timestamps).
pub fn encode_png_bytes(canvas: &ImageCanvas) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    let mut encoder = png::Encoder::new(&mut bytes, canvas.width, canvas.height);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    encoder.set_compression(png::Compression::Fast);
    encoder.set_filter(png::Filter::Sub);
    let codec = |e: png::EncodingError| Error::Data(format!("png encode: {e}"));
    let mut writer = encoder.write_header().map_err(codec)?;
    writer.write_image_data(&canvas.pixels).map_err(codec)?;
    writer.finish().map_err(codec)?;
    Ok(bytes)
}

/// Write a PNG file (see [`encode_png_bytes`] for the fixed encoder settings).
pub fn write_png(canvas: &ImageCanvas, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let bytes = encode_png_bytes(canvas)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Read back an 8-bit RGB PNG written by [`write_png`].
pub fn read_png(path: &Path) -> Result<ImageCanvas> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Data(format!(
            "{}: expected 8-bit RGB, found {:?}/{:?}",
            path.display(),
            info.color_type,
            info.bit_depth
        )));
    }
    buf.truncate(info.buffer_size());
    Ok(ImageCanvas {
        width: info.width,
        height: info.height,
        pixels: buf,
    })
}
