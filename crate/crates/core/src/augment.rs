//! Image augmentation: elastic distortion followed by randomized
//! morphological dilation/erosion.
//!
//! The distortion warps the canvas with a Gaussian-smoothed random
//! displacement field; the morphology step then perturbs bar boundaries with
//! randomly sized rectangular structuring elements. Dilation takes the
//! channel-wise max over the neighborhood, which on a white background
//! expands bright regions (bars shrink); erosion takes the min and expands
//! dark regions (bars grow).
//!
//! All randomness is drawn from [`RngStream`] derivations, so outputs depend
//! only on `(image, config, seed path)` and never on thread schedule.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::ImageCanvas;
use crate::rng::RngStream;

/// Augmentation parameters. Defaults: `alpha = 50`, `sigma = 4`,
/// `p_dilate = p_erode = 0.7`, structuring elements up to 2 x 5, `k = 4`
/// copies per training image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Displacement intensity in pixels.
    pub alpha: f64,
    /// Std-dev of the Gaussian that smooths the displacement field, pixels.
    pub sigma: f64,
    /// Probability of the dilation branch.
    pub p_dilate: f64,
    /// Probability of the erosion branch.
    pub p_erode: f64,
    /// Max (height, width) of the dilation structuring element.
    pub se_dilate_max: (u32, u32),
    /// Max (height, width) of the erosion structuring element.
    pub se_erode_max: (u32, u32),
    /// Augmented copies per training image.
    pub k: u32,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            alpha: 50.0,
            sigma: 4.0,
            p_dilate: 0.7,
            p_erode: 0.7,
            se_dilate_max: (2, 5),
            se_erode_max: (2, 5),
            k: 4,
        }
    }
}

impl AugmentConfig {
    /// Identity configuration: no distortion, no morphology.
    pub fn identity() -> Self {
        AugmentConfig {
            alpha: 0.0,
            p_dilate: 0.0,
            p_erode: 0.0,
            ..AugmentConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(Error::Config("alpha must be finite and >= 0".into()));
        }
        if self.sigma <= 0.0 || !self.sigma.is_finite() {
            return Err(Error::Config("sigma must be finite and > 0".into()));
        }
        for (name, p) in [("p_dilate", self.p_dilate), ("p_erode", self.p_erode)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        for (name, (h, w)) in [
            ("se_dilate_max", self.se_dilate_max),
            ("se_erode_max", self.se_erode_max),
        ] {
            if h < 1 || w < 1 {
                return Err(Error::Config(format!("{name} dims must be >= 1")));
            }
        }
        Ok(())
    }
}

/// Reflect a continuous coordinate into `[0, n-1]` (mirror at the borders).
#[inline]
fn reflect(t: f64, n: usize) -> f64 {
    let n1 = (n - 1) as f64;
    if n == 1 {
        return 0.0;
    }
    let period = 2.0 * n1;
    let mut t = (t % period).abs();
    if t > n1 {
        t = period - t;
    }
    t
}

/// Truncated, renormalized Gaussian kernel with radius `ceil(3 * sigma)`.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        kernel.push((-((i * i) as f64) / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= sum;
    }
    kernel
}

/// Separable Gaussian smoothing with reflected borders. Interior pixels skip
/// the reflection arithmetic.
fn smooth(field: &mut [f64], width: usize, height: usize, kernel: &[f64]) {
    let radius = kernel.len() / 2;
    let mut tmp = vec![0.0f64; field.len()];
    // Horizontal pass.
    for y in 0..height {
        let row = &field[y * width..(y + 1) * width];
        let out = &mut tmp[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            if x >= radius && x + radius < width {
                for (k, w) in kernel.iter().enumerate() {
                    acc += w * row[x + k - radius];
                }
            } else {
                for (k, w) in kernel.iter().enumerate() {
                    let xi = reflect_index(x as i64 + k as i64 - radius as i64, width);
                    acc += w * row[xi];
                }
            }
            out[x] = acc;
        }
    }
    // Vertical pass.
    for y in 0..height {
        let interior = y >= radius && y + radius < height;
        for x in 0..width {
            let mut acc = 0.0;
            if interior {
                for (k, w) in kernel.iter().enumerate() {
                    acc += w * tmp[(y + k - radius) * width + x];
                }
            } else {
                for (k, w) in kernel.iter().enumerate() {
                    let yi = reflect_index(y as i64 + k as i64 - radius as i64, height);
                    acc += w * tmp[yi * width + x];
                }
            }
            field[y * width + x] = acc;
        }
    }
}

/// Reflect an integer index into `[0, n)` (mirror at the borders).
#[inline]
fn reflect_index(i: i64, n: usize) -> usize {
    let n = n as i64;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut i = (i % period).abs();
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// Warp the canvas with a Gaussian-smoothed uniform displacement field.
///
/// Each axis of the field starts as i.i.d. noise in `[-1, 1]`, is smoothed by
/// a Gaussian of std-dev `sigma` (radius `ceil(3 sigma)`, renormalized), and
/// is scaled by `alpha`. The output pixel at `(x, y)` is sampled at
/// `(x + dx, y + dy)` with bilinear interpolation and reflected borders.
/// `alpha = 0` reproduces the input exactly.
pub fn elastic_distort(
    img: &ImageCanvas,
    alpha: f64,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> ImageCanvas {
    if alpha == 0.0 {
        return img.clone();
    }
    let (w, h) = (img.width as usize, img.height as usize);
    let mut dx = vec![0.0f64; w * h];
    let mut dy = vec![0.0f64; w * h];
    for v in dx.iter_mut() {
        *v = rng.random_range(-1.0..=1.0);
    }
    for v in dy.iter_mut() {
        *v = rng.random_range(-1.0..=1.0);
    }
    let kernel = gaussian_kernel(sigma);
    smooth(&mut dx, w, h, &kernel);
    smooth(&mut dy, w, h, &kernel);

    let mut out = ImageCanvas::filled(img.width, img.height, [0, 0, 0]);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let sx = reflect(x as f64 + alpha * dx[i], w);
            let sy = reflect(y as f64 + alpha * dy[i], h);
            let x0 = sx.floor() as usize;
            let y0 = sy.floor() as usize;
            let fx = sx - x0 as f64;
            let fy = sy - y0 as f64;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let p00 = img.get(x0 as u32, y0 as u32);
            let p10 = img.get(x1 as u32, y0 as u32);
            let p01 = img.get(x0 as u32, y1 as u32);
            let p11 = img.get(x1 as u32, y1 as u32);
            let mut px = [0u8; 3];
            for ch in 0..3 {
                let top = f64::from(p00[ch]) * (1.0 - fx) + f64::from(p10[ch]) * fx;
                let bot = f64::from(p01[ch]) * (1.0 - fx) + f64::from(p11[ch]) * fx;
                px[ch] = (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8;
            }
            out.set(x as u32, y as u32, px);
        }
    }
    out
}

/// Solid rectangular structuring element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    pub height: u32,
    pub width: u32,
}

impl StructuringElement {
    /// Anchor offsets: neighborhood spans `[-anchor, dim - 1 - anchor]`.
    fn anchors(&self) -> (i64, i64) {
        (
            i64::from((self.height - 1) / 2),
            i64::from((self.width - 1) / 2),
        )
    }

    /// 1x1 elements are identities for both dilation and erosion.
    pub fn is_identity(&self) -> bool {
        self.height == 1 && self.width == 1
    }
}

/// Draw a structuring element with height uniform in `1..=max_h` and width
/// uniform in `1..=max_w`.
pub fn make_structuring_element(max_dims: (u32, u32), rng: &mut ChaCha8Rng) -> StructuringElement {
    let (max_h, max_w) = max_dims;
    StructuringElement {
        height: rng.random_range(1..=max_h.max(1)),
        width: rng.random_range(1..=max_w.max(1)),
    }
}

#[derive(Clone, Copy)]
enum MorphKind {
    Dilate,
    Erode,
}

/// Flat grayscale morphology per channel over a rectangular window, borders
/// reflected. Runs as two 1-D passes (the window is separable).
fn morph(img: &ImageCanvas, se: &StructuringElement, kind: MorphKind) -> ImageCanvas {
    if se.is_identity() {
        return img.clone();
    }
    let (w, h) = (img.width as usize, img.height as usize);
    let (ah, aw) = se.anchors();
    let pick = |a: u8, b: u8| match kind {
        MorphKind::Dilate => a.max(b),
        MorphKind::Erode => a.min(b),
    };

    // Horizontal window [-aw, width-1-aw].
    let mut mid = img.clone();
    if se.width > 1 {
        for y in 0..h {
            for x in 0..w {
                let mut best = img.get(reflect_index(x as i64 - aw, w) as u32, y as u32);
                for d in 1..i64::from(se.width) {
                    let p = img.get(reflect_index(x as i64 - aw + d, w) as u32, y as u32);
                    for ch in 0..3 {
                        best[ch] = pick(best[ch], p[ch]);
                    }
                }
                mid.set(x as u32, y as u32, best);
            }
        }
    }
    // Vertical window [-ah, height-1-ah].
    let mut out = mid.clone();
    if se.height > 1 {
        for y in 0..h {
            for x in 0..w {
                let mut best = mid.get(x as u32, reflect_index(y as i64 - ah, h) as u32);
                for d in 1..i64::from(se.height) {
                    let p = mid.get(x as u32, reflect_index(y as i64 - ah + d, h) as u32);
                    for ch in 0..3 {
                        best[ch] = pick(best[ch], p[ch]);
                    }
                }
                out.set(x as u32, y as u32, best);
            }
        }
    }
    out
}

/// Channel-wise max over the SE neighborhood: bright regions expand.
pub fn dilate(img: &ImageCanvas, se: &StructuringElement) -> ImageCanvas {
    morph(img, se, MorphKind::Dilate)
}

/// Channel-wise min over the SE neighborhood: dark regions expand.
pub fn erode(img: &ImageCanvas, se: &StructuringElement) -> ImageCanvas {
    morph(img, se, MorphKind::Erode)
}

/// Which morphological composition a draw selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphOp {
    /// `u < p_d` and `v < p_e`, `a < 0.5`: dilate then erode.
    Closing,
    /// `u < p_d` and `v < p_e`, `a >= 0.5`: erode then dilate.
    Opening,
    /// `u < p_d` only.
    DilateOnly,
    /// `v < p_e` only.
    ErodeOnly,
    /// Neither branch fired.
    None,
}

/// Draw the branch decision: `u`, `v` (and `a` for the combined branch)
/// uniform in `[0, 1]`.
pub fn draw_morph_op(p_dilate: f64, p_erode: f64, rng: &mut ChaCha8Rng) -> MorphOp {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    let a: f64 = rng.random(); // drawn unconditionally to keep streams aligned
    if u < p_dilate && v < p_erode {
        if a < 0.5 {
            MorphOp::Closing
        } else {
            MorphOp::Opening
        }
    } else if u < p_dilate {
        MorphOp::DilateOnly
    } else if v < p_erode {
        MorphOp::ErodeOnly
    } else {
        MorphOp::None
    }
}

/// Apply the full augmentation: elastic distortion, then the randomized
/// morphology branch with freshly sampled structuring elements.
///
/// `stream` should already identify the (sample, copy) pair, e.g.
/// `root.child("augment").child_index(row).child_index(aug)`; stage streams
/// are derived internally. With `alpha = 0` and both probabilities zero the
/// output is bit-identical to the input.
pub fn augment_image(img: &ImageCanvas, cfg: &AugmentConfig, stream: &RngStream) -> ImageCanvas {
    let distorted = if cfg.alpha == 0.0 {
        img.clone()
    } else {
        let mut rng = stream.child("elastic").rng();
        elastic_distort(img, cfg.alpha, cfg.sigma, &mut rng)
    };

    let mut rng = stream.child("morph").rng();
    let op = draw_morph_op(cfg.p_dilate, cfg.p_erode, &mut rng);
    let se_d = make_structuring_element(cfg.se_dilate_max, &mut rng);
    let se_e = make_structuring_element(cfg.se_erode_max, &mut rng);

    match op {
        MorphOp::Closing => erode(&dilate(&distorted, &se_d), &se_e),
        MorphOp::Opening => dilate(&erode(&distorted, &se_e), &se_d),
        MorphOp::DilateOnly => dilate(&distorted, &se_d),
        MorphOp::ErodeOnly => erode(&distorted, &se_e),
        MorphOp::None => distorted,
    }
}
