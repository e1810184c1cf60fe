//! Linear probe: multinomial logistic regression over decoded feature vectors
//! or downsampled pixels, verifying that the image encoding preserves
//! class-discriminative information. Deliberately not a deep model.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::LayoutSpec;
use crate::pipeline::{DatasetManifest, Split};
use crate::raster::{read_png, ImageCanvas};
use crate::rng::RngStream;
use crate::verify::decode;

/// Which vector a probe sees for each image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Decoded per-feature bar widths (length `m`).
    DecodedFeatures,
    /// Box-averaged RGB pixels flattened to `3 * side * side` values in [0,1].
    PixelsDownsampled { side: u32 },
}

/// Probe hyperparameters. Training is plain mini-batch gradient descent on
/// the softmax cross-entropy with L2 weight decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub representation: Representation,
    pub learning_rate: f64,
    pub epochs: u32,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            representation: Representation::DecodedFeatures,
            learning_rate: 0.5,
            epochs: 200,
            l2: 1e-4,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning rate must be > 0".into()));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.l2 < 0.0 {
            return Err(Error::Config("l2 must be >= 0".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if let Representation::PixelsDownsampled { side } = self.representation {
            if side < 1 {
                return Err(Error::Config("pixel side must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Trained multinomial logistic model: one weight row and bias per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub n_classes: usize,
}

impl ProbeModel {
    /// Class probabilities, one row per sample.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut scores = x.dot(&self.weights.t());
        for mut row in scores.rows_mut() {
            row += &self.bias;
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|z| (z - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|p| p / sum);
        }
        scores
    }

    /// Predicted classes in `1..=C`.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<u32> {
        self.predict_proba(x)
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0usize;
                for (c, p) in row.iter().enumerate() {
                    if *p > row[best] {
                        best = c;
                    }
                }
                best as u32 + 1
            })
            .collect()
    }
}

/// Mean cross-entropy plus the L2 penalty, and its gradient.
///
/// Exposed so the analytic gradient can be checked against finite differences.
pub fn loss_and_grad(
    weights: &Array2<f64>,
    bias: &Array1<f64>,
    x: ArrayView2<'_, f64>,
    y: &[u32],
    l2: f64,
) -> (f64, Array2<f64>, Array1<f64>) {
    let n = x.nrows();
    let model = ProbeModel {
        weights: weights.clone(),
        bias: bias.clone(),
        n_classes: bias.len(),
    };
    let proba = model.predict_proba(x);
    let mut loss = 0.0;
    let mut delta = proba; // becomes p - onehot(y)
    for (i, &label) in y.iter().enumerate() {
        let c = (label - 1) as usize;
        loss -= delta[[i, c]].max(1e-300).ln();
        delta[[i, c]] -= 1.0;
    }
    loss /= n as f64;
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();

    let mut grad_w = delta.t().dot(&x);
    grad_w.mapv_inplace(|g| g / n as f64);
    grad_w += &weights.mapv(|w| l2 * w);
    let grad_b = delta.sum_axis(Axis(0)) / n as f64;
    (loss, grad_w, grad_b)
}

/// Train on an explicit matrix. Labels are `1..=n_classes`.
///
/// Deterministic for a fixed config: batches are shuffled by a seeded
/// generator and the loop is single-threaded.
pub fn train_on_matrix(
    x: ArrayView2<'_, f64>,
    y: &[u32],
    n_classes: usize,
    cfg: &ProbeConfig,
) -> Result<ProbeModel> {
    cfg.validate()?;
    if x.nrows() == 0 {
        return Err(Error::Config("cannot train on an empty set".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::Config(format!(
            "{} samples but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if y.iter().any(|&l| l < 1 || l as usize > n_classes) {
        return Err(Error::Config(format!("labels must lie in 1..={n_classes}")));
    }

    let d = x.ncols();
    let mut weights = Array2::<f64>::zeros((n_classes, d));
    let mut bias = Array1::<f64>::zeros(n_classes);
    let mut rng = RngStream::from_root(cfg.seed).child("probe").rng();
    let mut order: Vec<usize> = (0..x.nrows()).collect();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), chunk);
            let yb: Vec<u32> = chunk.iter().map(|&i| y[i]).collect();
            let (_, grad_w, grad_b) = loss_and_grad(&weights, &bias, xb.view(), &yb, cfg.l2);
            weights.scaled_add(-cfg.learning_rate, &grad_w);
            bias.scaled_add(-cfg.learning_rate, &grad_b);
        }
    }
    Ok(ProbeModel {
        weights,
        bias,
        n_classes,
    })
}

/// Unweighted mean of per-class F1 scores. A class with no true and no
/// predicted samples scores 0 for that class.
pub fn macro_f1(y_true: &[u32], y_pred: &[u32], n_classes: usize) -> f64 {
    let mut f1_sum = 0.0;
    for c in 1..=n_classes as u32 {
        let tp = y_true
            .iter()
            .zip(y_pred)
            .filter(|(t, p)| **t == c && **p == c)
            .count() as f64;
        let fp = y_true
            .iter()
            .zip(y_pred)
            .filter(|(t, p)| **t != c && **p == c)
            .count() as f64;
        let fn_ = y_true
            .iter()
            .zip(y_pred)
            .filter(|(t, p)| **t == c && **p != c)
            .count() as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        f1_sum += if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
    }
    f1_sum / n_classes as f64
}

/// Rank-statistic AUC with midranks for ties (binary, positives = `positive`).
fn binary_auc(scores: &[f64], y: &[u32], positive: u32) -> Result<f64> {
    let n_pos = y.iter().filter(|&&l| l == positive).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Data(
            "AUC is undefined when only one class is present".into(),
        ));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut ranks = vec![0.0f64; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = midrank;
        }
        i = j + 1;
    }
    let rank_sum: f64 = (0..y.len())
        .filter(|&i| y[i] == positive)
        .map(|i| ranks[i])
        .sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// AUC from class-probability scores: the rank statistic for binary problems,
/// macro-averaged one-vs-rest for multiclass.
pub fn auc_from_scores(proba: ArrayView2<'_, f64>, y: &[u32], n_classes: usize) -> Result<f64> {
    if n_classes == 2 {
        let scores: Vec<f64> = proba.column(1).to_vec();
        return binary_auc(&scores, y, 2);
    }
    let mut total = 0.0;
    for c in 1..=n_classes as u32 {
        let scores: Vec<f64> = proba.column((c - 1) as usize).to_vec();
        let rest: Vec<u32> = y.iter().map(|&l| if l == c { 1 } else { 0 }).collect();
        total += binary_auc(&scores, &rest, 1)?;
    }
    Ok(total / n_classes as f64)
}

/// Evaluation metrics for one fold.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProbeMetrics {
    pub macro_f1: f64,
    pub auc: f64,
}

/// Evaluate a trained model on an explicit matrix.
pub fn evaluate_on_matrix(
    model: &ProbeModel,
    x: ArrayView2<'_, f64>,
    y: &[u32],
) -> Result<ProbeMetrics> {
    let proba = model.predict_proba(x);
    let pred = model.predict(x);
    Ok(ProbeMetrics {
        macro_f1: macro_f1(y, &pred, model.n_classes),
        auc: auc_from_scores(proba.view(), y, model.n_classes)?,
    })
}

/// Turn one image into the probe's input vector.
pub fn representation_vector(
    img: &ImageCanvas,
    layout: &LayoutSpec,
    representation: Representation,
) -> Result<Vec<f64>> {
    match representation {
        Representation::DecodedFeatures => Ok(decode(img, layout)?.values),
        Representation::PixelsDownsampled { side } => Ok(box_downsample(img, side)),
    }
}

/// Box-average to `side x side` RGB and flatten, channels interleaved,
/// values scaled to `[0, 1]`. Fractional box edges weight pixels by overlap.
fn box_downsample(img: &ImageCanvas, side: u32) -> Vec<f64> {
    let side = side.min(img.width).min(img.height);
    let sx = f64::from(img.width) / f64::from(side);
    let sy = f64::from(img.height) / f64::from(side);
    let mut out = Vec::with_capacity((side * side * 3) as usize);
    for oy in 0..side {
        let y_lo = f64::from(oy) * sy;
        let y_hi = y_lo + sy;
        for ox in 0..side {
            let x_lo = f64::from(ox) * sx;
            let x_hi = x_lo + sx;
            let mut acc = [0.0f64; 3];
            let mut area = 0.0;
            let iy0 = y_lo.floor() as u32;
            let iy1 = (y_hi.ceil() as u32).min(img.height);
            let ix0 = x_lo.floor() as u32;
            let ix1 = (x_hi.ceil() as u32).min(img.width);
            for iy in iy0..iy1 {
                let cy = (y_hi.min(f64::from(iy) + 1.0) - y_lo.max(f64::from(iy))).max(0.0);
                for ix in ix0..ix1 {
                    let cx = (x_hi.min(f64::from(ix) + 1.0) - x_lo.max(f64::from(ix))).max(0.0);
                    let w = cx * cy;
                    if w <= 0.0 {
                        continue;
                    }
                    let px = img.get(ix, iy);
                    for (a, channel) in acc.iter_mut().zip(px) {
                        *a += w * f64::from(channel);
                    }
                    area += w;
                }
            }
            for channel in acc {
                out.push(channel / (area * 255.0));
            }
        }
    }
    out
}

fn fold_matrix(
    dataset_dir: &Path,
    manifest: &DatasetManifest,
    fold: u32,
    split: Split,
    representation: Representation,
) -> Result<(Array2<f64>, Vec<u32>)> {
    let records: Vec<_> = manifest
        .records
        .iter()
        .filter(|r| r.fold == fold && r.split == split)
        .collect();
    if records.is_empty() {
        return Err(Error::Config(format!(
            "fold {fold} has no {} records",
            split.dir_name()
        )));
    }
    let layout = &manifest.header.layout;
    let vectors: Vec<(Vec<f64>, u32)> = records
        .par_iter()
        .map(|record| -> Result<(Vec<f64>, u32)> {
            let img = read_png(&dataset_dir.join(&record.image_path))?;
            let v = representation_vector(&img, layout, representation)?;
            Ok((v, record.label))
        })
        .collect::<Result<_>>()?;
    let d = vectors[0].0.len();
    let mut x = Array2::<f64>::zeros((vectors.len(), d));
    let mut y = Vec::with_capacity(vectors.len());
    for (i, (v, label)) in vectors.into_iter().enumerate() {
        x.row_mut(i).assign(&Array1::from(v));
        y.push(label);
    }
    Ok((x, y))
}

/// Train a probe on one fold's training images (originals plus augmented).
pub fn train_probe(
    dataset_dir: &Path,
    manifest: &DatasetManifest,
    fold: u32,
    cfg: &ProbeConfig,
) -> Result<ProbeModel> {
    let (x, y) = fold_matrix(
        dataset_dir,
        manifest,
        fold,
        Split::Train,
        cfg.representation,
    )?;
    train_on_matrix(x.view(), &y, manifest.header.class_names.len(), cfg)
}

/// Evaluate a probe on one fold's held-out originals.
pub fn evaluate_probe(
    model: &ProbeModel,
    dataset_dir: &Path,
    manifest: &DatasetManifest,
    fold: u32,
    representation: Representation,
) -> Result<ProbeMetrics> {
    let (x, y) = fold_matrix(dataset_dir, manifest, fold, Split::Test, representation)?;
    evaluate_on_matrix(model, x.view(), &y)
}
