//! Feature-arrangement sweep: re-encode one table under several row counts
//! and measure, per arrangement, the decode round-trip error and the linear
//! probe's cross-validated metrics.

use serde::Serialize;

use crate::augment::AugmentConfig;
use crate::error::{Error, Result};
use crate::ingest::{
    apply_normalization, fit_normalization, ExpandedTable, FitScope, NormalizedTable,
};
use crate::layout::make_layout;
use crate::probe::{evaluate_on_matrix, train_on_matrix, ProbeConfig};
use crate::raster::rasterize;
use crate::split::make_splits;
use crate::verify::{decode, roundtrip_report};
use ndarray::{Array1, Array2};
use rayon::prelude::*;

/// Measurements for one row arrangement.
#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub rows_requested: u32,
    pub rows: u32,
    pub cols: u32,
    pub bar_width: f64,
    pub bar_height: f64,
    pub clean_mean: f64,
    pub clean_max: f64,
    pub aug_mean: f64,
    pub aug_max: f64,
    pub macro_f1: f64,
    pub auc: f64,
}

/// Sweep options: canvas size, augmentation used for the perturbed round-trip
/// numbers, probe setup, fold count, trial count, seed.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub width: u32,
    pub height: u32,
    pub augment: AugmentConfig,
    pub probe: ProbeConfig,
    pub folds: u32,
    pub n_trials: usize,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            width: 224,
            height: 224,
            augment: AugmentConfig::default(),
            probe: ProbeConfig::default(),
            folds: 5,
            n_trials: 500,
            seed: 0,
        }
    }
}

/// Run the sweep for each requested row count.
///
/// Round-trip errors are measured on the whole-dataset-normalized table; the
/// probe runs in memory on decoded feature vectors under per-fold train-only
/// normalization, and its macro-F1/AUC are averaged across folds.
pub fn layout_sweep(
    table: &ExpandedTable,
    rows_list: &[u32],
    opts: &SweepOptions,
) -> Result<Vec<SweepEntry>> {
    let m = table.n_features() as u32;
    for &r in rows_list {
        if r == 0 || r > m {
            return Err(Error::Config(format!(
                "sweep row count {r} outside 1..={m}"
            )));
        }
    }
    let whole = NormalizedTable::from_expanded(table, FitScope::WholeDataset)?;
    let plan = make_splits(table, opts.folds, opts.seed, true)?;

    let mut entries = Vec::with_capacity(rows_list.len());
    for &r in rows_list {
        let layout = make_layout(m, r, opts.width, opts.height, opts.seed)?;
        let report = roundtrip_report(&whole, &layout, &opts.augment, opts.n_trials, opts.seed)?;

        // Cross-validated probe on decoded features.
        let mut f1_sum = 0.0;
        let mut auc_sum = 0.0;
        for fold in plan.folds() {
            let train_rows = plan.train_rows(fold);
            let test_rows = plan.test_rows(fold);
            let stats = fit_normalization(table.values.view(), &train_rows, FitScope::TrainOnly)?;
            let normalized = apply_normalization(table.values.view(), &stats)?;

            let decode_rows = |rows: &[usize]| -> Result<(Array2<f64>, Vec<u32>)> {
                let vectors: Vec<Vec<f64>> = rows
                    .par_iter()
                    .map(|&i| {
                        let sample: Vec<f64> = normalized.row(i).to_vec();
                        let img = rasterize(&sample, &layout)?;
                        Ok(decode(&img, &layout)?.values)
                    })
                    .collect::<Result<_>>()?;
                let mut x = Array2::<f64>::zeros((rows.len(), m as usize));
                for (i, v) in vectors.into_iter().enumerate() {
                    x.row_mut(i).assign(&Array1::from(v));
                }
                let y = rows.iter().map(|&i| table.labels[i]).collect();
                Ok((x, y))
            };
            let (x_train, y_train) = decode_rows(&train_rows)?;
            let (x_test, y_test) = decode_rows(&test_rows)?;
            let model = train_on_matrix(x_train.view(), &y_train, table.n_classes(), &opts.probe)?;
            let metrics = evaluate_on_matrix(&model, x_test.view(), &y_test)?;
            f1_sum += metrics.macro_f1;
            auc_sum += metrics.auc;
        }

        entries.push(SweepEntry {
            rows_requested: r,
            rows: layout.rows,
            cols: layout.cols,
            bar_width: layout.bar_width,
            bar_height: layout.bar_height,
            clean_mean: report.clean_mean,
            clean_max: report.clean_max,
            aug_mean: report.aug_mean,
            aug_max: report.aug_max,
            macro_f1: f1_sum / f64::from(plan.k),
            auc: auc_sum / f64::from(plan.k),
        });
    }
    Ok(entries)
}
