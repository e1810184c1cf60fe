//! Synthetic table generators for demos and tests.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::ExpandedTable;
use crate::rng::RngStream;

/// Gaussian class blobs with uniform-random means in `[0, 1]^m`.
///
/// `separation` controls how far apart the blobs are relative to their noise:
/// higher values give cleaner classes. Labels cycle `1..=classes` so every
/// class is present and balanced. Deterministic per seed.
pub fn gaussian_blobs(
    n: usize,
    m: usize,
    classes: usize,
    separation: f64,
    seed: u64,
) -> ExpandedTable {
    assert!(n >= classes && classes >= 1 && m >= 1);
    let mut rng = RngStream::from_root(seed).child("synth").rng();
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..m).map(|_| rng.random::<f64>()).collect())
        .collect();
    let noise = Normal::new(0.0, 0.35 / separation.max(1e-6)).unwrap();

    let labels: Vec<u32> = (0..n).map(|i| (i % classes) as u32 + 1).collect();
    let values = Array2::from_shape_fn((n, m), |(i, j)| {
        means[(labels[i] - 1) as usize][j] + noise.sample(&mut rng)
    });
    ExpandedTable {
        values,
        labels,
        class_names: (1..=classes).map(|c| format!("c{c}")).collect(),
        feature_names: (0..m).map(|j| format!("f{j}")).collect(),
    }
}

/// Two linearly separable classes: class 1 features lie in `[0, 0.4]`,
/// class 2 in `[0.6, 1]`, with a hard margin between them.
pub fn separable_pair(n: usize, m: usize, seed: u64) -> ExpandedTable {
    assert!(n >= 2 && m >= 1);
    let mut rng = RngStream::from_root(seed).child("separable").rng();
    let labels: Vec<u32> = (0..n).map(|i| (i % 2) as u32 + 1).collect();
    let values = Array2::from_shape_fn((n, m), |(i, _)| {
        if labels[i] == 1 {
            rng.random_range(0.0..0.4)
        } else {
            rng.random_range(0.6..1.0)
        }
    });
    ExpandedTable {
        values,
        labels,
        class_names: vec!["c1".into(), "c2".into()],
        feature_names: (0..m).map(|j| format!("f{j}")).collect(),
    }
}

/// Render a table as CSV text with numeric feature columns and the label
/// column last (named `label`, values `c1..cC`).
pub fn to_csv(table: &ExpandedTable) -> String {
    let mut out = String::new();
    for name in &table.feature_names {
        out.push_str(name);
        out.push(',');
    }
    out.push_str("label\n");
    for i in 0..table.n_rows() {
        for j in 0..table.n_features() {
            out.push_str(&format!("{:.6},", table.values[[i, j]]));
        }
        out.push_str(&table.class_names[(table.labels[i] - 1) as usize]);
        out.push('\n');
    }
    out
}

/// Schema TOML matching [`to_csv`] output: all-numeric features, label `label`.
pub fn numeric_schema_toml(feature_names: &[String]) -> String {
    let mut out = String::from("schema_version = 1\nlabel = \"label\"\n");
    for name in feature_names {
        out.push_str(&format!(
            "\n[[columns]]\nname = \"{name}\"\nkind = \"numeric\"\n"
        ));
    }
    out
}
