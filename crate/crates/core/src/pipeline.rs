//! End-to-end dataset builds: per-fold normalization, encoding, leakage-safe
//! augmentation, and a line-oriented JSON manifest binding every image to its
//! provenance.
//!
//! Augmentation only ever touches training partitions. Test images depend on
//! the table, the layout, and the split seed alone, so rebuilding with a
//! different augmentation scale leaves every test file byte-identical.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::{augment_image, AugmentConfig};
use crate::error::{Error, Result};
use crate::ingest::{apply_normalization, fit_normalization, ExpandedTable, FitScope};
use crate::layout::LayoutSpec;
use crate::raster::{encode_png_bytes, rasterize};
use crate::rng::RngStream;
use crate::split::SplitPlan;

/// Manifest format version.
pub const MANIFEST_VERSION: u32 = 1;

/// Manifest file name inside a dataset directory.
pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Train or test partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Whether an image is a source row's direct rendering or an augmented copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Original,
    Augmented,
}

/// First line of the manifest: everything needed to replay the build.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub manifest_version: u32,
    pub schema_version: u32,
    pub schema_digest: String,
    pub n_rows: usize,
    pub class_names: Vec<String>,
    pub folds: u32,
    pub stratified: bool,
    pub normalization_scope: FitScope,
    pub root_seed: u64,
    pub split_seed: u64,
    pub layout: LayoutSpec,
    pub augment: AugmentConfig,
}

/// One image record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    /// Path relative to the dataset directory.
    pub image_path: String,
    pub label: u32,
    pub fold: u32,
    pub split: Split,
    pub origin: Origin,
    pub source_row: usize,
    /// 0 for originals, `1..=K` for augmented copies.
    pub aug_index: u32,
    /// Hex SHA-256 of the PNG bytes.
    pub checksum: String,
}

/// Header plus records, in deterministic order.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub header: ManifestHeader,
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    /// Write as one JSON record per line, header first.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        serde_json::to_writer(&mut out, &self.header)
            .map_err(|e| Error::Integrity(format!("serialize header: {e}")))?;
        out.push(b'\n');
        for record in &self.records {
            serde_json::to_writer(&mut out, record)
                .map_err(|e| Error::Integrity(format!("serialize record: {e}")))?;
            out.push(b'\n');
        }
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&out).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Read a manifest written by [`DatasetManifest::write`].
    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::Integrity("manifest is empty".into()))?
            .map_err(|e| Error::io(path, e))?;
        let header: ManifestHeader = serde_json::from_str(&header_line)
            .map_err(|e| Error::Integrity(format!("bad manifest header: {e}")))?;
        if header.manifest_version != MANIFEST_VERSION {
            return Err(Error::Integrity(format!(
                "unsupported manifest_version {}",
                header.manifest_version
            )));
        }
        let mut records = Vec::new();
        for line in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(
                serde_json::from_str(&line)
                    .map_err(|e| Error::Integrity(format!("bad manifest record: {e}")))?,
            );
        }
        Ok(DatasetManifest { header, records })
    }
}

/// Build-wide options that are not part of the layout or augmentation config.
#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub scope: FitScope,
    /// Root seed; augmentation streams derive from it as
    /// `root -> "augment" -> row -> aug index`.
    pub root_seed: u64,
    /// Digest of the schema that produced the table, recorded in the header.
    pub schema_digest: String,
    pub schema_version: u32,
}

struct Job {
    fold: u32,
    split: Split,
    row: usize,
    aug_index: u32,
}

fn image_rel_path(fold: u32, split: Split, row: usize, aug_index: u32) -> String {
    format!(
        "fold{fold}/{}/{row:06}_{aug_index:02}.png",
        split.dir_name()
    )
}

/// Render and persist the full cross-validation image tree.
///
/// For each fold: held-out rows are written once as originals under
/// `fold{f}/test/`; training rows are written as originals plus `K` augmented
/// copies under `fold{f}/train/`. Under train-only scope the normalization is
/// refit on each fold's training rows; whole-dataset scope fits once.
pub fn build_dataset(
    table: &ExpandedTable,
    plan: &SplitPlan,
    layout: &LayoutSpec,
    augment: &AugmentConfig,
    opts: &BuildOptions,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    augment.validate()?;
    if plan.n != table.n_rows() {
        return Err(Error::Config(format!(
            "split plan covers {} rows, table has {}",
            plan.n,
            table.n_rows()
        )));
    }
    if layout.m as usize != table.n_features() {
        return Err(Error::Config(format!(
            "layout expects {} features, table has {}",
            layout.m,
            table.n_features()
        )));
    }

    // Per-fold normalized views of the whole table.
    let all_rows: Vec<usize> = (0..table.n_rows()).collect();
    let whole_stats = fit_normalization(table.values.view(), &all_rows, FitScope::WholeDataset)?;
    let mut fold_values = Vec::with_capacity(plan.k as usize);
    for fold in plan.folds() {
        let stats = match opts.scope {
            FitScope::WholeDataset => whole_stats.clone(),
            FitScope::TrainOnly => fit_normalization(
                table.values.view(),
                &plan.train_rows(fold),
                FitScope::TrainOnly,
            )?,
        };
        fold_values.push(apply_normalization(table.values.view(), &stats)?);
    }

    let mut jobs = Vec::new();
    for fold in plan.folds() {
        for row in plan.test_rows(fold) {
            jobs.push(Job {
                fold,
                split: Split::Test,
                row,
                aug_index: 0,
            });
        }
        for row in plan.train_rows(fold) {
            for aug_index in 0..=augment.k {
                jobs.push(Job {
                    fold,
                    split: Split::Train,
                    row,
                    aug_index,
                });
            }
        }
    }

    for fold in plan.folds() {
        for split in [Split::Train, Split::Test] {
            let dir = out_dir.join(format!("fold{fold}")).join(split.dir_name());
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
    }

    let aug_root = RngStream::from_root(opts.root_seed).child("augment");
    let mut records: Vec<ManifestRecord> = jobs
        .par_iter()
        .map(|job| -> Result<ManifestRecord> {
            let sample: Vec<f64> = fold_values[job.fold as usize].row(job.row).to_vec();
            let mut img = rasterize(&sample, layout)?;
            if job.aug_index > 0 {
                let stream = aug_root
                    .child_index(job.row as u64)
                    .child_index(u64::from(job.aug_index));
                img = augment_image(&img, augment, &stream);
            }
            let bytes = encode_png_bytes(&img)?;
            let rel = image_rel_path(job.fold, job.split, job.row, job.aug_index);
            let path = out_dir.join(&rel);
            std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
            Ok(ManifestRecord {
                image_path: rel,
                label: table.labels[job.row],
                fold: job.fold,
                split: job.split,
                origin: if job.aug_index == 0 {
                    Origin::Original
                } else {
                    Origin::Augmented
                },
                source_row: job.row,
                aug_index: job.aug_index,
                checksum: hex::encode(Sha256::digest(&bytes)),
            })
        })
        .collect::<Result<_>>()?;

    records.sort_by(|a, b| {
        (a.fold, a.split, a.source_row, a.aug_index).cmp(&(
            b.fold,
            b.split,
            b.source_row,
            b.aug_index,
        ))
    });

    let manifest = DatasetManifest {
        header: ManifestHeader {
            manifest_version: MANIFEST_VERSION,
            schema_version: opts.schema_version,
            schema_digest: opts.schema_digest.clone(),
            n_rows: table.n_rows(),
            class_names: table.class_names.clone(),
            folds: plan.k,
            stratified: plan.stratified,
            normalization_scope: opts.scope,
            root_seed: opts.root_seed,
            split_seed: plan.seed,
            layout: layout.clone(),
            augment: augment.clone(),
        },
        records,
    };
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Outcome of dataset integrity checks. `problems` is empty iff `pass`.
#[derive(Debug, Clone, Serialize)]
pub struct LeakageReport {
    pub pass: bool,
    pub n_records: usize,
    pub problems: Vec<String>,
}

/// Check the leakage and integrity rules of a built dataset:
/// test records are all originals, no augmented record references a test row
/// of its fold, every training row carries exactly `1 + K` records, and every
/// checksum matches the file on disk.
pub fn verify_no_leakage(manifest: &DatasetManifest, out_dir: &Path) -> LeakageReport {
    let mut problems = Vec::new();
    let k = manifest.header.augment.k;

    let mut test_rows_by_fold: BTreeMap<u32, BTreeSet<usize>> = BTreeMap::new();
    for record in &manifest.records {
        if record.split == Split::Test {
            test_rows_by_fold
                .entry(record.fold)
                .or_default()
                .insert(record.source_row);
        }
    }

    for record in &manifest.records {
        if record.split == Split::Test
            && (record.origin != Origin::Original || record.aug_index != 0)
        {
            problems.push(format!(
                "test record {} is not an original (aug_index {})",
                record.image_path, record.aug_index
            ));
        }
        if record.origin == Origin::Augmented {
            if let Some(test_rows) = test_rows_by_fold.get(&record.fold) {
                if test_rows.contains(&record.source_row) {
                    problems.push(format!(
                        "augmented record {} references test row {} of fold {}",
                        record.image_path, record.source_row, record.fold
                    ));
                }
            }
        }
    }

    // Per-fold, per-training-row record arithmetic.
    let mut train_counts: BTreeMap<(u32, usize), u32> = BTreeMap::new();
    for record in &manifest.records {
        if record.split == Split::Train {
            *train_counts
                .entry((record.fold, record.source_row))
                .or_insert(0) += 1;
        }
    }
    for ((fold, row), count) in &train_counts {
        if *count != k + 1 {
            problems.push(format!(
                "fold {fold} train row {row} has {count} records, expected {}",
                k + 1
            ));
        }
    }

    // Duplicate paths would make checksum claims ambiguous.
    let mut seen = HashSet::new();
    for record in &manifest.records {
        if !seen.insert(record.image_path.as_str()) {
            problems.push(format!("duplicate image path {}", record.image_path));
        }
    }

    for record in &manifest.records {
        let path = out_dir.join(&record.image_path);
        match std::fs::read(&path) {
            Ok(bytes) => {
                let digest = hex::encode(Sha256::digest(&bytes));
                if digest != record.checksum {
                    problems.push(format!("checksum mismatch for {}", record.image_path));
                }
            }
            Err(e) => problems.push(format!("cannot read {}: {e}", record.image_path)),
        }
    }

    LeakageReport {
        pass: problems.is_empty(),
        n_records: manifest.records.len(),
        problems,
    }
}

/// Hex SHA-256 of a file's bytes.
pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::make_layout;
    use crate::split::make_splits;
    use crate::synth;

    fn quick_build(
        dir: &Path,
        n: usize,
        k_aug: u32,
        seed: u64,
    ) -> (ExpandedTable, SplitPlan, DatasetManifest) {
        let table = synth::gaussian_blobs(n, 4, 2, 2.0, 11);
        let plan = make_splits(&table, 3, seed, true).unwrap();
        let layout = make_layout(4, 1, 64, 64, seed).unwrap();
        let augment = AugmentConfig {
            k: k_aug,
            ..AugmentConfig::default()
        };
        let opts = BuildOptions {
            scope: FitScope::TrainOnly,
            root_seed: seed,
            schema_digest: "test".into(),
            schema_version: 1,
        };
        let manifest = build_dataset(&table, &plan, &layout, &augment, &opts, dir).unwrap();
        (table, plan, manifest)
    }

    #[test]
    fn counts_match_augmentation_scale() {
        let dir = tempfile::tempdir().unwrap();
        let (_, plan, manifest) = quick_build(dir.path(), 30, 2, 5);
        for fold in plan.folds() {
            let n_test = plan.test_rows(fold).len();
            let n_train = plan.train_rows(fold).len();
            let test = manifest
                .records
                .iter()
                .filter(|r| r.fold == fold && r.split == Split::Test)
                .count();
            let train = manifest
                .records
                .iter()
                .filter(|r| r.fold == fold && r.split == Split::Train)
                .count();
            assert_eq!(test, n_test);
            assert_eq!(train, n_train * 3);
        }
    }

    #[test]
    fn zero_scale_has_originals_only() {
        let dir = tempfile::tempdir().unwrap();
        let (_, _, manifest) = quick_build(dir.path(), 24, 0, 5);
        assert!(manifest
            .records
            .iter()
            .all(|r| r.origin == Origin::Original));
    }

    #[test]
    fn manifest_roundtrips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let (_, _, manifest) = quick_build(dir.path(), 24, 1, 5);
        let back = DatasetManifest::read(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(back.records, manifest.records);
        assert_eq!(back.header.root_seed, manifest.header.root_seed);
    }

    #[test]
    fn well_formed_dataset_passes_verification() {
        let dir = tempfile::tempdir().unwrap();
        let (_, _, manifest) = quick_build(dir.path(), 24, 2, 5);
        let report = verify_no_leakage(&manifest, dir.path());
        assert!(report.pass, "{:?}", report.problems);
    }

    #[test]
    fn injected_augmented_test_record_fails_verification() {
        let dir = tempfile::tempdir().unwrap();
        let (_, _, mut manifest) = quick_build(dir.path(), 24, 2, 5);
        let mut bad = manifest
            .records
            .iter()
            .find(|r| r.split == Split::Test)
            .unwrap()
            .clone();
        bad.origin = Origin::Augmented;
        bad.aug_index = 1;
        bad.image_path = "fold0/test/999999_01.png".into();
        manifest.records.push(bad);
        let report = verify_no_leakage(&manifest, dir.path());
        assert!(!report.pass);
        assert!(report.problems.iter().any(|p| p.contains("999999_01.png")));
    }

    #[test]
    fn tampered_file_fails_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let (_, _, manifest) = quick_build(dir.path(), 24, 0, 5);
        let victim = dir.path().join(&manifest.records[0].image_path);
        let mut bytes = std::fs::read(&victim).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xff;
        std::fs::write(&victim, bytes).unwrap();
        let report = verify_no_leakage(&manifest, dir.path());
        assert!(!report.pass);
        assert!(report.problems.iter().any(|p| p.contains("checksum")));
    }

    #[test]
    fn augmented_records_carry_source_labels() {
        let dir = tempfile::tempdir().unwrap();
        let (table, _, manifest) = quick_build(dir.path(), 24, 2, 5);
        for record in manifest
            .records
            .iter()
            .filter(|r| r.origin == Origin::Augmented)
        {
            assert_eq!(record.label, table.labels[record.source_row]);
        }
    }

    #[test]
    fn rebuilds_are_byte_identical() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let (_, _, m1) = quick_build(d1.path(), 24, 2, 9);
        let (_, _, m2) = quick_build(d2.path(), 24, 2, 9);
        assert_eq!(m1.records, m2.records);
        assert_eq!(
            std::fs::read(d1.path().join(MANIFEST_FILE)).unwrap(),
            std::fs::read(d2.path().join(MANIFEST_FILE)).unwrap()
        );
    }
}
