//! Tabular rows rendered as bar images for training image classifiers on
//! small datasets.
//!
//! The pipeline turns a delimiter-separated table into per-sample RGB images:
//! each feature becomes a colored bar whose width is proportional to its
//! min-max normalized value, arranged in a row/column grid. Training
//! partitions can be expanded with an elastic-plus-morphological augmentation
//! tailored to bar geometry, and every build is reproducible down to the byte
//! from its seeds.
//!
//! Module map:
//! - [`schema`] / [`ingest`]: column declarations, parsing, feature
//!   expansion, min-max normalization.
//! - [`layout`] / [`raster`]: bar grid geometry and anti-aliased
//!   rasterization, deterministic PNG I/O.
//! - [`augment`]: elastic distortion and randomized morphology.
//! - [`verify`]: decoder oracle inverting images back to values, round-trip
//!   reports.
//! - [`split`] / [`pipeline`]: stratified folds, leakage-safe dataset builds,
//!   manifests, integrity checks.
//! - [`probe`]: linear probe plus macro-F1/AUC metrics.
//! - [`sweep`]: decode fidelity and probe metrics across row arrangements.
//! - [`synth`]: synthetic tables for demos and tests.

pub mod augment;
pub mod error;
pub mod ingest;
pub mod layout;
pub mod pipeline;
pub mod probe;
pub mod raster;
pub mod rng;
pub mod schema;
pub mod split;
pub mod sweep;
pub mod synth;
pub mod verify;

pub use augment::{augment_image, AugmentConfig, MorphOp};
pub use error::{Error, Result};
pub use ingest::{
    apply_normalization, expand_features, fit_normalization, parse_table, ExpandedTable, FitScope,
    NormalizationStats, NormalizedTable, RawTable,
};
pub use layout::{make_layout, place_bars, BarPlacement, LayoutSpec};
pub use pipeline::{
    build_dataset, verify_no_leakage, BuildOptions, DatasetManifest, LeakageReport, ManifestHeader,
    ManifestRecord, Origin, Split, MANIFEST_FILE, MANIFEST_VERSION,
};
pub use probe::{
    evaluate_probe, train_probe, ProbeConfig, ProbeMetrics, ProbeModel, Representation,
};
pub use raster::{rasterize, read_png, write_png, ImageCanvas};
pub use rng::RngStream;
pub use schema::{ColumnKind, FeatureSchema, SCHEMA_VERSION};
pub use split::{make_splits, SplitPlan};
pub use sweep::{layout_sweep, SweepEntry, SweepOptions};
pub use verify::{decode, roundtrip_report, DecodedSample, RoundtripReport};
