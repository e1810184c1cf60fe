//! Tabular ingestion: delimiter-separated parsing, schema-driven feature
//! expansion, and min-max normalization to `[0, 1]`.

use std::collections::BTreeSet;
use std::io::Read;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{ColumnKind, FeatureSchema};

/// Raw rectangular table of text cells, straight from the input stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// Parse delimiter-separated text with a header line into a [`RawTable`].
///
/// Cells are whitespace-trimmed. Standard CSV quoting is honored. Every row
/// must have exactly as many cells as the header; a ragged row is an error
/// naming its line number.
pub fn parse_table<R: Read>(input: R, delimiter: char) -> Result<RawTable> {
    if !delimiter.is_ascii() {
        return Err(Error::Config(format!(
            "delimiter {delimiter:?} is not an ASCII character"
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(input);

    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse(format!("cannot read header: {e}")))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Parse("empty input".into()));
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(map_csv_error)?;
        rows.push(record.iter().map(|s| s.to_string()).collect());
    }
    if rows.is_empty() {
        return Err(Error::Parse("input has a header but no data rows".into()));
    }
    Ok(RawTable { header, rows })
}

fn map_csv_error(err: csv::Error) -> Error {
    match err.kind() {
        csv::ErrorKind::UnequalLengths {
            pos,
            expected_len,
            len,
        } => {
            let line = pos.as_ref().map(|p| p.line()).unwrap_or(0);
            Error::Parse(format!(
                "row {line} has {len} cells, expected {expected_len}"
            ))
        }
        _ => Error::Parse(err.to_string()),
    }
}

/// Schema-expanded feature matrix, before normalization.
///
/// Labels are mapped to `1..=C` by lexicographic order of the distinct label
/// strings, so the mapping is identical across runs and platforms.
#[derive(Debug, Clone)]
pub struct ExpandedTable {
    /// n x m matrix of raw feature values.
    pub values: Array2<f64>,
    /// Per-row class in `1..=C`.
    pub labels: Vec<u32>,
    /// Distinct label strings, index `c-1` names class `c`.
    pub class_names: Vec<String>,
    /// One name per expanded feature.
    pub feature_names: Vec<String>,
}

impl ExpandedTable {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }
}

/// Number of expanded features the schema predicts for this table.
///
/// Categorical columns without declared categories contribute their distinct
/// cell-value count.
pub fn expanded_width(raw: &RawTable, schema: &FeatureSchema) -> Result<usize> {
    let mut width = 0usize;
    for col in &schema.columns {
        width += match &col.kind {
            ColumnKind::Numeric | ColumnKind::Boolean | ColumnKind::Ordinal { .. } => 1,
            ColumnKind::Categorical { categories } if !categories.is_empty() => categories.len(),
            ColumnKind::Categorical { .. } => {
                let idx = column_index(raw, &col.name)?;
                let distinct: BTreeSet<&str> = raw.rows.iter().map(|r| r[idx].as_str()).collect();
                distinct.len()
            }
        };
    }
    Ok(width)
}

fn column_index(raw: &RawTable, name: &str) -> Result<usize> {
    raw.header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Schema(format!("schema column '{name}' not found in input header")))
}

/// Expand a raw table into a numeric feature matrix per the schema.
///
/// Categorical columns become one indicator per category (all categories kept),
/// ordinal columns become their 0-based rank, booleans become 0/1, numerics are
/// parsed as reals. The label column maps to `1..=C` by sorted distinct value.
pub fn expand_features(raw: &RawTable, schema: &FeatureSchema) -> Result<ExpandedTable> {
    let label_idx = raw
        .header
        .iter()
        .position(|h| *h == schema.label)
        .ok_or_else(|| {
            Error::Schema(format!(
                "label column '{}' not found in input header",
                schema.label
            ))
        })?;

    // Header coverage must be exact: every schema column present, every
    // non-label header column declared.
    let mut declared: BTreeSet<&str> = BTreeSet::new();
    for col in &schema.columns {
        column_index(raw, &col.name)?;
        declared.insert(col.name.as_str());
    }
    for (i, name) in raw.header.iter().enumerate() {
        if i != label_idx && !declared.contains(name.as_str()) {
            return Err(Error::Schema(format!(
                "input column '{name}' is not declared in the schema"
            )));
        }
    }

    let n = raw.n_rows();

    // Resolve categorical category lists (declared, or inferred sorted).
    let mut resolved: Vec<(usize, ResolvedKind)> = Vec::with_capacity(schema.columns.len());
    for col in &schema.columns {
        let idx = column_index(raw, &col.name)?;
        let kind = match &col.kind {
            ColumnKind::Numeric => ResolvedKind::Numeric,
            ColumnKind::Boolean => ResolvedKind::Boolean,
            ColumnKind::Ordinal { order } => ResolvedKind::Ordinal(order.clone()),
            ColumnKind::Categorical { categories } => {
                let cats = if categories.is_empty() {
                    let distinct: BTreeSet<String> =
                        raw.rows.iter().map(|r| r[idx].clone()).collect();
                    distinct.into_iter().collect()
                } else {
                    categories.clone()
                };
                ResolvedKind::Categorical(cats)
            }
        };
        resolved.push((idx, kind));
    }

    let mut feature_names = Vec::new();
    for (col, (_, kind)) in schema.columns.iter().zip(&resolved) {
        match kind {
            ResolvedKind::Numeric | ResolvedKind::Boolean | ResolvedKind::Ordinal(_) => {
                feature_names.push(col.name.clone());
            }
            ResolvedKind::Categorical(cats) => {
                for cat in cats {
                    feature_names.push(format!("{}={cat}", col.name));
                }
            }
        }
    }
    let m = feature_names.len();
    if m == 0 {
        return Err(Error::Schema("schema expands to zero features".into()));
    }

    let mut values = Array2::<f64>::zeros((n, m));
    for (row_i, row) in raw.rows.iter().enumerate() {
        let mut j = 0usize;
        for (col, (idx, kind)) in schema.columns.iter().zip(&resolved) {
            let cell = row[*idx].as_str();
            if cell.is_empty() {
                return Err(Error::Data(format!(
                    "missing value in column '{}', row {}",
                    col.name,
                    row_i + 2
                )));
            }
            match kind {
                ResolvedKind::Numeric => {
                    let v: f64 = cell.parse().map_err(|_| {
                        Error::Data(format!(
                            "column '{}', row {}: cannot parse '{cell}' as a number",
                            col.name,
                            row_i + 2
                        ))
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Data(format!(
                            "column '{}', row {}: non-finite value '{cell}'",
                            col.name,
                            row_i + 2
                        )));
                    }
                    values[[row_i, j]] = v;
                    j += 1;
                }
                ResolvedKind::Boolean => {
                    let v = match cell.to_ascii_lowercase().as_str() {
                        "0" | "false" => 0.0,
                        "1" | "true" => 1.0,
                        _ => {
                            return Err(Error::Data(format!(
                                "column '{}', row {}: cannot parse '{cell}' as boolean",
                                col.name,
                                row_i + 2
                            )))
                        }
                    };
                    values[[row_i, j]] = v;
                    j += 1;
                }
                ResolvedKind::Ordinal(order) => {
                    let rank = order.iter().position(|o| o == cell).ok_or_else(|| {
                        Error::Data(format!(
                            "unknown category value in column '{}', row {}: '{cell}'",
                            col.name,
                            row_i + 2
                        ))
                    })?;
                    values[[row_i, j]] = rank as f64;
                    j += 1;
                }
                ResolvedKind::Categorical(cats) => {
                    let pos = cats.iter().position(|c| c == cell).ok_or_else(|| {
                        Error::Data(format!(
                            "unknown category value in column '{}', row {}: '{cell}'",
                            col.name,
                            row_i + 2
                        ))
                    })?;
                    values[[row_i, j + pos]] = 1.0;
                    j += cats.len();
                }
            }
        }
        debug_assert_eq!(j, m);
    }

    // Label mapping: sorted distinct strings -> 1..=C.
    let mut class_names: Vec<String> = {
        let distinct: BTreeSet<String> = raw.rows.iter().map(|r| r[label_idx].clone()).collect();
        distinct.into_iter().collect()
    };
    if class_names.iter().any(|c| c.is_empty()) {
        return Err(Error::Data(format!(
            "missing value in label column '{}'",
            schema.label
        )));
    }
    class_names.sort();
    let labels: Vec<u32> = raw
        .rows
        .iter()
        .map(|r| {
            let pos = class_names
                .binary_search(&r[label_idx])
                .expect("label seen during scan");
            pos as u32 + 1
        })
        .collect();

    Ok(ExpandedTable {
        values,
        labels,
        class_names,
        feature_names,
    })
}

#[derive(Debug)]
enum ResolvedKind {
    Numeric,
    Boolean,
    Ordinal(Vec<String>),
    Categorical(Vec<String>),
}

/// Whether normalization statistics may see held-out rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitScope {
    /// Fit min/max on the training rows only; other rows are clamped.
    TrainOnly,
    /// Fit min/max on every row of the dataset.
    WholeDataset,
}

/// Per-feature min/max used by min-max normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub fit_scope: FitScope,
}

/// Compute per-feature min/max over `fit_rows` (train-only scope) or over all
/// rows (whole-dataset scope).
pub fn fit_normalization(
    values: ArrayView2<'_, f64>,
    fit_rows: &[usize],
    scope: FitScope,
) -> Result<NormalizationStats> {
    let all_rows: Vec<usize>;
    let rows: &[usize] = match scope {
        FitScope::TrainOnly => fit_rows,
        FitScope::WholeDataset => {
            all_rows = (0..values.nrows()).collect();
            &all_rows
        }
    };
    if rows.is_empty() {
        return Err(Error::Config("normalization fit over zero rows".into()));
    }
    let m = values.ncols();
    let mut mins = vec![f64::INFINITY; m];
    let mut maxs = vec![f64::NEG_INFINITY; m];
    for &r in rows {
        for j in 0..m {
            let v = values[[r, j]];
            if v < mins[j] {
                mins[j] = v;
            }
            if v > maxs[j] {
                maxs[j] = v;
            }
        }
    }
    Ok(NormalizationStats {
        mins,
        maxs,
        fit_scope: scope,
    })
}

/// Min-max normalize into `[0, 1]`, clamping values outside the fitted range.
///
/// Constant features (max == min) map to 0.5 everywhere: the feature stays
/// visible as a half-width bar instead of collapsing into the background.
pub fn apply_normalization(
    values: ArrayView2<'_, f64>,
    stats: &NormalizationStats,
) -> Result<Array2<f64>> {
    if stats.mins.len() != values.ncols() {
        return Err(Error::Config(format!(
            "normalization stats cover {} features, matrix has {}",
            stats.mins.len(),
            values.ncols()
        )));
    }
    let mut out = values.to_owned();
    for j in 0..out.ncols() {
        let (lo, hi) = (stats.mins[j], stats.maxs[j]);
        let range = hi - lo;
        for v in out.column_mut(j) {
            *v = if range == 0.0 {
                0.5
            } else {
                ((*v - lo) / range).clamp(0.0, 1.0)
            };
        }
    }
    Ok(out)
}

/// Fully normalized table: every value in `[0, 1]`, labels in `1..=C`.
#[derive(Debug, Clone)]
pub struct NormalizedTable {
    pub values: Array2<f64>,
    pub labels: Vec<u32>,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
}

impl NormalizedTable {
    /// Assemble and check invariants: values in `[0,1]` and finite, labels in
    /// `1..=C` with every class present, dimensions consistent.
    pub fn new(
        values: Array2<f64>,
        labels: Vec<u32>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if values.nrows() != labels.len() {
            return Err(Error::Data(format!(
                "{} rows but {} labels",
                values.nrows(),
                labels.len()
            )));
        }
        if values.ncols() != feature_names.len() {
            return Err(Error::Data(format!(
                "{} features but {} feature names",
                values.ncols(),
                feature_names.len()
            )));
        }
        if values
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0)
        {
            return Err(Error::Data(
                "normalized values must be finite and within [0, 1]".into(),
            ));
        }
        let c = class_names.len() as u32;
        let mut seen = vec![false; c as usize];
        for &label in &labels {
            if label < 1 || label > c {
                return Err(Error::Data(format!("label {label} outside 1..={c}")));
            }
            seen[(label - 1) as usize] = true;
        }
        if !seen.iter().all(|s| *s) {
            return Err(Error::Data("some class has no samples".into()));
        }
        Ok(NormalizedTable {
            values,
            labels,
            class_names,
            feature_names,
        })
    }

    /// Normalize an expanded table in one step (convenience for the
    /// whole-dataset scope).
    pub fn from_expanded(table: &ExpandedTable, scope: FitScope) -> Result<Self> {
        let stats = fit_normalization(
            table.values.view(),
            &(0..table.n_rows()).collect::<Vec<_>>(),
            scope,
        )?;
        let values = apply_normalization(table.values.view(), &stats)?;
        NormalizedTable::new(
            values,
            table.labels.clone(),
            table.class_names.clone(),
            table.feature_names.clone(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// One row as a feature slice.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).to_vec()
    }
}
