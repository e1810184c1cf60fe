//! Feature schema: declares how each input column is interpreted and how it
//! expands into normalized features.
//!
//! Schemas are TOML files, versioned with `schema_version = 1`:
//!
//! ```toml
//! schema_version = 1
//! label = "diagnosis"
//!
//! [[columns]]
//! name = "age"
//! kind = "numeric"
//!
//! [[columns]]
//! name = "stage"
//! kind = "ordinal"
//! order = ["I", "II", "III"]
//!
//! [[columns]]
//! name = "tissue"
//! kind = "categorical"
//! # categories = ["a", "b"]   # optional; inferred from the data when omitted
//!
//! [[columns]]
//! name = "smoker"
//! kind = "boolean"
//! ```
//!
//! Feature order in the rendered images follows the schema's column order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Current schema file format version.
pub const SCHEMA_VERSION: u32 = 1;

/// How a single input column is encoded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ColumnKind {
    /// Parsed as a real number.
    Numeric,
    /// Mapped to its 0-based rank in the declared order.
    Ordinal { order: Vec<String> },
    /// One-hot expanded, one indicator per category. When `categories` is
    /// empty the distinct cell values (sorted) are used.
    Categorical { categories: Vec<String> },
    /// Mapped to 0/1.
    Boolean,
}

/// One declared feature column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

/// Validated schema: feature columns plus the designated label column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeatureSchema {
    pub columns: Vec<Column>,
    pub label: String,
}

#[derive(Debug, Deserialize)]
struct SchemaFile {
    schema_version: u32,
    label: String,
    columns: Vec<ColumnFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ColumnFile {
    name: String,
    kind: String,
    order: Option<Vec<String>>,
    categories: Option<Vec<String>>,
}

fn has_duplicates(items: &[String]) -> Option<&str> {
    let mut seen = std::collections::HashSet::new();
    items
        .iter()
        .find(|it| !seen.insert(it.as_str()))
        .map(|s| s.as_str())
}

impl FeatureSchema {
    /// Parse and validate a schema from TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SchemaFile =
            toml::from_str(text).map_err(|e| Error::Schema(format!("invalid TOML: {e}")))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        if file.columns.is_empty() {
            return Err(Error::Schema("schema declares no feature columns".into()));
        }

        let mut columns = Vec::with_capacity(file.columns.len());
        for col in file.columns {
            let kind = match col.kind.as_str() {
                "numeric" => {
                    reject_extras(&col, "numeric")?;
                    ColumnKind::Numeric
                }
                "boolean" => {
                    reject_extras(&col, "boolean")?;
                    ColumnKind::Boolean
                }
                "ordinal" => {
                    if col.categories.is_some() {
                        return Err(Error::Schema(format!(
                            "column '{}': 'categories' is not valid for ordinal columns",
                            col.name
                        )));
                    }
                    let order = col.order.clone().unwrap_or_default();
                    if order.is_empty() {
                        return Err(Error::Schema(format!(
                            "ordinal column '{}' requires a non-empty 'order' list",
                            col.name
                        )));
                    }
                    if let Some(dup) = has_duplicates(&order) {
                        return Err(Error::Schema(format!(
                            "ordinal column '{}' has duplicate label '{dup}' in order",
                            col.name
                        )));
                    }
                    ColumnKind::Ordinal { order }
                }
                "categorical" => {
                    if col.order.is_some() {
                        return Err(Error::Schema(format!(
                            "column '{}': 'order' is only valid for ordinal columns",
                            col.name
                        )));
                    }
                    let categories = col.categories.clone().unwrap_or_default();
                    if let Some(dup) = has_duplicates(&categories) {
                        return Err(Error::Schema(format!(
                            "categorical column '{}' has duplicate category '{dup}'",
                            col.name
                        )));
                    }
                    ColumnKind::Categorical { categories }
                }
                other => {
                    return Err(Error::Schema(format!(
                        "column '{}': unknown kind '{other}' \
                         (expected numeric|ordinal|categorical|boolean)",
                        col.name
                    )));
                }
            };
            columns.push(Column {
                name: col.name,
                kind,
            });
        }

        let names: Vec<String> = columns.iter().map(|c| c.name.clone()).collect();
        if let Some(dup) = has_duplicates(&names) {
            return Err(Error::Schema(format!("duplicate column name '{dup}'")));
        }
        if names.contains(&file.label) {
            return Err(Error::Schema(format!(
                "label column '{}' must not also be declared as a feature column",
                file.label
            )));
        }

        Ok(FeatureSchema {
            columns,
            label: file.label,
        })
    }

    /// Load a schema from a TOML file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Hex SHA-256 over the canonical (JSON) form, recorded in manifests so a
    /// dataset can be tied back to the exact schema that produced it.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("schema serializes");
        hex::encode(Sha256::digest(canonical))
    }
}

fn reject_extras(col: &ColumnFile, kind: &str) -> Result<()> {
    if col.order.is_some() || col.categories.is_some() {
        return Err(Error::Schema(format!(
            "column '{}': 'order'/'categories' are not valid for {kind} columns",
            col.name
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
        schema_version = 1
        label = "y"

        [[columns]]
        name = "a"
        kind = "numeric"

        [[columns]]
        name = "b"
        kind = "ordinal"
        order = ["low", "mid", "high"]

        [[columns]]
        name = "c"
        kind = "categorical"

        [[columns]]
        name = "d"
        kind = "boolean"
    "#;

    #[test]
    fn parses_all_kinds() {
        let schema = FeatureSchema::from_toml_str(GOOD).unwrap();
        assert_eq!(schema.columns.len(), 4);
        assert_eq!(schema.label, "y");
        assert_eq!(
            schema.columns[1].kind,
            ColumnKind::Ordinal {
                order: vec!["low".into(), "mid".into(), "high".into()]
            }
        );
    }

    #[test]
    fn rejects_wrong_version() {
        let bad = GOOD.replace("schema_version = 1", "schema_version = 9");
        assert!(matches!(
            FeatureSchema::from_toml_str(&bad),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn rejects_duplicate_ordinal_labels() {
        let bad = GOOD.replace(r#"["low", "mid", "high"]"#, r#"["low", "low"]"#);
        let err = FeatureSchema::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("duplicate label"));
    }

    #[test]
    fn rejects_label_listed_as_feature() {
        let bad = GOOD.replace(r#"label = "y""#, r#"label = "a""#);
        let err = FeatureSchema::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("label column"));
    }

    #[test]
    fn digest_is_stable_and_distinguishes_schemas() {
        let a = FeatureSchema::from_toml_str(GOOD).unwrap();
        let b = FeatureSchema::from_toml_str(GOOD).unwrap();
        assert_eq!(a.digest(), b.digest());
        let other =
            FeatureSchema::from_toml_str(&GOOD.replace(r#"name = "a""#, r#"name = "z""#)).unwrap();
        assert_ne!(a.digest(), other.digest());
    }
}
