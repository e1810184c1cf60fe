//! Property tests for the geometry, ingestion, and rasterization invariants.

use std::collections::HashSet;

use barview_core::ingest::{
    apply_normalization, expand_features, expanded_width, fit_normalization, parse_table, FitScope,
};
use barview_core::layout::make_layout;
use barview_core::raster::rasterize;
use barview_core::schema::FeatureSchema;
use proptest::prelude::*;

proptest! {
    /// Grid identities for any feasible (m, r) up to 10k features.
    #[test]
    fn layout_identities(m in 1u32..=10_000, r_frac in 0.0f64..1.0) {
        let r = 1 + (r_frac * (m - 1) as f64).floor() as u32;
        let width = m.max(224); // every bar at least one pixel wide
        let height = m.max(224);
        let layout = make_layout(m, r, width, height, 0).unwrap();

        prop_assert_eq!(layout.cols, m.div_ceil(r));
        prop_assert!(layout.rows <= r);
        prop_assert!(layout.rows * layout.cols >= m);
        prop_assert!((layout.rows - 1) * layout.cols < m);
        prop_assert!((layout.bar_width * f64::from(layout.cols) - f64::from(width)).abs() < 1e-6);
        prop_assert!((layout.bar_height * f64::from(layout.rows) - f64::from(height)).abs() < 1e-6);

        // Placements: unique cells, inside the canvas.
        let mut cells = HashSet::new();
        for j in 0..m as usize {
            let p = layout.placement(j, 1.0);
            prop_assert!(cells.insert((p.row, p.col)));
            prop_assert!(p.row < layout.rows && p.col < layout.cols);
            prop_assert!(p.x_start >= 0.0 && p.y_start >= 0.0);
            prop_assert!(p.x_start + layout.bar_width <= f64::from(width) + 1e-6);
            prop_assert!(p.y_start + p.height <= f64::from(height) + 1e-6);
        }
    }
}

/// Random schema + matching random raw table; expansion width must equal the
/// schema-predicted width.
fn arb_schema_and_rows() -> impl Strategy<Value = (String, Vec<Vec<String>>)> {
    let kind = prop_oneof![
        Just("numeric"),
        Just("boolean"),
        Just("ordinal"),
        Just("categorical"),
    ];
    (
        proptest::collection::vec((kind, 2usize..5), 1..6),
        1usize..12,
    )
        .prop_map(|(cols, n_rows)| {
            let mut toml = String::from("schema_version = 1\nlabel = \"y\"\n");
            for (i, (kind, cardinality)) in cols.iter().enumerate() {
                toml.push_str(&format!(
                    "\n[[columns]]\nname = \"col{i}\"\nkind = \"{kind}\"\n"
                ));
                if *kind == "ordinal" {
                    let order: Vec<String> =
                        (0..*cardinality).map(|v| format!("\"v{v}\"")).collect();
                    toml.push_str(&format!("order = [{}]\n", order.join(", ")));
                } else if *kind == "categorical" {
                    let cats: Vec<String> =
                        (0..*cardinality).map(|v| format!("\"v{v}\"")).collect();
                    toml.push_str(&format!("categories = [{}]\n", cats.join(", ")));
                }
            }
            let rows: Vec<Vec<String>> = (0..n_rows)
                .map(|row| {
                    let mut cells: Vec<String> = cols
                        .iter()
                        .enumerate()
                        .map(|(i, (kind, cardinality))| match *kind {
                            "numeric" => format!("{}.5", (row * 7 + i) % 100),
                            "boolean" => if (row + i) % 2 == 0 { "true" } else { "0" }.to_string(),
                            _ => format!("v{}", (row + i) % cardinality),
                        })
                        .collect();
                    cells.push(format!("class{}", row % 2));
                    cells
                })
                .collect();
            (toml, rows)
        })
}

proptest! {
    #[test]
    fn expansion_width_matches_prediction((toml, rows) in arb_schema_and_rows()) {
        let schema = FeatureSchema::from_toml_str(&toml).unwrap();
        let mut csv = schema
            .columns
            .iter()
            .map(|c| c.name.clone())
            .collect::<Vec<_>>()
            .join(",");
        csv.push_str(",y\n");
        for row in &rows {
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
        let raw = parse_table(csv.as_bytes(), ',').unwrap();
        let predicted = expanded_width(&raw, &schema).unwrap();
        let expanded = expand_features(&raw, &schema).unwrap();
        prop_assert_eq!(expanded.n_features(), predicted);
        prop_assert_eq!(expanded.n_rows(), rows.len());
    }

    /// Normalization output is always finite, inside [0,1], and
    /// order-preserving on non-constant features.
    #[test]
    fn normalization_is_bounded_and_monotone(
        raw in proptest::collection::vec(-1e6f64..1e6, 2..40),
        fit_hi in 0.1f64..1.0,
    ) {
        let n = raw.len();
        let values = ndarray::Array2::from_shape_vec((n, 1), raw.clone()).unwrap();
        let n_fit = ((n as f64 * fit_hi).ceil() as usize).clamp(1, n);
        let fit_rows: Vec<usize> = (0..n_fit).collect();
        let stats = fit_normalization(values.view(), &fit_rows, FitScope::TrainOnly).unwrap();
        let normed = apply_normalization(values.view(), &stats).unwrap();
        for v in normed.iter() {
            prop_assert!(v.is_finite());
            prop_assert!((0.0..=1.0).contains(v));
        }
        for i in 0..n {
            for j in 0..n {
                if raw[i] < raw[j] {
                    prop_assert!(normed[[i, 0]] <= normed[[j, 0]]);
                }
            }
        }
    }

    /// More of a feature never yields fewer non-background pixels in its cell.
    #[test]
    fn raster_monotone_in_value(
        m in 1u32..12,
        j_frac in 0.0f64..1.0,
        lo in 0.0f64..1.0,
        hi in 0.0f64..1.0,
    ) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let layout = make_layout(m, 1, 224, 112, 5).unwrap();
        let j = ((j_frac * f64::from(m - 1)).floor() as usize).min(m as usize - 1);

        let count_nonbg = |v: f64| {
            let mut sample = vec![0.0; m as usize];
            sample[j] = v;
            let img = rasterize(&sample, &layout).unwrap();
            let mut count = 0usize;
            for y in 0..img.height {
                for x in 0..img.width {
                    if img.get(x, y) != layout.background {
                        count += 1;
                    }
                }
            }
            count
        };
        prop_assert!(count_nonbg(lo) <= count_nonbg(hi));
    }
}
