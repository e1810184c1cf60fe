//! `barview`: encode tabular data as bar images, augment, build leakage-safe
//! image datasets, verify them, and probe them with a linear classifier.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use barview_core::augment::AugmentConfig;
use barview_core::error::Error;
use barview_core::ingest::{
    expand_features, parse_table, ExpandedTable, FitScope, NormalizedTable,
};
use barview_core::layout::{make_layout, LayoutSpec};
use barview_core::pipeline::{
    build_dataset, verify_no_leakage, BuildOptions, DatasetManifest, Split, MANIFEST_FILE,
};
use barview_core::probe::{evaluate_probe, train_probe, ProbeConfig, Representation};
use barview_core::raster::{rasterize, write_png};
use barview_core::rng::RngStream;
use barview_core::schema::{FeatureSchema, SCHEMA_VERSION};
use barview_core::split::make_splits;
use barview_core::sweep::{layout_sweep, SweepOptions};
use barview_core::verify::roundtrip_report;

const LONG_VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (schema v1, manifest v1)");

#[derive(Parser)]
#[command(
    name = "barview",
    about = "Tabular datasets rendered as bar images, with tailored augmentation",
    version,
    long_version = LONG_VERSION
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize every row of a table into a PNG (no folds, no augmentation).
    Encode(EncodeArgs),
    /// Render one row plus a handful of augmented variants, for inspection.
    AugmentPreview(AugmentPreviewArgs),
    /// Build the full cross-validated, augmented image dataset with manifest.
    Build(BuildArgs),
    /// Check a built dataset (leakage, checksums) or report decode fidelity.
    Verify(VerifyArgs),
    /// Train and evaluate the linear probe on a built dataset.
    Probe(ProbeArgs),
    /// Measure decode fidelity and probe metrics across row arrangements.
    LayoutSweep(LayoutSweepArgs),
}

#[derive(Args)]
struct InputOpts {
    /// Delimiter-separated input table with a header line.
    #[arg(long)]
    input: PathBuf,
    /// Schema TOML describing the columns.
    #[arg(long)]
    schema: PathBuf,
    /// Cell delimiter.
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

#[derive(Args)]
struct LayoutOpts {
    /// Canvas width in pixels.
    #[arg(long, default_value_t = 224)]
    width: u32,
    /// Canvas height in pixels.
    #[arg(long, default_value_t = 224)]
    height: u32,
    /// Bar rows (reduced automatically if some rows would stay empty).
    #[arg(long, default_value_t = 1)]
    rows: u32,
}

#[derive(Args)]
struct AugmentOpts {
    /// Augmented copies per training image.
    #[arg(long, default_value_t = 4)]
    k: u32,
    /// Elastic displacement intensity, pixels.
    #[arg(long, default_value_t = 50.0)]
    alpha: f64,
    /// Gaussian smoothing std-dev of the displacement field, pixels.
    #[arg(long, default_value_t = 4.0)]
    sigma: f64,
    /// Probability of the dilation branch.
    #[arg(long, default_value_t = 0.7)]
    p_dilate: f64,
    /// Probability of the erosion branch.
    #[arg(long, default_value_t = 0.7)]
    p_erode: f64,
    /// Max structuring-element size as HxW (applies to both dilation and
    /// erosion elements).
    #[arg(long, default_value = "2x5", value_parser = parse_se_max)]
    se_max: (u32, u32),
}

impl AugmentOpts {
    fn to_config(&self) -> AugmentConfig {
        AugmentConfig {
            alpha: self.alpha,
            sigma: self.sigma,
            p_dilate: self.p_dilate,
            p_erode: self.p_erode,
            se_dilate_max: self.se_max,
            se_erode_max: self.se_max,
            k: self.k,
        }
    }
}

fn parse_se_max(s: &str) -> Result<(u32, u32), String> {
    let parts: Vec<&str> = s.split(['x', 'X', ',']).collect();
    if parts.len() != 2 {
        return Err(format!("expected HxW (e.g. 2x5), got '{s}'"));
    }
    let h = parts[0]
        .trim()
        .parse()
        .map_err(|_| format!("bad height in '{s}'"))?;
    let w = parts[1]
        .trim()
        .parse()
        .map_err(|_| format!("bad width in '{s}'"))?;
    if h < 1 || w < 1 {
        return Err("structuring element dims must be >= 1".into());
    }
    Ok((h, w))
}

#[derive(Args)]
struct OutOpt {
    /// Output directory. Defaults to $BARVIEW_OUT_ROOT/<input stem>.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutOpt {
    fn resolve(&self, input: &Path) -> Result<PathBuf, Error> {
        if let Some(out) = &self.out {
            return Ok(out.clone());
        }
        if let Ok(root) = std::env::var("BARVIEW_OUT_ROOT") {
            let stem = input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into());
            return Ok(PathBuf::from(root).join(stem));
        }
        Err(Error::Config(
            "no output directory: pass --out or set BARVIEW_OUT_ROOT".into(),
        ))
    }
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    input: InputOpts,
    #[command(flatten)]
    layout: LayoutOpts,
    #[command(flatten)]
    out: OutOpt,
    /// Seed for the color palette.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct AugmentPreviewArgs {
    #[command(flatten)]
    input: InputOpts,
    #[command(flatten)]
    layout: LayoutOpts,
    #[command(flatten)]
    augment: AugmentOpts,
    #[command(flatten)]
    out: OutOpt,
    /// Row to preview (0-based).
    #[arg(long, default_value_t = 0)]
    row: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    input: InputOpts,
    #[command(flatten)]
    layout: LayoutOpts,
    #[command(flatten)]
    augment: AugmentOpts,
    #[command(flatten)]
    out: OutOpt,
    /// Root seed for splits, palette, and augmentation streams.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 5)]
    folds: u32,
    /// Fit normalization on the whole dataset (replicates the original
    /// behavior) instead of per-fold training rows.
    #[arg(long)]
    paper_normalization: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Built dataset directory: verify manifest checksums and leakage rules.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Input table: report decode round-trip fidelity instead.
    #[arg(long, requires = "schema")]
    input: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    #[command(flatten)]
    layout: LayoutOpts,
    #[command(flatten)]
    augment: AugmentOpts,
    /// Augmented decode trials for the fidelity report.
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct ProbeArgs {
    /// Built dataset directory (with manifest.jsonl).
    #[arg(long)]
    dataset: PathBuf,
    /// Probe input representation.
    #[arg(long, value_enum, default_value_t = RepresentationArg::Decoded)]
    representation: RepresentationArg,
    /// Downsampled square side for the pixel representation.
    #[arg(long, default_value_t = 28)]
    pixel_side: u32,
    #[arg(long, default_value_t = 0.5)]
    learning_rate: f64,
    #[arg(long, default_value_t = 200)]
    epochs: u32,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum RepresentationArg {
    /// Decoded per-feature bar widths.
    Decoded,
    /// Box-downsampled RGB pixels.
    Pixels,
}

#[derive(Args)]
struct LayoutSweepArgs {
    #[command(flatten)]
    input: InputOpts,
    /// Comma-separated row counts to sweep.
    #[arg(long, default_value = "1,2,4,8,16", value_delimiter = ',')]
    rows_list: Vec<u32>,
    #[arg(long, default_value_t = 224)]
    width: u32,
    #[arg(long, default_value_t = 224)]
    height: u32,
    #[command(flatten)]
    augment: AugmentOpts,
    /// Augmented decode trials per arrangement.
    #[arg(long, default_value_t = 300)]
    trials: usize,
    #[arg(long, default_value_t = 5)]
    folds: u32,
    #[arg(long, default_value_t = 200)]
    epochs: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("barview: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Configuration, input, and I/O problems exit 2; integrity failures exit 1.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Integrity(_) => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Encode(args) => cmd_encode(args),
        Command::AugmentPreview(args) => cmd_augment_preview(args),
        Command::Build(args) => cmd_build(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Probe(args) => cmd_probe(args),
        Command::LayoutSweep(args) => cmd_layout_sweep(args),
    }
}

fn load_table(opts: &InputOpts) -> Result<(ExpandedTable, FeatureSchema), Error> {
    let schema = FeatureSchema::load(&opts.schema)?;
    let file = File::open(&opts.input).map_err(|e| Error::io(&opts.input, e))?;
    let raw = parse_table(file, opts.delimiter)?;
    let table = expand_features(&raw, &schema)?;
    Ok((table, schema))
}

fn layout_for(table: &ExpandedTable, layout: &LayoutOpts, seed: u64) -> Result<LayoutSpec, Error> {
    make_layout(
        table.n_features() as u32,
        layout.rows,
        layout.width,
        layout.height,
        seed,
    )
}

fn cmd_encode(args: EncodeArgs) -> Result<ExitCode, Error> {
    let (table, _) = load_table(&args.input)?;
    let layout = layout_for(&table, &args.layout, args.seed)?;
    let normalized = NormalizedTable::from_expanded(&table, FitScope::WholeDataset)?;
    let out_dir = args.out.resolve(&args.input.input)?;
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    for i in 0..normalized.n_rows() {
        let img = rasterize(&normalized.row(i), &layout)?;
        write_png(&img, &out_dir.join(format!("row_{i:06}.png")))?;
    }
    println!(
        "{}",
        serde_json::json!({
            "images": normalized.n_rows(),
            "features": layout.m,
            "rows": layout.rows,
            "cols": layout.cols,
            "bar_width_px": layout.bar_width,
            "bar_height_px": layout.bar_height,
            "out": out_dir,
        })
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_augment_preview(args: AugmentPreviewArgs) -> Result<ExitCode, Error> {
    let (table, _) = load_table(&args.input)?;
    if args.row >= table.n_rows() {
        return Err(Error::Config(format!(
            "row {} outside 0..{}",
            args.row,
            table.n_rows()
        )));
    }
    let layout = layout_for(&table, &args.layout, args.seed)?;
    let cfg = args.augment.to_config();
    cfg.validate()?;
    let normalized = NormalizedTable::from_expanded(&table, FitScope::WholeDataset)?;
    let out_dir = args.out.resolve(&args.input.input)?;
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let original = rasterize(&normalized.row(args.row), &layout)?;
    write_png(
        &original,
        &out_dir.join(format!("row_{:06}_orig.png", args.row)),
    )?;
    let stream = RngStream::from_root(args.seed)
        .child("augment")
        .child_index(args.row as u64);
    for aug in 1..=cfg.k {
        let img = barview_core::augment_image(&original, &cfg, &stream.child_index(u64::from(aug)));
        write_png(
            &img,
            &out_dir.join(format!("row_{:06}_aug{aug:02}.png", args.row)),
        )?;
    }
    println!(
        "{}",
        serde_json::json!({ "row": args.row, "variants": cfg.k, "out": out_dir })
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_build(args: BuildArgs) -> Result<ExitCode, Error> {
    let (table, schema) = load_table(&args.input)?;
    let layout = layout_for(&table, &args.layout, args.seed)?;
    let augment = args.augment.to_config();
    augment.validate()?;
    let plan = make_splits(&table, args.folds, args.seed, true)?;
    let scope = if args.paper_normalization {
        FitScope::WholeDataset
    } else {
        FitScope::TrainOnly
    };
    let opts = BuildOptions {
        scope,
        root_seed: args.seed,
        schema_digest: schema.digest(),
        schema_version: SCHEMA_VERSION,
    };
    let out_dir = args.out.resolve(&args.input.input)?;
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let manifest = build_dataset(&table, &plan, &layout, &augment, &opts, &out_dir)?;

    let per_fold: Vec<serde_json::Value> = plan
        .folds()
        .map(|fold| {
            let train = manifest
                .records
                .iter()
                .filter(|r| r.fold == fold && r.split == Split::Train)
                .count();
            let test = manifest
                .records
                .iter()
                .filter(|r| r.fold == fold && r.split == Split::Test)
                .count();
            serde_json::json!({ "fold": fold, "train_images": train, "test_images": test })
        })
        .collect();
    println!(
        "{}",
        serde_json::json!({
            "rows": table.n_rows(),
            "features": layout.m,
            "classes": table.n_classes(),
            "k": augment.k,
            "folds": per_fold,
            "total_images": manifest.records.len(),
            "manifest": out_dir.join(MANIFEST_FILE),
        })
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, Error> {
    let mut failed = false;
    let mut did_anything = false;

    if let Some(dataset) = &args.dataset {
        did_anything = true;
        let manifest = DatasetManifest::read(&dataset.join(MANIFEST_FILE))?;
        let report = verify_no_leakage(&manifest, dataset);
        for problem in &report.problems {
            println!("{}", serde_json::json!({ "problem": problem }));
        }
        println!(
            "{}",
            serde_json::json!({
                "dataset": dataset,
                "records": report.n_records,
                "pass": report.pass,
            })
        );
        failed |= !report.pass;
    }

    if let Some(input) = &args.input {
        did_anything = true;
        let schema_path = args.schema.as_ref().expect("clap enforces requires");
        let input_opts = InputOpts {
            input: input.clone(),
            schema: schema_path.clone(),
            delimiter: args.delimiter,
        };
        let (table, _) = load_table(&input_opts)?;
        let layout = layout_for(&table, &args.layout, args.seed)?;
        let cfg = args.augment.to_config();
        let normalized = NormalizedTable::from_expanded(&table, FitScope::WholeDataset)?;
        let report = roundtrip_report(&normalized, &layout, &cfg, args.trials, args.seed)?;
        for f in &report.per_feature {
            println!("{}", serde_json::to_string(f).expect("serializable"));
        }
        println!(
            "{}",
            serde_json::json!({
                "clean_mean": report.clean_mean,
                "clean_max": report.clean_max,
                "aug_mean": report.aug_mean,
                "aug_max": report.aug_max,
                "n_clean": report.n_clean,
                "n_aug": report.n_aug,
            })
        );
    }

    if !did_anything {
        return Err(Error::Config(
            "nothing to verify: pass --dataset and/or --input with --schema".into(),
        ));
    }
    if failed {
        return Err(Error::Integrity("dataset verification failed".into()));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_probe(args: ProbeArgs) -> Result<ExitCode, Error> {
    let manifest = DatasetManifest::read(&args.dataset.join(MANIFEST_FILE))?;
    let representation = match args.representation {
        RepresentationArg::Decoded => Representation::DecodedFeatures,
        RepresentationArg::Pixels => Representation::PixelsDownsampled {
            side: args.pixel_side,
        },
    };
    let cfg = ProbeConfig {
        representation,
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        l2: args.l2,
        batch_size: args.batch_size,
        seed: args.seed,
    };
    let mut f1_sum = 0.0;
    let mut auc_sum = 0.0;
    let folds = manifest.header.folds;
    for fold in 0..folds {
        let model = train_probe(&args.dataset, &manifest, fold, &cfg)?;
        let metrics = evaluate_probe(&model, &args.dataset, &manifest, fold, representation)?;
        f1_sum += metrics.macro_f1;
        auc_sum += metrics.auc;
        println!(
            "{}",
            serde_json::json!({ "fold": fold, "macro_f1": metrics.macro_f1, "auc": metrics.auc })
        );
    }
    println!(
        "{}",
        serde_json::json!({
            "mean": {
                "macro_f1": f1_sum / f64::from(folds),
                "auc": auc_sum / f64::from(folds),
            }
        })
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_layout_sweep(args: LayoutSweepArgs) -> Result<ExitCode, Error> {
    let (table, _) = load_table(&args.input)?;
    let opts = SweepOptions {
        width: args.width,
        height: args.height,
        augment: args.augment.to_config(),
        probe: ProbeConfig {
            epochs: args.epochs,
            seed: args.seed,
            ..ProbeConfig::default()
        },
        folds: args.folds,
        n_trials: args.trials,
        seed: args.seed,
    };
    let entries = layout_sweep(&table, &args.rows_list, &opts)?;
    let mut stdout = std::io::stdout().lock();
    for entry in &entries {
        writeln!(
            stdout,
            "{}",
            serde_json::to_string(entry).expect("serializable")
        )
        .map_err(|e| Error::io("stdout", e))?;
    }
    Ok(ExitCode::SUCCESS)
}
