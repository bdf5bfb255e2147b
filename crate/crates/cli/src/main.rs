//! isim-forge: fit object-distribution graphs from detection annotations,
//! sample layouts, and export verified condition bundles.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error, 3 IO or
//! parse error.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use isim_forge::bundle::{
    export_bundle, verify_bundle, BatchConfig, BatchManifest, BundleEntry, VerifyConfig,
    BUNDLE_FORMAT_VERSION,
};
use isim_forge::canon;
use isim_forge::dataset::{load_json_labels, load_voc_xml, IngestResult};
use isim_forge::error::Error;
use isim_forge::fidelity::{
    ablate, ablation_grid, evaluate_fidelity, render_grid_table, AblationFactor, AblationRow,
    FidelityReport,
};
use isim_forge::layout::{sample_layout, Layout, SamplerConfig};
use isim_forge::scdkg::{fit_scdkg, load_scdkg, save_scdkg, FitConfig, Scdkg};
use isim_forge::seed::split_seed;
use isim_forge::{isim, Result};

#[derive(Parser)]
#[command(
    name = "isim-forge",
    version,
    about = "Layout synthesis toolkit: fit, sample, render, export, verify"
)]
struct Cli {
    /// Worker threads (falls back to ISIM_FORGE_JOBS, then all cores).
    /// Output bytes never depend on this.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a dependency graph from an annotation corpus.
    Fit(FitArgs),
    /// Sample layouts from a graph and export condition bundles.
    Generate(GenerateArgs),
    /// Verify every bundle in a directory against its own files.
    Validate(ValidateArgs),
    /// Measure how faithfully sampled layouts reproduce a graph.
    Fidelity(FidelityArgs),
    /// Print a graph's class table, gray table, and interdependency matrix.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Directory of VOC-style XML files (or labels manifests with
    /// --format labels).
    #[arg(long)]
    annotations: PathBuf,
    /// Output graph file.
    #[arg(long)]
    out: PathBuf,
    /// Annotation format: voc | labels.
    #[arg(long, default_value = "voc")]
    format: String,
    /// Histogram bins for 1d attribute densities.
    #[arg(long, default_value_t = 64)]
    bins_1d: usize,
    /// Histogram bins per axis for the location density.
    #[arg(long, default_value_t = 32)]
    bins_2d: usize,
    /// Classes with fewer annotations fall back to pooled geometry.
    #[arg(long, default_value_t = 20)]
    min_samples: usize,
    /// Machine-readable summary on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GenerateArgs {
    /// Fitted graph file.
    #[arg(long)]
    scdkg: PathBuf,
    /// Output bundle directory.
    #[arg(long)]
    out: PathBuf,
    /// Number of bundles.
    #[arg(long)]
    count: usize,
    /// Base seed; omitted, a random one is drawn and logged.
    #[arg(long)]
    seed: Option<u64>,
    /// Image size as WxH.
    #[arg(long, default_value = "800x800")]
    image_size: String,
    /// Same-class IoU above which geometry is re-drawn (0 disables).
    #[arg(long, default_value_t = 0.3)]
    max_iou: f64,
    /// Geometry re-draws per object before accepting as-is.
    #[arg(long, default_value_t = 10)]
    max_retries: u32,
    /// Ceiling on objects per layout.
    #[arg(long, default_value_t = 100)]
    max_objects: usize,
    /// Replace bundles that already exist.
    #[arg(long)]
    overwrite: bool,
    /// Keep existing bundles and only produce the missing ones.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Bundle directory (reads manifest.json when present).
    bundle_dir: PathBuf,
    /// Fraction of an object's region that must carry its gray value.
    #[arg(long, default_value_t = 0.5)]
    floor: f64,
    /// Machine-readable report on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct FidelityArgs {
    /// Fitted graph file.
    #[arg(long)]
    scdkg: PathBuf,
    /// Evaluate existing bundles from this directory.
    #[arg(long, conflicts_with = "sample")]
    bundles: Option<PathBuf>,
    /// Sample this many fresh layouts instead.
    #[arg(long)]
    sample: Option<usize>,
    /// Base seed for --sample.
    #[arg(long)]
    seed: Option<u64>,
    /// Image size as WxH for --sample.
    #[arg(long, default_value = "800x800")]
    image_size: String,
    /// Same-class IoU cap while sampling (0 keeps marginals unbiased).
    #[arg(long, default_value_t = 0.0)]
    max_iou: f64,
    /// Factors to ablate before sampling: aspect, scale, location, p_id.
    #[arg(long, value_delimiter = ',')]
    ablate: Vec<String>,
    /// Run the full nine-variant ablation grid.
    #[arg(long, conflicts_with = "ablate")]
    grid: bool,
    /// Machine-readable report on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct InspectArgs {
    /// Fitted graph file.
    #[arg(long)]
    scdkg: PathBuf,
    /// Machine-readable dump on stdout.
    #[arg(long)]
    json: bool,
}

fn main() {
    let cli = Cli::parse();
    configure_pool(cli.jobs);
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidInput(_) => 2,
                _ => 3,
            }
        }
    };
    std::process::exit(code);
}

fn configure_pool(jobs: Option<usize>) {
    let jobs = jobs.or_else(|| {
        std::env::var("ISIM_FORGE_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = jobs.filter(|n| *n > 0) {
        // Ignore failure: the global pool can only be set once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Fit(args) => cmd_fit(args),
        Command::Generate(args) => cmd_generate(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Fidelity(args) => cmd_fidelity(args),
        Command::Inspect(args) => cmd_inspect(args),
    }
}

/// One log line per run so any output can be reproduced post hoc.
fn log_run(subcommand: &str, seed: Option<u64>, config_digest: &str, scdkg_digest: &str) {
    let seed = seed.map_or("-".to_string(), |s| s.to_string());
    eprintln!(
        "isim-forge {} {subcommand} seed={seed} config={} scdkg={}",
        env!("CARGO_PKG_VERSION"),
        canon::short_digest(config_digest),
        canon::short_digest(scdkg_digest),
    );
}

fn parse_image_size(text: &str) -> Result<(u32, u32)> {
    let (w, h) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::InvalidInput(format!("image size {text:?} is not WxH")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<u32>()
            .map_err(|_| Error::InvalidInput(format!("bad image dimension {s:?}")))
    };
    Ok((parse(w)?, parse(h)?))
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random::<u64>)
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

fn cmd_fit(args: FitArgs) -> Result<i32> {
    let cfg = FitConfig {
        bins_1d: args.bins_1d,
        bins_2d: (args.bins_2d, args.bins_2d),
        min_samples: args.min_samples,
    };
    let config_digest = canon::digest_of(&(&args.format, &cfg))?;

    let ingest: IngestResult = match args.format.as_str() {
        "voc" => load_voc_xml(&args.annotations)?,
        "labels" => load_json_labels(&args.annotations)?,
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown annotation format {other:?} (expected voc or labels)"
            )))
        }
    };
    for issue in &ingest.file_errors {
        eprintln!("skipped {}: {}", issue.path.display(), issue.message);
    }
    for warning in &ingest.warnings {
        eprintln!("warning: {warning}");
    }

    let graph = fit_scdkg(&ingest.dataset, &cfg)?;
    save_scdkg(&graph, &args.out)?;
    log_run("fit", None, &config_digest, graph.digest());

    #[derive(Serialize)]
    struct FitSummary<'a> {
        out: String,
        scdkg_digest: &'a str,
        classes: u16,
        images: usize,
        annotations: usize,
        skipped_files: usize,
        warnings: usize,
    }
    let summary = FitSummary {
        out: args.out.display().to_string(),
        scdkg_digest: graph.digest(),
        classes: graph.class_count(),
        images: ingest.dataset.images.len(),
        annotations: ingest.dataset.annotation_count(),
        skipped_files: ingest.file_errors.len(),
        warnings: ingest.warnings.len(),
    };
    if args.json {
        print!("{}", canon::to_canonical_json(&summary)?);
    } else {
        println!(
            "fitted {} classes from {} images / {} annotations -> {}",
            summary.classes, summary.images, summary.annotations, summary.out
        );
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

fn cmd_generate(args: GenerateArgs) -> Result<i32> {
    let image_size = parse_image_size(&args.image_size)?;
    let sampler = SamplerConfig {
        max_objects: args.max_objects,
        max_iou: args.max_iou,
        max_retries: args.max_retries,
    };
    let graph = load_scdkg(&args.scdkg)?;
    let base_seed = resolve_seed(args.seed);
    let cfg = BatchConfig::new(base_seed, &sampler);
    let config_digest = canon::digest_of(&(&cfg, image_size, args.count))?;
    log_run("generate", Some(base_seed), &config_digest, graph.digest());

    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let mut existing: Vec<BundleEntry> = Vec::new();
    if BatchManifest::path_in(&args.out).exists() {
        if args.resume {
            let manifest = BatchManifest::read(&args.out)?;
            if manifest.scdkg_digest != graph.digest()
                || manifest.image_size != [image_size.0, image_size.1]
                || manifest.cfg != cfg
            {
                return Err(Error::InvalidInput(
                    "existing manifest was produced with a different graph, size, or config; \
                     refusing to resume into it"
                        .into(),
                ));
            }
            existing = manifest.bundles;
        } else if !args.overwrite {
            return Err(Error::BundleExists(format!(
                "{} already holds a batch (use --resume or --overwrite)",
                args.out.display()
            )));
        }
    }
    let done: BTreeSet<u64> = existing.iter().map(|b| b.index).collect();

    let todo: Vec<u64> = (0..args.count as u64).filter(|i| !done.contains(i)).collect();
    let new_entries: Vec<BundleEntry> = todo
        .into_par_iter()
        .map(|index| {
            let layout = sample_layout(&graph, image_size, split_seed(base_seed, index), &sampler)?;
            let bundle = export_bundle(&layout, &args.out, index, args.overwrite || args.resume)?;
            Ok(BundleEntry::from_bundle(&bundle, index))
        })
        .collect::<Result<_>>()?;

    let mut bundles = existing;
    bundles.extend(new_entries);
    let produced = bundles.len();
    let manifest = BatchManifest {
        format_version: BUNDLE_FORMAT_VERSION.to_string(),
        scdkg_digest: graph.digest().to_string(),
        image_size: [image_size.0, image_size.1],
        cfg,
        bundles,
    };
    manifest.write(&args.out)?;
    println!(
        "exported {produced} bundles to {} (seed {base_seed})",
        args.out.display()
    );
    Ok(0)
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

fn cmd_validate(args: ValidateArgs) -> Result<i32> {
    let dir = &args.bundle_dir;
    let ids = bundle_ids_in(dir)?;
    if ids.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no bundles found under {}",
            dir.display()
        )));
    }
    let verify_cfg = VerifyConfig {
        dominance_floor: args.floor,
    };
    let reports = ids
        .par_iter()
        .map(|id| verify_bundle(dir, id, &verify_cfg))
        .collect::<Result<Vec<_>>>()?;

    let failed = reports.iter().filter(|r| !r.passed()).count();
    if args.json {
        print!("{}", canon::to_canonical_json(&reports)?);
    } else {
        for r in &reports {
            let status = if r.passed() { "ok" } else { "FAIL" };
            println!(
                "{status:4} {} acc_c={:.3} acc_n={:.3}",
                r.bundle_id, r.acc_c, r.acc_n
            );
            for v in &r.violations {
                println!("       - {v}");
            }
        }
        println!("{} bundles checked, {failed} failed", reports.len());
    }
    Ok(if failed > 0 { 1 } else { 0 })
}

/// Bundle ids from the batch manifest, or from labels files when no
/// manifest exists.
fn bundle_ids_in(dir: &Path) -> Result<Vec<String>> {
    if BatchManifest::path_in(dir).exists() {
        return Ok(BatchManifest::read(dir)?
            .bundles
            .into_iter()
            .map(|b| b.bundle_id)
            .collect());
    }
    let mut ids = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if let Some(name) = entry.file_name().to_str() {
            if let Some(id) = name.strip_suffix(".labels.json") {
                ids.push(id.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

// ---------------------------------------------------------------------------
// fidelity
// ---------------------------------------------------------------------------

fn cmd_fidelity(args: FidelityArgs) -> Result<i32> {
    let graph = load_scdkg(&args.scdkg)?;
    let image_size = parse_image_size(&args.image_size)?;
    let sampler = SamplerConfig {
        max_iou: args.max_iou,
        ..SamplerConfig::default()
    };
    let base_seed = resolve_seed(args.seed);
    let config_digest = canon::digest_of(&(&args.ablate, args.grid, args.sample, image_size))?;
    log_run("fidelity", Some(base_seed), &config_digest, graph.digest());

    if args.grid {
        let count = args.sample.ok_or_else(|| {
            Error::InvalidInput("--grid requires --sample N to draw each variant".into())
        })?;
        let mut results: Vec<(AblationRow, FidelityReport)> = Vec::new();
        for row in ablation_grid() {
            let variant = ablate(&graph, &row.disabled())?;
            let layouts = sample_many(&variant, image_size, base_seed, count, &sampler)?;
            let report = evaluate_fidelity(&graph, &layouts)?;
            results.push((row, report));
        }
        if args.json {
            #[derive(Serialize)]
            struct GridRow<'a> {
                row: usize,
                enabled: Vec<&'a str>,
                report: &'a FidelityReport,
            }
            let rows: Vec<GridRow> = results
                .iter()
                .map(|(row, report)| GridRow {
                    row: row.row,
                    enabled: row.enabled.iter().map(|f| f.label()).collect(),
                    report,
                })
                .collect();
            print!("{}", canon::to_canonical_json(&rows)?);
        } else {
            print!("{}", render_grid_table(&results));
        }
        return Ok(0);
    }

    let layouts = if let Some(dir) = &args.bundles {
        layouts_from_bundles(dir)?
    } else {
        let count = args
            .sample
            .ok_or_else(|| Error::InvalidInput("pass --bundles DIR or --sample N".into()))?;
        let disabled: BTreeSet<AblationFactor> = args
            .ablate
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_>>()?;
        let variant = ablate(&graph, &disabled)?;
        sample_many(&variant, image_size, base_seed, count, &sampler)?
    };
    let report = evaluate_fidelity(&graph, &layouts)?;
    if args.json {
        print!("{}", canon::to_canonical_json(&report)?);
    } else {
        println!("layouts:        {}", report.n_layouts);
        println!("tv_class:       {:.4}", report.tv_class);
        println!("tv_count:       {:.4}", report.tv_count);
        println!("tv_aspect:      {:.4}", report.axis_aspect());
        println!("tv_scale:       {:.4}", report.axis_scale());
        println!("tv_location:    {:.4}", report.axis_location());
        println!("cooccurrence:   {:.4}", report.cooccurrence_tv);
    }
    Ok(0)
}

fn sample_many(
    g: &Scdkg,
    image_size: (u32, u32),
    base_seed: u64,
    count: usize,
    cfg: &SamplerConfig,
) -> Result<Vec<Layout>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| sample_layout(g, image_size, split_seed(base_seed, i), cfg))
        .collect()
}

fn layouts_from_bundles(dir: &Path) -> Result<Vec<Layout>> {
    let ids = bundle_ids_in(dir)?;
    ids.par_iter()
        .map(|id| {
            let manifest =
                isim_forge::bundle::read_label_manifest(&dir.join(format!("{id}.labels.json")))?;
            manifest.to_layout()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// inspect
// ---------------------------------------------------------------------------

fn cmd_inspect(args: InspectArgs) -> Result<i32> {
    let graph = load_scdkg(&args.scdkg)?;
    let config_digest = canon::digest_of(&"inspect")?;
    log_run("inspect", None, &config_digest, graph.digest());

    if args.json {
        #[derive(Serialize)]
        struct ClassRow<'a> {
            id: u16,
            name: &'a str,
            gray: u8,
            prior: f64,
        }
        #[derive(Serialize)]
        struct Dump<'a> {
            scdkg_digest: &'a str,
            source_digest: &'a str,
            classes: Vec<ClassRow<'a>>,
            count_support: (f64, f64),
            p_id: Vec<Vec<f64>>,
        }
        let classes = graph
            .class_table()
            .entries()
            .map(|(id, name)| {
                Ok(ClassRow {
                    id: id.get(),
                    name,
                    gray: isim::gray_value(id, graph.class_count())?,
                    prior: graph.class_prior().prob_of(id),
                })
            })
            .collect::<Result<_>>()?;
        let dump = Dump {
            scdkg_digest: graph.digest(),
            source_digest: graph.source_digest(),
            classes,
            count_support: graph.count_prior().support(),
            p_id: graph.interdep().to_rows(),
        };
        print!("{}", canon::to_canonical_json(&dump)?);
        return Ok(0);
    }

    println!("graph {}", canon::short_digest(graph.digest()));
    println!("source {}", canon::short_digest(graph.source_digest()));
    let (lo, hi) = graph.count_prior().support();
    println!(
        "objects per image: {:.0}..{:.0} (mean {:.1})",
        lo,
        hi,
        graph.count_prior().mean()
    );
    println!();
    println!("{:>3}  {:<28} {:>4}  {:>7}", "id", "class", "gray", "prior");
    for (id, name) in graph.class_table().entries() {
        println!(
            "{:>3}  {:<28} {:>4}  {:>7.4}",
            id.get(),
            name,
            isim::gray_value(id, graph.class_count())?,
            graph.class_prior().prob_of(id),
        );
    }
    println!();
    println!("interdependency matrix (rows: previous class, shade ~ sqrt(p)):");
    let shades: &[char] = &[' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];
    for (id, _) in graph.class_table().entries() {
        let row = graph.interdep().row(id);
        let line: String = row
            .probs()
            .iter()
            .map(|p| {
                shades[((p.sqrt() * (shades.len() - 1) as f64).round() as usize)
                    .min(shades.len() - 1)]
            })
            .collect();
        println!("{:>3} |{line}|", id.get());
    }
    Ok(0)
}
