use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use panoptic_core::metrics::EvalOptions;
use panoptic_core::{fuse, FusionConfig};

use crate::codec::{parse_categories, read_semantic, write_panoptic};
use crate::error::{read_file, write_file, Error, Result};
use crate::evaluate::{evaluate, pair_images, Side, SidecarSource};
use crate::fixtures::{parse_detections, LossBundle};
use crate::report::{render_evaluation, Format};

#[derive(Debug, Parser)]
#[command(name = "panoptic", version, about = "Panoptic segmentation evaluation, fusion and loss oracles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute PQ and PQ† over paired ground-truth / prediction directories.
    Evaluate(EvaluateArgs),
    /// Fuse instance detections with a semantic map into a panoptic PNG.
    Fuse(FuseArgs),
    /// Evaluate the six training losses on a JSON fixture.
    Losses(LossesArgs),
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gt_dir: PathBuf,
    #[arg(long)]
    pub pred_dir: PathBuf,
    #[arg(long)]
    pub categories: PathBuf,
    /// Combined COCO panoptic annotation file for the ground truth, instead
    /// of per-image `<stem>.json` sidecars.
    #[arg(long)]
    pub gt_json: Option<PathBuf>,
    /// Combined annotation file for the predictions.
    #[arg(long)]
    pub pred_json: Option<PathBuf>,
    /// Report destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Count ground-truth segments lying mostly on predicted void as false
    /// negatives.
    #[arg(long)]
    pub no_fn_void_rule: bool,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub semantic: PathBuf,
    #[arg(long)]
    pub categories: PathBuf,
    /// Output PNG; the sidecar is written next to it as `<stem>.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub coverage_threshold: f64,
    #[arg(long, default_value_t = 4096)]
    pub stuff_min_area: usize,
    #[arg(long, default_value_t = 0.5)]
    pub mask_threshold: f64,
}

#[derive(Debug, Args)]
pub struct LossesArgs {
    #[arg(long)]
    pub fixture: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_file(path, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn load_categories(path: &Path) -> Result<panoptic_core::ClassTable> {
    parse_categories(&read_file(path)?, &path.display().to_string())
}

fn side(dir: &Path, json: Option<&Path>) -> Result<Side> {
    Ok(Side {
        dir: dir.to_path_buf(),
        sidecars: match json {
            Some(p) => SidecarSource::combined(p)?,
            None => SidecarSource::PerImage,
        },
    })
}

pub fn run_evaluate(a: &EvaluateArgs) -> Result<String> {
    let classes = load_categories(&a.categories)?;
    let names = pair_images(&a.gt_dir, &a.pred_dir)?;
    let gt = side(&a.gt_dir, a.gt_json.as_deref())?;
    let pred = side(&a.pred_dir, a.pred_json.as_deref())?;
    let opts = EvalOptions {
        fn_void_rule: !a.no_fn_void_rule,
    };
    eprintln!("evaluating {} images on {} worker(s)", names.len(), a.jobs);
    let acc = evaluate(&names, &gt, &pred, &classes, &opts, a.jobs.into())?;
    let text = render_evaluation(&acc, &classes, names.len(), a.format);
    emit(a.out.as_deref(), &text)?;
    Ok(text)
}

pub fn run_fuse(a: &FuseArgs) -> Result<()> {
    let classes = load_categories(&a.categories)?;
    let dets = parse_detections(&read_file(&a.detections)?, &a.detections.display().to_string())?;
    let sem = read_semantic(&read_file(&a.semantic)?, &classes, &a.semantic.display().to_string())?;
    let cfg = FusionConfig {
        coverage_threshold: a.coverage_threshold,
        stuff_min_area: a.stuff_min_area,
        mask_threshold: a.mask_threshold,
    };
    let out = fuse(&dets, &sem, &classes, &cfg).map_err(|e| Error::schema(a.detections.display().to_string(), e))?;
    for w in &out.warnings {
        eprintln!("warning: {w:?}");
    }
    let (png, sidecar) = write_panoptic(&out.map)?;
    write_file(&a.out, &png)?;
    let mut json = serde_json::to_vec_pretty(&sidecar).expect("sidecar serializes");
    json.push(b'\n');
    write_file(&a.out.with_extension("json"), &json)
}

pub fn run_losses(a: &LossesArgs) -> Result<String> {
    let bundle = LossBundle::parse(&read_file(&a.fixture)?, &a.fixture.display().to_string())?;
    let out = bundle.evaluate()?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let mut text = serde_json::to_string_pretty(&out).expect("loss report serializes");
    text.push('\n');
    emit(a.out.as_deref(), &text)?;
    Ok(text)
}

/// Runs one parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Evaluate(a) => run_evaluate(a).map(drop),
        Command::Fuse(a) => run_fuse(a),
        Command::Losses(a) => run_losses(a).map(drop),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
