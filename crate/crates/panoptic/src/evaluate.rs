//! Dataset-level PQ evaluation.
//!
//! Images are paired by PNG file name. Each pair is matched independently on
//! a worker pool; the per-image accumulators are then merged sequentially in
//! file-name order, so the report does not depend on the number of workers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use panoptic_core::metrics::{match_image, EvalOptions};
use panoptic_core::{ClassTable, MetricAccumulator, PanopticMap};
use rayon::prelude::*;

use crate::codec::{parse_annotation_file, read_panoptic, Sidecar};
use crate::error::{read_file, Error, Result};

/// Where segment tables come from for one side of the evaluation.
#[derive(Debug, Clone)]
pub enum SidecarSource {
    /// `<stem>.json` next to each `<stem>.png`.
    PerImage,
    /// One COCO panoptic annotation file keyed by PNG file name.
    Combined(BTreeMap<String, Sidecar>),
}

impl SidecarSource {
    pub fn combined(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        Ok(Self::Combined(parse_annotation_file(&bytes, &path.display().to_string())?))
    }

    fn load(&self, dir: &Path, name: &str) -> Result<Sidecar> {
        match self {
            Self::PerImage => {
                let path = dir.join(name).with_extension("json");
                Sidecar::parse(&read_file(&path)?, &path.display().to_string())
            }
            Self::Combined(all) => all
                .get(name)
                .cloned()
                .ok_or_else(|| Error::schema(dir.join(name).display().to_string(), "not listed in the annotation file")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Side {
    pub dir: PathBuf,
    pub sidecars: SidecarSource,
}

impl Side {
    pub fn per_image(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            sidecars: SidecarSource::PerImage,
        }
    }

    pub fn load(&self, name: &str, classes: &ClassTable) -> Result<PanopticMap> {
        let path = self.dir.join(name);
        let context = path.display().to_string();
        let png = read_file(&path)?;
        let sidecar = self.sidecars.load(&self.dir, name)?;
        read_panoptic(&png, &sidecar, classes, &context)
    }
}

fn png_names(dir: &Path) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.to_ascii_lowercase().ends_with(".png") && entry.path().is_file() {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

/// PNG file names present in both directories, sorted. Any name present on
/// only one side is an error.
pub fn pair_images(gt_dir: &Path, pred_dir: &Path) -> Result<Vec<String>> {
    let gt = png_names(gt_dir)?;
    let pred = png_names(pred_dir)?;
    if gt.is_empty() && pred.is_empty() {
        return Err(Error::NoImages(gt_dir.to_path_buf()));
    }
    let unmatched: Vec<String> = gt
        .iter()
        .filter(|n| pred.binary_search(n).is_err())
        .map(|n| format!("{n} (no prediction)"))
        .chain(
            pred.iter()
                .filter(|n| gt.binary_search(n).is_err())
                .map(|n| format!("{n} (no ground truth)")),
        )
        .collect();
    if !unmatched.is_empty() {
        return Err(Error::UnmatchedImages(unmatched));
    }
    Ok(gt)
}

fn evaluate_one(name: &str, gt: &Side, pred: &Side, classes: &ClassTable, opts: &EvalOptions) -> Result<MetricAccumulator> {
    let g = gt.load(name, classes)?;
    let p = pred.load(name, classes)?;
    let m = match_image(&g, &p, classes, opts).map_err(|e| Error::Compute {
        context: name.into(),
        message: e.to_string(),
    })?;
    let mut acc = MetricAccumulator::new(classes);
    acc.add_matches(&m).map_err(|e| Error::Compute {
        context: name.into(),
        message: e.to_string(),
    })?;
    Ok(acc)
}

/// Evaluates `names` on `jobs` worker threads. The first failing image (in
/// name order) is reported.
pub fn evaluate(
    names: &[String],
    gt: &Side,
    pred: &Side,
    classes: &ClassTable,
    opts: &EvalOptions,
    jobs: usize,
) -> Result<MetricAccumulator> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Compute {
            context: "worker pool".into(),
            message: e.to_string(),
        })?;
    let per_image: Vec<Result<MetricAccumulator>> = pool.install(|| {
        names
            .par_iter()
            .map(|name| evaluate_one(name, gt, pred, classes, opts))
            .collect()
    });
    let mut total = MetricAccumulator::new(classes);
    for acc in per_image {
        total.merge_in(&acc?).expect("accumulators share one class table");
    }
    Ok(total)
}
