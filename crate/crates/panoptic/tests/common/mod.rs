//! On-disk dataset helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use panoptic::cli::EvaluateArgs;
use panoptic::codec::{write_panoptic, write_semantic};
use panoptic::report::Format;
use panoptic_core::{ClassKind, ClassTable, PanopticMap, SemanticMap};
use serde_json::json;

pub fn categories_json(classes: &ClassTable) -> Vec<u8> {
    let cats: Vec<_> = classes
        .iter()
        .map(|(id, info)| json!({"id": id, "name": info.name, "isthing": u8::from(info.kind == ClassKind::Thing)}))
        .collect();
    serde_json::to_vec_pretty(&json!({ "categories": cats })).unwrap()
}

pub fn write_categories(dir: &Path, classes: &ClassTable) -> PathBuf {
    let path = dir.join("categories.json");
    std::fs::write(&path, categories_json(classes)).unwrap();
    path
}

/// Writes `<dir>/<stem>.png` and its `<stem>.json` sidecar.
pub fn write_map(dir: &Path, stem: &str, map: &PanopticMap) {
    std::fs::create_dir_all(dir).unwrap();
    let (png, sidecar) = write_panoptic(map).unwrap();
    std::fs::write(dir.join(format!("{stem}.png")), png).unwrap();
    std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_vec(&sidecar).unwrap()).unwrap();
}

pub fn write_semantic_png(path: &Path, map: &SemanticMap) {
    std::fs::write(path, write_semantic(map).unwrap()).unwrap();
}

/// A map built from a row-major id grid and an id → class table.
pub fn map_from(w: usize, h: usize, pixels: Vec<u32>, segments: &[(u32, u32)], classes: &ClassTable) -> PanopticMap {
    let segments: BTreeMap<u32, u32> = segments.iter().copied().collect();
    PanopticMap::new(w, h, pixels, segments, classes).unwrap()
}

/// A map where pixel `i` gets `f(i % w, i / w)`.
pub fn paint(w: usize, h: usize, segments: &[(u32, u32)], classes: &ClassTable, f: impl Fn(usize, usize) -> u32) -> PanopticMap {
    map_from(w, h, (0..w * h).map(|i| f(i % w, i / w)).collect(), segments, classes)
}

pub struct Dataset {
    pub root: tempfile::TempDir,
    pub gt: PathBuf,
    pub pred: PathBuf,
    pub categories: PathBuf,
}

impl Dataset {
    pub fn new(classes: &ClassTable) -> Self {
        let root = tempfile::tempdir().unwrap();
        let gt = root.path().join("gt");
        let pred = root.path().join("pred");
        std::fs::create_dir_all(&gt).unwrap();
        std::fs::create_dir_all(&pred).unwrap();
        let categories = write_categories(root.path(), classes);
        Self { root, gt, pred, categories }
    }

    pub fn add(&self, stem: &str, gt: &PanopticMap, pred: &PanopticMap) {
        write_map(&self.gt, stem, gt);
        write_map(&self.pred, stem, pred);
    }

    pub fn args(&self) -> EvaluateArgs {
        EvaluateArgs {
            gt_dir: self.gt.clone(),
            pred_dir: self.pred.clone(),
            categories: self.categories.clone(),
            gt_json: None,
            pred_json: None,
            out: Some(self.root.path().join("report.json")),
            jobs: 1,
            format: Format::Json,
            no_fn_void_rule: false,
        }
    }
}

pub fn report(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}
