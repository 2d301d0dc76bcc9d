//! Fusion of scored instance masks with a semantic prediction into a single
//! panoptic map.
//!
//! Instances are visited from highest to lowest score. Each claims its
//! still-unassigned mask pixels if they make up at least `coverage_threshold`
//! of its pasted mask, and is dropped otherwise. Leftover pixels take the
//! semantic label when it is a stuff class and become void otherwise. Stuff
//! classes covering fewer than `stuff_min_area` pixels are voided.
//!
//! Accepted instances get segment ids `1..=n` in visiting order; stuff
//! segments follow, one per surviving stuff class in ascending class id.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::geometry::{score_order, BBox};
use crate::model::{ClassKind, ClassTable, ModelError, PanopticMap, SemanticMap};
use crate::tensor::{paste_mask, MaskGrid, TensorError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("detection {index}: class {class_id} is not a thing class")]
    NotAThing { index: usize, class_id: u32 },
    #[error("detection {index}: score {score} outside [0, 1]")]
    ScoreRange { index: usize, score: f64 },
    #[error("detection {index}: {source}")]
    Mask { index: usize, source: TensorError },
    #[error("invalid fusion config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub bbox: BBox,
    pub class_id: u32,
    pub score: f64,
    pub mask: MaskGrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub coverage_threshold: f64,
    pub stuff_min_area: usize,
    pub mask_threshold: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            coverage_threshold: 0.5,
            stuff_min_area: 4096,
            mask_threshold: 0.5,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        if !(self.coverage_threshold > 0.0 && self.coverage_threshold <= 1.0) {
            return Err(FusionError::Config("coverage_threshold must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.mask_threshold) {
            return Err(FusionError::Config("mask_threshold must be in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionWarning {
    /// The detection's pasted mask had no pixels above threshold.
    EmptyMask { index: usize },
    /// The detection box lies entirely outside the image.
    OutsideImage { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutput {
    pub map: PanopticMap,
    /// Input indices of accepted detections; segment id `k + 1` is
    /// `accepted[k]`.
    pub accepted: Vec<usize>,
    pub warnings: Vec<FusionWarning>,
}

pub fn fuse(
    dets: &[Detection],
    sem: &SemanticMap,
    classes: &ClassTable,
    cfg: &FusionConfig,
) -> Result<FusionOutput, FusionError> {
    cfg.validate()?;
    for (index, d) in dets.iter().enumerate() {
        if classes.kind(d.class_id) != Some(ClassKind::Thing) {
            return Err(FusionError::NotAThing {
                index,
                class_id: d.class_id,
            });
        }
        if !(0.0..=1.0).contains(&d.score) {
            return Err(FusionError::ScoreRange { index, score: d.score });
        }
    }

    let (w, h) = (sem.width(), sem.height());
    let mut pixels = vec![0u32; w * h];
    let mut segments = BTreeMap::new();
    let mut accepted = Vec::new();
    let mut warnings = Vec::new();

    for index in score_order(|i| dets[i].score, dets.len()) {
        let d = &dets[index];
        let pasted = match paste_mask(&d.mask, &d.bbox, w, h, cfg.mask_threshold) {
            Ok(p) => p,
            Err(TensorError::OutsideImage { .. }) => {
                warnings.push(FusionWarning::OutsideImage { index });
                continue;
            }
            Err(source) => return Err(FusionError::Mask { index, source }),
        };
        let area = pasted.count();
        if area == 0 {
            warnings.push(FusionWarning::EmptyMask { index });
            continue;
        }
        let free: Vec<usize> = pasted.indices().filter(|&i| pixels[i] == 0).collect();
        if (free.len() as f64) < cfg.coverage_threshold * area as f64 {
            continue;
        }
        let id = accepted.len() as u32 + 1;
        for i in free {
            pixels[i] = id;
        }
        segments.insert(id, d.class_id);
        accepted.push(index);
    }

    // Leftover pixels: stuff label or void. Stuff pixels are tagged with
    // their class until ids are assigned.
    let mut stuff_of_pixel: Vec<Option<u32>> = vec![None; w * h];
    let mut stuff_area: BTreeMap<u32, usize> = BTreeMap::new();
    for (i, &label) in sem.labels().iter().enumerate() {
        if pixels[i] != 0 || label == 0 {
            continue;
        }
        if classes.kind(label) == Some(ClassKind::Stuff) {
            stuff_of_pixel[i] = Some(label);
            *stuff_area.entry(label).or_default() += 1;
        }
    }
    let mut next_id = accepted.len() as u32 + 1;
    let mut stuff_ids = BTreeMap::new();
    for (&class, &area) in &stuff_area {
        if area >= cfg.stuff_min_area {
            stuff_ids.insert(class, next_id);
            segments.insert(next_id, class);
            next_id += 1;
        }
    }
    for (i, s) in stuff_of_pixel.iter().enumerate() {
        if let Some(id) = s.and_then(|c| stuff_ids.get(&c)) {
            pixels[i] = *id;
        }
    }

    let map = PanopticMap::new(w, h, pixels, segments, classes)?;
    Ok(FusionOutput {
        map,
        accepted,
        warnings,
    })
}
