//! Anchor and NMS configuration document:
//! `{"levels": [{"stride", "area"}], "aspect_ratios": [...], "nms": {"objectness_iou", "classwise_iou"}}`.

use panoptic_core::geometry::{generate_anchors, nms, GeometryError};
use panoptic_core::{Anchor, ScoredBox};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelConfig {
    pub stride: f64,
    pub area: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmsConfig {
    #[serde(default = "default_objectness_iou")]
    pub objectness_iou: f64,
    #[serde(default = "default_classwise_iou")]
    pub classwise_iou: f64,
}

fn default_objectness_iou() -> f64 {
    0.7
}

fn default_classwise_iou() -> f64 {
    0.5
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self {
            objectness_iou: default_objectness_iou(),
            classwise_iou: default_classwise_iou(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub levels: Vec<LevelConfig>,
    pub aspect_ratios: Vec<f64>,
    #[serde(default)]
    pub nms: NmsConfig,
}

impl Default for DetectorConfig {
    /// Four pyramid levels with strides 4–32, anchor side twice the stride,
    /// and five aspect ratios.
    fn default() -> Self {
        Self {
            levels: [4.0, 8.0, 16.0, 32.0]
                .into_iter()
                .map(|stride: f64| LevelConfig {
                    stride,
                    area: (2.0 * stride) * (2.0 * stride),
                })
                .collect(),
            aspect_ratios: vec![0.2, 0.5, 1.0, 2.0, 5.0],
            nms: NmsConfig::default(),
        }
    }
}

impl DetectorConfig {
    pub fn parse(json: &[u8], context: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_slice(json).map_err(|e| Error::json(context, e))?;
        for (name, t) in [("objectness_iou", cfg.nms.objectness_iou), ("classwise_iou", cfg.nms.classwise_iou)] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::schema(context, format!("nms.{name} must be in (0, 1]")));
            }
        }
        Ok(cfg)
    }

    pub fn anchors(&self, image_w: f64, image_h: f64) -> Result<Vec<Anchor>, GeometryError> {
        let strides: Vec<f64> = self.levels.iter().map(|l| l.stride).collect();
        let areas: Vec<f64> = self.levels.iter().map(|l| l.area).collect();
        generate_anchors(image_w, image_h, &strides, &areas, &self.aspect_ratios)
    }

    /// Class-agnostic pass over proposals.
    pub fn objectness_nms(&self, boxes: &[ScoredBox]) -> Vec<usize> {
        nms(boxes, self.nms.objectness_iou, false)
    }

    /// Per-class pass over detections.
    pub fn classwise_nms(&self, boxes: &[ScoredBox]) -> Vec<usize> {
        nms(boxes, self.nms.classwise_iou, true)
    }
}
