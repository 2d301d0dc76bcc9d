//! JSON fixtures for the loss oracle and the fusion command.
//!
//! Boxes are `[cx, cy, w, h]` arrays throughout.
//!
//! Loss bundle:
//!
//! ```json
//! {
//!   "semantic": {"height": 2, "width": 2, "classes": 2,
//!                "probs": [/* H·W·C, class fastest */], "labels": [/* H·W, 1..=C */]},
//!   "rpn": {"anchors": [[8, 8, 16, 16]], "objectness": [0.5], "boxes": [[8, 8, 16, 16]],
//!           "gt": [[8, 8, 16, 16]],
//!           "matches": {"positives": [[0, 0]], "negatives": []}},
//!   "rsh": {"proposals": [[8, 8, 16, 16]], "class_probs": [[0.5, 0.5]],
//!           "class_boxes": [[[8, 8, 16, 16]]],
//!           "gt": [{"box": [8, 8, 16, 16], "class_id": 1}],
//!           "config": {"eta": 0.5}, "seed": 7,
//!           "pred_masks": [[/* 784 */]], "gt_masks": [[/* 784 of 1, 0 or null */]]}
//! }
//! ```
//!
//! Each head section either lists its sampled `matches` explicitly or gives
//! a matcher `config` (all fields optional) and a `seed`, in which case the
//! matches are computed and sampled. `pred_masks` has one entry per
//! proposal (`null` allowed for proposals that are never positive) and
//! `gt_masks` one per ground-truth object.

use panoptic_core::geometry::Anchor;
use panoptic_core::loss::{
    loss_rpn, loss_rsh, loss_semantic, LossReport, LossValue, RshPrediction, SemanticProb, SemanticTarget,
};
use panoptic_core::matching::{match_rpn, match_rsh, sample_matches};
use panoptic_core::tensor::{GtMask, MaskLabel, MASK_SIZE};
use panoptic_core::{BBox, Detection, MaskGrid, MatchSet, MatcherConfig, SeededRng};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

fn bbox(v: [f64; 4], context: &str) -> Result<BBox> {
    BBox::new(v[0], v[1], v[2], v[3]).map_err(|e| Error::schema(context, e))
}

fn boxes(vs: &[[f64; 4]], context: &str) -> Result<Vec<BBox>> {
    vs.iter()
        .enumerate()
        .map(|(i, &v)| bbox(v, &format!("{context}[{i}]")))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MatcherJson {
    pub tau_high: Option<f64>,
    pub tau_low: Option<f64>,
    pub eta: Option<f64>,
    pub rpn_pos_cap: Option<usize>,
    pub rpn_total_cap: Option<usize>,
    pub rsh_pos_cap: Option<usize>,
    pub rsh_total_cap: Option<usize>,
}

impl MatcherJson {
    pub fn resolve(&self, context: &str) -> Result<MatcherConfig> {
        let mut c = MatcherConfig::default();
        c.tau_high = self.tau_high.unwrap_or(c.tau_high);
        c.tau_low = self.tau_low.unwrap_or(c.tau_low);
        c.eta = self.eta.unwrap_or(c.eta);
        c.caps.rpn_pos = self.rpn_pos_cap.unwrap_or(c.caps.rpn_pos);
        c.caps.rpn_total = self.rpn_total_cap.unwrap_or(c.caps.rpn_total);
        c.caps.rsh_pos = self.rsh_pos_cap.unwrap_or(c.caps.rsh_pos);
        c.caps.rsh_total = self.rsh_total_cap.unwrap_or(c.caps.rsh_total);
        c.validate().map_err(|e| Error::schema(context, e))?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MatchesJson {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<usize>,
}

impl From<&MatchesJson> for MatchSet {
    fn from(m: &MatchesJson) -> Self {
        MatchSet {
            positives: m.positives.clone(),
            negatives: m.negatives.clone(),
            ignored: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticJson {
    pub height: usize,
    pub width: usize,
    pub classes: usize,
    pub probs: Vec<f64>,
    pub labels: Vec<u32>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RpnJson {
    pub anchors: Vec<[f64; 4]>,
    pub objectness: Vec<f64>,
    pub boxes: Vec<[f64; 4]>,
    pub gt: Vec<[f64; 4]>,
    #[serde(default)]
    pub matches: Option<MatchesJson>,
    #[serde(default)]
    pub config: Option<MatcherJson>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GtObjectJson {
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub class_id: u32,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RshJson {
    pub proposals: Vec<[f64; 4]>,
    pub class_probs: Vec<Vec<f64>>,
    pub class_boxes: Vec<Vec<[f64; 4]>>,
    pub gt: Vec<GtObjectJson>,
    #[serde(default)]
    pub matches: Option<MatchesJson>,
    #[serde(default)]
    pub config: Option<MatcherJson>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub pred_masks: Vec<Option<Vec<f64>>>,
    pub gt_masks: Vec<Vec<Option<u8>>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LossBundle {
    pub semantic: SemanticJson,
    pub rpn: RpnJson,
    pub rsh: RshJson,
}

/// Six losses plus everything degenerate that happened on the way.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossOutput {
    /// `null` for a saturated (infinite) loss.
    pub l_ss: Option<f64>,
    pub l_rpn_ob: Option<f64>,
    pub l_rpn_bb: Option<f64>,
    pub l_rsh_cls: Option<f64>,
    pub l_rsh_bb: Option<f64>,
    pub l_rsh_msk: Option<f64>,
    pub total: Option<f64>,
    /// Names of losses that hit `log 0`.
    pub saturated: Vec<&'static str>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub report: LossReport,
}

fn sampled(
    explicit: &Option<MatchesJson>,
    computed: impl FnOnce(&MatcherConfig) -> MatchSet,
    config: &Option<MatcherJson>,
    seed: Option<u64>,
    caps: impl Fn(&MatcherConfig) -> (usize, usize),
    context: &str,
) -> Result<MatchSet> {
    match (explicit, config, seed) {
        (Some(m), None, None) => Ok(m.into()),
        (Some(_), _, _) => Err(Error::schema(context, "give either `matches` or `config`/`seed`, not both")),
        (None, config, Some(seed)) => {
            let cfg = config.unwrap_or_default().resolve(context)?;
            let (pos, total) = caps(&cfg);
            Ok(sample_matches(&computed(&cfg), pos, total, &SeededRng::new(seed)))
        }
        (None, _, None) => Err(Error::schema(context, "`matches` or `seed` is required")),
    }
}

fn schema(context: &'static str) -> impl Fn(panoptic_core::loss::LossError) -> Error {
    move |e| Error::schema(context, e)
}

fn gt_mask(labels: &[Option<u8>], context: &str) -> Result<GtMask> {
    let labels = labels
        .iter()
        .map(|l| match l {
            None => Ok(MaskLabel::Void),
            Some(0) => Ok(MaskLabel::Background),
            Some(1) => Ok(MaskLabel::Foreground),
            Some(v) => Err(Error::schema(context, format!("mask label must be 0, 1 or null, got {v}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    GtMask::new(labels).map_err(|e| Error::schema(context, e))
}

impl LossBundle {
    pub fn parse(json: &[u8], context: &str) -> Result<Self> {
        serde_json::from_slice(json).map_err(|e| Error::json(context, e))
    }

    pub fn evaluate(&self) -> Result<LossOutput> {
        let mut warnings = Vec::new();

        let s = &self.semantic;
        let p = SemanticProb::new(s.height, s.width, s.classes, s.probs.clone()).map_err(schema("semantic"))?;
        let y = SemanticTarget::new(s.height, s.width, s.labels.clone()).map_err(schema("semantic"))?;
        let l_ss = loss_semantic(&p, &y).map_err(schema("semantic"))?;

        let r = &self.rpn;
        let anchors: Vec<Anchor> = boxes(&r.anchors, "rpn.anchors")?
            .into_iter()
            .map(|bbox| Anchor { bbox, level: 0 })
            .collect();
        let pred = boxes(&r.boxes, "rpn.boxes")?;
        let gt = boxes(&r.gt, "rpn.gt")?;
        if r.objectness.len() != anchors.len() || pred.len() != anchors.len() {
            return Err(Error::schema("rpn", "objectness and boxes need one entry per anchor"));
        }
        let m = sampled(
            &r.matches,
            |cfg| match_rpn(&anchors, &gt, cfg),
            &r.config,
            r.seed,
            |c| (c.caps.rpn_pos, c.caps.rpn_total),
            "rpn",
        )?;
        let rpn = loss_rpn(&r.objectness, &pred, &anchors, &gt, &m).map_err(schema("rpn"))?;
        if rpn.empty {
            warnings.push("rpn: no sampled matches; losses reported as 0".to_string());
        }

        let h = &self.rsh;
        let proposals = boxes(&h.proposals, "rsh.proposals")?;
        if h.class_probs.len() != proposals.len() || h.class_boxes.len() != proposals.len() || h.pred_masks.len() != proposals.len() {
            return Err(Error::schema("rsh", "class_probs, class_boxes and pred_masks need one entry per proposal"));
        }
        if h.gt_masks.len() != h.gt.len() {
            return Err(Error::schema("rsh", "gt_masks needs one entry per ground-truth object"));
        }
        let predictions = h
            .class_probs
            .iter()
            .zip(&h.class_boxes)
            .enumerate()
            .map(|(i, (probs, bs))| {
                Ok(RshPrediction {
                    class_probs: probs.clone(),
                    class_boxes: boxes(bs, &format!("rsh.class_boxes[{i}]"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let gt_objects = h
            .gt
            .iter()
            .enumerate()
            .map(|(i, g)| Ok((bbox(g.bbox, &format!("rsh.gt[{i}]"))?, g.class_id)))
            .collect::<Result<Vec<_>>>()?;
        let m = sampled(
            &h.matches,
            |cfg| match_rsh(&proposals, &gt_objects, cfg),
            &h.config,
            h.seed,
            |c| (c.caps.rsh_pos, c.caps.rsh_total),
            "rsh",
        )?;
        let mut pred_masks = Vec::new();
        let mut gt_masks = Vec::new();
        for &(g, p) in &m.positives {
            let ctx = format!("rsh.pred_masks[{p}]");
            let values = h
                .pred_masks
                .get(p)
                .and_then(Option::as_ref)
                .ok_or_else(|| Error::schema(&ctx, "positive proposal has no mask"))?;
            if values.len() != MASK_SIZE * MASK_SIZE {
                return Err(Error::schema(&ctx, format!("expected {} values", MASK_SIZE * MASK_SIZE)));
            }
            pred_masks.push(MaskGrid::new(values.clone()).map_err(|e| Error::schema(&ctx, e))?);
            let ctx = format!("rsh.gt_masks[{g}]");
            let labels = h.gt_masks.get(g).ok_or_else(|| Error::schema(&ctx, "missing"))?;
            gt_masks.push(gt_mask(labels, &ctx)?);
        }
        let rsh = loss_rsh(&predictions, &proposals, &gt_objects, &m, &pred_masks, &gt_masks).map_err(schema("rsh"))?;
        if rsh.empty {
            warnings.push("rsh: no sampled matches; losses reported as 0".to_string());
        }
        for k in &rsh.void_masks {
            warnings.push(format!("rsh: positive {k} has an all-void ground-truth mask"));
        }

        let named: [(&'static str, LossValue); 6] = [
            ("l_ss", l_ss),
            ("l_rpn_ob", rpn.objectness),
            ("l_rpn_bb", rpn.regression),
            ("l_rsh_cls", rsh.classification),
            ("l_rsh_bb", rsh.regression),
            ("l_rsh_msk", rsh.mask),
        ];
        let saturated: Vec<&'static str> = named.iter().filter(|(_, v)| v.saturated).map(|(n, _)| *n).collect();
        let finite = |v: LossValue| v.value.is_finite().then_some(v.value);
        let report = LossReport {
            l_ss: l_ss.value,
            l_rpn_ob: rpn.objectness.value,
            l_rpn_bb: rpn.regression.value,
            l_rsh_cls: rsh.classification.value,
            l_rsh_bb: rsh.regression.value,
            l_rsh_msk: rsh.mask.value,
        };
        Ok(LossOutput {
            l_ss: finite(l_ss),
            l_rpn_ob: finite(rpn.objectness),
            l_rpn_bb: finite(rpn.regression),
            l_rsh_cls: finite(rsh.classification),
            l_rsh_bb: finite(rsh.regression),
            l_rsh_msk: finite(rsh.mask),
            total: report.total().is_finite().then(|| report.total()),
            saturated,
            warnings,
            report,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionJson {
    #[serde(rename = "box")]
    bbox: [f64; 4],
    class_id: u32,
    score: f64,
    mask: Vec<f64>,
}

/// Parses a JSON array of `{box, class_id, score, mask}` records (or an
/// object holding one under `detections`). Errors name the record index.
pub fn parse_detections(json: &[u8], context: &str) -> Result<Vec<Detection>> {
    let doc: Value = serde_json::from_slice(json).map_err(|e| Error::json(context, e))?;
    let records = match doc {
        Value::Array(a) => a,
        Value::Object(mut o) => match o.remove("detections") {
            Some(Value::Array(a)) => a,
            _ => return Err(Error::schema(context, "expected an array of detections")),
        },
        _ => return Err(Error::schema(context, "expected an array of detections")),
    };
    records
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let ctx = format!("{context}: detection {i}");
            let d: DetectionJson = serde_json::from_value(v).map_err(|e| Error::json(&ctx, e))?;
            if d.mask.len() != MASK_SIZE * MASK_SIZE {
                return Err(Error::schema(&ctx, format!("mask has {} values, expected {}", d.mask.len(), MASK_SIZE * MASK_SIZE)));
            }
            Ok(Detection {
                bbox: bbox(d.bbox, &ctx)?,
                class_id: d.class_id,
                score: d.score,
                mask: MaskGrid::new(d.mask).map_err(|e| Error::schema(&ctx, e))?,
            })
        })
        .collect()
}
