//! Forward values of the training losses, intended as an oracle for any
//! training framework.
//!
//! Logarithms of zero are not clamped: the affected loss becomes `+∞` and the
//! result carries a `saturated` flag. Sums run in row-major pixel order or in
//! match-list order.

use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

use crate::geometry::{Anchor, BBox};
use crate::math;
use crate::matching::MatchSet;
use crate::tensor::{GtMask, MaskGrid, MaskLabel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("pixel {pixel}: probabilities must lie in [0, 1] and sum to 1")]
    NotADistribution { pixel: usize },
    #[error("target label {label} at pixel {pixel} is outside 1..={classes}")]
    InvalidLabel { pixel: usize, label: u32, classes: usize },
    #[error("match refers to missing {what} index {index}")]
    IndexOutOfRange { what: &'static str, index: usize },
    #[error("class {class} has no score/box slot")]
    InvalidClass { class: u32 },
    #[error("score {0} is outside [0, 1]")]
    ScoreRange(f64),
    #[error("{expected} mask pairs expected (one per positive), got {actual}")]
    MaskCount { expected: usize, actual: usize },
}

/// `0.5·x²` when `|x| < 1`, `|x| − 0.5` otherwise.
pub fn smooth_l1(x: f64) -> f64 {
    let a = math::abs(x);
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

/// Per-pixel class probabilities, `H × W × C` with the class axis fastest.
/// Class `c ∈ 1..=C` lives at slot `c − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticProb {
    height: usize,
    width: usize,
    classes: usize,
    values: Vec<f64>,
}

impl SemanticProb {
    pub fn new(height: usize, width: usize, classes: usize, values: Vec<f64>) -> Result<Self, LossError> {
        let expected = height * width * classes;
        if values.len() != expected || classes == 0 {
            return Err(LossError::ShapeMismatch {
                expected,
                actual: values.len(),
            });
        }
        for (pixel, probs) in values.chunks(classes).enumerate() {
            let in_range = probs.iter().all(|p| (0.0..=1.0).contains(p));
            let total: f64 = probs.iter().sum();
            if !in_range || math::abs(total - 1.0) > 1e-6 {
                return Err(LossError::NotADistribution { pixel });
            }
        }
        Ok(Self {
            height,
            width,
            classes,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn prob(&self, pixel: usize, class: u32) -> f64 {
        self.values[pixel * self.classes + class as usize - 1]
    }
}

/// Per-pixel target class ids in `1..=C`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticTarget {
    height: usize,
    width: usize,
    labels: Vec<u32>,
}

impl SemanticTarget {
    pub fn new(height: usize, width: usize, labels: Vec<u32>) -> Result<Self, LossError> {
        if labels.len() != height * width {
            return Err(LossError::ShapeMismatch {
                expected: height * width,
                actual: labels.len(),
            });
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }
}

/// A scalar loss that may have hit `log 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub saturated: bool,
}

impl LossValue {
    fn new(value: f64) -> Self {
        Self {
            value,
            saturated: value.is_infinite(),
        }
    }
}

/// Pixel-wise log loss with hard mining: the `⌊WH/4⌋` pixels with the lowest
/// target probability (row-major index breaks ties) get weight `4/(WH)`, all
/// others weight 0.
pub fn loss_semantic(p: &SemanticProb, y: &SemanticTarget) -> Result<LossValue, LossError> {
    if p.height != y.height || p.width != y.width {
        return Err(LossError::ShapeMismatch {
            expected: p.height * p.width,
            actual: y.height * y.width,
        });
    }
    let n = p.height * p.width;
    let mut target_probs = Vec::with_capacity(n);
    for (pixel, &label) in y.labels.iter().enumerate() {
        if label == 0 || label as usize > p.classes {
            return Err(LossError::InvalidLabel {
                pixel,
                label,
                classes: p.classes,
            });
        }
        target_probs.push(p.prob(pixel, label));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| match target_probs[a].total_cmp(&target_probs[b]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    let selected = n / 4;
    let mut chosen: Vec<usize> = order[..selected].to_vec();
    chosen.sort_unstable();

    let weight = 4.0 / n as f64;
    let mut total = 0.0;
    for i in chosen {
        total -= weight * math::ln(target_probs[i]);
    }
    Ok(LossValue::new(total))
}

fn check_score(s: f64) -> Result<f64, LossError> {
    if (0.0..=1.0).contains(&s) {
        Ok(s)
    } else {
        Err(LossError::ScoreRange(s))
    }
}

fn get<'a, T>(items: &'a [T], index: usize, what: &'static str) -> Result<&'a T, LossError> {
    items.get(index).ok_or(LossError::IndexOutOfRange { what, index })
}

/// Box regression term for one positive: smooth-L1 of the center offsets
/// normalized by `(norm_w, norm_h)` plus smooth-L1 of the log size ratios.
fn box_term(target: &BBox, pred: &BBox, norm_w: f64, norm_h: f64) -> f64 {
    smooth_l1((target.cx - pred.cx) / norm_w)
        + smooth_l1((target.cy - pred.cy) / norm_h)
        + smooth_l1(math::ln(pred.w / target.w))
        + smooth_l1(math::ln(pred.h / target.h))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpnLoss {
    pub objectness: LossValue,
    pub regression: LossValue,
    /// `|M| = 0`; both losses are reported as 0.
    pub empty: bool,
}

/// Proposal-head objectness and box losses over sampled matches. Both are
/// normalized by `|M| = |M₊| + |M₋|`. Scores, predicted boxes and anchors
/// are indexed by prediction index.
pub fn loss_rpn(
    objectness: &[f64],
    pred_boxes: &[BBox],
    anchors: &[Anchor],
    gt_boxes: &[BBox],
    sampled: &MatchSet,
) -> Result<RpnLoss, LossError> {
    let m = sampled.len();
    if m == 0 {
        return Ok(RpnLoss {
            objectness: LossValue::new(0.0),
            regression: LossValue::new(0.0),
            empty: true,
        });
    }
    let norm = m as f64;
    let mut ob = 0.0;
    let mut bb = 0.0;
    for &(g, p) in &sampled.positives {
        let s = check_score(*get(objectness, p, "prediction")?)?;
        let gt = get(gt_boxes, g, "ground truth")?;
        let pred = get(pred_boxes, p, "prediction")?;
        let anchor = get(anchors, p, "anchor")?;
        ob -= math::ln(s) / norm;
        bb += box_term(gt, pred, anchor.bbox.w, anchor.bbox.h) / norm;
    }
    for &p in &sampled.negatives {
        let s = check_score(*get(objectness, p, "prediction")?)?;
        ob -= math::ln(1.0 - s) / norm;
    }
    Ok(RpnLoss {
        objectness: LossValue::new(ob),
        regression: LossValue::new(bb),
        empty: false,
    })
}

/// Per-proposal outputs of the segmentation head's classification branch.
#[derive(Debug, Clone, PartialEq)]
pub struct RshPrediction {
    /// `C + 1` probabilities; slot 0 is void, slot `c` is class `c`.
    pub class_probs: Vec<f64>,
    /// `C` class-specific boxes; class `c` at slot `c − 1`.
    pub class_boxes: Vec<BBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RshLoss {
    pub classification: LossValue,
    pub regression: LossValue,
    pub mask: LossValue,
    /// `|N| = 0`; all three losses are reported as 0.
    pub empty: bool,
    /// Positions in `sampled.positives` whose ground-truth mask is all void;
    /// they contribute 0 to the mask loss.
    pub void_masks: Vec<usize>,
}

/// Mask log loss averaged over the non-void cells of `gt`. `None` when
/// every cell is void.
pub fn mask_log_loss(pred: &MaskGrid, gt: &GtMask) -> Option<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (&p, &label) in pred.values().iter().zip(gt.labels()) {
        match label {
            MaskLabel::Foreground => total -= math::ln(p),
            MaskLabel::Background => total -= math::ln(1.0 - p),
            MaskLabel::Void => continue,
        }
        count += 1;
    }
    (count > 0).then(|| total / count as f64)
}

/// Segmentation-head classification, class-specific box and mask losses.
///
/// `predictions` and `proposals` are indexed by proposal; `gt` holds
/// `(box, class)` pairs. `pred_masks[k]` / `gt_masks[k]` belong to
/// `sampled.positives[k]`, the prediction being the channel of the matched
/// ground-truth class. All three losses are normalized by `|N|`.
pub fn loss_rsh(
    predictions: &[RshPrediction],
    proposals: &[BBox],
    gt: &[(BBox, u32)],
    sampled: &MatchSet,
    pred_masks: &[MaskGrid],
    gt_masks: &[GtMask],
) -> Result<RshLoss, LossError> {
    let positives = sampled.positives.len();
    if pred_masks.len() != positives || gt_masks.len() != positives {
        return Err(LossError::MaskCount {
            expected: positives,
            actual: pred_masks.len().min(gt_masks.len()),
        });
    }
    let n = sampled.len();
    if n == 0 {
        return Ok(RshLoss {
            classification: LossValue::new(0.0),
            regression: LossValue::new(0.0),
            mask: LossValue::new(0.0),
            empty: true,
            void_masks: Vec::new(),
        });
    }
    let norm = n as f64;
    let (mut cls, mut bb, mut msk) = (0.0, 0.0, 0.0);
    let mut void_masks = Vec::new();
    for (k, &(g, p)) in sampled.positives.iter().enumerate() {
        let (gt_box, class) = *get(gt, g, "ground truth")?;
        let pred = get(predictions, p, "prediction")?;
        let proposal = get(proposals, p, "proposal")?;
        let c = class as usize;
        if c == 0 {
            return Err(LossError::InvalidClass { class });
        }
        let s = check_score(*pred.class_probs.get(c).ok_or(LossError::InvalidClass { class })?)?;
        let class_box = pred.class_boxes.get(c - 1).ok_or(LossError::InvalidClass { class })?;
        cls -= math::ln(s) / norm;
        bb += box_term(&gt_box, class_box, proposal.w, proposal.h) / norm;
        match mask_log_loss(&pred_masks[k], &gt_masks[k]) {
            Some(l) => msk += l / norm,
            None => void_masks.push(k),
        }
    }
    for &p in &sampled.negatives {
        let pred = get(predictions, p, "prediction")?;
        let s = check_score(*pred.class_probs.first().ok_or(LossError::InvalidClass { class: 0 })?)?;
        cls -= math::ln(s) / norm;
    }
    Ok(RshLoss {
        classification: LossValue::new(cls),
        regression: LossValue::new(bb),
        mask: LossValue::new(msk),
        empty: false,
        void_masks,
    })
}

/// All six losses of one image, equally weighted.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    pub l_ss: f64,
    pub l_rpn_ob: f64,
    pub l_rpn_bb: f64,
    pub l_rsh_cls: f64,
    pub l_rsh_bb: f64,
    pub l_rsh_msk: f64,
}

impl LossReport {
    pub fn total(&self) -> f64 {
        self.l_ss + self.l_rpn_ob + self.l_rpn_bb + self.l_rsh_cls + self.l_rsh_bb + self.l_rsh_msk
    }
}
