//! Ground-truth assignment for the proposal and segmentation heads, and
//! capped uniform sampling of the resulting matches.

use alloc::vec::Vec;

use thiserror::Error;

use crate::geometry::{iou_box, Anchor, BBox};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error("thresholds must satisfy 0 <= tau_low < tau_high <= 1 and 0 < eta <= 1")]
    InvalidThresholds,
    #[error("sampling caps must be positive with pos_cap <= total_cap")]
    InvalidCaps,
}

/// Sampling caps for the two heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleCaps {
    pub rpn_pos: usize,
    pub rpn_total: usize,
    pub rsh_pos: usize,
    pub rsh_total: usize,
}

impl Default for SampleCaps {
    fn default() -> Self {
        Self {
            rpn_pos: 128,
            rpn_total: 256,
            rsh_pos: 128,
            rsh_total: 512,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatcherConfig {
    pub tau_high: f64,
    pub tau_low: f64,
    pub eta: f64,
    pub caps: SampleCaps,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            tau_high: 0.7,
            tau_low: 0.3,
            eta: 0.5,
            caps: SampleCaps::default(),
        }
    }
}

impl MatcherConfig {
    pub fn validate(&self) -> Result<(), MatchError> {
        let t = 0.0 <= self.tau_low
            && self.tau_low < self.tau_high
            && self.tau_high <= 1.0
            && 0.0 < self.eta
            && self.eta <= 1.0;
        if !t {
            return Err(MatchError::InvalidThresholds);
        }
        let c = &self.caps;
        if c.rpn_pos == 0 || c.rsh_pos == 0 || c.rpn_pos > c.rpn_total || c.rsh_pos > c.rsh_total {
            return Err(MatchError::InvalidCaps);
        }
        Ok(())
    }
}

/// Positive `(gt_index, pred_index)` pairs plus negative and ignored
/// prediction indices. A prediction index appears in at most one of the
/// three lists, though it may appear in several positive pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchSet {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<usize>,
    pub ignored: Vec<usize>,
}

impl MatchSet {
    /// `|M₊| + |M₋|`.
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Index and value of the maximum; ties keep the lowest index.
fn argmax(values: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

/// Proposal-head assignment.
///
/// Every anchor is positive toward its best ground truth when that IoU is
/// above `tau_high`, negative when below `tau_low`, ignored otherwise. Each
/// ground truth additionally forces its best anchor (lowest index on ties)
/// positive, whatever the IoU. Positives are ordered by `(pred, gt)`.
pub fn match_rpn(anchors: &[Anchor], gt: &[BBox], cfg: &MatcherConfig) -> MatchSet {
    let ious: Vec<Vec<f64>> = anchors
        .iter()
        .map(|a| gt.iter().map(|g| iou_box(&a.bbox, g)).collect())
        .collect();

    let mut positives = Vec::new();
    let mut is_positive = alloc::vec![false; anchors.len()];
    let mut status_negative = alloc::vec![false; anchors.len()];
    for (a, row) in ious.iter().enumerate() {
        match argmax(row.iter().copied()) {
            Some((g, v)) if v > cfg.tau_high => {
                positives.push((g, a));
                is_positive[a] = true;
            }
            Some((_, v)) if v < cfg.tau_low => status_negative[a] = true,
            Some(_) => {}
            None => status_negative[a] = true,
        }
    }
    for g in 0..gt.len() {
        if let Some((a, _)) = argmax(ious.iter().map(|row| row[g])) {
            if !positives.contains(&(g, a)) {
                positives.push((g, a));
            }
            is_positive[a] = true;
        }
    }
    positives.sort_unstable_by_key(|&(g, a)| (a, g));

    let mut negatives = Vec::new();
    let mut ignored = Vec::new();
    for a in 0..anchors.len() {
        if is_positive[a] {
            continue;
        }
        if status_negative[a] {
            negatives.push(a);
        } else {
            ignored.push(a);
        }
    }
    MatchSet {
        positives,
        negatives,
        ignored,
    }
}

/// Segmentation-head assignment: each proposal goes to its best ground truth
/// and is positive iff that IoU exceeds `eta`. Nothing is ignored.
///
/// The caller is responsible for including the ground-truth boxes among the
/// proposals.
pub fn match_rsh(proposals: &[BBox], gt: &[(BBox, u32)], cfg: &MatcherConfig) -> MatchSet {
    let mut out = MatchSet::default();
    for (p, proposal) in proposals.iter().enumerate() {
        match argmax(gt.iter().map(|(g, _)| iou_box(proposal, g))) {
            Some((g, v)) if v > cfg.eta => out.positives.push((g, p)),
            _ => out.negatives.push(p),
        }
    }
    out
}

/// Uniform sampling without replacement: at most `pos_cap` positives, then at
/// most `total_cap − |positives|` negatives. Positives and negatives draw from
/// separate streams of `rng`. Ignored entries pass through unchanged.
pub fn sample_matches(
    ms: &MatchSet,
    pos_cap: usize,
    total_cap: usize,
    rng: &SeededRng,
) -> MatchSet {
    let mut pos_rng = rng.split(0);
    let mut neg_rng = rng.split(1);
    let positives: Vec<(usize, usize)> = pos_rng
        .sample_indices(ms.positives.len(), pos_cap)
        .into_iter()
        .map(|i| ms.positives[i])
        .collect();
    let neg_cap = total_cap.saturating_sub(positives.len());
    let negatives = neg_rng
        .sample_indices(ms.negatives.len(), neg_cap)
        .into_iter()
        .map(|i| ms.negatives[i])
        .collect();
    MatchSet {
        positives,
        negatives,
        ignored: ms.ignored.clone(),
    }
}
