//! Panoptic quality (PQ) and its stuff-relaxed variant PQ†.
//!
//! PQ matches ground-truth and predicted segments of the same class when
//! their IoU exceeds 0.5; non-overlap makes such matches unique, so a single
//! pass over `(gt id, pred id)` co-occurrence counts finds them all. Void
//! handling:
//!
//! - ground-truth void pixels are removed from every union;
//! - an unmatched prediction lying more than half on ground-truth void is not
//!   a false positive;
//! - an unmatched ground-truth segment lying more than half on predicted void
//!   is not a false negative (can be switched off with
//!   [`EvalOptions::fn_void_rule`]).
//!
//! PQ† keeps PQ for things. For a stuff class it averages, over every image
//! whose ground truth contains the class, the IoU between the class's ground
//! truth and predicted regions, counting any positive IoU.
//!
//! [`MetricAccumulator`] is a commutative monoid under [`MetricAccumulator::merge`],
//! so datasets can be reduced in parallel; merging in a fixed order keeps the
//! floating-point sums reproducible.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use thiserror::Error;

use crate::model::{ClassKind, ClassTable, PanopticMap};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("ground truth is {gt_w}x{gt_h} but prediction is {pred_w}x{pred_h}")]
    DimensionMismatch {
        gt_w: usize,
        gt_h: usize,
        pred_w: usize,
        pred_h: usize,
    },
    #[error("accumulators were built for different class tables")]
    ClassTableMismatch,
    #[error("segment {segment_id} has class {class_id}, which the accumulator does not know")]
    UnknownClass { segment_id: u32, class_id: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Exempt ground-truth segments lying more than half on predicted void
    /// from the false negatives.
    pub fn_void_rule: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { fn_void_rule: true }
    }
}

/// IoU of two segments of the same image with ground-truth void removed:
/// `|g ∩ p ∖ V| / |(g ∪ p) ∖ V|`, or 0 when the union is empty.
///
/// All three masks are row-major over the same image.
pub fn segment_iou(gt_seg: &[bool], pred_seg: &[bool], gt_void: &[bool]) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for ((&g, &p), &v) in gt_seg.iter().zip(pred_seg).zip(gt_void) {
        if v {
            continue;
        }
        if g && p {
            inter += 1;
        }
        if g || p {
            union += 1;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentMatch {
    pub class_id: u32,
    pub gt_id: u32,
    pub pred_id: u32,
    pub iou: f64,
}

/// Per-image stuff-class entry for PQ†.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StuffOverlap {
    pub class_id: u32,
    /// IoU of the class regions, `None` when the prediction does not
    /// overlap the ground truth of this class at all.
    pub iou: Option<f64>,
}

/// Everything one image contributes, with segment identities kept.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImageMatches {
    /// True positives ordered by ground-truth id.
    pub true_positives: Vec<SegmentMatch>,
    /// `(class, pred id)`, ascending by pred id.
    pub false_positives: Vec<(u32, u32)>,
    /// `(class, gt id)`, ascending by gt id.
    pub false_negatives: Vec<(u32, u32)>,
    /// Unmatched predictions exempted by the ground-truth void rule.
    pub void_exempt_predictions: Vec<u32>,
    /// Unmatched ground truth exempted by the predicted void rule.
    pub void_exempt_ground_truth: Vec<u32>,
    /// One entry per stuff class present in the ground truth, ascending.
    pub stuff_overlaps: Vec<StuffOverlap>,
}

#[derive(Debug, Default)]
struct SegmentStats {
    area: u64,
    /// Pixels lying on void of the other map.
    on_void: u64,
}

/// Matches one ground-truth / prediction pair of maps.
pub fn match_image(
    gt: &PanopticMap,
    pred: &PanopticMap,
    classes: &ClassTable,
    opts: &EvalOptions,
) -> Result<ImageMatches, MetricError> {
    if gt.width() != pred.width() || gt.height() != pred.height() {
        return Err(MetricError::DimensionMismatch {
            gt_w: gt.width(),
            gt_h: gt.height(),
            pred_w: pred.width(),
            pred_h: pred.height(),
        });
    }
    for map in [gt, pred] {
        for (&segment_id, &class_id) in map.segments() {
            if !classes.contains(class_id) {
                return Err(MetricError::UnknownClass {
                    segment_id,
                    class_id,
                });
            }
        }
    }

    let mut overlap: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    let mut gt_stats: BTreeMap<u32, SegmentStats> = BTreeMap::new();
    let mut pred_stats: BTreeMap<u32, SegmentStats> = BTreeMap::new();
    let mut run: Option<((u32, u32), u64)> = None;
    let mut flush = |run: &mut Option<((u32, u32), u64)>| {
        if let Some((key, n)) = run.take() {
            *overlap.entry(key).or_default() += n;
        }
    };
    for (&g, &p) in gt.pixels().iter().zip(pred.pixels()) {
        match &mut run {
            Some((key, n)) if *key == (g, p) => *n += 1,
            _ => {
                flush(&mut run);
                run = Some(((g, p), 1));
            }
        }
    }
    flush(&mut run);

    for (&(g, p), &n) in &overlap {
        if g != 0 {
            let s = gt_stats.entry(g).or_default();
            s.area += n;
            if p == 0 {
                s.on_void += n;
            }
        }
        if p != 0 {
            let s = pred_stats.entry(p).or_default();
            s.area += n;
            if g == 0 {
                s.on_void += n;
            }
        }
    }

    let gt_class = |id: u32| gt.class_of(id).expect("validated map");
    let pred_class = |id: u32| pred.class_of(id).expect("validated map");
    // Union with ground-truth void removed from the prediction.
    let iou = |g: u32, p: u32, inter: u64| -> f64 {
        let ga = gt_stats[&g].area;
        let pa = pred_stats[&p].area - pred_stats[&p].on_void;
        inter as f64 / (ga + pa - inter) as f64
    };

    let mut out = ImageMatches::default();
    let mut matched_gt = BTreeSet::new();
    let mut matched_pred = BTreeSet::new();
    for (&(g, p), &inter) in &overlap {
        if g == 0 || p == 0 || gt_class(g) != pred_class(p) {
            continue;
        }
        let v = iou(g, p, inter);
        if v > 0.5 {
            matched_gt.insert(g);
            matched_pred.insert(p);
            out.true_positives.push(SegmentMatch {
                class_id: gt_class(g),
                gt_id: g,
                pred_id: p,
                iou: v,
            });
        }
    }

    for (&p, s) in &pred_stats {
        if matched_pred.contains(&p) {
            continue;
        }
        if 2 * s.on_void > s.area {
            out.void_exempt_predictions.push(p);
        } else {
            out.false_positives.push((pred_class(p), p));
        }
    }
    for (&g, s) in &gt_stats {
        if matched_gt.contains(&g) {
            continue;
        }
        if opts.fn_void_rule && 2 * s.on_void > s.area {
            out.void_exempt_ground_truth.push(g);
        } else {
            out.false_negatives.push((gt_class(g), g));
        }
    }

    // PQ†: stuff regions per class, merging any repeated segments of a class.
    #[derive(Default)]
    struct Region {
        gt_area: u64,
        pred_area: u64,
        pred_on_void: u64,
        inter: u64,
    }
    let mut regions: BTreeMap<u32, Region> = BTreeMap::new();
    let is_stuff = |c: u32| classes.kind(c) == Some(ClassKind::Stuff);
    for (&g, s) in &gt_stats {
        let c = gt_class(g);
        if is_stuff(c) {
            regions.entry(c).or_default().gt_area += s.area;
        }
    }
    for (&p, s) in &pred_stats {
        let c = pred_class(p);
        if is_stuff(c) {
            let r = regions.entry(c).or_default();
            r.pred_area += s.area;
            r.pred_on_void += s.on_void;
        }
    }
    for (&(g, p), &n) in &overlap {
        if g != 0 && p != 0 && gt_class(g) == pred_class(p) && is_stuff(gt_class(g)) {
            regions.get_mut(&gt_class(g)).expect("region exists").inter += n;
        }
    }
    for (&class_id, r) in &regions {
        if r.gt_area == 0 {
            continue;
        }
        let iou = (r.inter > 0).then(|| {
            r.inter as f64 / (r.gt_area + r.pred_area - r.pred_on_void - r.inter) as f64
        });
        out.stuff_overlaps.push(StuffOverlap { class_id, iou });
    }
    Ok(out)
}

/// Counts and IoU sums of one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassStats {
    pub kind: ClassKind,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tp_iou_sum: f64,
    /// Stuff only: sum of positive region IoUs.
    pub dagger_iou_sum: f64,
    /// Stuff only: images whose ground truth contains the class.
    pub dagger_gt_count: u64,
}

impl ClassStats {
    fn new(kind: ClassKind) -> Self {
        Self {
            kind,
            tp: 0,
            fp: 0,
            fn_: 0,
            tp_iou_sum: 0.0,
            dagger_iou_sum: 0.0,
            dagger_gt_count: 0,
        }
    }

    fn add(&mut self, other: &ClassStats) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tp_iou_sum += other.tp_iou_sum;
        self.dagger_iou_sum += other.dagger_iou_sum;
        self.dagger_gt_count += other.dagger_gt_count;
    }
}

/// Per-class totals over any number of images.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricAccumulator {
    classes: BTreeMap<u32, ClassStats>,
}

impl MetricAccumulator {
    /// Empty accumulator with one zeroed entry per class of the table.
    pub fn new(classes: &ClassTable) -> Self {
        Self {
            classes: classes
                .iter()
                .map(|(id, info)| (id, ClassStats::new(info.kind)))
                .collect(),
        }
    }

    pub fn stats(&self, class_id: u32) -> Option<&ClassStats> {
        self.classes.get(&class_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &ClassStats)> {
        self.classes.iter().map(|(&id, s)| (id, s))
    }

    /// Folds the matches of one image in.
    pub fn add_matches(&mut self, m: &ImageMatches) -> Result<(), MetricError> {
        // Validate first so a failing image leaves the accumulator untouched.
        let referenced = m
            .true_positives
            .iter()
            .map(|t| (t.class_id, t.pred_id))
            .chain(m.false_positives.iter().copied())
            .chain(m.false_negatives.iter().copied())
            .chain(m.stuff_overlaps.iter().map(|s| (s.class_id, 0)));
        for (class_id, segment_id) in referenced {
            if !self.classes.contains_key(&class_id) {
                return Err(MetricError::UnknownClass {
                    segment_id,
                    class_id,
                });
            }
        }

        for t in &m.true_positives {
            let s = self.classes.get_mut(&t.class_id).expect("validated");
            s.tp += 1;
            s.tp_iou_sum += t.iou;
        }
        for &(c, _) in &m.false_positives {
            self.classes.get_mut(&c).expect("validated").fp += 1;
        }
        for &(c, _) in &m.false_negatives {
            self.classes.get_mut(&c).expect("validated").fn_ += 1;
        }
        for o in &m.stuff_overlaps {
            let s = self.classes.get_mut(&o.class_id).expect("validated");
            s.dagger_gt_count += 1;
            if let Some(iou) = o.iou {
                s.dagger_iou_sum += iou;
            }
        }
        Ok(())
    }

    /// Fieldwise sum. Both sides must come from the same class table.
    pub fn merge(&self, other: &MetricAccumulator) -> Result<MetricAccumulator, MetricError> {
        let mut out = self.clone();
        out.merge_in(other)?;
        Ok(out)
    }

    pub fn merge_in(&mut self, other: &MetricAccumulator) -> Result<(), MetricError> {
        let same_table = self.classes.len() == other.classes.len()
            && self
                .classes
                .iter()
                .zip(&other.classes)
                .all(|((a, sa), (b, sb))| a == b && sa.kind == sb.kind);
        if !same_table {
            return Err(MetricError::ClassTableMismatch);
        }
        for (s, o) in self.classes.values_mut().zip(other.classes.values()) {
            s.add(o);
        }
        Ok(())
    }
}

/// Matches one image and adds it to `acc`.
pub fn accumulate_image(
    gt: &PanopticMap,
    pred: &PanopticMap,
    classes: &ClassTable,
    opts: &EvalOptions,
    mut acc: MetricAccumulator,
) -> Result<MetricAccumulator, MetricError> {
    let m = match_image(gt, pred, classes, opts)?;
    acc.add_matches(&m)?;
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassReport {
    pub kind: ClassKind,
    /// `None` when the class never occurred (`tp + fp + fn = 0`).
    pub pq: Option<f64>,
    /// `None` for stuff never present in the ground truth, or things with
    /// undefined PQ.
    pub pq_dagger: Option<f64>,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub pq: Option<f64>,
    pub pq_dagger: Option<f64>,
    pub pq_stuff: Option<f64>,
    pub pq_things: Option<f64>,
    pub per_class: BTreeMap<u32, ClassReport>,
    /// Classes with at least one undefined score, ascending.
    pub undefined_classes: Vec<u32>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-class scores and their averages over the classes where each score is
/// defined.
pub fn finalize(acc: &MetricAccumulator) -> MetricReport {
    let mut per_class = BTreeMap::new();
    let mut undefined_classes = Vec::new();
    for (id, s) in acc.iter() {
        let denom = s.tp as f64 + 0.5 * s.fp as f64 + 0.5 * s.fn_ as f64;
        let pq = (s.tp + s.fp + s.fn_ > 0).then(|| s.tp_iou_sum / denom);
        let pq_dagger = match s.kind {
            ClassKind::Thing => pq,
            ClassKind::Stuff => {
                (s.dagger_gt_count > 0).then(|| s.dagger_iou_sum / s.dagger_gt_count as f64)
            }
        };
        if pq.is_none() || pq_dagger.is_none() {
            undefined_classes.push(id);
        }
        per_class.insert(
            id,
            ClassReport {
                kind: s.kind,
                pq,
                pq_dagger,
                tp: s.tp,
                fp: s.fp,
                fn_: s.fn_,
            },
        );
    }
    let of_kind = |kind: ClassKind| {
        mean(
            per_class
                .values()
                .filter(|c| c.kind == kind)
                .filter_map(|c| c.pq),
        )
    };
    MetricReport {
        pq: mean(per_class.values().filter_map(|c| c.pq)),
        pq_dagger: mean(per_class.values().filter_map(|c| c.pq_dagger)),
        pq_stuff: of_kind(ClassKind::Stuff),
        pq_things: of_kind(ClassKind::Thing),
        per_class,
        undefined_classes,
    }
}
