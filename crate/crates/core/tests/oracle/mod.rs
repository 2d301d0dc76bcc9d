//! Slow, direct re-implementations used as test oracles, plus random input
//! generators. Shared with the `panoptic` crate's acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use panoptic_core::geometry::ScoredBox;
use panoptic_core::loss::RshPrediction;
use panoptic_core::tensor::{Conv2dParams, GtMask, MaskLabel, MiniDlWeights};
use panoptic_core::{
    Anchor, BBox, ClassKind, ClassTable, FeatureGrid, MaskGrid, MatchSet, PanopticMap, SeededRng,
};

pub fn uniform(rng: &mut SeededRng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

pub fn range(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

pub fn int(rng: &mut SeededRng, lo: usize, hi_inclusive: usize) -> usize {
    lo + rng.below((hi_inclusive - lo + 1) as u64) as usize
}

// ---------------------------------------------------------------- geometry

pub fn iou_naive(a: &BBox, b: &BBox) -> f64 {
    let (ax0, ax1) = (a.cx - a.w / 2.0, a.cx + a.w / 2.0);
    let (ay0, ay1) = (a.cy - a.h / 2.0, a.cy + a.h / 2.0);
    let (bx0, bx1) = (b.cx - b.w / 2.0, b.cx + b.w / 2.0);
    let (by0, by1) = (b.cy - b.h / 2.0, b.cy + b.h / 2.0);
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    if inter == 0.0 {
        return 0.0;
    }
    inter / ((ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter)
}

/// Repeatedly take the best remaining box and delete everything it
/// suppresses.
pub fn nms_naive(boxes: &[ScoredBox], thr: f64, per_class: bool) -> Vec<usize> {
    let mut alive: Vec<usize> = (0..boxes.len()).collect();
    let mut kept = Vec::new();
    while !alive.is_empty() {
        let mut best = alive[0];
        for &i in &alive {
            if boxes[i].score > boxes[best].score {
                best = i;
            }
        }
        kept.push(best);
        alive.retain(|&i| {
            i != best
                && !((!per_class || boxes[i].class_id == boxes[best].class_id)
                    && iou_naive(&boxes[i].bbox, &boxes[best].bbox) > thr)
        });
    }
    kept
}

/// `max(1, min(4, ⌊3 + log2(√(wh)/224)⌋))` for integer sides, evaluated
/// with integer comparisons only.
pub fn fpn_level_int(w: u64, h: u64) -> u32 {
    let a = w * h;
    if a >= 448 * 448 {
        4
    } else if a >= 224 * 224 {
        3
    } else if a >= 112 * 112 {
        2
    } else {
        1
    }
}

// ---------------------------------------------------------------- tensors

pub fn random_grid(rng: &mut SeededRng, c: usize, h: usize, w: usize) -> FeatureGrid {
    FeatureGrid::from_fn(c, h, w, |_, _, _| range(rng, -1.0, 1.0))
}

pub fn conv_naive(
    feat: &FeatureGrid,
    w: &[f64],
    shape: [usize; 4],
    p: Conv2dParams,
) -> (usize, usize, Vec<f64>) {
    let [oc, ic, kh, kw] = shape;
    let (h, wd) = (feat.height() as isize, feat.width() as isize);
    let pad = p.padding as isize;
    let d = p.dilation as isize;
    let s = p.stride as isize;
    let oh = ((h + 2 * pad - d * (kh as isize - 1) - 1) / s + 1) as usize;
    let ow = ((wd + 2 * pad - d * (kw as isize - 1) - 1) / s + 1) as usize;
    let mut out = vec![0.0; oc * oh * ow];
    for o in 0..oc {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = 0.0;
                for i in 0..ic {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let sy = y as isize * s - pad + ky as isize * d;
                            let sx = x as isize * s - pad + kx as isize * d;
                            let v = if sy < 0 || sx < 0 || sy >= h || sx >= wd {
                                0.0
                            } else {
                                feat.get(i, sy as usize, sx as usize)
                            };
                            acc += w[((o * ic + i) * kh + ky) * kw + kx] * v;
                        }
                    }
                }
                out[(o * oh + y) * ow + x] = acc;
            }
        }
    }
    (oh, ow, out)
}

/// Bilinear interpolation written as a tent-weighted sum over all cells.
fn sample_tent(feat: &FeatureGrid, c: usize, x: f64, y: f64) -> f64 {
    let u = (x - 0.5).max(0.0).min((feat.width() - 1) as f64);
    let v = (y - 0.5).max(0.0).min((feat.height() - 1) as f64);
    let mut acc = 0.0;
    for i in 0..feat.height() {
        let wy = (1.0 - (v - i as f64).abs()).max(0.0);
        if wy == 0.0 {
            continue;
        }
        for j in 0..feat.width() {
            let wx = (1.0 - (u - j as f64).abs()).max(0.0);
            acc += wx * wy * feat.get(c, i, j);
        }
    }
    acc
}

pub fn roi_align_naive(feat: &FeatureGrid, roi: &BBox, n: usize) -> Vec<f64> {
    let x0 = roi.cx - roi.w / 2.0;
    let y0 = roi.cy - roi.h / 2.0;
    let mut out = Vec::new();
    for c in 0..feat.channels() {
        for oy in 0..n {
            for ox in 0..n {
                let mut acc = 0.0;
                for (fy, fx) in [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)] {
                    let x = x0 + roi.w * (ox as f64 + fx) / n as f64;
                    let y = y0 + roi.h * (oy as f64 + fy) / n as f64;
                    acc += sample_tent(feat, c, x, y);
                }
                out.push(acc / 4.0);
            }
        }
    }
    out
}

pub fn avg_pool_naive(feat: &FeatureGrid, k: usize) -> Vec<f64> {
    let (h, w) = (feat.height(), feat.width());
    let before = (k - 1) / 2;
    let mut out = Vec::new();
    for c in 0..feat.channels() {
        for y in 0..h {
            let top = y.saturating_sub(before).min(h - k);
            for x in 0..w {
                let left = x.saturating_sub(before).min(w - k);
                let mut acc = 0.0;
                for yy in top..top + k {
                    for xx in left..left + k {
                        acc += feat.get(c, yy, xx);
                    }
                }
                out.push(acc / (k * k) as f64);
            }
        }
    }
    out
}

pub fn minidl_naive(feat: &FeatureGrid, w: &MiniDlWeights) -> Vec<f64> {
    let (h, wd) = (feat.height(), feat.width());
    let (_, _, a) = conv_naive(feat, w.dilated1.values(), w.dilated1.shape(), Conv2dParams { dilation: 1, stride: 1, padding: 1 });
    let (_, _, b) = conv_naive(feat, w.dilated6.values(), w.dilated6.shape(), Conv2dParams { dilation: 6, stride: 1, padding: 6 });
    let k = w.pool_kernel.min(h).min(wd);
    let pooled = FeatureGrid::new(feat.channels(), h, wd, avg_pool_naive(feat, k)).unwrap();
    let (_, _, c) = conv_naive(&pooled, w.pool_projection.values(), w.pool_projection.shape(), Conv2dParams { dilation: 1, stride: 1, padding: 0 });
    let cat: Vec<f64> = a.into_iter().chain(b).chain(c).collect();
    let cat = FeatureGrid::new(w.fuse.shape()[1], h, wd, cat).unwrap();
    conv_naive(&cat, w.fuse.values(), w.fuse.shape(), Conv2dParams { dilation: 1, stride: 1, padding: 1 }).2
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------- metrics

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BruteClass {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub iou_sum: f64,
    pub dagger_sum: f64,
    pub dagger_count: u64,
}

/// Per-image result of the all-pairs matcher.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BruteMatch {
    /// `(gt id, pred id) → IoU` for every pair above 0.5.
    pub tp: BTreeMap<(u32, u32), f64>,
    pub fp: BTreeSet<u32>,
    pub fn_: BTreeSet<u32>,
    /// Stuff class → region IoU (`None` when the regions do not overlap),
    /// for stuff classes present in the ground truth.
    pub stuff: BTreeMap<u32, Option<f64>>,
}

/// All-pairs PQ matcher that recounts pixels for every candidate pair.
pub fn brute_match(gt: &PanopticMap, pred: &PanopticMap, classes: &ClassTable, fn_void_rule: bool) -> BruteMatch {
    let g = gt.pixels();
    let p = pred.pixels();
    let count = |f: &dyn Fn(usize) -> bool| (0..g.len()).filter(|&i| f(i)).count() as u64;
    let present = |px: &[u32]| px.iter().copied().filter(|&v| v != 0).collect::<BTreeSet<u32>>();
    let gt_ids = present(g);
    let pred_ids = present(p);
    let mut out = BruteMatch::default();

    for &gi in &gt_ids {
        for &pi in &pred_ids {
            if pred.class_of(pi) != gt.class_of(gi) {
                continue;
            }
            let inter = count(&|i| g[i] == gi && p[i] == pi);
            let union = count(&|i| g[i] != 0 && (g[i] == gi || p[i] == pi));
            let iou = inter as f64 / union as f64;
            if iou > 0.5 {
                out.tp.insert((gi, pi), iou);
            }
        }
    }
    let matched_gt: BTreeSet<u32> = out.tp.keys().map(|k| k.0).collect();
    let matched_pred: BTreeSet<u32> = out.tp.keys().map(|k| k.1).collect();
    assert_eq!(matched_gt.len(), out.tp.len(), "a ground-truth segment matched twice");
    assert_eq!(matched_pred.len(), out.tp.len(), "a predicted segment matched twice");

    for &pi in pred_ids.difference(&matched_pred) {
        let area = count(&|i| p[i] == pi);
        let on_void = count(&|i| p[i] == pi && g[i] == 0);
        if on_void as f64 / area as f64 <= 0.5 {
            out.fp.insert(pi);
        }
    }
    for &gi in gt_ids.difference(&matched_gt) {
        let area = count(&|i| g[i] == gi);
        let on_void = count(&|i| g[i] == gi && p[i] == 0);
        if !fn_void_rule || on_void as f64 / area as f64 <= 0.5 {
            out.fn_.insert(gi);
        }
    }

    for c in classes.ids_of_kind(ClassKind::Stuff) {
        let in_gt = |i: usize| g[i] != 0 && gt.class_of(g[i]) == Some(c);
        let in_pred = |i: usize| p[i] != 0 && pred.class_of(p[i]) == Some(c);
        if count(&|i| in_gt(i)) == 0 {
            continue;
        }
        let inter = count(&|i| in_gt(i) && in_pred(i));
        let union = count(&|i| g[i] != 0 && (in_gt(i) || in_pred(i)));
        out.stuff.insert(c, (inter > 0).then(|| inter as f64 / union as f64));
    }
    out
}

/// Adds one image's brute-force result to per-class totals.
pub fn pq_brute(
    gt: &PanopticMap,
    pred: &PanopticMap,
    classes: &ClassTable,
    fn_void_rule: bool,
    out: &mut BTreeMap<u32, BruteClass>,
) {
    let m = brute_match(gt, pred, classes, fn_void_rule);
    for (&(gi, _), &iou) in &m.tp {
        let e = out.entry(gt.class_of(gi).unwrap()).or_default();
        e.tp += 1;
        e.iou_sum += iou;
    }
    for &pi in &m.fp {
        out.entry(pred.class_of(pi).unwrap()).or_default().fp += 1;
    }
    for &gi in &m.fn_ {
        out.entry(gt.class_of(gi).unwrap()).or_default().fn_ += 1;
    }
    for (&c, iou) in &m.stuff {
        let e = out.entry(c).or_default();
        e.dagger_count += 1;
        e.dagger_sum += iou.unwrap_or(0.0);
    }
}

/// Scores from brute counts: `(pq_c, pq_dagger_c)` per class.
pub fn brute_scores(
    stats: &BTreeMap<u32, BruteClass>,
    classes: &ClassTable,
) -> BTreeMap<u32, (Option<f64>, Option<f64>)> {
    let mut out = BTreeMap::new();
    for (id, info) in classes.iter() {
        let s = stats.get(&id).cloned().unwrap_or_default();
        let n = s.tp + s.fp + s.fn_;
        let pq = (n > 0).then(|| s.iou_sum / (s.tp as f64 + (s.fp + s.fn_) as f64 / 2.0));
        let dagger = match info.kind {
            ClassKind::Thing => pq,
            ClassKind::Stuff => (s.dagger_count > 0).then(|| s.dagger_sum / s.dagger_count as f64),
        };
        out.insert(id, (pq, dagger));
    }
    out
}

/// Four stuff classes (1–4) and four thing classes (11–14).
pub fn eight_classes() -> ClassTable {
    let mut entries = Vec::new();
    for i in 1..=4u32 {
        entries.push((i, format!("stuff{i}"), ClassKind::Stuff));
        entries.push((10 + i, format!("thing{i}"), ClassKind::Thing));
    }
    ClassTable::from_entries(entries).unwrap()
}

#[derive(Clone, Copy)]
struct Rect {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
    class: u32,
}

fn paint(w: usize, h: usize, rects: &[Rect], id_base: u32, classes: &ClassTable) -> PanopticMap {
    let mut pixels = vec![0u32; w * h];
    let mut segments = BTreeMap::new();
    for (k, r) in rects.iter().enumerate() {
        let id = id_base + k as u32;
        segments.insert(id, r.class);
        for y in r.y0..r.y1 {
            for x in r.x0..r.x1 {
                pixels[y * w + x] = id;
            }
        }
    }
    PanopticMap::new(w, h, pixels, segments, classes).unwrap()
}

/// A ground-truth map of overlapping rectangles and a jittered,
/// occasionally relabeled prediction of it, over [`eight_classes`].
pub fn random_map_pair(rng: &mut SeededRng, w: usize, h: usize) -> (PanopticMap, PanopticMap) {
    let classes = eight_classes();
    let ids: Vec<u32> = classes.iter().map(|(id, _)| id).collect();
    let rect = |rng: &mut SeededRng| {
        let x0 = int(rng, 0, w - 1);
        let y0 = int(rng, 0, h - 1);
        Rect {
            x0,
            y0,
            x1: int(rng, x0 + 1, w),
            y1: int(rng, y0 + 1, h),
            class: ids[int(rng, 0, ids.len() - 1)],
        }
    };
    let n = int(rng, 1, 10);
    let gt_rects: Vec<Rect> = (0..n).map(|_| rect(rng)).collect();
    let mut pred_rects = Vec::new();
    for r in &gt_rects {
        if uniform(rng) < 0.2 {
            continue;
        }
        let jitter = |rng: &mut SeededRng, v: usize, lo: usize, hi: usize| {
            (v as isize + int(rng, 0, 6) as isize - 3).clamp(lo as isize, hi as isize) as usize
        };
        let x0 = jitter(rng, r.x0, 0, w - 1);
        let y0 = jitter(rng, r.y0, 0, h - 1);
        let x1 = jitter(rng, r.x1, x0 + 1, w);
        let y1 = jitter(rng, r.y1, y0 + 1, h);
        let class = if uniform(rng) < 0.1 { ids[int(rng, 0, ids.len() - 1)] } else { r.class };
        pred_rects.push(Rect { x0, y0, x1, y1, class });
    }
    for _ in 0..int(rng, 0, 2) {
        let at = int(rng, 0, pred_rects.len());
        pred_rects.insert(at, rect(rng));
    }
    // Predicted ids deliberately differ from ground-truth ids.
    (paint(w, h, &gt_rects, 1, &classes), paint(w, h, &pred_rects, 1000, &classes))
}

// ---------------------------------------------------------------- losses

/// Hard-mined semantic log loss with the mined set built by repeated
/// minimum selection.
pub fn semantic_loss_naive(probs: &[f64], classes: usize, labels: &[u32]) -> f64 {
    let n = labels.len();
    let target: Vec<f64> = (0..n).map(|i| probs[i * classes + labels[i] as usize - 1]).collect();
    let mut taken = vec![false; n];
    for _ in 0..n / 4 {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if !taken[i] && best.map_or(true, |b| target[i] < target[b]) {
                best = Some(i);
            }
        }
        taken[best.unwrap()] = true;
    }
    (0..n).filter(|&i| taken[i]).map(|i| -(4.0 / n as f64) * target[i].ln()).sum()
}

fn sl1(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x * x / 2.0
    } else {
        x.abs() - 0.5
    }
}

fn box_reg(t: &BBox, p: &BBox, nw: f64, nh: f64) -> f64 {
    sl1((t.cx - p.cx) / nw) + sl1((t.cy - p.cy) / nh) + sl1((p.w / t.w).ln()) + sl1((p.h / t.h).ln())
}

/// `(objectness, regression)`.
pub fn rpn_loss_naive(
    scores: &[f64],
    pred: &[BBox],
    anchors: &[Anchor],
    gt: &[BBox],
    m: &MatchSet,
) -> (f64, f64) {
    let n = (m.positives.len() + m.negatives.len()) as f64;
    if n == 0.0 {
        return (0.0, 0.0);
    }
    let ob_pos: f64 = m.positives.iter().map(|&(_, p)| -scores[p].ln()).sum();
    let ob_neg: f64 = m.negatives.iter().map(|&p| -(1.0 - scores[p]).ln()).sum();
    let bb: f64 = m
        .positives
        .iter()
        .map(|&(g, p)| box_reg(&gt[g], &pred[p], anchors[p].bbox.w, anchors[p].bbox.h))
        .sum();
    ((ob_pos + ob_neg) / n, bb / n)
}

/// `(classification, regression, mask)`.
pub fn rsh_loss_naive(
    preds: &[RshPrediction],
    proposals: &[BBox],
    gt: &[(BBox, u32)],
    m: &MatchSet,
    pred_masks: &[MaskGrid],
    gt_masks: &[GtMask],
) -> (f64, f64, f64) {
    let n = (m.positives.len() + m.negatives.len()) as f64;
    if n == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let mut cls = 0.0;
    let mut bb = 0.0;
    let mut msk = 0.0;
    for (k, &(g, p)) in m.positives.iter().enumerate() {
        let (b, c) = gt[g];
        cls += -preds[p].class_probs[c as usize].ln();
        bb += box_reg(&b, &preds[p].class_boxes[c as usize - 1], proposals[p].w, proposals[p].h);
        let terms: Vec<f64> = pred_masks[k]
            .values()
            .iter()
            .zip(gt_masks[k].labels())
            .filter_map(|(&q, l)| match l {
                MaskLabel::Foreground => Some(-q.ln()),
                MaskLabel::Background => Some(-(1.0 - q).ln()),
                MaskLabel::Void => None,
            })
            .collect();
        if !terms.is_empty() {
            msk += terms.iter().sum::<f64>() / terms.len() as f64;
        }
    }
    for &p in &m.negatives {
        cls += -preds[p].class_probs[0].ln();
    }
    (cls / n, bb / n, msk / n)
}

pub fn random_minidl(rng: &mut SeededRng, in_channels: usize) -> MiniDlWeights {
    use panoptic_core::tensor::ConvWeights;
    let mut conv = |o: usize, i: usize, k: usize| {
        let n = o * i * k * k;
        // Scaled so activations stay O(1) through the fusion conv.
        let scale = 1.0 / ((i * k * k) as f64).sqrt();
        ConvWeights::new(o, i, k, k, (0..n).map(|_| scale * range(rng, -1.0, 1.0)).collect()).unwrap()
    };
    let c = panoptic_core::tensor::MINIDL_CHANNELS;
    MiniDlWeights {
        dilated1: conv(c, in_channels, 3),
        dilated6: conv(c, in_channels, 3),
        pool_projection: conv(c, in_channels, 1),
        fuse: conv(c, 3 * c, 3),
        pool_kernel: panoptic_core::tensor::MINIDL_POOL_KERNEL,
    }
}

fn random_box(rng: &mut SeededRng, extent: f64) -> BBox {
    let x0 = range(rng, 0.0, extent * 0.8);
    let y0 = range(rng, 0.0, extent * 0.8);
    BBox::from_corners(x0, y0, x0 + range(rng, 2.0, extent * 0.4), y0 + range(rng, 2.0, extent * 0.4)).unwrap()
}

/// Probability vector with every entry in `[0.01, 1]` before normalizing.
fn random_distribution(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| range(rng, 0.01, 1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Inputs of all three loss functions for one random image.
pub struct LossCase {
    pub height: usize,
    pub width: usize,
    pub classes: usize,
    pub probs: Vec<f64>,
    pub labels: Vec<u32>,
    pub scores: Vec<f64>,
    pub pred_boxes: Vec<BBox>,
    pub anchors: Vec<Anchor>,
    pub gt_boxes: Vec<BBox>,
    pub rpn_matches: MatchSet,
    pub rsh: Vec<RshPrediction>,
    pub proposals: Vec<BBox>,
    pub gt_objects: Vec<(BBox, u32)>,
    pub rsh_matches: MatchSet,
    pub pred_masks: Vec<MaskGrid>,
    pub gt_masks: Vec<GtMask>,
}

pub fn random_loss_case(rng: &mut SeededRng) -> LossCase {
    use panoptic_core::matching::{match_rpn, match_rsh, sample_matches};
    let (height, width) = (int(rng, 2, 12), int(rng, 2, 12));
    let classes = int(rng, 2, 6);
    let mut probs = Vec::new();
    for _ in 0..height * width {
        probs.extend(random_distribution(rng, classes));
    }
    let labels = (0..height * width).map(|_| int(rng, 1, classes) as u32).collect();

    let extent = 128.0;
    let n_gt = int(rng, 0, 4);
    let gt_boxes: Vec<BBox> = (0..n_gt).map(|_| random_box(rng, extent)).collect();
    let n_anchor = int(rng, 1, 40);
    let anchors: Vec<Anchor> = (0..n_anchor)
        .map(|k| {
            // Some anchors sit near a ground truth so positives occur.
            let bbox = if !gt_boxes.is_empty() && k % 3 == 0 {
                let g = gt_boxes[k % gt_boxes.len()];
                BBox::new(g.cx + range(rng, -2.0, 2.0), g.cy + range(rng, -2.0, 2.0), g.w * range(rng, 0.8, 1.2), g.h * range(rng, 0.8, 1.2)).unwrap()
            } else {
                random_box(rng, extent)
            };
            Anchor { bbox, level: 0 }
        })
        .collect();
    let scores = (0..n_anchor).map(|_| range(rng, 0.01, 0.99)).collect();
    let pred_boxes = (0..n_anchor).map(|_| random_box(rng, extent)).collect();
    let cfg = panoptic_core::MatcherConfig::default();
    let rpn_matches = sample_matches(&match_rpn(&anchors, &gt_boxes, &cfg), 8, 16, &SeededRng::new(rng.next_u64()));

    let n_cls = int(rng, 1, 5);
    let gt_objects: Vec<(BBox, u32)> = gt_boxes.iter().map(|&b| (b, int(rng, 1, n_cls) as u32)).collect();
    let mut proposals: Vec<BBox> = gt_boxes.clone();
    proposals.extend(anchors.iter().map(|a| a.bbox));
    let rsh_matches = sample_matches(&match_rsh(&proposals, &gt_objects, &cfg), 8, 24, &SeededRng::new(rng.next_u64()));
    let rsh = proposals
        .iter()
        .map(|_| RshPrediction {
            class_probs: random_distribution(rng, n_cls + 1),
            class_boxes: (0..n_cls).map(|_| random_box(rng, extent)).collect(),
        })
        .collect();
    let mut pred_masks = Vec::new();
    let mut gt_masks = Vec::new();
    for k in 0..rsh_matches.positives.len() {
        pred_masks.push(MaskGrid::from_fn(|_, _| range(rng, 0.01, 0.99)).unwrap());
        let all_void = k == 1;
        let labels = (0..28 * 28)
            .map(|_| match (all_void, int(rng, 0, 5)) {
                (true, _) | (_, 0) => MaskLabel::Void,
                (_, 1..=2) => MaskLabel::Foreground,
                _ => MaskLabel::Background,
            })
            .collect();
        gt_masks.push(GtMask::new(labels).unwrap());
    }
    LossCase {
        height,
        width,
        classes,
        probs,
        labels,
        scores,
        pred_boxes,
        anchors,
        gt_boxes,
        rpn_matches,
        rsh,
        proposals,
        gt_objects,
        rsh_matches,
        pred_masks,
        gt_masks,
    }
}
