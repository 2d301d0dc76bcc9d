//! Axis-aligned boxes in center-size form, anchors, the box offset codec,
//! FPN level selection and greedy NMS.

use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

use crate::math;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box dimensions must be positive and finite (w={w}, h={h})")]
    InvalidBox { w: f64, h: f64 },
    #[error("box offsets must be finite")]
    NonFiniteDelta,
    #[error("box lies entirely outside the {width}x{height} image")]
    OutsideImage { width: f64, height: f64 },
    #[error("at least one aspect ratio is required")]
    NoAspectRatios,
    #[error("anchor levels need one stride and one area each ({strides} strides, {areas} areas)")]
    LevelMismatch { strides: usize, areas: usize },
    #[error("anchor stride, area and aspect ratios must be positive")]
    NonPositiveAnchorParameter,
}

/// Box with center `(cx, cy)` and size `(w, h)` in continuous image
/// coordinates (pixels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        let b = Self { cx, cy, w, h };
        b.validate()?;
        Ok(b)
    }

    /// From corner form `(x0, y0, x1, y1)`.
    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        Self::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = self.cx.is_finite()
            && self.cy.is_finite()
            && self.w.is_finite()
            && self.h.is_finite()
            && self.w > 0.0
            && self.h > 0.0;
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidBox {
                w: self.w,
                h: self.h,
            })
        }
    }

    /// `(x0, y0, x1, y1)`.
    pub fn corners(&self) -> [f64; 4] {
        [
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        ]
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Offsets `(o_u, o_v, o_w, o_h)` relative to a reference box.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoxDelta {
    pub du: f64,
    pub dv: f64,
    pub dw: f64,
    pub dh: f64,
}

impl BoxDelta {
    pub fn new(du: f64, dv: f64, dw: f64, dh: f64) -> Self {
        Self { du, dv, dw, dh }
    }

    pub fn is_finite(&self) -> bool {
        self.du.is_finite() && self.dv.is_finite() && self.dw.is_finite() && self.dh.is_finite()
    }
}

/// Reference box at a feature-grid location of one pyramid level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub bbox: BBox,
    /// Index into the level list the anchor was generated from.
    pub level: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox {
    pub bbox: BBox,
    pub score: f64,
    pub class_id: Option<u32>,
}

/// Applies offsets to `reference`: the center moves by a fraction of the
/// reference size and each side scales by `exp` of its offset.
pub fn decode_box(reference: &BBox, delta: &BoxDelta) -> Result<BBox, GeometryError> {
    if !delta.is_finite() {
        return Err(GeometryError::NonFiniteDelta);
    }
    Ok(BBox {
        cx: reference.cx + delta.du * reference.w,
        cy: reference.cy + delta.dv * reference.h,
        w: reference.w * math::exp(delta.dw),
        h: reference.h * math::exp(delta.dh),
    })
}

/// Inverse of [`decode_box`].
pub fn encode_box(reference: &BBox, target: &BBox) -> BoxDelta {
    BoxDelta {
        du: (target.cx - reference.cx) / reference.w,
        dv: (target.cy - reference.cy) / reference.h,
        dw: math::ln(target.w / reference.w),
        dh: math::ln(target.h / reference.h),
    }
}

/// Intersection over union of two axis-aligned boxes.
pub fn iou_box(a: &BBox, b: &BBox) -> f64 {
    let [ax0, ay0, ax1, ay1] = a.corners();
    let [bx0, by0, bx1, by1] = b.corners();
    let iw = ax1.min(bx1) - ax0.max(bx0);
    let ih = ay1.min(by1) - ay0.max(by0);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Pyramid level an ROI of size `w × h` is pooled from:
/// `max(1, min(4, ⌊3 + log2(√(wh) / 224)⌋))`.
pub fn fpn_level(w: f64, h: f64) -> u32 {
    let k = math::floor(3.0 + math::log2(math::sqrt(w * h) / 224.0));
    k.clamp(1.0, 4.0) as u32
}

/// Anchors for every level: grid positions at `((i + 0.5)·stride,
/// (j + 0.5)·stride)`, one anchor per aspect ratio `ρ` with
/// `w = √(area·ρ)`, `h = √(area/ρ)`. Anchors not entirely inside the image
/// are dropped.
///
/// Output order: level, then row, then column, then aspect ratio.
pub fn generate_anchors(
    image_w: f64,
    image_h: f64,
    level_strides: &[f64],
    level_areas: &[f64],
    aspect_ratios: &[f64],
) -> Result<Vec<Anchor>, GeometryError> {
    if aspect_ratios.is_empty() {
        return Err(GeometryError::NoAspectRatios);
    }
    if level_strides.len() != level_areas.len() {
        return Err(GeometryError::LevelMismatch {
            strides: level_strides.len(),
            areas: level_areas.len(),
        });
    }
    let positive = |v: &f64| v.is_finite() && *v > 0.0;
    if !level_strides.iter().all(positive)
        || !level_areas.iter().all(positive)
        || !aspect_ratios.iter().all(positive)
    {
        return Err(GeometryError::NonPositiveAnchorParameter);
    }

    let mut anchors = Vec::new();
    for (level, (&stride, &area)) in level_strides.iter().zip(level_areas).enumerate() {
        let sizes: Vec<(f64, f64)> = aspect_ratios
            .iter()
            .map(|&r| (math::sqrt(area * r), math::sqrt(area / r)))
            .collect();
        let cols = math::ceil(image_w / stride) as usize;
        let rows = math::ceil(image_h / stride) as usize;
        for j in 0..rows {
            let cy = (j as f64 + 0.5) * stride;
            for i in 0..cols {
                let cx = (i as f64 + 0.5) * stride;
                for &(w, h) in &sizes {
                    let bbox = BBox { cx, cy, w, h };
                    let [x0, y0, x1, y1] = bbox.corners();
                    if x0 >= 0.0 && y0 >= 0.0 && x1 <= image_w && y1 <= image_h {
                        anchors.push(Anchor { bbox, level });
                    }
                }
            }
        }
    }
    Ok(anchors)
}

/// Descending score, ties broken by lower input index.
pub(crate) fn score_order(scores: impl Fn(usize) -> f64, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| match scores(b).total_cmp(&scores(a)) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    order
}

/// Greedy NMS. Returns kept input indices in processing order (descending
/// score). A box survives iff its IoU with every previously kept box (of the
/// same class when `per_class`) is at most `iou_threshold`.
pub fn nms(boxes: &[ScoredBox], iou_threshold: f64, per_class: bool) -> Vec<usize> {
    let order = score_order(|i| boxes[i].score, boxes.len());
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let suppressed = kept.iter().any(|&k| {
            (!per_class || boxes[k].class_id == boxes[i].class_id)
                && iou_box(&boxes[k].bbox, &boxes[i].bbox) > iou_threshold
        });
        if !suppressed {
            kept.push(i);
        }
    }
    kept
}

/// Intersects the box with `[0, image_w] × [0, image_h]`.
pub fn clip_box(bbox: &BBox, image_w: f64, image_h: f64) -> Result<BBox, GeometryError> {
    let [x0, y0, x1, y1] = bbox.corners();
    let (x0, x1) = (x0.max(0.0), x1.min(image_w));
    let (y0, y1) = (y0.max(0.0), y1.min(image_h));
    if x1 <= x0 || y1 <= y0 {
        return Err(GeometryError::OutsideImage {
            width: image_w,
            height: image_h,
        });
    }
    Ok(BBox {
        cx: (x0 + x1) / 2.0,
        cy: (y0 + y1) / 2.0,
        w: x1 - x0,
        h: y1 - y0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::LN_2;
    use proptest::prelude::*;

    fn corners(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::from_corners(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn decode_examples() {
        let r = BBox::new(10.0, 10.0, 4.0, 2.0).unwrap();
        assert_eq!(decode_box(&r, &BoxDelta::default()).unwrap(), r);
        let moved = decode_box(&r, &BoxDelta::new(0.5, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!((moved.cx, moved.cy), (12.0, 10.0));
        let wide = decode_box(&r, &BoxDelta::new(0.0, 0.0, LN_2, 0.0)).unwrap();
        assert!((wide.w - 8.0).abs() < 1e-12);
        assert_eq!(
            decode_box(&r, &BoxDelta::new(f64::NAN, 0.0, 0.0, 0.0)),
            Err(GeometryError::NonFiniteDelta)
        );
    }

    #[test]
    fn encode_examples() {
        let r = BBox::new(3.0, 4.0, 4.0, 6.0).unwrap();
        assert_eq!(encode_box(&r, &r), BoxDelta::default());
        let t = BBox::new(3.0, 4.0, 8.0, 6.0).unwrap();
        assert!((encode_box(&r, &t).dw - LN_2).abs() < 1e-15);
    }

    #[test]
    fn iou_examples() {
        let a = corners(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou_box(&a, &a), 1.0);
        assert_eq!(iou_box(&a, &corners(5.0, 5.0, 6.0, 6.0)), 0.0);
        // Touching edges have zero intersection.
        assert_eq!(iou_box(&a, &corners(2.0, 0.0, 4.0, 2.0)), 0.0);
        let b = corners(1.0, 0.0, 3.0, 2.0);
        assert!((iou_box(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn fpn_level_examples() {
        assert_eq!(fpn_level(224.0, 224.0), 3);
        assert_eq!(fpn_level(14.0, 14.0), 1);
        assert_eq!(fpn_level(1792.0, 1792.0), 4);
        assert_eq!(fpn_level(112.0, 112.0), 2);
        assert_eq!(fpn_level(111.0, 111.0), 1);
        assert_eq!(fpn_level(448.0, 448.0), 4);
    }

    #[test]
    fn anchor_dimensions_and_containment() {
        let a = generate_anchors(16.0, 16.0, &[4.0], &[64.0], &[1.0]).unwrap();
        assert!(a.iter().all(|a| a.bbox.w == 8.0 && a.bbox.h == 8.0));
        // Centers at 2, 6, 10, 14; only 6 and 10 keep an 8 px box inside 16 px.
        assert_eq!(a.len(), 4);
        assert!(a.iter().all(|a| a.bbox.cx == 6.0 || a.bbox.cx == 10.0));

        let r2 = generate_anchors(64.0, 64.0, &[4.0], &[64.0], &[2.0]).unwrap();
        let s = core::f64::consts::SQRT_2;
        assert!((r2[0].bbox.w - 8.0 * s).abs() < 1e-12);
        assert!((r2[0].bbox.h - 4.0 * s).abs() < 1e-12);

        assert_eq!(
            generate_anchors(64.0, 64.0, &[4.0], &[64.0], &[]),
            Err(GeometryError::NoAspectRatios)
        );
    }

    #[test]
    fn anchors_carry_their_level() {
        let a = generate_anchors(64.0, 64.0, &[4.0, 8.0], &[64.0, 256.0], &[0.5, 1.0, 2.0]).unwrap();
        assert!(a.iter().any(|a| a.level == 1));
        for anchor in &a {
            let area = [64.0, 256.0][anchor.level];
            assert!((anchor.bbox.area() - area).abs() < 1e-9);
        }
    }

    #[test]
    fn nms_examples() {
        let b = corners(0.0, 0.0, 10.0, 10.0);
        let one = [ScoredBox { bbox: b, score: 0.3, class_id: None }];
        assert_eq!(nms(&one, 0.5, false), vec![0]);
        assert!(nms(&[], 0.5, false).is_empty());

        let two = [
            ScoredBox { bbox: b, score: 0.8, class_id: None },
            ScoredBox { bbox: b, score: 0.9, class_id: None },
        ];
        assert_eq!(nms(&two, 0.99, false), vec![1]);

        let classes = [
            ScoredBox { bbox: b, score: 0.8, class_id: Some(1) },
            ScoredBox { bbox: b, score: 0.9, class_id: Some(2) },
        ];
        assert_eq!(nms(&classes, 0.5, true), vec![1, 0]);
        assert_eq!(nms(&classes, 0.5, false), vec![1]);
    }

    #[test]
    fn nms_ties_prefer_lower_index() {
        let b = corners(0.0, 0.0, 10.0, 10.0);
        let tied = [
            ScoredBox { bbox: b, score: 0.5, class_id: None },
            ScoredBox { bbox: b, score: 0.5, class_id: None },
        ];
        assert_eq!(nms(&tied, 0.5, false), vec![0]);
    }

    #[test]
    fn clip_examples() {
        let inside = corners(1.0, 1.0, 4.0, 4.0);
        assert_eq!(clip_box(&inside, 10.0, 10.0).unwrap(), inside);
        let left = clip_box(&corners(-2.0, 1.0, 4.0, 4.0), 10.0, 10.0).unwrap();
        assert_eq!(left.corners()[0], 0.0);
        let c = clip_box(&corners(-2.0, -2.0, 2.0, 2.0), 10.0, 10.0).unwrap();
        assert_eq!(c.corners(), [0.0, 0.0, 2.0, 2.0]);
        assert!(clip_box(&corners(11.0, 1.0, 12.0, 2.0), 10.0, 10.0).is_err());
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (-50.0..50.0f64, -50.0..50.0f64, 0.1..40.0f64, 0.1..40.0f64)
            .prop_map(|(cx, cy, w, h)| BBox { cx, cy, w, h })
    }

    proptest! {
        #[test]
        fn iou_is_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = iou_box(&a, &b);
            prop_assert_eq!(ab, iou_box(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((iou_box(&a, &a) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn encode_then_decode_is_identity(r in arb_box(), t in arb_box()) {
            let back = decode_box(&r, &encode_box(&r, &t)).unwrap();
            for (x, y) in [(back.cx, t.cx), (back.cy, t.cy), (back.w, t.w), (back.h, t.h)] {
                prop_assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
            }
        }

        #[test]
        fn fpn_level_is_monotone(s in 1.0..5000.0f64, grow in 0.0..100.0f64) {
            prop_assert!(fpn_level(s, s) <= fpn_level(s + grow, s + grow));
        }

        #[test]
        fn per_class_nms_never_crosses_classes(
            raw in proptest::collection::vec((arb_box(), 0.0..1.0f64, 0u32..3), 0..12)
        ) {
            let boxes: Vec<ScoredBox> = raw
                .iter()
                .map(|&(bbox, score, c)| ScoredBox { bbox, score, class_id: Some(c) })
                .collect();
            let all = nms(&boxes, 0.5, true);
            for c in 0..3 {
                let idx: Vec<usize> = (0..boxes.len()).filter(|&i| boxes[i].class_id == Some(c)).collect();
                let sub: Vec<ScoredBox> = idx.iter().map(|&i| boxes[i]).collect();
                let mut expect: Vec<usize> = nms(&sub, 0.5, false).into_iter().map(|k| idx[k]).collect();
                let mut got: Vec<usize> = all.iter().copied().filter(|&i| boxes[i].class_id == Some(c)).collect();
                expect.sort_unstable();
                got.sort_unstable();
                prop_assert_eq!(expect, got);
            }
        }
    }
}
