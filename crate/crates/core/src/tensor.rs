//! Reference forward operations on `C × H × W` grids.
//!
//! Coordinate convention: feature cell `(row i, col j)` is centered at the
//! continuous point `(x, y) = (j + 0.5, i + 0.5)`. Every reduction sums in a
//! fixed order that depends only on positions relative to the output element,
//! so results are bit-reproducible and exactly translation-equivariant where
//! the math says they should be.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::geometry::BBox;
use crate::math;

/// Side of the mask head's square output.
pub const MASK_SIZE: usize = 28;
/// ROIAlign output side used by the segmentation head.
pub const ROI_ALIGN_SIZE: usize = 14;
/// Per-axis sample points inside each ROIAlign output cell.
pub const ROI_SAMPLES: usize = 2;
/// Channel width of every context-module convolution.
pub const MINIDL_CHANNELS: usize = 128;
/// Default pooling kernel of the context module.
pub const MINIDL_POOL_KERNEL: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("grid dimensions must be positive")]
    EmptyGrid,
    #[error("non-finite value in grid")]
    NonFinite,
    #[error("box must have positive finite size")]
    DegenerateBox,
    #[error("box does not intersect the {width}x{height} image")]
    OutsideImage { width: usize, height: usize },
    #[error("pooling kernel {kernel} exceeds the {height}x{width} input")]
    KernelTooLarge {
        kernel: usize,
        height: usize,
        width: usize,
    },
    #[error("kernel, stride and dilation must be positive")]
    InvalidConvParams,
    #[error("weights expect {expected} input channels, grid has {actual}")]
    ChannelMismatch { expected: usize, actual: usize },
    #[error("convolution output would be empty")]
    EmptyOutput,
    #[error("weight tensor `{name}` has shape {actual:?}, expected {expected:?}")]
    WeightShape {
        name: &'static str,
        expected: [usize; 4],
        actual: [usize; 4],
    },
    #[error("mask probabilities must lie in [0, 1]")]
    MaskRange,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        values: Vec<f64>,
    ) -> Result<Self, TensorError> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(TensorError::EmptyGrid);
        }
        let expected = channels * height * width;
        if values.len() != expected {
            return Err(TensorError::ShapeMismatch {
                expected,
                actual: values.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(TensorError::NonFinite);
        }
        Ok(Self {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            values: vec![0.0; channels * height * width],
        }
    }

    /// Grid with `values[c][y][x] = f(c, y, x)`.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    values.push(f(c, y, x));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            values,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.values[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.values[c * n..(c + 1) * n]
    }

    /// Stacks grids of equal spatial size along the channel axis.
    pub fn concat(grids: &[&FeatureGrid]) -> Result<Self, TensorError> {
        let first = grids.first().ok_or(TensorError::EmptyGrid)?;
        let (h, w) = (first.height, first.width);
        let mut values = Vec::new();
        let mut channels = 0;
        for g in grids {
            if g.height != h || g.width != w {
                return Err(TensorError::ShapeMismatch {
                    expected: h * w,
                    actual: g.height * g.width,
                });
            }
            channels += g.channels;
            values.extend_from_slice(&g.values);
        }
        Ok(Self {
            channels,
            height: h,
            width: w,
            values,
        })
    }
}

/// Bilinear sample of one channel at continuous point `(x, y)`. Points
/// beyond the outermost cell centers take the border value.
fn bilinear(plane: &[f64], height: usize, width: usize, x: f64, y: f64) -> f64 {
    let u = (x - 0.5).clamp(0.0, (width - 1) as f64);
    let v = (y - 0.5).clamp(0.0, (height - 1) as f64);
    let x0 = math::floor(u) as usize;
    let y0 = math::floor(v) as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = u - x0 as f64;
    let fy = v - y0 as f64;
    let top = (1.0 - fx) * plane[y0 * width + x0] + fx * plane[y0 * width + x1];
    let bottom = (1.0 - fx) * plane[y1 * width + x0] + fx * plane[y1 * width + x1];
    (1.0 - fy) * top + fy * bottom
}

/// ROIAlign: splits `roi` (feature coordinates) into `out_size × out_size`
/// cells, bilinearly samples a 2×2 grid of points in each cell and averages
/// them. No coordinate is ever rounded.
pub fn roi_align(
    feat: &FeatureGrid,
    roi: &BBox,
    out_size: usize,
) -> Result<FeatureGrid, TensorError> {
    if roi.validate().is_err() {
        return Err(TensorError::DegenerateBox);
    }
    if out_size == 0 {
        return Err(TensorError::EmptyGrid);
    }
    let [x0, y0, _, _] = roi.corners();
    let cell_w = roi.w / out_size as f64;
    let cell_h = roi.h / out_size as f64;
    let s = ROI_SAMPLES as f64;
    let samples = (ROI_SAMPLES * ROI_SAMPLES) as f64;

    let mut out = FeatureGrid::zeros(feat.channels, out_size, out_size);
    for c in 0..feat.channels {
        let plane = feat.plane(c);
        for oy in 0..out_size {
            for ox in 0..out_size {
                let mut acc = 0.0;
                for sy in 0..ROI_SAMPLES {
                    let y = y0 + (oy as f64 + (sy as f64 + 0.5) / s) * cell_h;
                    for sx in 0..ROI_SAMPLES {
                        let x = x0 + (ox as f64 + (sx as f64 + 0.5) / s) * cell_w;
                        acc += bilinear(plane, feat.height, feat.width, x, y);
                    }
                }
                out.values[(c * out_size + oy) * out_size + ox] = acc / samples;
            }
        }
    }
    Ok(out)
}

/// Sums of every horizontal window of length `k` in each row, then of every
/// vertical window of those: `out[y][x] = Σ_{dy<k} Σ_{dx<k} in[y+dy][x+dx]`,
/// summed innermost over `dx`.
fn window_sums(plane: &[f64], height: usize, width: usize, k: usize) -> Vec<f64> {
    let ow = width - k + 1;
    let oh = height - k + 1;
    let mut rows = vec![0.0; height * ow];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..ow {
            rows[y * ow + x] = row[x..x + k].iter().sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for dy in 0..k {
                acc += rows[(y + dy) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// `K × K` average pooling with stride 1 and no padding, followed by
/// boundary replication back to `H × W`: `⌊(K−1)/2⌋` rows/columns are
/// replicated before and `⌈(K−1)/2⌉` after.
pub fn avg_pool_replicate(feat: &FeatureGrid, kernel: usize) -> Result<FeatureGrid, TensorError> {
    let (h, w) = (feat.height, feat.width);
    if kernel == 0 {
        return Err(TensorError::InvalidConvParams);
    }
    if kernel > h || kernel > w {
        return Err(TensorError::KernelTooLarge {
            kernel,
            height: h,
            width: w,
        });
    }
    let before = (kernel - 1) / 2;
    let (oh, ow) = (h - kernel + 1, w - kernel + 1);
    let norm = (kernel * kernel) as f64;
    let mut out = FeatureGrid::zeros(feat.channels, h, w);
    for c in 0..feat.channels {
        let pooled = window_sums(feat.plane(c), h, w, kernel);
        for y in 0..h {
            let py = y.saturating_sub(before).min(oh - 1);
            for x in 0..w {
                let px = x.saturating_sub(before).min(ow - 1);
                out.values[(c * h + y) * w + x] = pooled[py * ow + px] / norm;
            }
        }
    }
    Ok(out)
}

/// Global average pooling broadcast back to every position; summation order
/// matches [`avg_pool_replicate`] with a full-size kernel.
pub fn global_avg_pool(feat: &FeatureGrid) -> FeatureGrid {
    let (h, w) = (feat.height, feat.width);
    let n = (h * w) as f64;
    let mut out = FeatureGrid::zeros(feat.channels, h, w);
    for c in 0..feat.channels {
        let plane = feat.plane(c);
        let total: f64 = (0..h)
            .map(|y| plane[y * w..(y + 1) * w].iter().sum::<f64>())
            .fold(0.0, |a, r| a + r);
        let mean = total / n;
        out.values[c * h * w..(c + 1) * h * w].fill(mean);
    }
    out
}

/// Convolution weights laid out `out × in × kh × kw`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    out_channels: usize,
    in_channels: usize,
    kh: usize,
    kw: usize,
    values: Vec<f64>,
}

impl ConvWeights {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kh: usize,
        kw: usize,
        values: Vec<f64>,
    ) -> Result<Self, TensorError> {
        if out_channels == 0 || in_channels == 0 || kh == 0 || kw == 0 {
            return Err(TensorError::InvalidConvParams);
        }
        let expected = out_channels * in_channels * kh * kw;
        if values.len() != expected {
            return Err(TensorError::ShapeMismatch {
                expected,
                actual: values.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(TensorError::NonFinite);
        }
        Ok(Self {
            out_channels,
            in_channels,
            kh,
            kw,
            values,
        })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, kh: usize, kw: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            kh,
            kw,
            values: vec![0.0; out_channels * in_channels * kh * kw],
        }
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kh, self.kw]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.values[((o * self.in_channels + i) * self.kh + ky) * self.kw + kx]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dParams {
    pub dilation: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2dParams {
    /// Stride 1 with the padding that preserves `H × W` for an odd kernel.
    pub fn same(kernel: usize, dilation: usize) -> Self {
        Self {
            dilation,
            stride: 1,
            padding: dilation * (kernel - 1) / 2,
        }
    }
}

impl Default for Conv2dParams {
    fn default() -> Self {
        Self {
            dilation: 1,
            stride: 1,
            padding: 0,
        }
    }
}

/// Zero-padded cross-correlation with dilation and stride. Output size per
/// axis is `⌊(n + 2p − d(k−1) − 1)/s⌋ + 1`.
pub fn conv2d(
    feat: &FeatureGrid,
    weights: &ConvWeights,
    params: Conv2dParams,
) -> Result<FeatureGrid, TensorError> {
    let Conv2dParams {
        dilation,
        stride,
        padding,
    } = params;
    if dilation == 0 || stride == 0 {
        return Err(TensorError::InvalidConvParams);
    }
    if weights.in_channels != feat.channels {
        return Err(TensorError::ChannelMismatch {
            expected: weights.in_channels,
            actual: feat.channels,
        });
    }
    let span_h = dilation * (weights.kh - 1) + 1;
    let span_w = dilation * (weights.kw - 1) + 1;
    let (ph, pw) = (feat.height + 2 * padding, feat.width + 2 * padding);
    if span_h > ph || span_w > pw {
        return Err(TensorError::EmptyOutput);
    }
    let oh = (ph - span_h) / stride + 1;
    let ow = (pw - span_w) / stride + 1;
    let (h, w) = (feat.height as isize, feat.width as isize);

    let mut out = FeatureGrid::zeros(weights.out_channels, oh, ow);
    for o in 0..weights.out_channels {
        let dst = &mut out.values[o * oh * ow..(o + 1) * oh * ow];
        // Accumulate one (input channel, tap) plane at a time; each output
        // element still sums its terms in (channel, ky, kx) order.
        for i in 0..weights.in_channels {
            let src = feat.plane(i);
            for ky in 0..weights.kh {
                for kx in 0..weights.kw {
                    let wv = weights.get(o, i, ky, kx);
                    let dy = (ky * dilation) as isize - padding as isize;
                    let dx = (kx * dilation) as isize - padding as isize;
                    for y in 0..oh {
                        let sy = (y * stride) as isize + dy;
                        if sy < 0 || sy >= h {
                            continue;
                        }
                        let row = &src[sy as usize * feat.width..(sy as usize + 1) * feat.width];
                        let out_row = &mut dst[y * ow..(y + 1) * ow];
                        for (x, acc) in out_row.iter_mut().enumerate() {
                            let sx = (x * stride) as isize + dx;
                            if sx >= 0 && sx < w {
                                *acc += wv * row[sx as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Weights of the light-weight context module: two 3×3 branches (dilation 1
/// and 6), a pooled branch with a 1×1 projection, and a 3×3 fusion over the
/// concatenated 384 channels.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniDlWeights {
    pub dilated1: ConvWeights,
    pub dilated6: ConvWeights,
    pub pool_projection: ConvWeights,
    pub fuse: ConvWeights,
    pub pool_kernel: usize,
}

impl MiniDlWeights {
    pub fn zeros(in_channels: usize) -> Self {
        let c = MINIDL_CHANNELS;
        Self {
            dilated1: ConvWeights::zeros(c, in_channels, 3, 3),
            dilated6: ConvWeights::zeros(c, in_channels, 3, 3),
            pool_projection: ConvWeights::zeros(c, in_channels, 1, 1),
            fuse: ConvWeights::zeros(c, 3 * c, 3, 3),
            pool_kernel: MINIDL_POOL_KERNEL,
        }
    }

    pub fn validate(&self, in_channels: usize) -> Result<(), TensorError> {
        let c = MINIDL_CHANNELS;
        let checks: [(&'static str, &ConvWeights, [usize; 4]); 4] = [
            ("dilated1", &self.dilated1, [c, in_channels, 3, 3]),
            ("dilated6", &self.dilated6, [c, in_channels, 3, 3]),
            ("pool_projection", &self.pool_projection, [c, in_channels, 1, 1]),
            ("fuse", &self.fuse, [c, 3 * c, 3, 3]),
        ];
        for (name, w, expected) in checks {
            if w.shape() != expected {
                return Err(TensorError::WeightShape {
                    name,
                    expected,
                    actual: w.shape(),
                });
            }
        }
        if self.pool_kernel == 0 {
            return Err(TensorError::InvalidConvParams);
        }
        Ok(())
    }
}

/// Context-module forward pass without normalization or activations.
///
/// The pooling kernel is clamped to the input size, so inputs smaller than
/// the kernel fall back to global pooling.
pub fn minidl_forward(feat: &FeatureGrid, weights: &MiniDlWeights) -> Result<FeatureGrid, TensorError> {
    weights.validate(feat.channels)?;
    let a = conv2d(feat, &weights.dilated1, Conv2dParams::same(3, 1))?;
    let b = conv2d(feat, &weights.dilated6, Conv2dParams::same(3, 6))?;
    let kernel = weights.pool_kernel.min(feat.height).min(feat.width);
    let pooled = avg_pool_replicate(feat, kernel)?;
    let c = conv2d(&pooled, &weights.pool_projection, Conv2dParams::default())?;
    let cat = FeatureGrid::concat(&[&a, &b, &c])?;
    conv2d(&cat, &weights.fuse, Conv2dParams::same(3, 1))
}

/// 28×28 mask probabilities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskGrid {
    values: Vec<f64>,
}

impl MaskGrid {
    pub fn new(values: Vec<f64>) -> Result<Self, TensorError> {
        if values.len() != MASK_SIZE * MASK_SIZE {
            return Err(TensorError::ShapeMismatch {
                expected: MASK_SIZE * MASK_SIZE,
                actual: values.len(),
            });
        }
        if !values.iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(TensorError::MaskRange);
        }
        Ok(Self { values })
    }

    pub fn filled(value: f64) -> Result<Self, TensorError> {
        Self::new(vec![value; MASK_SIZE * MASK_SIZE])
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, TensorError> {
        let mut values = Vec::with_capacity(MASK_SIZE * MASK_SIZE);
        for r in 0..MASK_SIZE {
            for c in 0..MASK_SIZE {
                values.push(f(r, c));
            }
        }
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * MASK_SIZE + col]
    }
}

/// Ground-truth mask cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskLabel {
    Background,
    Foreground,
    Void,
}

/// 28×28 ground-truth mask with void cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GtMask {
    labels: Vec<MaskLabel>,
}

impl GtMask {
    pub fn new(labels: Vec<MaskLabel>) -> Result<Self, TensorError> {
        if labels.len() != MASK_SIZE * MASK_SIZE {
            return Err(TensorError::ShapeMismatch {
                expected: MASK_SIZE * MASK_SIZE,
                actual: labels.len(),
            });
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[MaskLabel] {
        &self.labels
    }
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    /// Pixels touched by `bbox`, `[⌊x0⌋, ⌈x1⌉) × [⌊y0⌋, ⌈y1⌉)`, clipped to
    /// the image. `None` when nothing remains.
    pub fn covering(bbox: &BBox, image_w: usize, image_h: usize) -> Option<Self> {
        let [x0, y0, x1, y1] = bbox.corners();
        let clamp = |v: f64, hi: usize| v.clamp(0.0, hi as f64) as usize;
        let r = Self {
            x0: clamp(math::floor(x0), image_w),
            y0: clamp(math::floor(y0), image_h),
            x1: clamp(math::ceil(x1), image_w),
            y1: clamp(math::ceil(y1), image_h),
        };
        (r.x1 > r.x0 && r.y1 > r.y0).then_some(r)
    }
}

/// Binary mask on an `image_w × image_h` canvas, stored only inside `rect`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PastedMask {
    pub image_w: usize,
    pub image_h: usize,
    pub rect: PixelRect,
    bits: Vec<bool>,
}

impl PastedMask {
    pub fn get(&self, x: usize, y: usize) -> bool {
        let r = &self.rect;
        x >= r.x0 && x < r.x1 && y >= r.y0 && y < r.y1 && self.bits[(y - r.y0) * r.width() + (x - r.x0)]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Row-major image indices of set pixels, ascending.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        let r = self.rect;
        let w = r.width();
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (r.y0 + i / w) * self.image_w + r.x0 + i % w)
    }

    pub fn to_dense(&self) -> Vec<bool> {
        let mut out = vec![false; self.image_w * self.image_h];
        for i in self.indices() {
            out[i] = true;
        }
        out
    }
}

/// Source coordinate of destination cell `i` when resizing `src_len` cells
/// to `dst_len` with half-pixel alignment, clamped to the source range.
fn resize_source(i: usize, dst_len: usize, src_len: usize) -> (usize, usize, f64) {
    let s = ((i as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5).clamp(0.0, (src_len - 1) as f64);
    let lo = math::floor(s) as usize;
    let hi = (lo + 1).min(src_len - 1);
    (lo, hi, s - lo as f64)
}

/// Resizes a 28×28 probability grid bilinearly to `⌈w⌉ × ⌈h⌉`, places it
/// with its top-left cell at pixel `(⌊x0⌋, ⌊y0⌋)`, clips to the image and
/// keeps cells whose probability is strictly above `threshold`.
pub fn paste_mask(
    mask: &MaskGrid,
    bbox: &BBox,
    image_w: usize,
    image_h: usize,
    threshold: f64,
) -> Result<PastedMask, TensorError> {
    if bbox.validate().is_err() {
        return Err(TensorError::DegenerateBox);
    }
    let outside = TensorError::OutsideImage {
        width: image_w,
        height: image_h,
    };
    let rect = PixelRect::covering(bbox, image_w, image_h).ok_or(outside.clone())?;
    let [bx0, by0, _, _] = bbox.corners();
    let ox = math::floor(bx0) as i64;
    let oy = math::floor(by0) as i64;
    let rw = math::ceil(bbox.w) as usize;
    let rh = math::ceil(bbox.h) as usize;

    let cols: Vec<(usize, usize, f64)> = (0..rw).map(|i| resize_source(i, rw, MASK_SIZE)).collect();
    let mut bits = vec![false; rect.width() * rect.height()];
    for y in rect.y0..rect.y1 {
        let j = y as i64 - oy;
        if j < 0 || j as usize >= rh {
            continue;
        }
        let (r0, r1, fy) = resize_source(j as usize, rh, MASK_SIZE);
        for x in rect.x0..rect.x1 {
            let i = x as i64 - ox;
            if i < 0 || i as usize >= rw {
                continue;
            }
            let (c0, c1, fx) = cols[i as usize];
            let top = (1.0 - fx) * mask.get(r0, c0) + fx * mask.get(r0, c1);
            let bottom = (1.0 - fx) * mask.get(r1, c0) + fx * mask.get(r1, c1);
            let v = (1.0 - fy) * top + fy * bottom;
            bits[(y - rect.y0) * rect.width() + (x - rect.x0)] = v > threshold;
        }
    }
    Ok(PastedMask {
        image_w,
        image_h,
        rect,
        bits,
    })
}

/// Crops a full-image ground-truth mask to `bbox` and rasterizes it to 28×28
/// by area: a cell is void when more than half its area is void, otherwise
/// foreground when more than half its non-void area is foreground. Pixels
/// outside the image count as background.
///
/// `labels` is row-major `image_w × image_h`, `None` marking void pixels.
pub fn rasterize_gt_mask(
    labels: &[Option<bool>],
    image_w: usize,
    image_h: usize,
    bbox: &BBox,
) -> Result<GtMask, TensorError> {
    if labels.len() != image_w * image_h {
        return Err(TensorError::ShapeMismatch {
            expected: image_w * image_h,
            actual: labels.len(),
        });
    }
    if bbox.validate().is_err() {
        return Err(TensorError::DegenerateBox);
    }
    let [x0, y0, _, _] = bbox.corners();
    let cw = bbox.w / MASK_SIZE as f64;
    let ch = bbox.h / MASK_SIZE as f64;
    let cell_area = cw * ch;

    // Overlap of [a, b) with each integer pixel interval.
    let spans = |a: f64, b: f64| -> Vec<(i64, f64)> {
        let lo = math::floor(a) as i64;
        let hi = math::ceil(b) as i64;
        (lo..hi)
            .map(|p| (p, b.min(p as f64 + 1.0) - a.max(p as f64)))
            .filter(|&(_, len)| len > 0.0)
            .collect()
    };

    let mut out = Vec::with_capacity(MASK_SIZE * MASK_SIZE);
    for r in 0..MASK_SIZE {
        let ys = spans(y0 + r as f64 * ch, y0 + (r + 1) as f64 * ch);
        for c in 0..MASK_SIZE {
            let xs = spans(x0 + c as f64 * cw, x0 + (c + 1) as f64 * cw);
            let (mut fg, mut void) = (0.0, 0.0);
            for &(py, ly) in &ys {
                for &(px, lx) in &xs {
                    let inside = px >= 0 && py >= 0 && (px as usize) < image_w && (py as usize) < image_h;
                    if !inside {
                        continue;
                    }
                    match labels[py as usize * image_w + px as usize] {
                        Some(true) => fg += lx * ly,
                        Some(false) => {}
                        None => void += lx * ly,
                    }
                }
            }
            let label = if void > 0.5 * cell_area {
                MaskLabel::Void
            } else if fg > 0.5 * (cell_area - void) {
                MaskLabel::Foreground
            } else {
                MaskLabel::Background
            };
            out.push(label);
        }
    }
    GtMask::new(out)
}
