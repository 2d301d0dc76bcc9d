//! Allocation-only core for panoptic segmentation evaluation and inference
//! post-processing.
//!
//! Everything in this crate is pure: no IO, no threads, no global state. The
//! `panoptic` companion crate layers file formats, parallel dataset
//! evaluation and the command line on top.
//!
//! Modules:
//! - [`model`]: class tables, panoptic and semantic maps, RGB id encoding.
//! - [`geometry`]: boxes, anchors, box offset codecs, FPN level selection, NMS.
//! - [`matching`]: ground-truth assignment and seeded match sampling.
//! - [`tensor`]: ROIAlign, replicate-padded average pooling, dilated
//!   convolution, the context-module forward pass, mask pasting.
//! - [`loss`]: value-only training loss oracles.
//! - [`fusion`]: instance + semantic fusion into a panoptic map.
//! - [`metrics`]: PQ and PQ† with mergeable accumulators.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod fusion;
pub mod geometry;
pub mod loss;
pub mod matching;
mod math;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod tensor;

pub use fusion::{fuse, Detection, FusionConfig, FusionOutput, FusionWarning};
pub use geometry::{Anchor, BBox, BoxDelta, ScoredBox};
pub use matching::{MatchSet, MatcherConfig};
pub use metrics::{MetricAccumulator, MetricReport};
pub use model::{ClassKind, ClassTable, PanopticMap, SemanticMap};
pub use rng::SeededRng;
pub use tensor::{FeatureGrid, MaskGrid};
