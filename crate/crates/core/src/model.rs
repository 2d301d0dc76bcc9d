//! Class tables, panoptic maps and semantic maps.
//!
//! Segment ids and class ids are `u32`. Id `0` is void in both spaces and is
//! never a key of a [`ClassTable`] or of a map's segment table.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

/// Largest segment id representable in the RGB interchange encoding.
pub const MAX_SEGMENT_ID: u32 = (1 << 24) - 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("class id 0 is reserved for void")]
    ReservedClassId,
    #[error("class id {0} defined twice")]
    DuplicateClass(u32),
    #[error("expected {expected} pixels for the given dimensions, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("pixel segment id {0} has no entry in the segment table")]
    MissingSegment(u32),
    #[error("segment {segment_id} refers to category {category_id}, which is not in the class table")]
    UnknownCategory { segment_id: u32, category_id: u32 },
    #[error("segment id 0 is void and cannot carry a class")]
    VoidSegment,
    #[error("segment id {0} does not fit in 24 bits")]
    SegmentIdOutOfRange(u32),
    #[error("semantic label {0} is not in the class table")]
    UnknownLabel(u32),
}

/// Stuff classes are amorphous regions; thing classes have instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassKind {
    Stuff,
    Thing,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassInfo {
    pub name: String,
    pub kind: ClassKind,
}

/// Map from positive class id to name and kind.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassTable {
    entries: BTreeMap<u32, ClassInfo>,
}

impl ClassTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        id: u32,
        name: impl Into<String>,
        kind: ClassKind,
    ) -> Result<(), ModelError> {
        if id == 0 {
            return Err(ModelError::ReservedClassId);
        }
        if self.entries.contains_key(&id) {
            return Err(ModelError::DuplicateClass(id));
        }
        self.entries.insert(
            id,
            ClassInfo {
                name: name.into(),
                kind,
            },
        );
        Ok(())
    }

    /// Builds a table from `(id, name, kind)` triples.
    pub fn from_entries<I, S>(entries: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (u32, S, ClassKind)>,
        S: Into<String>,
    {
        let mut table = Self::new();
        for (id, name, kind) in entries {
            table.insert(id, name, kind)?;
        }
        Ok(table)
    }

    pub fn get(&self, id: u32) -> Option<&ClassInfo> {
        self.entries.get(&id)
    }

    pub fn kind(&self, id: u32) -> Option<ClassKind> {
        self.entries.get(&id).map(|c| c.kind)
    }

    pub fn contains(&self, id: u32) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &ClassInfo)> {
        self.entries.iter().map(|(&id, info)| (id, info))
    }

    pub fn ids_of_kind(&self, kind: ClassKind) -> impl Iterator<Item = u32> + '_ {
        self.iter().filter(move |(_, c)| c.kind == kind).map(|(id, _)| id)
    }
}

/// Decodes the interchange colour of a pixel: `id = R + 256·G + 65536·B`.
#[inline]
pub fn rgb_to_id(rgb: [u8; 3]) -> u32 {
    u32::from(rgb[0]) | (u32::from(rgb[1]) << 8) | (u32::from(rgb[2]) << 16)
}

#[inline]
pub fn id_to_rgb(id: u32) -> Result<[u8; 3], ModelError> {
    if id > MAX_SEGMENT_ID {
        return Err(ModelError::SegmentIdOutOfRange(id));
    }
    Ok([id as u8, (id >> 8) as u8, (id >> 16) as u8])
}

/// Per-pixel segment ids plus a segment → class table.
///
/// Pixels are stored row-major. Segments cannot overlap since each pixel
/// holds one id. The segment table may list ids that cover no pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanopticMap {
    width: usize,
    height: usize,
    pixels: Vec<u32>,
    segments: BTreeMap<u32, u32>,
}

impl PanopticMap {
    pub fn new(
        width: usize,
        height: usize,
        pixels: Vec<u32>,
        segments: BTreeMap<u32, u32>,
        classes: &ClassTable,
    ) -> Result<Self, ModelError> {
        let expected = width * height;
        if pixels.len() != expected {
            return Err(ModelError::DimensionMismatch {
                expected,
                actual: pixels.len(),
            });
        }
        for (&segment_id, &category_id) in &segments {
            if segment_id == 0 {
                return Err(ModelError::VoidSegment);
            }
            if !classes.contains(category_id) {
                return Err(ModelError::UnknownCategory {
                    segment_id,
                    category_id,
                });
            }
        }
        // Report the first offending id in scan order.
        if let Some(&id) = pixels
            .iter()
            .find(|&&id| id != 0 && !segments.contains_key(&id))
        {
            return Err(ModelError::MissingSegment(id));
        }
        Ok(Self {
            width,
            height,
            pixels,
            segments,
        })
    }

    /// An all-void map.
    pub fn void(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: alloc::vec![0; width * height],
            segments: BTreeMap::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u32] {
        &self.pixels
    }

    pub fn segments(&self) -> &BTreeMap<u32, u32> {
        &self.segments
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.pixels[y * self.width + x]
    }

    pub fn class_of(&self, segment_id: u32) -> Option<u32> {
        self.segments.get(&segment_id).copied()
    }

    pub fn into_parts(self) -> (usize, usize, Vec<u32>, BTreeMap<u32, u32>) {
        (self.width, self.height, self.pixels, self.segments)
    }
}

/// One segment of a map with the row-major indices of its pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentRecord {
    pub segment_id: u32,
    pub class_id: u32,
    pub pixel_count: usize,
    pub pixels: Vec<usize>,
}

/// One record per distinct nonzero id present in the pixel grid, ascending
/// by id. Segments are defined by id, not by connectivity.
pub fn extract_segments(map: &PanopticMap) -> Vec<SegmentRecord> {
    let mut by_id: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (idx, &id) in map.pixels.iter().enumerate() {
        if id != 0 {
            by_id.entry(id).or_default().push(idx);
        }
    }
    by_id
        .into_iter()
        .map(|(segment_id, pixels)| SegmentRecord {
            segment_id,
            class_id: map.segments[&segment_id],
            pixel_count: pixels.len(),
            pixels,
        })
        .collect()
}

/// Per-pixel class labels, `0` meaning void.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl SemanticMap {
    pub fn new(
        width: usize,
        height: usize,
        labels: Vec<u32>,
        classes: &ClassTable,
    ) -> Result<Self, ModelError> {
        let expected = width * height;
        if labels.len() != expected {
            return Err(ModelError::DimensionMismatch {
                expected,
                actual: labels.len(),
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l != 0 && !classes.contains(l)) {
            return Err(ModelError::UnknownLabel(l));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }
}
