//! COCO-style panoptic interchange: RGB-encoded segment ids
//! (`id = R + 256·G + 65536·B`) with a JSON `segments_info` sidecar, the
//! categories file, and single-channel semantic label PNGs.

use std::collections::BTreeMap;
use std::io::Cursor;

use panoptic_core::model::{id_to_rgb, rgb_to_id};
use panoptic_core::{ClassKind, ClassTable, PanopticMap, SemanticMap};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub id: u32,
    pub category_id: u32,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub iscrowd: u8,
}

fn is_zero(v: &u8) -> bool {
    *v == 0
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub segments_info: Vec<SegmentInfo>,
}

impl Sidecar {
    pub fn parse(json: &[u8], context: &str) -> Result<Self> {
        serde_json::from_slice(json).map_err(|e| Error::json(context, e))
    }

    /// Segment table, rejecting crowd annotations and duplicate ids.
    pub fn segments(&self, context: &str) -> Result<BTreeMap<u32, u32>> {
        let mut out = BTreeMap::new();
        for s in &self.segments_info {
            if s.iscrowd != 0 {
                return Err(Error::schema(context, format!("segment {} is a crowd annotation; crowd regions are not supported", s.id)));
            }
            if out.insert(s.id, s.category_id).is_some() {
                return Err(Error::schema(context, format!("segment {} listed twice", s.id)));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Deserialize)]
struct CategoryRecord {
    id: u32,
    name: String,
    isthing: u8,
}

#[derive(Debug, Deserialize)]
struct CategoriesFile {
    categories: Vec<CategoryRecord>,
}

/// Parses `{"categories":[{"id", "name", "isthing"}]}`. Other top-level keys
/// are ignored, so a full COCO panoptic annotation file works too.
pub fn parse_categories(json: &[u8], context: &str) -> Result<ClassTable> {
    let file: CategoriesFile = serde_json::from_slice(json).map_err(|e| Error::json(context, e))?;
    let mut table = ClassTable::new();
    for c in file.categories {
        let kind = match c.isthing {
            0 => ClassKind::Stuff,
            1 => ClassKind::Thing,
            other => return Err(Error::schema(context, format!("category {}: isthing must be 0 or 1, got {other}", c.id))),
        };
        table.insert(c.id, c.name, kind).map_err(|source| Error::Model {
            context: context.into(),
            source,
        })?;
    }
    Ok(table)
}

fn png_error(context: &str, e: impl ToString) -> Error {
    Error::Png {
        context: context.into(),
        message: e.to_string(),
    }
}

/// Decodes an 8-bit PNG to `(width, height, channels, samples)`. Palette
/// images are expanded.
fn decode_png(bytes: &[u8], context: &str) -> Result<(usize, usize, usize, Vec<u8>)> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| png_error(context, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| png_error(context, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| png_error(context, e))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(png_error(context, format!("expected 8-bit samples, got {:?}", info.bit_depth)));
    }
    let channels = info.color_type.samples();
    let (w, h) = (info.width as usize, info.height as usize);
    // Rows may carry no padding at 8 bits, but trim to the frame anyway.
    let mut samples = Vec::with_capacity(w * h * channels);
    for row in buf.chunks(info.line_size).take(h) {
        samples.extend_from_slice(&row[..w * channels]);
    }
    Ok((w, h, channels, samples))
}

fn encode_png(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().expect("in-memory PNG header");
    writer.write_image_data(data).expect("in-memory PNG data");
    writer.finish().expect("in-memory PNG finish");
    out
}

/// Decodes the per-pixel segment ids of a panoptic PNG. Alpha is ignored.
pub fn decode_id_png(bytes: &[u8], context: &str) -> Result<(usize, usize, Vec<u32>)> {
    let (w, h, channels, samples) = decode_png(bytes, context)?;
    if channels < 3 {
        return Err(png_error(context, "panoptic PNGs must be RGB or RGBA"));
    }
    let ids = samples
        .chunks_exact(channels)
        .map(|px| rgb_to_id([px[0], px[1], px[2]]))
        .collect();
    Ok((w, h, ids))
}

/// PNG bytes + sidecar → validated map.
pub fn read_panoptic(png_bytes: &[u8], sidecar: &Sidecar, classes: &ClassTable, context: &str) -> Result<PanopticMap> {
    let (w, h, ids) = decode_id_png(png_bytes, context)?;
    let segments = sidecar.segments(context)?;
    PanopticMap::new(w, h, ids, segments, classes).map_err(|source| Error::Model {
        context: context.into(),
        source,
    })
}

/// Map → RGB PNG bytes + sidecar listing every segment in id order.
pub fn write_panoptic(map: &PanopticMap) -> Result<(Vec<u8>, Sidecar)> {
    let mut rgb = Vec::with_capacity(map.pixels().len() * 3);
    for &id in map.pixels() {
        let px = id_to_rgb(id).map_err(|source| Error::Model {
            context: "write panoptic".into(),
            source,
        })?;
        rgb.extend_from_slice(&px);
    }
    for &id in map.segments().keys() {
        id_to_rgb(id).map_err(|source| Error::Model {
            context: "write panoptic".into(),
            source,
        })?;
    }
    let sidecar = Sidecar {
        segments_info: map
            .segments()
            .iter()
            .map(|(&id, &category_id)| SegmentInfo {
                id,
                category_id,
                iscrowd: 0,
            })
            .collect(),
    };
    Ok((encode_png(map.width(), map.height(), png::ColorType::Rgb, &rgb), sidecar))
}

/// Single-channel 8-bit PNG of class ids, 0 meaning void.
pub fn read_semantic(png_bytes: &[u8], classes: &ClassTable, context: &str) -> Result<SemanticMap> {
    let (w, h, channels, samples) = decode_png(png_bytes, context)?;
    if channels != 1 {
        return Err(png_error(context, "semantic PNGs must be single-channel grayscale"));
    }
    let labels = samples.into_iter().map(u32::from).collect();
    SemanticMap::new(w, h, labels, classes).map_err(|source| Error::Model {
        context: context.into(),
        source,
    })
}

pub fn write_semantic(map: &SemanticMap) -> Result<Vec<u8>> {
    let bytes = map
        .labels()
        .iter()
        .map(|&l| u8::try_from(l).map_err(|_| Error::schema("write semantic", format!("class id {l} does not fit in 8 bits"))))
        .collect::<Result<Vec<u8>>>()?;
    Ok(encode_png(map.width(), map.height(), png::ColorType::Grayscale, &bytes))
}

#[derive(Debug, Deserialize)]
struct AnnotationRecord {
    file_name: String,
    segments_info: Vec<SegmentInfo>,
}

#[derive(Debug, Deserialize)]
struct AnnotationFile {
    annotations: Vec<AnnotationRecord>,
}

/// Combined COCO panoptic annotation file: `file_name` (the PNG name) →
/// sidecar.
pub fn parse_annotation_file(json: &[u8], context: &str) -> Result<BTreeMap<String, Sidecar>> {
    let file: AnnotationFile = serde_json::from_slice(json).map_err(|e| Error::json(context, e))?;
    let mut out = BTreeMap::new();
    for a in file.annotations {
        let name = a.file_name.clone();
        if out
            .insert(a.file_name, Sidecar { segments_info: a.segments_info })
            .is_some()
        {
            return Err(Error::schema(context, format!("{name} annotated twice")));
        }
    }
    Ok(out)
}
