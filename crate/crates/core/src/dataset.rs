//! Annotation ingest: VOC-style XML directories and this toolkit's own JSON
//! label manifests, normalized into one in-memory dataset model.
//!
//! Ingest is deterministic: files are processed in sorted path order, class
//! ids are assigned by sorting normalized names, and every retained box is
//! clamped into its image frame (boxes smaller than 4 px² after clamping are
//! dropped as degenerate slivers).

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::{self, LabelManifest};
use crate::class::{normalize_name, ClassTable};
use crate::error::{Error, Result};

/// Minimum post-clamp box area; anything smaller is discarded.
const MIN_BOX_AREA: f64 = 4.0;

/// Axis-aligned box in pixel coordinates, origin top-left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite box {b:?}")));
        }
        if x_min >= x_max || y_min >= y_max {
            return Err(Error::InvalidInput(format!("degenerate box {b:?}")));
        }
        Ok(b)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    /// Intersection-over-union with another box.
    pub fn iou(&self, other: &BBox) -> f64 {
        let ix = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0.0);
        let iy = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0.0);
        let inter = ix * iy;
        if inter <= 0.0 {
            return 0.0;
        }
        inter / (self.area() + other.area() - inter)
    }

    /// Clamp into [0, w] x [0, h]; None when nothing remains.
    fn clamped(&self, w: f64, h: f64) -> Option<BBox> {
        let b = BBox {
            x_min: self.x_min.clamp(0.0, w),
            y_min: self.y_min.clamp(0.0, h),
            x_max: self.x_max.clamp(0.0, w),
            y_max: self.y_max.clamp(0.0, h),
        };
        (b.x_min < b.x_max && b.y_min < b.y_max).then_some(b)
    }
}

/// One labeled object instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceAnnotation {
    pub image_id: String,
    /// Normalized (lowercase, single-spaced) class name.
    pub class_name: String,
    pub bbox: BBox,
}

/// One annotated image with its retained instances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub width_px: u32,
    pub height_px: u32,
    pub annotations: Vec<InstanceAnnotation>,
}

/// The neutral dataset model every downstream fit consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub images: Vec<ImageRecord>,
    pub class_table: ClassTable,
}

impl DatasetSummary {
    pub fn annotation_count(&self) -> usize {
        self.images.iter().map(|i| i.annotations.len()).sum()
    }

    pub fn annotations(&self) -> impl Iterator<Item = &InstanceAnnotation> {
        self.images.iter().flat_map(|i| i.annotations.iter())
    }

    /// Content digest over images, annotations, and the class table.
    /// Images are digested in id order, so the digest (like every fitted
    /// distribution) is independent of input enumeration order.
    pub fn digest(&self) -> Result<String> {
        #[derive(Serialize)]
        struct DigestView<'a> {
            class_table: std::collections::BTreeMap<String, u16>,
            images: Vec<&'a ImageRecord>,
        }
        let mut images: Vec<&ImageRecord> = self.images.iter().collect();
        images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        crate::canon::digest_of(&DigestView {
            class_table: self.class_table.to_mapping(),
            images,
        })
    }
}

/// A file that failed to parse; ingest keeps going past these.
#[derive(Debug, Clone)]
pub struct FileIssue {
    pub path: PathBuf,
    pub message: String,
}

/// Ingest output: the dataset plus per-file failures and clamp warnings.
#[derive(Debug, Clone)]
pub struct IngestResult {
    pub dataset: DatasetSummary,
    pub file_errors: Vec<FileIssue>,
    pub warnings: Vec<String>,
}

struct RawBox {
    class_name: String,
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

struct RawImage {
    image_id: String,
    width_px: u32,
    height_px: u32,
    boxes: Vec<RawBox>,
}

/// Load a directory of per-image VOC-style XML annotation files.
///
/// Oriented boxes (`robndbox`, either center/size/angle or four-corner form)
/// are ingested through their axis-aligned envelope.
pub fn load_voc_xml(dir_path: &Path) -> Result<IngestResult> {
    let mut paths: Vec<PathBuf> = walkdir::WalkDir::new(dir_path)
        .into_iter()
        .filter_map(std::result::Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("xml"))
        })
        .collect();
    paths.sort();

    let parsed: Vec<(PathBuf, Result<RawImage>)> = paths
        .into_par_iter()
        .map(|p| {
            let res = parse_voc_file(&p);
            (p, res)
        })
        .collect();

    let mut raw_images = Vec::new();
    let mut file_errors = Vec::new();
    for (path, res) in parsed {
        match res {
            Ok(img) => raw_images.push(img),
            Err(e) => file_errors.push(FileIssue {
                path,
                message: e.to_string(),
            }),
        }
    }
    if raw_images.is_empty() {
        return Err(Error::EmptyDataset(dir_path.to_path_buf()));
    }
    let (dataset, warnings) = assemble(raw_images, dir_path)?;
    Ok(IngestResult {
        dataset,
        file_errors,
        warnings,
    })
}

/// Load label manifests written by the bundle exporter. `path` may be one
/// `.labels.json` file or a directory containing them.
///
/// Schema violations are fatal, unlike the per-file tolerance of the XML
/// path: manifests are this toolkit's own output, so a bad one is a bug.
pub fn load_json_labels(path: &Path) -> Result<IngestResult> {
    let mut files = Vec::new();
    if path.is_dir() {
        for entry in walkdir::WalkDir::new(path)
            .into_iter()
            .filter_map(std::result::Result::ok)
        {
            let p = entry.path();
            if p.is_file()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.ends_with(".labels.json"))
            {
                files.push(p.to_path_buf());
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }
    if files.is_empty() {
        return Err(Error::EmptyDataset(path.to_path_buf()));
    }

    let mut raw_images = Vec::new();
    for file in &files {
        let manifest = bundle::read_label_manifest(file)?;
        raw_images.push(manifest_to_raw(file, &manifest));
    }
    let (dataset, warnings) = assemble(raw_images, path)?;
    Ok(IngestResult {
        dataset,
        file_errors: Vec::new(),
        warnings,
    })
}

fn manifest_to_raw(path: &Path, manifest: &LabelManifest) -> RawImage {
    let stem = path
        .file_name()
        .and_then(|n| n.to_str())
        .map(|n| n.trim_end_matches(".labels.json").to_string())
        .unwrap_or_else(|| "bundle".to_string());
    RawImage {
        image_id: stem,
        width_px: manifest.image_size[0],
        height_px: manifest.image_size[1],
        boxes: manifest
            .objects
            .iter()
            .map(|o| RawBox {
                class_name: o.class_name.clone(),
                x_min: o.bbox_px[0],
                y_min: o.bbox_px[1],
                x_max: o.bbox_px[2],
                y_max: o.bbox_px[3],
            })
            .collect(),
    }
}

/// Clamp, filter, and number classes; shared by both ingest paths.
fn assemble(mut raw: Vec<RawImage>, origin: &Path) -> Result<(DatasetSummary, Vec<String>)> {
    raw.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    let mut warnings = Vec::new();
    let mut names = Vec::new();
    let mut images = Vec::with_capacity(raw.len());
    for img in raw {
        let (w, h) = (f64::from(img.width_px), f64::from(img.height_px));
        let mut annotations = Vec::with_capacity(img.boxes.len());
        for b in img.boxes {
            let class_name = normalize_name(&b.class_name);
            if class_name.is_empty() {
                warnings.push(format!("{}: dropped box with empty class name", img.image_id));
                continue;
            }
            let bbox = match BBox::new(b.x_min, b.y_min, b.x_max, b.y_max) {
                Ok(bx) => bx,
                Err(e) => {
                    warnings.push(format!("{}: dropped {class_name} box: {e}", img.image_id));
                    continue;
                }
            };
            let inside =
                bbox.x_min >= 0.0 && bbox.y_min >= 0.0 && bbox.x_max <= w && bbox.y_max <= h;
            let clamped = match bbox.clamped(w, h) {
                Some(c) => c,
                None => {
                    warnings.push(format!(
                        "{}: dropped {class_name} box fully outside the {w}x{h} frame",
                        img.image_id
                    ));
                    continue;
                }
            };
            if !inside {
                warnings.push(format!(
                    "{}: clamped out-of-frame {class_name} box into {w}x{h}",
                    img.image_id
                ));
            }
            if clamped.area() < MIN_BOX_AREA {
                warnings.push(format!(
                    "{}: dropped {class_name} sliver ({} px^2 after clamping)",
                    img.image_id,
                    clamped.area()
                ));
                continue;
            }
            names.push(class_name.clone());
            annotations.push(InstanceAnnotation {
                image_id: img.image_id.clone(),
                class_name,
                bbox: clamped,
            });
        }
        images.push(ImageRecord {
            image_id: img.image_id,
            width_px: img.width_px,
            height_px: img.height_px,
            annotations,
        });
    }
    if names.is_empty() {
        return Err(Error::EmptyDataset(origin.to_path_buf()));
    }
    let class_table = ClassTable::from_names(names)?;
    Ok((DatasetSummary { images, class_table }, warnings))
}

fn parse_voc_file(path: &Path) -> Result<RawImage> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc = roxmltree::Document::parse(&text).map_err(|e| {
        Error::schema(path, "/", format!("malformed XML: {e}"))
    })?;
    let root = doc.root_element();

    let size = root
        .children()
        .find(|n| n.has_tag_name("size"))
        .ok_or_else(|| Error::schema(path, "/annotation/size", "missing size element"))?;
    let width_px = child_num(&size, "width", path)? as u32;
    let height_px = child_num(&size, "height", path)? as u32;
    if width_px == 0 || height_px == 0 {
        return Err(Error::schema(path, "/annotation/size", "zero image extent"));
    }

    let image_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("image")
        .to_string();

    let mut boxes = Vec::new();
    for object in root.children().filter(|n| n.has_tag_name("object")) {
        let class_name = object
            .children()
            .find(|n| n.has_tag_name("name"))
            .and_then(|n| n.text())
            .unwrap_or("")
            .trim()
            .to_string();
        if let Some(bnd) = object.children().find(|n| n.has_tag_name("bndbox")) {
            boxes.push(RawBox {
                class_name,
                x_min: child_num(&bnd, "xmin", path)?,
                y_min: child_num(&bnd, "ymin", path)?,
                x_max: child_num(&bnd, "xmax", path)?,
                y_max: child_num(&bnd, "ymax", path)?,
            });
        } else if let Some(rob) = object.children().find(|n| n.has_tag_name("robndbox")) {
            boxes.push(oriented_envelope(&rob, class_name, path)?);
        }
        // Objects with neither box form are silently skipped; DIOR-style
        // files always carry one of the two.
    }
    Ok(RawImage {
        image_id,
        width_px,
        height_px,
        boxes,
    })
}

/// Axis-aligned envelope of an oriented box element, covering both the
/// center/size/angle form and the four-corner form.
fn oriented_envelope(node: &roxmltree::Node, class_name: String, path: &Path) -> Result<RawBox> {
    let has = |tag: &str| node.children().any(|n| n.has_tag_name(tag));
    if has("cx") {
        let cx = child_num(node, "cx", path)?;
        let cy = child_num(node, "cy", path)?;
        let w = child_num(node, "w", path)?;
        let h = child_num(node, "h", path)?;
        let angle = child_num(node, "angle", path)?;
        let (sin, cos) = angle.sin_cos();
        let half_w = 0.5 * (w * cos.abs() + h * sin.abs());
        let half_h = 0.5 * (w * sin.abs() + h * cos.abs());
        Ok(RawBox {
            class_name,
            x_min: cx - half_w,
            y_min: cy - half_h,
            x_max: cx + half_w,
            y_max: cy + half_h,
        })
    } else {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 1..=4 {
            xs.push(child_num(node, &format!("x{i}"), path)?);
            ys.push(child_num(node, &format!("y{i}"), path)?);
        }
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(RawBox {
            class_name,
            x_min: min(&xs),
            y_min: min(&ys),
            x_max: max(&xs),
            y_max: max(&ys),
        })
    }
}

fn child_num(node: &roxmltree::Node, tag: &str, path: &Path) -> Result<f64> {
    let text = node
        .children()
        .find(|n| n.has_tag_name(tag))
        .and_then(|n| n.text())
        .ok_or_else(|| Error::schema(path, format!("/{tag}"), "missing numeric element"))?;
    text.trim()
        .parse::<f64>()
        .map_err(|e| Error::schema(path, format!("/{tag}"), format!("bad number {text:?}: {e}")))
}
