//! Condition bundle export and verification.
//!
//! A bundle is the product of the pipeline: `{id}.isim.png` (8-bit gray
//! instance map), `{id}.sodi.txt` (prompt text plus one trailing newline),
//! and `{id}.labels.json` (canonical-JSON label manifest). A batch directory
//! additionally carries one `manifest.json` listing every bundle exactly
//! once. All writers are deterministic: the same layout always produces the
//! same bytes.

use std::collections::BTreeMap;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{DynamicImage, ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};

use crate::canon;
use crate::class::{ClassId, ClassTable};
use crate::error::{Error, Result};
use crate::isim::{self, IsimRaster, PixelRect};
use crate::layout::{Layout, SamplerConfig};
use crate::sodi;

pub const BUNDLE_FORMAT_VERSION: &str = "isim-forge/1";

/// Bundle id: zero-padded batch index plus a short digest of the seed.
pub fn bundle_id(index: u64, seed: u64) -> String {
    let digest = canon::sha256_hex(&seed.to_le_bytes());
    format!("{index:06}-{}", canon::short_digest(&digest))
}

/// On-disk label manifest for one bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelManifest {
    pub format_version: String,
    pub image_size: [u32; 2],
    pub seed: u64,
    pub scdkg_digest: String,
    pub class_count: u16,
    pub objects: Vec<LabelObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelObject {
    pub class_name: String,
    pub class_id: u16,
    pub gray_value: u8,
    pub bbox_px: [f64; 4],
    pub center_norm: [f64; 2],
    pub scale: f64,
    pub aspect_ratio: f64,
}

impl LabelManifest {
    pub fn from_layout(layout: &Layout) -> Result<Self> {
        let objects = layout
            .objects
            .iter()
            .map(|o| {
                Ok(LabelObject {
                    class_name: o.class_name.clone(),
                    class_id: o.class_id.get(),
                    gray_value: isim::gray_value(o.class_id, layout.class_count)?,
                    bbox_px: [o.bbox_px.x_min, o.bbox_px.y_min, o.bbox_px.x_max, o.bbox_px.y_max],
                    center_norm: [o.center.0, o.center.1],
                    scale: o.scale,
                    aspect_ratio: o.aspect_ratio,
                })
            })
            .collect::<Result<_>>()?;
        Ok(LabelManifest {
            format_version: BUNDLE_FORMAT_VERSION.to_string(),
            image_size: [layout.image_size.0, layout.image_size.1],
            seed: layout.seed,
            scdkg_digest: layout.scdkg_digest.clone(),
            class_count: layout.class_count,
            objects,
        })
    }

    /// Per-class counts keyed by normalized class name.
    pub fn name_counts(&self) -> BTreeMap<String, u32> {
        let mut counts = BTreeMap::new();
        for o in &self.objects {
            *counts.entry(o.class_name.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// Reconstruct the layout this manifest was written from.
    pub fn to_layout(&self) -> Result<Layout> {
        let objects = self
            .objects
            .iter()
            .map(|o| {
                Ok(crate::layout::LayoutObject {
                    class_id: ClassId::new(o.class_id)?,
                    class_name: o.class_name.clone(),
                    aspect_ratio: o.aspect_ratio,
                    scale: o.scale,
                    center: (o.center_norm[0], o.center_norm[1]),
                    bbox_px: crate::dataset::BBox::new(
                        o.bbox_px[0],
                        o.bbox_px[1],
                        o.bbox_px[2],
                        o.bbox_px[3],
                    )?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Layout {
            image_size: (self.image_size[0], self.image_size[1]),
            objects,
            seed: self.seed,
            scdkg_digest: self.scdkg_digest.clone(),
            class_count: self.class_count,
        })
    }
}

/// Read and validate a label manifest; schema violations are fatal and
/// carry the JSON pointer of the offending field.
pub fn read_label_manifest(path: &Path) -> Result<LabelManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let manifest: LabelManifest = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::schema(path, format!("/{}", e.path()), e.inner().to_string()))?;

    if manifest.format_version != BUNDLE_FORMAT_VERSION {
        return Err(Error::schema(
            path,
            "/format_version",
            format!(
                "{:?} (expected {BUNDLE_FORMAT_VERSION:?})",
                manifest.format_version
            ),
        ));
    }
    if manifest.class_count == 0 {
        return Err(Error::schema(path, "/class_count", "must be at least 1"));
    }
    if manifest.image_size.contains(&0) {
        return Err(Error::schema(path, "/image_size", "zero image extent"));
    }
    for (i, o) in manifest.objects.iter().enumerate() {
        let at = |field: &str| format!("/objects/{i}/{field}");
        if o.class_id == 0 || o.class_id > manifest.class_count {
            return Err(Error::schema(
                path,
                at("class_id"),
                format!(
                    "class id {} out of range 1..={} (0 is background)",
                    o.class_id, manifest.class_count
                ),
            ));
        }
        if o.class_name.trim().is_empty() {
            return Err(Error::schema(path, at("class_name"), "empty class name"));
        }
        let [x0, y0, x1, y1] = o.bbox_px;
        if ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) || x0 >= x1 || y0 >= y1 {
            return Err(Error::schema(
                path,
                at("bbox_px"),
                format!("degenerate box [{x0}, {y0}, {x1}, {y1}]"),
            ));
        }
    }
    Ok(manifest)
}

/// An exported bundle: the three file paths (relative to the batch
/// directory) plus the layout that produced them.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub bundle_id: String,
    pub isim_path: PathBuf,
    pub sodi_path: PathBuf,
    pub labels_path: PathBuf,
    pub layout: Layout,
}

/// Write the three bundle files into `out_dir`. Refuses to clobber an
/// existing bundle unless `overwrite` is set.
pub fn export_bundle(layout: &Layout, out_dir: &Path, index: u64, overwrite: bool) -> Result<Bundle> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let id = bundle_id(index, layout.seed);
    let isim_rel = PathBuf::from(format!("{id}.isim.png"));
    let sodi_rel = PathBuf::from(format!("{id}.sodi.txt"));
    let labels_rel = PathBuf::from(format!("{id}.labels.json"));
    let labels_abs = out_dir.join(&labels_rel);
    if labels_abs.exists() && !overwrite {
        return Err(Error::BundleExists(id));
    }

    let raster = isim::render_isim(layout)?;
    write_isim_png(&raster, &out_dir.join(&isim_rel))?;

    let prompt = sodi::generate_sodi(layout)?;
    std::fs::write(out_dir.join(&sodi_rel), format!("{}\n", prompt.text))
        .map_err(|e| Error::io(out_dir.join(&sodi_rel), e))?;

    let manifest = LabelManifest::from_layout(layout)?;
    canon::write_canonical_file(&labels_abs, &manifest)?;

    Ok(Bundle {
        bundle_id: id,
        isim_path: isim_rel,
        sodi_path: sodi_rel,
        labels_path: labels_rel,
        layout: layout.clone(),
    })
}

/// Encode with pinned settings so identical rasters give identical bytes.
pub fn write_isim_png(raster: &IsimRaster, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let encoder = PngEncoder::new_with_quality(
        BufWriter::new(file),
        CompressionType::Default,
        FilterType::NoFilter,
    );
    encoder
        .write_image(
            raster.pixels(),
            raster.width(),
            raster.height(),
            ExtendedColorType::L8,
        )
        .map_err(|e| Error::RasterFormat(format!("png encode failed at {}: {e}", path.display())))
}

/// Read an instance-map PNG back; anything but 8-bit single-channel gray
/// is rejected.
pub fn read_isim_png(path: &Path, class_count: u16) -> Result<IsimRaster> {
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::RasterFormat(format!("{}: {e}", path.display())))?;
    match img {
        DynamicImage::ImageLuma8(gray) => {
            let (w, h) = (gray.width(), gray.height());
            IsimRaster::from_pixels(w, h, gray.into_raw(), class_count)
        }
        other => Err(Error::RasterFormat(format!(
            "{}: {:?} is not 8-bit grayscale",
            path.display(),
            other.color()
        ))),
    }
}

// ---------------------------------------------------------------------------
// Batch manifest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub format_version: String,
    pub scdkg_digest: String,
    pub image_size: [u32; 2],
    pub cfg: BatchConfig,
    pub bundles: Vec<BundleEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub base_seed: u64,
    pub max_objects: usize,
    pub max_iou: f64,
    pub max_retries: u32,
}

impl BatchConfig {
    pub fn new(base_seed: u64, sampler: &SamplerConfig) -> Self {
        BatchConfig {
            base_seed,
            max_objects: sampler.max_objects,
            max_iou: sampler.max_iou,
            max_retries: sampler.max_retries,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleEntry {
    pub bundle_id: String,
    pub index: u64,
    pub seed: u64,
    pub object_count: usize,
    pub isim: String,
    pub sodi: String,
    pub labels: String,
}

impl BundleEntry {
    pub fn from_bundle(b: &Bundle, index: u64) -> Self {
        BundleEntry {
            bundle_id: b.bundle_id.clone(),
            index,
            seed: b.layout.seed,
            object_count: b.layout.objects.len(),
            isim: b.isim_path.display().to_string(),
            sodi: b.sodi_path.display().to_string(),
            labels: b.labels_path.display().to_string(),
        }
    }
}

impl BatchManifest {
    pub fn path_in(dir: &Path) -> PathBuf {
        dir.join("manifest.json")
    }

    /// Write the manifest, entries sorted by index, each bundle once.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut sorted = self.clone();
        sorted.bundles.sort_by_key(|b| b.index);
        sorted.bundles.dedup_by(|a, b| a.bundle_id == b.bundle_id);
        canon::write_canonical_file(&Self::path_in(dir), &sorted)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = Self::path_in(dir);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de)
            .map_err(|e| Error::schema(&path, format!("/{}", e.path()), e.inner().to_string()))
    }
}

// ---------------------------------------------------------------------------
// Verifier
// ---------------------------------------------------------------------------

/// Verification knobs. The dominance floor is the fraction of an object's
/// raster region that must carry its gray before the object is flagged;
/// occlusion from overlapping boxes is expected and only reported while it
/// stays above the floor.
#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub dominance_floor: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            dominance_floor: 0.5,
        }
    }
}

/// Consistency report for one bundle.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub bundle_id: String,
    /// Fraction of manifest objects whose raster region is majority-filled
    /// with their gray value.
    pub acc_c: f64,
    /// Per-class agreement between decoded region counts and manifest
    /// counts, averaged over classes present on either side.
    pub acc_n: f64,
    pub violations: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verify the three files of a bundle against each other: the manifest is
/// the reference, the raster and prompt must agree with it.
pub fn verify_bundle(dir: &Path, bundle_id: &str, cfg: &VerifyConfig) -> Result<VerifyReport> {
    let labels_path = dir.join(format!("{bundle_id}.labels.json"));
    let manifest = read_label_manifest(&labels_path)?;
    let mut violations = Vec::new();

    let raster = read_isim_png(
        &dir.join(format!("{bundle_id}.isim.png")),
        manifest.class_count,
    )?;
    if raster.width() != manifest.image_size[0] || raster.height() != manifest.image_size[1] {
        violations.push(format!(
            "raster is {}x{} but the manifest says {}x{}",
            raster.width(),
            raster.height(),
            manifest.image_size[0],
            manifest.image_size[1]
        ));
    }

    // Per-object gray dominance inside the rasterized box.
    let mut dominated = 0usize;
    for (i, o) in manifest.objects.iter().enumerate() {
        let class_id = ClassId::new(o.class_id)?;
        let expect_gray = isim::gray_value(class_id, manifest.class_count)?;
        if expect_gray != o.gray_value {
            violations.push(format!(
                "objects/{i}: gray {} does not match class {} of {} (expected {})",
                o.gray_value, o.class_id, manifest.class_count, expect_gray
            ));
        }
        let bbox = crate::dataset::BBox {
            x_min: o.bbox_px[0],
            y_min: o.bbox_px[1],
            x_max: o.bbox_px[2],
            y_max: o.bbox_px[3],
        };
        let rect = PixelRect::from_bbox(&bbox, raster.width(), raster.height());
        let area = rect.area();
        let frac = if area == 0 {
            0.0
        } else {
            raster.count_value_in(rect, expect_gray) as f64 / area as f64
        };
        if frac > 0.5 {
            dominated += 1;
        }
        if frac < cfg.dominance_floor {
            violations.push(format!(
                "objects/{i}: only {:.1}% of the {} region carries gray {} (floor {:.0}%)",
                100.0 * frac,
                o.class_name,
                expect_gray,
                100.0 * cfg.dominance_floor
            ));
        }
    }
    let acc_c = if manifest.objects.is_empty() {
        1.0
    } else {
        dominated as f64 / manifest.objects.len() as f64
    };

    // Decoded region counts per class versus manifest counts.
    let mut acc_n = 1.0;
    match isim::decode_isim(&raster, manifest.class_count) {
        Ok(regions) => {
            let mut decoded: BTreeMap<u16, u32> = BTreeMap::new();
            for r in &regions {
                *decoded.entry(r.class_id.get()).or_insert(0) += 1;
            }
            let mut expected: BTreeMap<u16, u32> = BTreeMap::new();
            for o in &manifest.objects {
                *expected.entry(o.class_id).or_insert(0) += 1;
            }
            let classes: std::collections::BTreeSet<u16> =
                decoded.keys().chain(expected.keys()).copied().collect();
            if !classes.is_empty() {
                let mut total = 0.0;
                for c in &classes {
                    let d = f64::from(decoded.get(c).copied().unwrap_or(0));
                    let e = f64::from(expected.get(c).copied().unwrap_or(0));
                    total += d.min(e) / d.max(e);
                }
                acc_n = total / classes.len() as f64;
            }
        }
        Err(e) => violations.push(format!("isim decode failed: {e}")),
    }

    // Prompt text must regenerate from the manifest counts.
    let sodi_path = dir.join(format!("{bundle_id}.sodi.txt"));
    let sodi_text = std::fs::read_to_string(&sodi_path).map_err(|e| Error::io(&sodi_path, e))?;
    let sodi_text = sodi_text.strip_suffix('\n').unwrap_or(&sodi_text);
    match parse_prompt_counts(sodi_text, &manifest) {
        Ok(prompt_counts) => {
            if prompt_counts != manifest.name_counts() {
                violations.push(format!(
                    "prompt counts {prompt_counts:?} disagree with manifest counts {:?}",
                    manifest.name_counts()
                ));
            }
        }
        Err(e) => violations.push(format!("prompt does not parse: {e}")),
    }

    Ok(VerifyReport {
        bundle_id: bundle_id.to_string(),
        acc_c,
        acc_n,
        violations,
    })
}

/// Parse the prompt against a vocabulary of just the manifest's classes.
/// Relative name order matches the full table's because ids are
/// lexicographic ranks in both.
fn parse_prompt_counts(text: &str, manifest: &LabelManifest) -> Result<BTreeMap<String, u32>> {
    let vocab = ClassTable::from_names(manifest.objects.iter().map(|o| o.class_name.clone()))?;
    let counts = sodi::parse_sodi(text, &vocab)?;
    Ok(counts
        .into_iter()
        .map(|c| (c.class_name, c.count))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::BBox;
    use crate::layout::LayoutObject;

    fn test_layout() -> Layout {
        let object = |id: u16, name: &str, x0: f64, y0: f64, x1: f64, y1: f64| LayoutObject {
            class_id: ClassId::new(id).unwrap(),
            class_name: name.to_string(),
            aspect_ratio: (x1 - x0) / (y1 - y0),
            scale: (((x1 - x0) * (y1 - y0)).sqrt()) / 400.0,
            center: ((x0 + x1) / 800.0, (y0 + y1) / 800.0),
            bbox_px: BBox::new(x0, y0, x1, y1).unwrap(),
        };
        Layout {
            image_size: (400, 400),
            objects: vec![
                object(2, "harbor", 20.0, 20.0, 120.0, 80.0),
                object(3, "ship", 200.0, 40.0, 240.0, 60.0),
                object(3, "ship", 200.0, 100.0, 240.0, 120.0),
            ],
            seed: 77,
            scdkg_digest: "feedface".into(),
            class_count: 4,
        }
    }

    #[test]
    fn export_writes_three_consistent_files() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = export_bundle(&test_layout(), dir.path(), 0, false).unwrap();
        assert!(dir.path().join(&bundle.isim_path).exists());
        assert!(dir.path().join(&bundle.sodi_path).exists());
        assert!(dir.path().join(&bundle.labels_path).exists());

        let manifest = read_label_manifest(&dir.path().join(&bundle.labels_path)).unwrap();
        assert_eq!(manifest.objects.len(), 3);
        assert_eq!(manifest.class_count, 4);
        assert_eq!(manifest.seed, 77);
        let harbor = &manifest.objects[0];
        assert_eq!(harbor.class_name, "harbor");
        assert_eq!(harbor.class_id, 2);
        assert_eq!(
            harbor.gray_value,
            isim::gray_value(ClassId::new(2).unwrap(), 4).unwrap()
        );
        assert_eq!(harbor.bbox_px, [20.0, 20.0, 120.0, 80.0]);

        let text = std::fs::read_to_string(dir.path().join(&bundle.sodi_path)).unwrap();
        assert_eq!(text, "A remote sensing image with 2 ships, 1 harbor\n");
    }

    #[test]
    fn export_is_byte_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let layout = test_layout();
        let x = export_bundle(&layout, a.path(), 5, false).unwrap();
        let y = export_bundle(&layout, b.path(), 5, false).unwrap();
        for (p, q) in [
            (&x.isim_path, &y.isim_path),
            (&x.sodi_path, &y.sodi_path),
            (&x.labels_path, &y.labels_path),
        ] {
            assert_eq!(
                std::fs::read(a.path().join(p)).unwrap(),
                std::fs::read(b.path().join(q)).unwrap()
            );
        }
    }

    #[test]
    fn existing_bundle_needs_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let layout = test_layout();
        export_bundle(&layout, dir.path(), 0, false).unwrap();
        assert!(matches!(
            export_bundle(&layout, dir.path(), 0, false),
            Err(Error::BundleExists(_))
        ));
        export_bundle(&layout, dir.path(), 0, true).unwrap();
    }

    #[test]
    fn unwritable_out_dir_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = export_bundle(&test_layout(), &blocker, 0, false).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }

    #[test]
    fn fresh_bundle_verifies_clean() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = export_bundle(&test_layout(), dir.path(), 0, false).unwrap();
        let report =
            verify_bundle(dir.path(), &bundle.bundle_id, &VerifyConfig::default()).unwrap();
        assert!(report.passed(), "violations: {:?}", report.violations);
        assert_eq!(report.acc_c, 1.0);
        assert_eq!(report.acc_n, 1.0);
    }

    #[test]
    fn zeroed_png_fails_verification() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = export_bundle(&test_layout(), dir.path(), 0, false).unwrap();
        let raster = IsimRaster::new(400, 400, 4).unwrap();
        write_isim_png(&raster, &dir.path().join(&bundle.isim_path)).unwrap();
        let report =
            verify_bundle(dir.path(), &bundle.bundle_id, &VerifyConfig::default()).unwrap();
        assert_eq!(report.acc_c, 0.0);
        assert!(!report.passed());
    }

    #[test]
    fn edited_prompt_count_is_a_violation() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = export_bundle(&test_layout(), dir.path(), 0, false).unwrap();
        std::fs::write(
            dir.path().join(&bundle.sodi_path),
            "A remote sensing image with 5 ships, 1 harbor\n",
        )
        .unwrap();
        let report =
            verify_bundle(dir.path(), &bundle.bundle_id, &VerifyConfig::default()).unwrap();
        assert!(!report.passed());
        assert!(
            report.violations.iter().any(|v| v.contains("disagree")),
            "{:?}",
            report.violations
        );
    }

    #[test]
    fn class_id_zero_is_schema_violation() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = export_bundle(&test_layout(), dir.path(), 0, false).unwrap();
        let labels = dir.path().join(&bundle.labels_path);
        let text = std::fs::read_to_string(&labels)
            .unwrap()
            .replace("\"class_id\": 2", "\"class_id\": 0");
        std::fs::write(&labels, text).unwrap();
        let err = read_label_manifest(&labels).unwrap_err().to_string();
        assert!(err.contains("class_id"), "{err}");
        assert!(err.contains("background"), "{err}");
    }

    #[test]
    fn manifest_round_trip_and_dedup() {
        let dir = tempfile::tempdir().unwrap();
        let layout = test_layout();
        let b0 = export_bundle(&layout, dir.path(), 0, false).unwrap();
        let manifest = BatchManifest {
            format_version: BUNDLE_FORMAT_VERSION.to_string(),
            scdkg_digest: layout.scdkg_digest.clone(),
            image_size: [400, 400],
            cfg: BatchConfig::new(77, &SamplerConfig::default()),
            bundles: vec![
                BundleEntry::from_bundle(&b0, 0),
                BundleEntry::from_bundle(&b0, 0),
            ],
        };
        manifest.write(dir.path()).unwrap();
        let back = BatchManifest::read(dir.path()).unwrap();
        assert_eq!(back.bundles.len(), 1);
        assert_eq!(back.scdkg_digest, layout.scdkg_digest);
    }

    #[test]
    fn png_round_trip_preserves_pixels() {
        let layout = test_layout();
        let raster = isim::render_isim(&layout).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        write_isim_png(&raster, &path).unwrap();
        let back = read_isim_png(&path, layout.class_count).unwrap();
        assert_eq!(raster.pixels(), back.pixels());
    }
}
