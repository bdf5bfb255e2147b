//! Scene layout sampling from a fitted graph.
//!
//! One layout is drawn by sampling the object count, drawing the first class
//! from the class prior, and then chaining: each object's geometry comes from
//! its class's densities, and the next class is drawn from the interdependency
//! row of the current class. The (graph, image size, seed, config) tuple fully
//! determines the result.

use rayon::prelude::*;
use serde::Serialize;

use crate::class::ClassId;
use crate::dataset::BBox;
use crate::error::{Error, Result};
use crate::scdkg::Scdkg;
use crate::seed::{rng_from_seed, split_seed};

/// Smallest box side in pixels that a sampled object may occupy.
pub const MIN_BOX_SIDE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerConfig {
    /// Ceiling on objects per layout; sampled counts clamp into [1, this].
    pub max_objects: usize,
    /// When positive, a candidate whose IoU with an already accepted box of
    /// the same class exceeds this triggers a geometry re-draw. Zero or
    /// negative disables overlap checking entirely.
    pub max_iou: f64,
    /// Geometry re-draws allowed per object before accepting as-is.
    pub max_retries: u32,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            max_objects: 100,
            max_iou: 0.3,
            max_retries: 10,
        }
    }
}

/// One sampled object: the raw attribute draws plus the derived pixel box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayoutObject {
    pub class_id: ClassId,
    pub class_name: String,
    pub aspect_ratio: f64,
    pub scale: f64,
    /// Normalized center in the unit square, as sampled.
    pub center: (f64, f64),
    /// Derived box in pixels, shifted to lie fully inside the frame with
    /// both sides at least [`MIN_BOX_SIDE`].
    pub bbox_px: BBox,
}

/// A sampled scene: ordered objects plus full provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Layout {
    pub image_size: (u32, u32),
    pub objects: Vec<LayoutObject>,
    pub seed: u64,
    /// Digest of the graph this layout was sampled from.
    pub scdkg_digest: String,
    /// Class count of that graph; fixes the gray table for rendering.
    pub class_count: u16,
}

impl Layout {
    /// Per-class object counts, keyed by class id.
    pub fn class_counts(&self) -> std::collections::BTreeMap<ClassId, u32> {
        let mut counts = std::collections::BTreeMap::new();
        for obj in &self.objects {
            *counts.entry(obj.class_id).or_insert(0) += 1;
        }
        counts
    }
}

/// Derive the pixel box for sampled attributes.
///
/// Width uses `scale * W * sqrt(aspect)` and height `scale * W / sqrt(aspect)`
/// (both against the image width), which makes (scale, aspect) -> (w, h)
/// bijective. Sides are capped to the frame and floored at [`MIN_BOX_SIDE`];
/// the center then shifts as little as needed to keep the box in-frame.
pub fn derive_bbox(aspect: f64, scale: f64, center: (f64, f64), image_size: (u32, u32)) -> BBox {
    let (w_img, h_img) = (f64::from(image_size.0), f64::from(image_size.1));
    let root = aspect.sqrt();
    let w = (scale * w_img * root).clamp(MIN_BOX_SIDE, w_img);
    let h = (scale * w_img / root).clamp(MIN_BOX_SIDE, h_img);
    let x_min = (center.0 * w_img - 0.5 * w).clamp(0.0, w_img - w);
    let y_min = (center.1 * h_img - 0.5 * h).clamp(0.0, h_img - h);
    BBox {
        x_min,
        y_min,
        x_max: x_min + w,
        y_max: y_min + h,
    }
}

/// Sample one layout.
pub fn sample_layout(
    g: &Scdkg,
    image_size: (u32, u32),
    seed: u64,
    cfg: &SamplerConfig,
) -> Result<Layout> {
    if image_size.0 < 32 || image_size.1 < 32 {
        return Err(Error::InvalidInput(format!(
            "image size {}x{} below the 32 px minimum",
            image_size.0, image_size.1
        )));
    }
    if cfg.max_objects == 0 {
        return Err(Error::InvalidInput("max_objects must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);

    let drawn = g.count_prior().sample(&mut rng).round();
    let count = (drawn.max(1.0) as usize).min(cfg.max_objects);

    let mut objects: Vec<LayoutObject> = Vec::with_capacity(count);
    let mut class = g.class_prior().sample(&mut rng);
    for _ in 0..count {
        let geom = g.geometry(class);
        let mut attempt = 0;
        let (aspect, scale, center, bbox) = loop {
            let aspect = geom.aspect_ratio.sample(&mut rng);
            let scale = geom.scale.sample(&mut rng).min(1.0);
            let center = geom.location.sample(&mut rng);
            let bbox = derive_bbox(aspect, scale, center, image_size);
            let collides = cfg.max_iou > 0.0
                && objects
                    .iter()
                    .filter(|o| o.class_id == class)
                    .any(|o| o.bbox_px.iou(&bbox) > cfg.max_iou);
            if !collides || attempt >= cfg.max_retries {
                break (aspect, scale, center, bbox);
            }
            attempt += 1;
        };
        let class_name = g
            .class_table()
            .name_of(class)
            .ok_or_else(|| Error::InvalidGraph(format!("class {class} missing from table")))?
            .to_string();
        objects.push(LayoutObject {
            class_id: class,
            class_name,
            aspect_ratio: aspect,
            scale,
            center,
            bbox_px: bbox,
        });
        // The chain: the class for the next object conditions on this one.
        class = g.interdep().sample_next(class, &mut rng);
    }

    Ok(Layout {
        image_size,
        objects,
        seed,
        scdkg_digest: g.digest().to_string(),
        class_count: g.class_count(),
    })
}

/// Sample a reproducible batch. Layout `i` is seeded by
/// `split_seed(base_seed, i)`, so results are independent of worker count
/// and scheduling; the default rayon pool provides the parallelism.
pub fn sample_batch(
    g: &Scdkg,
    image_size: (u32, u32),
    base_seed: u64,
    count: usize,
    cfg: &SamplerConfig,
) -> Result<Vec<Layout>> {
    if count == 0 {
        return Err(Error::InvalidInput("batch count must be at least 1".into()));
    }
    (0..count as u64)
        .into_par_iter()
        .map(|i| sample_layout(g, image_size, split_seed(base_seed, i), cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::ClassTable;
    use crate::density::{Categorical, Density1d, Density2d};
    use crate::scdkg::{ClassGeometry, FitConfig, InterdepMatrix};

    fn point_density(value: f64) -> Density1d {
        Density1d::new(vec![value, value + 1e-9], vec![1.0]).unwrap()
    }

    fn point_location(x: f64, y: f64) -> Density2d {
        Density2d::new(vec![x, x + 1e-9], vec![y, y + 1e-9], vec![1.0]).unwrap()
    }

    fn point_geometry(aspect: f64, scale: f64, loc: (f64, f64)) -> ClassGeometry {
        ClassGeometry {
            aspect_ratio: point_density(aspect),
            scale: point_density(scale),
            location: point_location(loc.0, loc.1),
        }
    }

    /// Graph with point-mass everything and a cyclic next-class rule.
    fn cycle_graph(names: &[&str], count: f64) -> Scdkg {
        let table = ClassTable::from_names(names.iter().map(|s| s.to_string())).unwrap();
        let m = usize::from(table.len());
        let ids: Vec<ClassId> = table.ids().collect();
        let mut first = vec![0.0_f64; m];
        first[0] = 1.0;
        let rows = (0..m)
            .map(|a| {
                let mut row = vec![0.0; m];
                row[(a + 1) % m] = 1.0;
                row
            })
            .collect();
        let geometry: Vec<ClassGeometry> = (0..m)
            .map(|i| {
                point_geometry(
                    1.0,
                    0.05,
                    (0.2 + 0.15 * i as f64, 0.2 + 0.15 * i as f64),
                )
            })
            .collect();
        Scdkg::from_parts(
            table,
            Categorical::new(ids, first).unwrap(),
            point_density(count),
            geometry.clone(),
            geometry[0].clone(),
            InterdepMatrix::from_rows(rows).unwrap(),
            FitConfig::default(),
            "test".into(),
        )
        .unwrap()
    }

    #[test]
    fn point_mass_graph_yields_identical_boxes() {
        let g = cycle_graph(&["ship"], 3.0);
        let layout = sample_layout(&g, (800, 800), 5, &SamplerConfig::default()).unwrap();
        assert_eq!(layout.objects.len(), 3);
        let first = &layout.objects[0];
        for o in &layout.objects[1..] {
            // Point-mass bins are 1e-9 wide, so sizes agree to within a micropixel.
            assert!((o.bbox_px.width() - first.bbox_px.width()).abs() < 1e-5);
            assert!((o.bbox_px.height() - first.bbox_px.height()).abs() < 1e-5);
        }
    }

    #[test]
    fn one_hot_rows_alternate_classes() {
        // First draw is forced to the first class (lexicographically
        // "harbor"), and each row maps to the other class.
        let g = cycle_graph(&["harbor", "ship"], 4.0);
        let layout = sample_layout(&g, (800, 800), 123, &SamplerConfig::default()).unwrap();
        let names: Vec<&str> = layout.objects.iter().map(|o| o.class_name.as_str()).collect();
        assert_eq!(names, ["harbor", "ship", "harbor", "ship"]);
    }

    #[test]
    fn same_seed_bit_identical() {
        let g = cycle_graph(&["a", "b", "c"], 7.0);
        let x = sample_layout(&g, (640, 480), 42, &SamplerConfig::default()).unwrap();
        let y = sample_layout(&g, (640, 480), 42, &SamplerConfig::default()).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn batch_items_reproducible_individually() {
        let g = cycle_graph(&["a", "b"], 5.0);
        let cfg = SamplerConfig::default();
        let batch = sample_batch(&g, (800, 800), 99, 4, &cfg).unwrap();
        for (i, layout) in batch.iter().enumerate() {
            let solo = sample_layout(&g, (800, 800), split_seed(99, i as u64), &cfg).unwrap();
            assert_eq!(*layout, solo);
        }
    }

    #[test]
    fn count_clamps_to_max_objects() {
        let g = cycle_graph(&["a"], 50.0);
        let cfg = SamplerConfig {
            max_objects: 5,
            ..SamplerConfig::default()
        };
        let layout = sample_layout(&g, (800, 800), 1, &cfg).unwrap();
        assert_eq!(layout.objects.len(), 5);
    }

    #[test]
    fn boxes_in_frame_and_above_minimum() {
        // Small boxes on a non-square frame: everything must stay inside.
        let g = cycle_graph(&["a"], 10.0);
        let mut layouts = Vec::new();
        for seed in 0..20 {
            layouts.push(sample_layout(&g, (100, 64), seed, &SamplerConfig::default()).unwrap());
        }
        for layout in layouts {
            for o in &layout.objects {
                assert!(o.bbox_px.x_min >= 0.0 && o.bbox_px.x_max <= 100.0);
                assert!(o.bbox_px.y_min >= 0.0 && o.bbox_px.y_max <= 64.0);
                assert!(o.bbox_px.width() >= MIN_BOX_SIDE);
                assert!(o.bbox_px.height() >= MIN_BOX_SIDE);
            }
        }
    }

    #[test]
    fn tiny_image_rejected() {
        let g = cycle_graph(&["a"], 1.0);
        assert!(sample_layout(&g, (16, 800), 0, &SamplerConfig::default()).is_err());
    }

    #[test]
    fn derive_bbox_reconstructs_width_and_height() {
        // scale * W * sqrt(r) by scale * W / sqrt(r) on an 800 px frame.
        let b = derive_bbox(4.0, 0.1, (0.5, 0.5), (800, 800));
        assert!((b.width() - 160.0).abs() < 1e-9);
        assert!((b.height() - 40.0).abs() < 1e-9);
    }

    #[test]
    fn overlap_retry_separates_same_class_boxes() {
        // Uniform location over the square, biggish boxes, IoU cap low:
        // accepted same-class pairs must respect the cap unless retries
        // ran out, which the generous retry budget makes rare here.
        let table = ClassTable::from_names(["a".to_string()]).unwrap();
        let geometry = vec![ClassGeometry {
            aspect_ratio: point_density(1.0),
            scale: point_density(0.2),
            location: Density2d::fit(
                &(0..100)
                    .map(|i| (0.05 + 0.009 * f64::from(i), 0.05 + 0.009 * f64::from(i)))
                    .collect::<Vec<_>>(),
                (10, 10),
                Some(((0.0, 1.0), (0.0, 1.0))),
            )
            .unwrap(),
        }];
        let g = Scdkg::from_parts(
            table.clone(),
            Categorical::new(table.ids().collect(), vec![1.0]).unwrap(),
            point_density(4.0),
            geometry.clone(),
            geometry[0].clone(),
            InterdepMatrix::from_rows(vec![vec![1.0]]).unwrap(),
            FitConfig::default(),
            "test".into(),
        )
        .unwrap();
        let cfg = SamplerConfig {
            max_objects: 10,
            max_iou: 0.1,
            max_retries: 200,
        };
        let layout = sample_layout(&g, (800, 800), 7, &cfg).unwrap();
        for (i, a) in layout.objects.iter().enumerate() {
            for b in &layout.objects[i + 1..] {
                assert!(
                    a.bbox_px.iou(&b.bbox_px) <= 0.1 + 1e-12,
                    "IoU {}",
                    a.bbox_px.iou(&b.bbox_px)
                );
            }
        }
    }
}
