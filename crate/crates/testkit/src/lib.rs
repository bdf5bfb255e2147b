//! Synthetic fixtures for the isim-forge test and bench suites.
//!
//! The structured dataset has six classes in three strictly co-occurring
//! pairs, each class with its own tight aspect/scale/location blob. That
//! makes every graph factor measurable: per-class geometry is far from the
//! pooled mixture, and image co-occurrence is far from independence.

use std::io::Write;
use std::path::Path;

use rand::Rng;

use isim_forge::class::{ClassId, ClassTable};
use isim_forge::dataset::{BBox, DatasetSummary, ImageRecord, InstanceAnnotation};
use isim_forge::density::{Categorical, Density1d, Density2d};
use isim_forge::layout::{Layout, LayoutObject};
use isim_forge::scdkg::{fit_scdkg, ClassGeometry, FitConfig, InterdepMatrix, Scdkg};
use isim_forge::seed::rng_from_seed;

/// Per-class blob parameters: (name, aspect, scale, center x, center y).
const CLASS_SPECS: [(&str, f64, f64, f64, f64); 6] = [
    ("airplane", 1.2, 0.060, 0.25, 0.25),
    ("airport", 3.0, 0.180, 0.70, 0.20),
    ("bridge", 2.2, 0.100, 0.20, 0.75),
    ("harbor", 1.6, 0.140, 0.75, 0.75),
    ("ship", 0.5, 0.040, 0.50, 0.55),
    ("vehicle", 0.8, 0.025, 0.45, 0.40),
];

/// Class-name pairs that always appear together and never apart.
const PAIRS: [(usize, usize); 3] = [(4, 3), (0, 1), (5, 2)];

const IMAGE_SIDE: u32 = 800;

/// Build a dataset of `n_images` images with strong pair co-occurrence and
/// per-class distinct geometry. Deterministic in `seed`.
pub fn structured_dataset(n_images: usize, seed: u64) -> DatasetSummary {
    let mut rng = rng_from_seed(seed);
    let side = f64::from(IMAGE_SIDE);
    let mut images = Vec::with_capacity(n_images);
    for i in 0..n_images {
        let image_id = format!("synth{i:05}");
        let (a, b) = PAIRS[i % PAIRS.len()];
        let mut annotations = Vec::new();
        for &class in &[a, b] {
            let count = rng.random_range(3..=8);
            for _ in 0..count {
                let (name, aspect, scale, cx, cy) = CLASS_SPECS[class];
                let aspect = aspect * (1.0 + 0.1 * (rng.random::<f64>() - 0.5));
                let scale = scale * (1.0 + 0.1 * (rng.random::<f64>() - 0.5));
                let cx = cx + 0.1 * (rng.random::<f64>() - 0.5);
                let cy = cy + 0.1 * (rng.random::<f64>() - 0.5);
                let w = scale * side * aspect.sqrt();
                let h = scale * side / aspect.sqrt();
                let bbox = BBox::new(
                    cx * side - 0.5 * w,
                    cy * side - 0.5 * h,
                    cx * side + 0.5 * w,
                    cy * side + 0.5 * h,
                )
                .expect("fixture boxes are inside the frame by construction");
                annotations.push(InstanceAnnotation {
                    image_id: image_id.clone(),
                    class_name: name.to_string(),
                    bbox,
                });
            }
        }
        images.push(ImageRecord {
            image_id,
            width_px: IMAGE_SIDE,
            height_px: IMAGE_SIDE,
            annotations,
        });
    }
    let class_table =
        ClassTable::from_names(CLASS_SPECS.iter().map(|c| c.0.to_string())).unwrap();
    DatasetSummary {
        images,
        class_table,
    }
}

/// Shorthand: structured dataset fitted with default settings.
pub fn fit_structured_graph(n_images: usize, seed: u64) -> Scdkg {
    fit_scdkg(&structured_dataset(n_images, seed), &FitConfig::default()).unwrap()
}

/// Write a dataset as one VOC-style XML file per image.
pub fn write_voc_dir(ds: &DatasetSummary, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for img in &ds.images {
        let mut file = std::fs::File::create(dir.join(format!("{}.xml", img.image_id)))?;
        writeln!(file, "<annotation>")?;
        writeln!(file, "  <filename>{}.jpg</filename>", img.image_id)?;
        writeln!(
            file,
            "  <size><width>{}</width><height>{}</height><depth>3</depth></size>",
            img.width_px, img.height_px
        )?;
        for a in &img.annotations {
            writeln!(file, "  <object>")?;
            writeln!(file, "    <name>{}</name>", a.class_name)?;
            writeln!(
                file,
                "    <bndbox><xmin>{}</xmin><ymin>{}</ymin><xmax>{}</xmax><ymax>{}</ymax></bndbox>",
                a.bbox.x_min, a.bbox.y_min, a.bbox.x_max, a.bbox.y_max
            )?;
            writeln!(file, "  </object>")?;
        }
        writeln!(file, "</annotation>")?;
    }
    Ok(())
}

/// Point-mass attribute values used by [`deterministic_chain_graph`];
/// trace oracles recompute expected attributes from the same formulas.
pub fn chain_attrs(class: u16) -> (f64, f64, (f64, f64)) {
    let m = f64::from(class);
    let aspect = 0.5 + 0.25 * m;
    let scale = 0.02 + 0.01 * m;
    let center = (0.15 + 0.07 * m, 0.85 - 0.07 * m);
    (aspect, scale, center)
}

/// A fully deterministic graph: the class prior is a point mass on `first`,
/// every interdependency row is one-hot following `next` (`next[i]` is the
/// successor of class i+1), the count prior is a point mass on `objects`,
/// and each class has point-mass geometry from [`chain_attrs`]. Sampling
/// from it is a pure function of the chain, which makes hand-written trace
/// oracles possible.
pub fn deterministic_chain_graph(class_count: u16, first: u16, objects: u32, next: &[u16]) -> Scdkg {
    assert_eq!(next.len(), usize::from(class_count));
    let table =
        ClassTable::from_names((1..=class_count).map(|m| format!("class{m:03}"))).unwrap();
    let point = |v: f64| Density1d::new(vec![v, v + 1e-9], vec![1.0]).unwrap();
    let geometry: Vec<ClassGeometry> = (1..=class_count)
        .map(|m| {
            let (aspect, scale, (cx, cy)) = chain_attrs(m);
            ClassGeometry {
                aspect_ratio: point(aspect),
                scale: point(scale),
                location: Density2d::new(
                    vec![cx, cx + 1e-9],
                    vec![cy, cy + 1e-9],
                    vec![1.0],
                )
                .unwrap(),
            }
        })
        .collect();
    let prior = Categorical::new(
        table.ids().collect(),
        (1..=class_count)
            .map(|m| if m == first { 1.0 } else { 0.0 })
            .collect(),
    )
    .unwrap();
    let rows = next
        .iter()
        .map(|&succ| {
            let mut row = vec![0.0; usize::from(class_count)];
            row[usize::from(succ) - 1] = 1.0;
            row
        })
        .collect();
    Scdkg::from_parts(
        table,
        prior,
        point(f64::from(objects)),
        geometry.clone(),
        geometry[0].clone(),
        InterdepMatrix::from_rows(rows).unwrap(),
        FitConfig::default(),
        "chain-fixture".into(),
    )
    .unwrap()
}

/// A layout whose boxes are pairwise disjoint with at least a one-pixel gap,
/// so rendering and decoding are exactly invertible. Boxes sit inside the
/// cells of a grid; classes are drawn uniformly. Deterministic in `seed`.
pub fn non_overlapping_layout(seed: u64, class_count: u16, image_size: (u32, u32)) -> Layout {
    let mut rng = rng_from_seed(seed);
    let (w_img, h_img) = (f64::from(image_size.0), f64::from(image_size.1));
    let grid = 5usize;
    let cell_w = w_img / grid as f64;
    let cell_h = h_img / grid as f64;

    let mut cells: Vec<(usize, usize)> = (0..grid)
        .flat_map(|gy| (0..grid).map(move |gx| (gx, gy)))
        .collect();
    // Partial Fisher-Yates: the first `n` entries become the chosen cells.
    let n = rng.random_range(2..=cells.len());
    for i in 0..n {
        let j = rng.random_range(i..cells.len());
        cells.swap(i, j);
    }

    let objects = cells[..n]
        .iter()
        .map(|&(gx, gy)| {
            let class_id = ClassId::new(rng.random_range(1..=class_count)).unwrap();
            // Inset 2 px from the cell border; >= 3 px sides so rounding
            // never produces adjacency across cells.
            let max_w = cell_w - 4.0;
            let max_h = cell_h - 4.0;
            let w = 3.0 + rng.random::<f64>() * (max_w - 3.0);
            let h = 3.0 + rng.random::<f64>() * (max_h - 3.0);
            let x0 = gx as f64 * cell_w + 2.0 + rng.random::<f64>() * (max_w - w);
            let y0 = gy as f64 * cell_h + 2.0 + rng.random::<f64>() * (max_h - h);
            let bbox = BBox::new(x0, y0, x0 + w, y0 + h).unwrap();
            let (cx, cy) = bbox.center();
            LayoutObject {
                class_id,
                class_name: format!("class{:03}", class_id.get()),
                aspect_ratio: w / h,
                scale: (w * h).sqrt() / w_img,
                center: (cx / w_img, cy / h_img),
                bbox_px: bbox,
            }
        })
        .collect();

    Layout {
        image_size,
        objects,
        seed,
        scdkg_digest: "fixture".to_string(),
        class_count,
    }
}
