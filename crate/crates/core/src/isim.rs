//! Iso-spacing instance maps: single-channel rasters where each class
//! occupies regions of a unique, evenly spaced gray value.
//!
//! Class m of M paints gray `(255 * m) / M` (integer division), so spacing
//! is at least 1 for M <= 255 and value 0 is reserved for background. The
//! decoder inverts the encoding into 4-connected regions for verification.

use std::collections::BTreeMap;

use crate::class::ClassId;
use crate::error::{Error, Result};
use crate::layout::Layout;

/// Gray value for class `m` of `M`: floor(255 m / M), exact in integers.
pub fn gray_value(m: ClassId, class_count: u16) -> Result<u8> {
    if class_count == 0 || m.get() > class_count {
        return Err(Error::GrayValue {
            class_id: m.get(),
            class_count,
        });
    }
    Ok(((255u32 * u32::from(m.get())) / u32::from(class_count)) as u8)
}

/// Gray table for all classes 1..=M.
pub fn gray_table(class_count: u16) -> Result<BTreeMap<ClassId, u8>> {
    (1..=class_count)
        .map(|m| {
            let id = ClassId::new(m)?;
            Ok((id, gray_value(id, class_count)?))
        })
        .collect()
}

/// Integer pixel rectangle [x_min, x_max) x [y_min, y_max).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PixelRect {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl PixelRect {
    /// Rasterize a float box by rounding each edge, clamped to the frame.
    pub fn from_bbox(b: &crate::dataset::BBox, width: u32, height: u32) -> PixelRect {
        PixelRect {
            x_min: (b.x_min.round().max(0.0) as u32).min(width),
            y_min: (b.y_min.round().max(0.0) as u32).min(height),
            x_max: (b.x_max.round().max(0.0) as u32).min(width),
            y_max: (b.y_max.round().max(0.0) as u32).min(height),
        }
    }

    pub fn width(&self) -> u32 {
        self.x_max.saturating_sub(self.x_min)
    }

    pub fn height(&self) -> u32 {
        self.y_max.saturating_sub(self.y_min)
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }
}

/// 8-bit single-channel instance map.
#[derive(Debug, Clone, PartialEq)]
pub struct IsimRaster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
    gray_table: BTreeMap<ClassId, u8>,
}

impl IsimRaster {
    pub fn new(width: u32, height: u32, class_count: u16) -> Result<Self> {
        Ok(IsimRaster {
            width,
            height,
            pixels: vec![0; width as usize * height as usize],
            gray_table: gray_table(class_count)?,
        })
    }

    /// Wrap raw pixels (used when reading a PNG back); values are checked
    /// against the gray table by `decode`, not here.
    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>, class_count: u16) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::RasterFormat(format!(
                "{} bytes for {width}x{height}",
                pixels.len()
            )));
        }
        Ok(IsimRaster {
            width,
            height,
            pixels,
            gray_table: gray_table(class_count)?,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn gray_table(&self) -> &BTreeMap<ClassId, u8> {
        &self.gray_table
    }

    pub fn pixel(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    fn fill(&mut self, rect: PixelRect, value: u8) {
        let w = self.width as usize;
        for y in rect.y_min..rect.y_max {
            let row = y as usize * w;
            self.pixels[row + rect.x_min as usize..row + rect.x_max as usize].fill(value);
        }
    }

    /// Pixels inside `rect` currently equal to `value`.
    pub fn count_value_in(&self, rect: PixelRect, value: u8) -> u64 {
        let w = self.width as usize;
        let mut n = 0;
        for y in rect.y_min..rect.y_max {
            let row = y as usize * w;
            n += self.pixels[row + rect.x_min as usize..row + rect.x_max as usize]
                .iter()
                .filter(|&&p| p == value)
                .count() as u64;
        }
        n
    }
}

/// Rasterize a layout. Background is 0; each object's box is filled with
/// its class gray. Objects paint in descending pixel-area order so smaller
/// objects overwrite larger ones and stay visible.
pub fn render_isim(layout: &Layout) -> Result<IsimRaster> {
    let (width, height) = layout.image_size;
    let mut raster = IsimRaster::new(width, height, layout.class_count)?;
    let mut order: Vec<(PixelRect, u8)> = layout
        .objects
        .iter()
        .map(|o| {
            let rect = PixelRect::from_bbox(&o.bbox_px, width, height);
            Ok((rect, gray_value(o.class_id, layout.class_count)?))
        })
        .collect::<Result<_>>()?;
    order.sort_by_key(|(rect, _)| std::cmp::Reverse(rect.area()));
    for (rect, gray) in order {
        raster.fill(rect, gray);
    }
    Ok(raster)
}

/// One decoded 4-connected region of a single gray value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedRegion {
    pub class_id: ClassId,
    pub pixel_count: u64,
    pub bbox: PixelRect,
}

/// Decode a raster into labeled regions.
///
/// Every nonzero pixel must equal some class gray for `class_count`;
/// offending values are reported collectively. Regions come out in
/// row-major order of their first pixel.
pub fn decode_isim(raster: &IsimRaster, class_count: u16) -> Result<Vec<DecodedRegion>> {
    let table = gray_table(class_count)?;
    let mut class_of = [None::<ClassId>; 256];
    for (id, gray) in &table {
        class_of[*gray as usize] = Some(*id);
    }

    let unknown: std::collections::BTreeSet<u8> = raster
        .pixels
        .iter()
        .copied()
        .filter(|&p| p != 0 && class_of[p as usize].is_none())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownGray {
            values: unknown.into_iter().collect(),
            class_count,
        });
    }

    let (w, h) = (raster.width as usize, raster.height as usize);
    let mut visited = vec![false; w * h];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        let value = raster.pixels[start];
        if value == 0 || visited[start] {
            continue;
        }
        let mut count = 0u64;
        let (mut x_min, mut y_min, mut x_max, mut y_max) = (u32::MAX, u32::MAX, 0u32, 0u32);
        visited[start] = true;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            count += 1;
            let (x, y) = ((idx % w) as u32, (idx / w) as u32);
            x_min = x_min.min(x);
            y_min = y_min.min(y);
            x_max = x_max.max(x + 1);
            y_max = y_max.max(y + 1);
            let mut visit = |n: usize| {
                if !visited[n] && raster.pixels[n] == value {
                    visited[n] = true;
                    stack.push(n);
                }
            };
            if x > 0 {
                visit(idx - 1);
            }
            if (x as usize) + 1 < w {
                visit(idx + 1);
            }
            if y > 0 {
                visit(idx - w);
            }
            if (y as usize) + 1 < h {
                visit(idx + w);
            }
        }
        regions.push(DecodedRegion {
            class_id: class_of[value as usize].unwrap(),
            pixel_count: count,
            bbox: PixelRect {
                x_min,
                y_min,
                x_max,
                y_max,
            },
        });
    }
    Ok(regions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::BBox;
    use crate::layout::{Layout, LayoutObject};

    fn layout_with(
        image_size: (u32, u32),
        class_count: u16,
        boxes: &[(u16, f64, f64, f64, f64)],
    ) -> Layout {
        Layout {
            image_size,
            objects: boxes
                .iter()
                .map(|&(id, x0, y0, x1, y1)| LayoutObject {
                    class_id: ClassId::new(id).unwrap(),
                    class_name: format!("class{id}"),
                    aspect_ratio: 1.0,
                    scale: 0.1,
                    center: (0.5, 0.5),
                    bbox_px: BBox::new(x0, y0, x1, y1).unwrap(),
                })
                .collect(),
            seed: 0,
            scdkg_digest: "test".into(),
            class_count,
        }
    }

    #[test]
    fn gray_examples() {
        let id = |m| ClassId::new(m).unwrap();
        assert_eq!(gray_value(id(1), 20).unwrap(), 12);
        assert_eq!(gray_value(id(20), 20).unwrap(), 255);
        assert_eq!(gray_value(id(255), 255).unwrap(), 255);
        assert_eq!(gray_value(id(1), 255).unwrap(), 1);
        assert_eq!(gray_value(id(14), 20).unwrap(), 178);
    }

    #[test]
    fn gray_rejects_out_of_range() {
        assert!(ClassId::new(0).is_err());
        assert!(gray_value(ClassId::new(21).unwrap(), 20).is_err());
    }

    #[test]
    fn gray_injective_and_monotone_for_every_class_count() {
        for m_total in 1..=255u16 {
            let mut prev = 0u8;
            for m in 1..=m_total {
                let v = gray_value(ClassId::new(m).unwrap(), m_total).unwrap();
                assert!(v > prev, "M={m_total} m={m}: {v} <= {prev}");
                prev = v;
            }
        }
    }

    #[test]
    fn empty_layout_renders_zeros() {
        let layout = layout_with((64, 32), 5, &[]);
        let raster = render_isim(&layout).unwrap();
        assert!(raster.pixels().iter().all(|&p| p == 0));
        assert!(decode_isim(&raster, 5).unwrap().is_empty());
    }

    #[test]
    fn single_box_pixel_count() {
        // Class 14 of 20 paints gray 178 over a 100x50 region.
        let layout = layout_with((800, 800), 20, &[(14, 100.0, 100.0, 200.0, 150.0)]);
        let raster = render_isim(&layout).unwrap();
        let filled = raster.pixels().iter().filter(|&&p| p == 178).count();
        assert_eq!(filled, 100 * 50);
        assert_eq!(raster.pixels().iter().filter(|&&p| p != 0).count(), 5000);
    }

    #[test]
    fn smaller_box_overwrites_larger() {
        let layout = layout_with(
            (100, 100),
            2,
            &[(1, 10.0, 10.0, 90.0, 90.0), (2, 40.0, 40.0, 60.0, 60.0)],
        );
        let raster = render_isim(&layout).unwrap();
        let small_gray = gray_value(ClassId::new(2).unwrap(), 2).unwrap();
        let big_gray = gray_value(ClassId::new(1).unwrap(), 2).unwrap();
        assert_eq!(raster.pixel(50, 50), small_gray);
        assert_eq!(raster.pixel(15, 15), big_gray);
    }

    #[test]
    fn decode_recovers_non_overlapping_boxes() {
        let layout = layout_with(
            (200, 200),
            20,
            &[
                (3, 10.0, 10.0, 50.0, 40.0),
                (7, 100.0, 20.0, 160.0, 90.0),
                (3, 10.0, 120.0, 80.0, 180.0),
            ],
        );
        let raster = render_isim(&layout).unwrap();
        let mut decoded: Vec<(u16, PixelRect)> = decode_isim(&raster, 20)
            .unwrap()
            .into_iter()
            .map(|r| (r.class_id.get(), r.bbox))
            .collect();
        decoded.sort();
        let mut expected: Vec<(u16, PixelRect)> = layout
            .objects
            .iter()
            .map(|o| (o.class_id.get(), PixelRect::from_bbox(&o.bbox_px, 200, 200)))
            .collect();
        expected.sort();
        assert_eq!(decoded, expected);
    }

    #[test]
    fn alien_gray_value_fails_decode() {
        let mut pixels = vec![0u8; 64];
        pixels[10] = 7; // not in the 20-class table
        let raster = IsimRaster::from_pixels(8, 8, pixels, 20).unwrap();
        match decode_isim(&raster, 20) {
            Err(Error::UnknownGray { values, .. }) => assert_eq!(values, vec![7]),
            other => panic!("expected UnknownGray, got {other:?}"),
        }
    }

    #[test]
    fn touching_same_class_boxes_merge() {
        // Documented decode limitation: adjacency within one class merges.
        let layout = layout_with(
            (100, 100),
            4,
            &[(2, 10.0, 10.0, 30.0, 30.0), (2, 30.0, 10.0, 50.0, 30.0)],
        );
        let raster = render_isim(&layout).unwrap();
        let regions = decode_isim(&raster, 4).unwrap();
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].pixel_count, 2 * 20 * 20);
    }
}
