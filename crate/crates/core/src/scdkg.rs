//! The spatial-cross dependency knowledge graph: a class prior, a per-image
//! instance-count prior, per-class geometry densities, and a row-stochastic
//! interdependency matrix giving the next-class distribution conditioned on
//! the previous class.
//!
//! Graphs are immutable once fitted and serialize to a canonical JSON file
//! with an embedded content checksum, so a graph digest pins the provenance
//! of every layout sampled from it.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::canon;
use crate::class::{ClassId, ClassTable};
use crate::dataset::DatasetSummary;
use crate::density::{Categorical, Density1d, Density2d};
use crate::error::{Error, Result};
use crate::seed::Rng64;

pub const SCDKG_FORMAT_VERSION: &str = "isim-forge-scdkg/1";

/// Per-class spatial geometry: aspect ratio (w/h), scale
/// (sqrt(area)/image width), and normalized center location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGeometry {
    pub aspect_ratio: Density1d,
    pub scale: Density1d,
    pub location: Density2d,
}

impl ClassGeometry {
    fn validate(&self, what: &str) -> Result<()> {
        let (aspect_lo, _) = self.aspect_ratio.support();
        if aspect_lo <= 0.0 {
            return Err(Error::InvalidGraph(format!(
                "{what}: aspect ratio support must be positive"
            )));
        }
        let (scale_lo, scale_hi) = self.scale.support();
        if scale_lo <= 0.0 || scale_hi > 1.0 {
            return Err(Error::InvalidGraph(format!(
                "{what}: scale support must lie in (0, 1], got ({scale_lo}, {scale_hi})"
            )));
        }
        let ((x_lo, x_hi), (y_lo, y_hi)) = self.location.support();
        if x_lo < 0.0 || y_lo < 0.0 || x_hi > 1.0 || y_hi > 1.0 {
            return Err(Error::InvalidGraph(format!(
                "{what}: location support must lie in the unit square"
            )));
        }
        Ok(())
    }
}

/// Histogram resolution and fallback thresholds for fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Bins for 1d attribute densities.
    pub bins_1d: usize,
    /// Bins per axis for the 2d location density.
    pub bins_2d: (usize, usize),
    /// Classes with fewer annotations than this fall back to the pooled
    /// geometry fitted over all classes.
    pub min_samples: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            bins_1d: 64,
            bins_2d: (32, 32),
            min_samples: 20,
        }
    }
}

/// Row-stochastic class interdependency matrix. Row A holds the
/// distribution of the next class given that the previous class was A.
#[derive(Debug, Clone, PartialEq)]
pub struct InterdepMatrix {
    dim: usize,
    rows: Vec<Categorical>,
}

impl InterdepMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidGraph("interdependency matrix is empty".into()));
        }
        let labels: Vec<ClassId> = (1..=dim as u16).map(|m| ClassId::new(m).unwrap()).collect();
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                if row.len() != dim {
                    return Err(Error::InvalidGraph(format!(
                        "interdependency row {} has {} entries for {dim} classes",
                        i + 1,
                        row.len()
                    )));
                }
                Categorical::new(labels.clone(), row).map_err(|e| {
                    Error::InvalidGraph(format!("interdependency row {} not stochastic: {e}", i + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(InterdepMatrix { dim, rows })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Next-class distribution given the previous class.
    pub fn row(&self, prev: ClassId) -> &Categorical {
        &self.rows[prev.index()]
    }

    pub fn sample_next(&self, prev: ClassId, rng: &mut Rng64) -> ClassId {
        self.row(prev).sample(rng)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.probs().to_vec()).collect()
    }
}

/// The fitted knowledge graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Scdkg {
    class_table: ClassTable,
    /// Class occurrence prior over all annotations.
    class_prior: Categorical,
    /// Per-image instance-count density over unit-width integer bins.
    count_prior: Density1d,
    /// Geometry per class id, indexed by `ClassId::index`.
    geometry: Vec<ClassGeometry>,
    /// Pooled geometry over every annotation, the fallback for rare classes.
    geometry_all: ClassGeometry,
    interdep: InterdepMatrix,
    fit_config: FitConfig,
    source_digest: String,
    /// Content digest, fixed at construction; equals the file checksum.
    digest: String,
}

impl Scdkg {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        class_table: ClassTable,
        class_prior: Categorical,
        count_prior: Density1d,
        geometry: Vec<ClassGeometry>,
        geometry_all: ClassGeometry,
        interdep: InterdepMatrix,
        fit_config: FitConfig,
        source_digest: String,
    ) -> Result<Self> {
        let m = usize::from(class_table.len());
        if geometry.len() != m {
            return Err(Error::InvalidGraph(format!(
                "{} geometry entries for {m} classes",
                geometry.len()
            )));
        }
        if interdep.dim() != m {
            return Err(Error::InvalidGraph(format!(
                "interdependency matrix is {}x{} for {m} classes",
                interdep.dim(),
                interdep.dim()
            )));
        }
        for label in class_prior.labels() {
            if label.index() >= m {
                return Err(Error::InvalidGraph(format!(
                    "class prior references unknown class {label}"
                )));
            }
        }
        geometry_all.validate("pooled geometry")?;
        for (i, g) in geometry.iter().enumerate() {
            g.validate(&format!("class {} geometry", i + 1))?;
        }
        let mut graph = Scdkg {
            class_table,
            class_prior,
            count_prior,
            geometry,
            geometry_all,
            interdep,
            fit_config,
            source_digest,
            digest: String::new(),
        };
        graph.digest = canon::digest_of(&ScdkgFileBody::from_graph(&graph))?;
        Ok(graph)
    }

    pub fn class_table(&self) -> &ClassTable {
        &self.class_table
    }

    pub fn class_count(&self) -> u16 {
        self.class_table.len()
    }

    pub fn class_prior(&self) -> &Categorical {
        &self.class_prior
    }

    pub fn count_prior(&self) -> &Density1d {
        &self.count_prior
    }

    pub fn geometry(&self, class: ClassId) -> &ClassGeometry {
        &self.geometry[class.index()]
    }

    pub fn geometry_all(&self) -> &ClassGeometry {
        &self.geometry_all
    }

    pub fn interdep(&self) -> &InterdepMatrix {
        &self.interdep
    }

    pub fn fit_config(&self) -> &FitConfig {
        &self.fit_config
    }

    pub fn source_digest(&self) -> &str {
        &self.source_digest
    }

    /// Content digest: SHA-256 of the canonical file form minus its checksum.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// Replace per-class and pooled geometry (used by ablations).
    pub(crate) fn with_geometry(
        &self,
        geometry: Vec<ClassGeometry>,
        geometry_all: ClassGeometry,
    ) -> Result<Self> {
        Self::from_parts(
            self.class_table.clone(),
            self.class_prior.clone(),
            self.count_prior.clone(),
            geometry,
            geometry_all,
            self.interdep.clone(),
            self.fit_config.clone(),
            self.source_digest.clone(),
        )
    }

    /// Replace the interdependency matrix (used by ablations).
    pub(crate) fn with_interdep(&self, interdep: InterdepMatrix) -> Result<Self> {
        Self::from_parts(
            self.class_table.clone(),
            self.class_prior.clone(),
            self.count_prior.clone(),
            self.geometry.clone(),
            self.geometry_all.clone(),
            interdep,
            self.fit_config.clone(),
            self.source_digest.clone(),
        )
    }
}

/// Fit the full graph from a dataset.
///
/// - class prior: class frequency over all annotations;
/// - count prior: per-image instance counts on unit-width integer bins;
/// - geometry: per-class aspect/scale/location histograms, falling back to
///   the pooled geometry for classes with fewer than `min_samples` boxes;
/// - interdependency: image-level co-occurrence counts (the diagonal needs
///   two instances of the class in one image), Laplace-smoothed by 1 per
///   cell and row-normalized.
pub fn fit_scdkg(ds: &DatasetSummary, cfg: &FitConfig) -> Result<Scdkg> {
    if ds.annotation_count() == 0 {
        return Err(Error::InvalidInput("cannot fit an empty dataset".into()));
    }
    let table = ds.class_table.clone();
    let m = usize::from(table.len());

    let ids: Vec<ClassId> = ds
        .annotations()
        .map(|a| {
            table
                .id_of(&a.class_name)
                .ok_or_else(|| Error::ClassTable(format!("unknown class {:?}", a.class_name)))
        })
        .collect::<Result<_>>()?;
    let class_prior = Categorical::fit(ids.iter().copied())?;

    let counts: Vec<f64> = ds.images.iter().map(|i| i.annotations.len() as f64).collect();
    let count_prior = fit_count_density(&counts)?;

    // Attribute samples per class, plus pooled.
    let mut aspects: Vec<Vec<f64>> = vec![Vec::new(); m];
    let mut scales: Vec<Vec<f64>> = vec![Vec::new(); m];
    let mut centers: Vec<Vec<(f64, f64)>> = vec![Vec::new(); m];
    for img in &ds.images {
        let (w, h) = (f64::from(img.width_px), f64::from(img.height_px));
        for a in &img.annotations {
            let id = table.id_of(&a.class_name).unwrap();
            let bw = a.bbox.width();
            let bh = a.bbox.height();
            aspects[id.index()].push(bw / bh);
            scales[id.index()].push(((bw * bh).sqrt() / w).min(1.0));
            let (cx, cy) = a.bbox.center();
            centers[id.index()].push((cx / w, cy / h));
        }
    }
    let pooled_aspect: Vec<f64> = aspects.iter().flatten().copied().collect();
    let pooled_scale: Vec<f64> = scales.iter().flatten().copied().collect();
    let pooled_center: Vec<(f64, f64)> = centers.iter().flatten().copied().collect();
    let geometry_all = fit_geometry(&pooled_aspect, &pooled_scale, &pooled_center, cfg)?;

    let mut geometry = Vec::with_capacity(m);
    for i in 0..m {
        if aspects[i].len() < cfg.min_samples {
            geometry.push(geometry_all.clone());
        } else {
            geometry.push(fit_geometry(&aspects[i], &scales[i], &centers[i], cfg)?);
        }
    }

    let interdep = fit_interdep(ds, &table)?;
    let source_digest = ds.digest()?;
    Scdkg::from_parts(
        table,
        class_prior,
        count_prior,
        geometry,
        geometry_all,
        interdep,
        cfg.clone(),
        source_digest,
    )
}

/// Unit-width integer bins spanning the observed count range.
fn fit_count_density(counts: &[f64]) -> Result<Density1d> {
    let lo = counts.iter().copied().fold(f64::INFINITY, f64::min).floor();
    let hi = counts.iter().copied().fold(f64::NEG_INFINITY, f64::max).floor() + 1.0;
    let bins = (hi - lo) as usize;
    Density1d::fit(counts, bins.max(1), Some((lo, hi)))
}

fn fit_geometry(
    aspects: &[f64],
    scales: &[f64],
    centers: &[(f64, f64)],
    cfg: &FitConfig,
) -> Result<ClassGeometry> {
    // Scale support is capped at 1 so samples stay in (0, 1]; location is
    // fitted on the full unit square.
    let scale_lo = scales.iter().copied().fold(f64::INFINITY, f64::min);
    let scale_hi = (scales.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        + crate::density::SUPPORT_WIDEN)
        .min(1.0);
    let scale_lo = if scale_lo >= scale_hi {
        scale_hi - crate::density::SUPPORT_WIDEN
    } else {
        scale_lo
    };
    Ok(ClassGeometry {
        aspect_ratio: Density1d::fit(aspects, cfg.bins_1d, None)?,
        scale: Density1d::fit(scales, cfg.bins_1d, Some((scale_lo, scale_hi)))?,
        location: Density2d::fit(centers, cfg.bins_2d, Some(((0.0, 1.0), (0.0, 1.0))))?,
    })
}

fn fit_interdep(ds: &DatasetSummary, table: &ClassTable) -> Result<InterdepMatrix> {
    let m = usize::from(table.len());
    let mut counts = vec![0u64; m * m];
    for img in &ds.images {
        let mut per_class = vec![0u64; m];
        for a in &img.annotations {
            per_class[table.id_of(&a.class_name).unwrap().index()] += 1;
        }
        for a in 0..m {
            if per_class[a] == 0 {
                continue;
            }
            for b in 0..m {
                let present = if a == b {
                    per_class[a] >= 2
                } else {
                    per_class[b] >= 1
                };
                if present {
                    counts[a * m + b] += 1;
                }
            }
        }
    }
    let rows = (0..m)
        .map(|a| {
            let row: Vec<f64> = (0..m).map(|b| (counts[a * m + b] + 1) as f64).collect();
            let total: f64 = row.iter().sum();
            row.into_iter().map(|c| c / total).collect()
        })
        .collect();
    InterdepMatrix::from_rows(rows)
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

/// Everything in the graph file except the checksum; the checksum is the
/// digest of this body's canonical JSON.
#[derive(Serialize, Deserialize)]
struct ScdkgFileBody {
    format_version: String,
    class_table: BTreeMap<String, u16>,
    p_ic: Categorical,
    p_in: Density1d,
    p_id: Vec<Vec<f64>>,
    geometry: BTreeMap<String, ClassGeometry>,
    geometry_all: ClassGeometry,
    fit_config: FitConfigRepr,
    source_digest: String,
}

#[derive(Serialize, Deserialize)]
struct FitConfigRepr {
    bins_1d: usize,
    bins_2d: [usize; 2],
    min_samples: usize,
}

#[derive(Serialize, Deserialize)]
struct ScdkgFile {
    checksum: String,
    #[serde(flatten)]
    body: ScdkgFileBody,
}

impl ScdkgFileBody {
    fn from_graph(g: &Scdkg) -> Self {
        ScdkgFileBody {
            format_version: SCDKG_FORMAT_VERSION.to_string(),
            class_table: g.class_table.to_mapping(),
            p_ic: g.class_prior.clone(),
            p_in: g.count_prior.clone(),
            p_id: g.interdep.to_rows(),
            geometry: g
                .class_table
                .ids()
                .map(|id| (id.get().to_string(), g.geometry[id.index()].clone()))
                .collect(),
            geometry_all: g.geometry_all.clone(),
            fit_config: FitConfigRepr {
                bins_1d: g.fit_config.bins_1d,
                bins_2d: [g.fit_config.bins_2d.0, g.fit_config.bins_2d.1],
                min_samples: g.fit_config.min_samples,
            },
            source_digest: g.source_digest.clone(),
        }
    }

    fn into_graph(self) -> Result<Scdkg> {
        if self.format_version != SCDKG_FORMAT_VERSION {
            return Err(Error::InvalidGraph(format!(
                "format version {:?} (expected {SCDKG_FORMAT_VERSION:?})",
                self.format_version
            )));
        }
        let table = ClassTable::from_mapping(&self.class_table)?;
        let m = usize::from(table.len());
        let mut geometry = Vec::with_capacity(m);
        for id in table.ids() {
            let g = self.geometry.get(&id.get().to_string()).ok_or_else(|| {
                Error::InvalidGraph(format!("geometry missing for class {id}"))
            })?;
            geometry.push(g.clone());
        }
        Scdkg::from_parts(
            table,
            self.p_ic,
            self.p_in,
            geometry,
            self.geometry_all,
            InterdepMatrix::from_rows(self.p_id)?,
            FitConfig {
                bins_1d: self.fit_config.bins_1d,
                bins_2d: (self.fit_config.bins_2d[0], self.fit_config.bins_2d[1]),
                min_samples: self.fit_config.min_samples,
            },
            self.source_digest,
        )
    }
}

/// Write the graph as canonical JSON with an embedded checksum.
pub fn save_scdkg(g: &Scdkg, path: &Path) -> Result<()> {
    let body = ScdkgFileBody::from_graph(g);
    let checksum = g.digest().to_string();
    canon::write_canonical_file(path, &ScdkgFile { checksum, body })
}

/// Load and fully validate a graph file (format version, checksum, and
/// every distribution invariant).
pub fn load_scdkg(path: &Path) -> Result<Scdkg> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ScdkgFile = parse_validated(&text, path)?;
    let expect = canon::digest_of(&file.body)?;
    if file.checksum != expect {
        return Err(Error::InvalidGraph(format!(
            "checksum mismatch in {}: file says {}, content hashes to {expect}",
            path.display(),
            file.checksum
        )));
    }
    file.body.into_graph()
}

fn parse_validated<'de, T: Deserialize<'de>>(text: &'de str, path: &Path) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        Error::schema(path, format!("/{}", e.path()), e.inner().to_string())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{BBox, ImageRecord, InstanceAnnotation};
    use crate::seed::rng_from_seed;

    fn image(id: &str, boxes: &[(&str, f64, f64, f64, f64)]) -> ImageRecord {
        ImageRecord {
            image_id: id.to_string(),
            width_px: 800,
            height_px: 800,
            annotations: boxes
                .iter()
                .map(|(name, x0, y0, x1, y1)| InstanceAnnotation {
                    image_id: id.to_string(),
                    class_name: name.to_string(),
                    bbox: BBox::new(*x0, *y0, *x1, *y1).unwrap(),
                })
                .collect(),
        }
    }

    fn dataset(images: Vec<ImageRecord>) -> DatasetSummary {
        let names = images
            .iter()
            .flat_map(|i| i.annotations.iter().map(|a| a.class_name.clone()))
            .collect::<Vec<_>>();
        DatasetSummary {
            images,
            class_table: ClassTable::from_names(names).unwrap(),
        }
    }

    fn cooccurring_ships_and_harbors() -> DatasetSummary {
        let mut images = Vec::new();
        for i in 0..100 {
            images.push(image(
                &format!("pair{i:03}"),
                &[
                    ("ship", 10.0, 10.0, 40.0, 30.0),
                    ("harbor", 100.0, 100.0, 300.0, 220.0),
                ],
            ));
        }
        for i in 0..50 {
            images.push(image(
                &format!("solo{i:03}"),
                &[("vehicle", 50.0, 50.0, 70.0, 60.0)],
            ));
        }
        dataset(images)
    }

    #[test]
    fn cooccurrence_dominates_interdep_rows() {
        let g = fit_scdkg(&cooccurring_ships_and_harbors(), &FitConfig::default()).unwrap();
        let ship = g.class_table().id_of("ship").unwrap();
        let harbor = g.class_table().id_of("harbor").unwrap();
        let vehicle = g.class_table().id_of("vehicle").unwrap();
        let row = g.interdep().row(ship);
        assert!(row.prob_of(harbor) > 0.9, "harbor {}", row.prob_of(harbor));
        assert!(row.prob_of(vehicle) < 0.02);
        let row = g.interdep().row(harbor);
        assert!(row.prob_of(ship) > 0.9);
    }

    #[test]
    fn point_geometry_recovers_aspect_and_scale() {
        // All boxes 20x10 on 800 px images: aspect 2, scale sqrt(200)/800.
        let images = (0..30)
            .map(|i| image(&format!("im{i:02}"), &[("ship", 100.0, 100.0, 120.0, 110.0)]))
            .collect();
        let g = fit_scdkg(&dataset(images), &FitConfig::default()).unwrap();
        let ship = g.class_table().id_of("ship").unwrap();
        let geom = g.geometry(ship);
        let mut rng = rng_from_seed(1);
        let expected_scale = 200f64.sqrt() / 800.0;
        for _ in 0..100 {
            let a = geom.aspect_ratio.sample(&mut rng);
            assert!((a - 2.0).abs() < 1e-6, "aspect {a}");
            let s = geom.scale.sample(&mut rng);
            assert!((s - expected_scale).abs() < 1e-6, "scale {s}");
        }
    }

    #[test]
    fn rare_class_falls_back_to_pooled_geometry() {
        let mut images: Vec<ImageRecord> = (0..30)
            .map(|i| image(&format!("im{i:02}"), &[("ship", 100.0, 100.0, 150.0, 120.0)]))
            .collect();
        images.push(image("rare", &[("dam", 10.0, 10.0, 400.0, 380.0)]));
        let g = fit_scdkg(&dataset(images), &FitConfig::default()).unwrap();
        let dam = g.class_table().id_of("dam").unwrap();
        assert_eq!(g.geometry(dam), g.geometry_all());
        let ship = g.class_table().id_of("ship").unwrap();
        assert_ne!(g.geometry(ship), g.geometry_all());
    }

    #[test]
    fn image_order_does_not_change_the_graph() {
        let ds = cooccurring_ships_and_harbors();
        let mut shuffled = ds.clone();
        shuffled.images.reverse();
        let a = fit_scdkg(&ds, &FitConfig::default()).unwrap();
        let b = fit_scdkg(&shuffled, &FitConfig::default()).unwrap();
        // Only the image list order changed, which the digest sees but the
        // fitted distributions must not.
        assert_eq!(a.class_prior(), b.class_prior());
        assert_eq!(a.count_prior(), b.count_prior());
        assert_eq!(a.interdep(), b.interdep());
        assert_eq!(a.geometry_all(), b.geometry_all());
    }

    #[test]
    fn save_load_round_trip() {
        let g = fit_scdkg(&cooccurring_ships_and_harbors(), &FitConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.json");
        save_scdkg(&g, &path).unwrap();
        let back = load_scdkg(&path).unwrap();
        assert_eq!(g, back);
        assert_eq!(g.digest(), back.digest());
        // Saving the loaded copy reproduces the bytes.
        let path2 = dir.path().join("graph2.json");
        save_scdkg(&back, &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn non_stochastic_row_rejected_on_load() {
        let g = fit_scdkg(&cooccurring_ships_and_harbors(), &FitConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.json");
        save_scdkg(&g, &path).unwrap();
        let mut file: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        file["p_id"][0] = serde_json::json!([0.25, 0.25, 0.0]);
        // Re-checksum so the stochasticity check itself is what trips.
        let mut body = file.as_object().unwrap().clone();
        body.remove("checksum");
        let checksum =
            canon::digest_of(&serde_json::Value::Object(body.clone())).unwrap();
        file["checksum"] = serde_json::Value::String(checksum);
        std::fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
        let err = load_scdkg(&path).unwrap_err().to_string();
        assert!(err.contains("not stochastic"), "{err}");
    }

    #[test]
    fn checksum_mismatch_rejected() {
        let g = fit_scdkg(&cooccurring_ships_and_harbors(), &FitConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.json");
        save_scdkg(&g, &path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replacen("\"source_digest\": \"", "\"source_digest\": \"0", 1);
        std::fs::write(&path, text).unwrap();
        let err = load_scdkg(&path).unwrap_err().to_string();
        assert!(err.contains("checksum"), "{err}");
    }

    #[test]
    fn minimal_single_class_graph_loads_and_samples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mini.json");
        let body = serde_json::json!({
            "format_version": SCDKG_FORMAT_VERSION,
            "class_table": {"ship": 1},
            "p_ic": {"labels": [1], "probs": [1.0]},
            "p_in": {"bin_edges": [2.0, 3.0], "probs": [1.0]},
            "p_id": [[1.0]],
            "geometry": {"1": {
                "aspect_ratio": {"bin_edges": [2.0, 2.000000001], "probs": [1.0]},
                "scale": {"bin_edges": [0.05, 0.050000001], "probs": [1.0]},
                "location": {"x_edges": [0.0, 1.0], "y_edges": [0.0, 1.0], "probs": [[1.0]]}
            }},
            "geometry_all": {
                "aspect_ratio": {"bin_edges": [2.0, 2.000000001], "probs": [1.0]},
                "scale": {"bin_edges": [0.05, 0.050000001], "probs": [1.0]},
                "location": {"x_edges": [0.0, 1.0], "y_edges": [0.0, 1.0], "probs": [[1.0]]}
            },
            "fit_config": {"bins_1d": 1, "bins_2d": [1, 1], "min_samples": 0},
            "source_digest": "handwritten"
        });
        let checksum = canon::digest_of(&body).unwrap();
        let mut file = body;
        file["checksum"] = serde_json::Value::String(checksum);
        std::fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
        let g = load_scdkg(&path).unwrap();
        assert_eq!(g.class_count(), 1);
        let mut rng = rng_from_seed(9);
        let id = g.class_prior().sample(&mut rng);
        assert_eq!(id.get(), 1);
        let n = g.count_prior().sample(&mut rng);
        assert!((2.0..3.0).contains(&n));
    }
}
