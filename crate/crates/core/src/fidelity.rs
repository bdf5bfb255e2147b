//! Distribution-distance validation of sampled layout populations against
//! the graph they were sampled from, plus factor ablations.
//!
//! Every distance is a total variation distance computed on the graph's own
//! bins, so the numbers are exact given the layouts (no internal sampling).
//! Ablations replace a factor with its uninformed baseline: pooled geometry
//! for an attribute, or class-prior rows for the interdependency matrix.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::class::ClassId;
use crate::density::{tv_distance, Density1d};
use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::scdkg::{ClassGeometry, InterdepMatrix, Scdkg};

/// Minimum population size accepted by [`evaluate_fidelity`].
pub const MIN_LAYOUTS: usize = 100;

/// Geometry distances for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeomTv {
    pub tv_aspect: f64,
    pub tv_scale: f64,
    pub tv_location: f64,
    pub samples: usize,
}

/// Distribution distances between a layout population and a graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityReport {
    /// First-object class frequencies vs the class prior.
    pub tv_class: f64,
    /// Layout sizes vs the count prior discretized the way sampling
    /// discretizes it (round to nearest, clamp to >= 1).
    pub tv_count: f64,
    /// Per-class attribute distances, for classes that appeared.
    pub per_class_geom: BTreeMap<u16, GeomTv>,
    /// Image-level co-occurrence rows vs the fitted interdependency rows,
    /// both Laplace-smoothed and row-normalized, averaged over rows.
    pub cooccurrence_tv: f64,
    pub n_layouts: usize,
}

impl FidelityReport {
    fn geom_axis(&self, pick: impl Fn(&GeomTv) -> f64) -> f64 {
        if self.per_class_geom.is_empty() {
            return 1.0;
        }
        self.per_class_geom.values().map(pick).sum::<f64>() / self.per_class_geom.len() as f64
    }

    /// Mean per-class aspect-ratio distance.
    pub fn axis_aspect(&self) -> f64 {
        self.geom_axis(|g| g.tv_aspect)
    }

    pub fn axis_scale(&self) -> f64 {
        self.geom_axis(|g| g.tv_scale)
    }

    pub fn axis_location(&self) -> f64 {
        self.geom_axis(|g| g.tv_location)
    }

    pub fn axis_interdep(&self) -> f64 {
        self.cooccurrence_tv
    }

    /// Sum over the four factor axes; the comparison number for ablations.
    pub fn summed_tv(&self) -> f64 {
        self.axis_aspect() + self.axis_scale() + self.axis_location() + self.axis_interdep()
    }
}

/// Compare a layout population against `g`.
pub fn evaluate_fidelity(g: &Scdkg, layouts: &[Layout]) -> Result<FidelityReport> {
    if layouts.len() < MIN_LAYOUTS {
        return Err(Error::InvalidInput(format!(
            "fidelity evaluation needs at least {MIN_LAYOUTS} layouts, got {}",
            layouts.len()
        )));
    }

    let firsts: Vec<ClassId> = layouts
        .iter()
        .filter_map(|l| l.objects.first().map(|o| o.class_id))
        .collect();
    let tv_class = g.class_prior().tv_to_labels(&firsts);

    let tv_count = count_tv(g.count_prior(), layouts);

    let mut aspects: BTreeMap<u16, Vec<f64>> = BTreeMap::new();
    let mut scales: BTreeMap<u16, Vec<f64>> = BTreeMap::new();
    let mut centers: BTreeMap<u16, Vec<(f64, f64)>> = BTreeMap::new();
    for layout in layouts {
        for o in &layout.objects {
            let key = o.class_id.get();
            aspects.entry(key).or_default().push(o.aspect_ratio);
            scales.entry(key).or_default().push(o.scale);
            centers.entry(key).or_default().push(o.center);
        }
    }
    let mut per_class_geom = BTreeMap::new();
    for (key, class_aspects) in &aspects {
        let id = ClassId::new(*key)?;
        if *key > g.class_count() {
            return Err(Error::InvalidInput(format!(
                "layouts reference class {key}, but the graph has {} classes",
                g.class_count()
            )));
        }
        let geom = g.geometry(id);
        per_class_geom.insert(
            *key,
            GeomTv {
                tv_aspect: geom.aspect_ratio.tv_to_samples(class_aspects),
                tv_scale: geom.scale.tv_to_samples(&scales[key]),
                tv_location: geom.location.tv_to_points(&centers[key]),
                samples: class_aspects.len(),
            },
        );
    }

    let cooccurrence_tv = cooccurrence_tv(g, layouts);

    Ok(FidelityReport {
        tv_class,
        tv_count,
        per_class_geom,
        cooccurrence_tv,
        n_layouts: layouts.len(),
    })
}

/// TV between observed layout sizes and the count prior pushed through the
/// sampler's discretization (round, clamp to >= 1).
fn count_tv(prior: &Density1d, layouts: &[Layout]) -> f64 {
    let (lo, hi) = prior.support();
    let mut reference: BTreeMap<i64, f64> = BTreeMap::new();
    for k in (lo.floor() as i64 - 1)..=(hi.ceil() as i64 + 1) {
        let mass = prior.mass_between(k as f64 - 0.5, k as f64 + 0.5);
        if mass > 0.0 {
            *reference.entry(k.max(1)).or_insert(0.0) += mass;
        }
    }
    let mut observed: BTreeMap<i64, f64> = BTreeMap::new();
    let share = 1.0 / layouts.len() as f64;
    for layout in layouts {
        *observed.entry(layout.objects.len() as i64).or_insert(0.0) += share;
    }
    let keys: BTreeSet<i64> = reference.keys().chain(observed.keys()).copied().collect();
    0.5 * keys
        .iter()
        .map(|k| {
            (reference.get(k).copied().unwrap_or(0.0) - observed.get(k).copied().unwrap_or(0.0))
                .abs()
        })
        .sum::<f64>()
}

/// Image-level co-occurrence of the layouts, estimated exactly like the
/// graph fit (diagonal needs two instances, Laplace 1 per cell, rows
/// normalized), compared row-by-row against the fitted matrix.
fn cooccurrence_tv(g: &Scdkg, layouts: &[Layout]) -> f64 {
    let m = usize::from(g.class_count());
    let mut counts = vec![0u64; m * m];
    for layout in layouts {
        let mut per_class = vec![0u64; m];
        for o in &layout.objects {
            per_class[o.class_id.index()] += 1;
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
    let fitted = g.interdep().to_rows();
    let mut total = 0.0;
    for a in 0..m {
        let row: Vec<f64> = (0..m).map(|b| (counts[a * m + b] + 1) as f64).collect();
        let sum: f64 = row.iter().sum();
        let row: Vec<f64> = row.into_iter().map(|c| c / sum).collect();
        total += tv_distance(&row, &fitted[a]);
    }
    total / m as f64
}

/// A graph factor that an ablation can disable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum AblationFactor {
    AspectRatio,
    Scale,
    Location,
    Interdep,
}

impl AblationFactor {
    pub const ALL: [AblationFactor; 4] = [
        AblationFactor::AspectRatio,
        AblationFactor::Scale,
        AblationFactor::Location,
        AblationFactor::Interdep,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AblationFactor::AspectRatio => "aspect",
            AblationFactor::Scale => "scale",
            AblationFactor::Location => "location",
            AblationFactor::Interdep => "p_id",
        }
    }
}

impl std::str::FromStr for AblationFactor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "aspect" | "aspect_ratio" | "aspect-ratio" => Ok(AblationFactor::AspectRatio),
            "scale" => Ok(AblationFactor::Scale),
            "location" => Ok(AblationFactor::Location),
            "p_id" | "pid" | "interdep" => Ok(AblationFactor::Interdep),
            other => Err(Error::InvalidInput(format!(
                "unknown ablation factor {other:?} (expected aspect, scale, location, or p_id)"
            ))),
        }
    }
}

/// Return a copy of `g` with each listed factor replaced by its uninformed
/// baseline: pooled geometry for attribute factors, independent class-prior
/// draws for the interdependency matrix. An empty set returns an identical
/// graph.
pub fn ablate(g: &Scdkg, factors: &BTreeSet<AblationFactor>) -> Result<Scdkg> {
    let mut out = g.clone();
    let geometry_factors: Vec<AblationFactor> = factors
        .iter()
        .copied()
        .filter(|f| *f != AblationFactor::Interdep)
        .collect();
    if !geometry_factors.is_empty() {
        let pooled = g.geometry_all();
        let replace = |geom: &ClassGeometry| -> ClassGeometry {
            let mut g2 = geom.clone();
            for f in &geometry_factors {
                match f {
                    AblationFactor::AspectRatio => g2.aspect_ratio = pooled.aspect_ratio.clone(),
                    AblationFactor::Scale => g2.scale = pooled.scale.clone(),
                    AblationFactor::Location => g2.location = pooled.location.clone(),
                    AblationFactor::Interdep => {}
                }
            }
            g2
        };
        let geometry = g
            .class_table()
            .ids()
            .map(|id| replace(g.geometry(id)))
            .collect();
        out = out.with_geometry(geometry, pooled.clone())?;
    }
    if factors.contains(&AblationFactor::Interdep) {
        let m = usize::from(g.class_count());
        let prior_row: Vec<f64> = (1..=m as u16)
            .map(|id| g.class_prior().prob_of(ClassId::new(id).unwrap()))
            .collect();
        let rows = vec![prior_row; m];
        out = out.with_interdep(InterdepMatrix::from_rows(rows)?)?;
    }
    Ok(out)
}

/// One row of the ablation grid: the factors that stay enabled.
#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub row: usize,
    pub enabled: Vec<AblationFactor>,
}

impl AblationRow {
    pub fn disabled(&self) -> BTreeSet<AblationFactor> {
        AblationFactor::ALL
            .into_iter()
            .filter(|f| !self.enabled.contains(f))
            .collect()
    }
}

/// The nine-variant grid: nothing, the interdependency matrix alone, each
/// attribute combination on top of it, then the full graph.
pub fn ablation_grid() -> Vec<AblationRow> {
    use AblationFactor::*;
    let rows: [&[AblationFactor]; 9] = [
        &[],
        &[Interdep],
        &[AspectRatio, Interdep],
        &[Scale, Interdep],
        &[Location, Interdep],
        &[AspectRatio, Scale, Interdep],
        &[Scale, Location, Interdep],
        &[AspectRatio, Location, Interdep],
        &[AspectRatio, Scale, Location, Interdep],
    ];
    rows.iter()
        .enumerate()
        .map(|(i, enabled)| AblationRow {
            row: i + 1,
            enabled: enabled.to_vec(),
        })
        .collect()
}

/// Plain-text grid of per-axis distances, one line per variant.
pub fn render_grid_table(results: &[(AblationRow, FidelityReport)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<3} {:<8} {:<7} {:<10} {:<6} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "#", "aspect", "scale", "location", "p_id", "tv_asp", "tv_scl", "tv_loc", "tv_pid", "sum"
    );
    for (row, report) in results {
        let mark = |f: AblationFactor| if row.enabled.contains(&f) { "x" } else { "" };
        let _ = writeln!(
            out,
            "{:<3} {:<8} {:<7} {:<10} {:<6} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            row.row,
            mark(AblationFactor::AspectRatio),
            mark(AblationFactor::Scale),
            mark(AblationFactor::Location),
            mark(AblationFactor::Interdep),
            report.axis_aspect(),
            report.axis_scale(),
            report.axis_location(),
            report.axis_interdep(),
            report.summed_tv(),
        );
    }
    out
}
