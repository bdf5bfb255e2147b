//! Empirical probability densities with exact inverse-CDF sampling.
//!
//! Histograms rather than kernel estimators: normalization is exact, sampling
//! is exact, and the fitted parameters serialize as plain edge/probability
//! vectors. Zero-count bins receive a small additive floor so no bin is
//! strictly unreachable after a fit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::class::ClassId;
use crate::error::{Error, Result};
use crate::seed::Rng64;

/// Fraction of total sample mass granted to each empty bin during a fit.
pub const SMOOTHING_ALPHA: f64 = 1e-6;

/// Absolute widening applied above the sample maximum for data-driven
/// supports, so the maximum falls inside the last half-open bin.
pub const SUPPORT_WIDEN: f64 = 1e-9;

const MASS_TOLERANCE: f64 = 1e-9;

fn validate_edges(edges: &[f64], what: &str) -> Result<()> {
    if edges.len() < 2 {
        return Err(Error::InvalidDensity(format!("{what}: needs at least one bin")));
    }
    if edges.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidDensity(format!("{what}: non-finite bin edge")));
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidDensity(format!(
            "{what}: bin edges must be strictly ascending"
        )));
    }
    Ok(())
}

fn validate_probs(probs: &[f64], what: &str) -> Result<()> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidDensity(format!(
            "{what}: probabilities must be finite and nonnegative"
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvalidDensity(format!(
            "{what}: probability mass sums to {total}, not 1"
        )));
    }
    Ok(())
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cdf.push(acc);
    }
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf
}

/// Inverse-CDF bin lookup for u in [0, 1).
fn pick_bin(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Index of the bin containing x, with out-of-support values clamped into
/// the nearest end bin. Used both by fitting and by distribution-distance
/// evaluation so the two always agree.
fn bin_of(edges: &[f64], x: f64) -> usize {
    let bins = edges.len() - 1;
    if x < edges[0] {
        return 0;
    }
    if x >= edges[bins] {
        return bins - 1;
    }
    (edges.partition_point(|&e| e <= x) - 1).min(bins - 1)
}

fn histogram(samples: impl Iterator<Item = f64>, edges: &[f64]) -> Vec<f64> {
    let mut counts = vec![0.0f64; edges.len() - 1];
    for x in samples {
        counts[bin_of(edges, x)] += 1.0;
    }
    counts
}

/// Add the empty-bin floor and normalize counts into probabilities.
fn smooth_and_normalize(mut counts: Vec<f64>) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    let floor = SMOOTHING_ALPHA * total;
    for c in counts.iter_mut() {
        if *c == 0.0 {
            *c = floor;
        }
    }
    let new_total: f64 = counts.iter().sum();
    for c in counts.iter_mut() {
        *c /= new_total;
    }
    counts
}

fn resolve_support(samples: &[f64], support: Option<(f64, f64)>, what: &str) -> Result<(f64, f64)> {
    let (lo, hi) = match support {
        Some((lo, hi)) => (lo, hi),
        None => {
            let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi + SUPPORT_WIDEN)
        }
    };
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidDensity(format!("{what}: non-finite support")));
    }
    if lo >= hi {
        return Err(Error::InvalidDensity(format!(
            "{what}: empty support [{lo}, {hi})"
        )));
    }
    Ok((lo, hi))
}

fn linspace(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut edges = Vec::with_capacity(bins + 1);
    for i in 0..=bins {
        let t = i as f64 / bins as f64;
        edges.push(lo + t * (hi - lo));
    }
    // Guard against rounding on the closing edge.
    edges[bins] = hi;
    edges
}

/// One-dimensional histogram density over a half-open support [lo, hi).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Density1dRepr", into = "Density1dRepr")]
pub struct Density1d {
    bin_edges: Vec<f64>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Serialize, Deserialize, Clone)]
struct Density1dRepr {
    bin_edges: Vec<f64>,
    probs: Vec<f64>,
}

impl TryFrom<Density1dRepr> for Density1d {
    type Error = Error;
    fn try_from(r: Density1dRepr) -> Result<Self> {
        Density1d::new(r.bin_edges, r.probs)
    }
}

impl From<Density1d> for Density1dRepr {
    fn from(d: Density1d) -> Self {
        Density1dRepr {
            bin_edges: d.bin_edges,
            probs: d.probs,
        }
    }
}

impl Density1d {
    pub fn new(bin_edges: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        validate_edges(&bin_edges, "1d density")?;
        if probs.len() + 1 != bin_edges.len() {
            return Err(Error::InvalidDensity(format!(
                "1d density: {} probs for {} edges",
                probs.len(),
                bin_edges.len()
            )));
        }
        validate_probs(&probs, "1d density")?;
        let cdf = cumulative(&probs);
        Ok(Density1d {
            bin_edges,
            probs,
            cdf,
        })
    }

    /// Fit a histogram over `bins` equal-width bins.
    ///
    /// With no explicit support, the support is [min, max + 1e-9) of the
    /// samples. Samples outside an explicit support are clamped into the
    /// end bins.
    pub fn fit(samples: &[f64], bins: usize, support: Option<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidDensity("cannot fit empty density".into()));
        }
        if bins == 0 {
            return Err(Error::InvalidDensity("cannot fit with zero bins".into()));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidDensity("non-finite sample".into()));
        }
        let (lo, hi) = resolve_support(samples, support, "1d fit")?;
        let edges = linspace(lo, hi, bins);
        let counts = histogram(samples.iter().copied(), &edges);
        Self::new(edges, smooth_and_normalize(counts))
    }

    /// Draw one value: inverse CDF picks the bin, a second uniform jitters
    /// within it. Returned values lie in [lo, hi).
    pub fn sample(&self, rng: &mut Rng64) -> f64 {
        let bin = pick_bin(&self.cdf, rng.random::<f64>());
        let lo = self.bin_edges[bin];
        let hi = self.bin_edges[bin + 1];
        lo + rng.random::<f64>() * (hi - lo)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.bin_edges[0], *self.bin_edges.last().unwrap())
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn bins(&self) -> usize {
        self.probs.len()
    }

    /// Bin index for a value, clamping out-of-support values into end bins.
    pub fn bin_of(&self, x: f64) -> usize {
        bin_of(&self.bin_edges, x)
    }

    /// Probability mass on the interval [a, b), integrating the histogram
    /// with uniform mass within each bin.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.probs
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(p, e)| {
                let overlap = (b.min(e[1]) - a.max(e[0])).max(0.0);
                p * overlap / (e[1] - e[0])
            })
            .sum()
    }

    /// Mean of the density (uniform mass within each bin).
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(p, e)| p * 0.5 * (e[0] + e[1]))
            .sum()
    }

    /// Total variation distance between this density and the empirical
    /// distribution of `samples` binned on this density's edges.
    pub fn tv_to_samples(&self, samples: &[f64]) -> f64 {
        if samples.is_empty() {
            return 1.0;
        }
        let mut counts = vec![0.0f64; self.bins()];
        for &x in samples {
            counts[self.bin_of(x)] += 1.0;
        }
        let n = samples.len() as f64;
        0.5 * self
            .probs
            .iter()
            .zip(&counts)
            .map(|(p, c)| (p - c / n).abs())
            .sum::<f64>()
    }
}

/// Two-dimensional grid histogram over [x_lo, x_hi) x [y_lo, y_hi).
/// Probabilities are stored row-major: index = ix * y_bins + iy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Density2dRepr", into = "Density2dRepr")]
pub struct Density2d {
    x_edges: Vec<f64>,
    y_edges: Vec<f64>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Serialize, Deserialize, Clone)]
struct Density2dRepr {
    x_edges: Vec<f64>,
    y_edges: Vec<f64>,
    /// One row per x bin, each row holding y-bin probabilities.
    probs: Vec<Vec<f64>>,
}

impl TryFrom<Density2dRepr> for Density2d {
    type Error = Error;
    fn try_from(r: Density2dRepr) -> Result<Self> {
        let y_bins = r.y_edges.len().saturating_sub(1);
        if r.probs.len() + 1 != r.x_edges.len()
            || r.probs.iter().any(|row| row.len() != y_bins)
        {
            return Err(Error::InvalidDensity("2d density: grid shape mismatch".into()));
        }
        Density2d::new(r.x_edges, r.y_edges, r.probs.into_iter().flatten().collect())
    }
}

impl From<Density2d> for Density2dRepr {
    fn from(d: Density2d) -> Self {
        let y_bins = d.y_bins();
        let probs = d.probs.chunks(y_bins).map(<[f64]>::to_vec).collect();
        Density2dRepr {
            x_edges: d.x_edges,
            y_edges: d.y_edges,
            probs,
        }
    }
}

impl Density2d {
    pub fn new(x_edges: Vec<f64>, y_edges: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        validate_edges(&x_edges, "2d density x")?;
        validate_edges(&y_edges, "2d density y")?;
        let cells = (x_edges.len() - 1) * (y_edges.len() - 1);
        if probs.len() != cells {
            return Err(Error::InvalidDensity(format!(
                "2d density: {} probs for {} cells",
                probs.len(),
                cells
            )));
        }
        validate_probs(&probs, "2d density")?;
        let cdf = cumulative(&probs);
        Ok(Density2d {
            x_edges,
            y_edges,
            probs,
            cdf,
        })
    }

    pub fn fit(
        points: &[(f64, f64)],
        bins: (usize, usize),
        support: Option<((f64, f64), (f64, f64))>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidDensity("cannot fit empty density".into()));
        }
        let (x_bins, y_bins) = bins;
        if x_bins == 0 || y_bins == 0 {
            return Err(Error::InvalidDensity("cannot fit with zero bins".into()));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidDensity("non-finite sample".into()));
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let (x_lo, x_hi) = resolve_support(&xs, support.map(|s| s.0), "2d fit x")?;
        let (y_lo, y_hi) = resolve_support(&ys, support.map(|s| s.1), "2d fit y")?;
        let x_edges = linspace(x_lo, x_hi, x_bins);
        let y_edges = linspace(y_lo, y_hi, y_bins);
        let mut counts = vec![0.0f64; x_bins * y_bins];
        for &(x, y) in points {
            counts[bin_of(&x_edges, x) * y_bins + bin_of(&y_edges, y)] += 1.0;
        }
        Self::new(x_edges, y_edges, smooth_and_normalize(counts))
    }

    /// Draw one point: inverse CDF over the flattened grid, then uniform
    /// jitter within the chosen cell (one cell draw, two jitter draws).
    pub fn sample(&self, rng: &mut Rng64) -> (f64, f64) {
        let cell = pick_bin(&self.cdf, rng.random::<f64>());
        let y_bins = self.y_bins();
        let (ix, iy) = (cell / y_bins, cell % y_bins);
        let x = self.x_edges[ix]
            + rng.random::<f64>() * (self.x_edges[ix + 1] - self.x_edges[ix]);
        let y = self.y_edges[iy]
            + rng.random::<f64>() * (self.y_edges[iy + 1] - self.y_edges[iy]);
        (x, y)
    }

    pub fn x_bins(&self) -> usize {
        self.x_edges.len() - 1
    }

    pub fn y_bins(&self) -> usize {
        self.y_edges.len() - 1
    }

    pub fn x_edges(&self) -> &[f64] {
        &self.x_edges
    }

    pub fn y_edges(&self) -> &[f64] {
        &self.y_edges
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn support(&self) -> ((f64, f64), (f64, f64)) {
        (
            (self.x_edges[0], *self.x_edges.last().unwrap()),
            (self.y_edges[0], *self.y_edges.last().unwrap()),
        )
    }

    pub fn cell_of(&self, x: f64, y: f64) -> usize {
        bin_of(&self.x_edges, x) * self.y_bins() + bin_of(&self.y_edges, y)
    }

    /// Marginal density along x (sums cell mass over y).
    pub fn marginal_x(&self) -> Result<Density1d> {
        let y_bins = self.y_bins();
        let probs = self
            .probs
            .chunks(y_bins)
            .map(|row| row.iter().sum())
            .collect();
        Density1d::new(self.x_edges.clone(), probs)
    }

    /// Total variation distance to the empirical cell distribution of `points`.
    pub fn tv_to_points(&self, points: &[(f64, f64)]) -> f64 {
        if points.is_empty() {
            return 1.0;
        }
        let mut counts = vec![0.0f64; self.probs.len()];
        for &(x, y) in points {
            counts[self.cell_of(x, y)] += 1.0;
        }
        let n = points.len() as f64;
        0.5 * self
            .probs
            .iter()
            .zip(&counts)
            .map(|(p, c)| (p - c / n).abs())
            .sum::<f64>()
    }
}

/// Discrete distribution over class ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CategoricalRepr", into = "CategoricalRepr")]
pub struct Categorical {
    labels: Vec<ClassId>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Serialize, Deserialize, Clone)]
struct CategoricalRepr {
    labels: Vec<ClassId>,
    probs: Vec<f64>,
}

impl TryFrom<CategoricalRepr> for Categorical {
    type Error = Error;
    fn try_from(r: CategoricalRepr) -> Result<Self> {
        Categorical::new(r.labels, r.probs)
    }
}

impl From<Categorical> for CategoricalRepr {
    fn from(c: Categorical) -> Self {
        CategoricalRepr {
            labels: c.labels,
            probs: c.probs,
        }
    }
}

impl Categorical {
    pub fn new(labels: Vec<ClassId>, probs: Vec<f64>) -> Result<Self> {
        if labels.len() != probs.len() {
            return Err(Error::InvalidDensity(format!(
                "categorical: {} labels for {} probs",
                labels.len(),
                probs.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::InvalidDensity("categorical: no labels".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        if !labels.iter().all(|l| seen.insert(*l)) {
            return Err(Error::InvalidDensity("categorical: duplicate label".into()));
        }
        validate_probs(&probs, "categorical")?;
        let cdf = cumulative(&probs);
        Ok(Categorical { labels, probs, cdf })
    }

    /// Frequencies of observed labels.
    pub fn fit<I: IntoIterator<Item = ClassId>>(observations: I) -> Result<Self> {
        let mut counts: std::collections::BTreeMap<ClassId, f64> = Default::default();
        let mut total = 0.0;
        for label in observations {
            *counts.entry(label).or_insert(0.0) += 1.0;
            total += 1.0;
        }
        if counts.is_empty() {
            return Err(Error::InvalidDensity("cannot fit empty categorical".into()));
        }
        let (labels, probs) = counts
            .into_iter()
            .map(|(l, c)| (l, c / total))
            .unzip();
        Self::new(labels, probs)
    }

    pub fn sample(&self, rng: &mut Rng64) -> ClassId {
        self.labels[pick_bin(&self.cdf, rng.random::<f64>())]
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob_of(&self, label: ClassId) -> f64 {
        self.labels
            .iter()
            .position(|l| *l == label)
            .map_or(0.0, |i| self.probs[i])
    }

    /// TV distance to empirical label frequencies.
    pub fn tv_to_labels(&self, observed: &[ClassId]) -> f64 {
        if observed.is_empty() {
            return 1.0;
        }
        let mut counts: std::collections::BTreeMap<ClassId, f64> = Default::default();
        for &l in observed {
            *counts.entry(l).or_insert(0.0) += 1.0;
        }
        let n = observed.len() as f64;
        let mut dist = 0.0;
        for (label, p) in self.labels.iter().zip(&self.probs) {
            let freq = counts.remove(label).unwrap_or(0.0) / n;
            dist += (p - freq).abs();
        }
        // Labels observed but absent from this distribution.
        dist += counts.values().sum::<f64>() / n;
        0.5 * dist
    }
}

/// Total variation distance between two aligned probability vectors.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
