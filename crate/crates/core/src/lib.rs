//! Layout-synthesis toolkit for object-detection data generation.
//!
//! The pipeline has five stages, one module each plus shared plumbing:
//!
//! 1. [`dataset`] ingests detection annotations (VOC XML or this crate's own
//!    JSON label manifests) into a neutral [`dataset::DatasetSummary`].
//! 2. [`scdkg`] fits the spatial-cross dependency knowledge graph: a class
//!    prior, a per-image count prior, per-class geometry densities, and a
//!    row-stochastic class interdependency matrix.
//! 3. [`layout`] samples multi-object scene layouts from a fitted graph by
//!    chaining class draws through the interdependency matrix.
//! 4. [`isim`] rasterizes layouts into iso-spacing instance maps (each class
//!    painted with a unique, evenly spaced gray value) and decodes them back.
//! 5. [`sodi`] renders the structured object distribution instruction prompt
//!    for a layout, and [`bundle`] exports the (ISIM, SODI, labels) triple
//!    with a batch manifest plus a consistency verifier.
//!
//! [`fidelity`] closes the loop: it measures how faithfully sampled layout
//! populations reproduce the fitted graph, with factor ablations.

pub mod bundle;
pub mod canon;
pub mod class;
pub mod dataset;
pub mod density;
pub mod error;
pub mod fidelity;
pub mod isim;
pub mod layout;
pub mod scdkg;
pub mod seed;
pub mod sodi;

pub use class::{ClassId, ClassTable};
pub use dataset::{DatasetSummary, InstanceAnnotation};
pub use density::{Categorical, Density1d, Density2d};
pub use error::{Error, Result};
pub use isim::IsimRaster;
pub use layout::{Layout, LayoutObject, SamplerConfig};
pub use scdkg::{ClassGeometry, FitConfig, Scdkg};
pub use sodi::SodiPrompt;
