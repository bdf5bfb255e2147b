//! Shared state builders for the pipeline benchmarks.

use isim_forge::layout::{sample_layout, Layout, SamplerConfig};
use isim_forge::scdkg::Scdkg;

pub use isim_forge_testkit::{fit_structured_graph, structured_dataset};

/// A graph plus one layout sampled from it, the common bench input.
pub fn bench_graph_and_layout() -> (Scdkg, Layout) {
    let graph = fit_structured_graph(500, 1);
    let layout = sample_layout(&graph, (800, 800), 7, &SamplerConfig::default()).unwrap();
    (graph, layout)
}
