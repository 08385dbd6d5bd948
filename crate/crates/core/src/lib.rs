//! Graph anomaly detection with label-guided graph mixing and multi-level
//! contrastive learning.
//!
//! The pipeline injects synthetic anomalies into an attributed graph,
//! samples ego-nets around every node, blends revealed anomaly attributes
//! into abnormal ego-nets, trains a one-layer GCN contrastively at node and
//! subgraph level, and ranks nodes by multi-round score statistics.

pub mod encoder;
pub mod error;
pub mod evaluator;
pub mod graph;
pub mod injector;
pub mod linalg;
pub mod mixer;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod scorer;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::AttributedGraph;
pub use pipeline::{run, sweep, RunConfig};

/// Runs `f` on a dedicated pool of `threads` workers (0 = rayon default).
/// Results never depend on the thread count; one thread is the strict
/// sequential mode.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::State(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
