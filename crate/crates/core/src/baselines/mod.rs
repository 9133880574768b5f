//! Comparison defenses: entrywise randomized response, a correlation
//! heuristic, and quantization followed by the game-theoretic mapping.

mod correlation;
mod kmeans;
mod qpm;
mod rr;

pub use correlation::correlation_defend;
pub use kmeans::{quantize_kmeans, quantize_kmeans_traced, Codebook};
pub use qpm::{qpm_defend, qpm_fit, QpmDefense};
pub use rr::{keep_probability, rr_defend, RrConfig};
