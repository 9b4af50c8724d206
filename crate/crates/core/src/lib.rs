pub mod bench;
pub mod biclustering;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod factorization;
pub mod graph;
pub mod io;
pub mod landmarks;
pub mod metrics;
pub mod partition;
pub mod pipeline;
pub mod seed;
pub mod sparse;
pub mod synthgen;

pub use error::{Error, Result};
pub use graph::{build_pmi, degree_vector, inject_noise, DynamicGraph, PmiMatrix, Snapshot};
pub use partition::{Partition, BACKGROUND};
