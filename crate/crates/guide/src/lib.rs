//! The book's chapters as doc-test modules, so `cargo test` runs every code
//! listing in `book/src` against the current library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/graphs.md")]
pub mod graphs {}
#[doc = include_str!("../../../book/src/landmarks.md")]
pub mod landmarks {}
#[doc = include_str!("../../../book/src/factorization.md")]
pub mod factorization {}
#[doc = include_str!("../../../book/src/biclustering.md")]
pub mod biclustering {}
#[doc = include_str!("../../../book/src/selective.md")]
pub mod selective {}
#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}
#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
