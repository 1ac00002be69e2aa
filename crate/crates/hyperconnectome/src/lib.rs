//! Connectomes and hyper-connectomes from multivariate time series.
//!
//! A connectome is a graph over measured variables (brain regions in the
//! motivating application) whose edge weights are Pearson correlations. A
//! hyper-connectome generalizes the edges to d-tuples of variables weighted
//! by total correlation, estimated from finite samples with epsilon-ball
//! probabilities. Pairwise-independent variables can carry strong
//! higher-order dependence, so hypergraph features can separate populations
//! that correlation graphs cannot; the [`simulation`] module generates such
//! a cohort and the [`learn`] module runs the graph-vs-hypergraph
//! classification comparison end to end.
//!
//! Modules:
//! - [`core`]: time-series and correlation matrices, compact symmetric
//!   tensors, combinatorial tuple ranking.
//! - [`estimators`]: Pearson, plug-in entropies, total correlation (direct
//!   and KL forms), the epsilon-ball tensor sweep, and testing oracles.
//! - [`hypergraph`]: hyper-connectome assembly, thresholding, pairwise
//!   reduction, document serialization.
//! - [`simulation`]: parity-construction cohorts with exact population
//!   oracles.
//! - [`learn`]: feature vectorization, a deterministic linear SVM, metrics,
//!   trial orchestration, two-sample t-tests.
//! - [`cli`]: command-line drivers and file formats.
//!
//! Everything is deterministic: a single seed fixes datasets, splits, and
//! models, and tensor sweeps are bit-identical at any worker count.

pub mod cli;
pub mod core;
pub mod error;
pub mod estimators;
pub mod hypergraph;
pub mod learn;
pub mod seeding;
pub mod simulation;

pub use error::{Error, Result};
