//! Learning user-defined semantics over attributed, time-layered graph
//! patterns from positive and negative examples.
//!
//! - [`graph_model`]: graph patterns, corpora, validation and I/O.
//! - [`distances`]: per-attribute distances and normalization scales.
//! - [`matcher`]: inexact graph matching (branch-and-bound and oracle).
//! - [`learner`]: Dirichlet-multinomial weight learning.
//! - [`semantics`]: likelihoods, posteriors and corpus ranking.
//! - [`synth`]: planted synthetic corpora.
//! - [`session`]: the two-model training session and its snapshot format.

pub mod distances;
pub mod graph_model;
pub mod learner;
pub mod matcher;
pub mod semantics;
pub mod session;
pub mod synth;

pub use distances::{AttributeId, CostVector, ScaleVector, ATTRIBUTE_COUNT};
pub use graph_model::{Corpus, CorpusError, Edge, GaussianParams, GraphPattern, Vertex};
pub use matcher::{CancellationToken, MatchConfig, MatchError, MatchResult, ParameterVector};
