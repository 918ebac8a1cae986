//! Attributed temporal graph patterns and corpus persistence.
//!
//! A [`GraphPattern`] is a small time-layered DAG: vertices are spatial
//! classes at a given time index, edges connect consecutive layers and carry
//! the evolution of a class between two samples. A [`Corpus`] groups patterns
//! that share one feature dimension.

use std::collections::{HashMap, HashSet};
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

const SYMMETRY_TOLERANCE: f64 = 1e-12;
const CONDITION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

impl GaussianParams {
    pub fn new(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Self {
        Self { mean, covariance }
    }

    /// Zero-mean Gaussian with identity covariance.
    pub fn standard(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            covariance: identity(d),
        }
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub(crate) fn covariance_matrix(&self) -> DMatrix<f64> {
        let d = self.dimension();
        DMatrix::from_fn(d, d, |i, j| self.covariance[i][j])
    }
}

pub(crate) fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: String,
    pub time_index: u32,
    pub pixel_weight: f64,
    #[serde(flatten)]
    pub gaussian: GaussianParams,
    pub divergence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub time_delay: f64,
    pub pixel_flow: f64,
    pub gaussian_evolution: f64,
    pub mutual_information: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPattern {
    pub id: String,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    /// Free-form provenance. Never read by any algorithm.
    #[serde(default)]
    pub metadata: Option<serde_json::Value>,
}

impl GraphPattern {
    pub fn vertex(&self, id: &str) -> Option<&Vertex> {
        self.vertices.iter().find(|v| v.id == id)
    }

    /// Number of time layers (max time index + 1).
    pub fn layer_count(&self) -> u32 {
        self.vertices
            .iter()
            .map(|v| v.time_index + 1)
            .max()
            .unwrap_or(0)
    }

    /// Vertex indices sorted by time layer, stable within a layer.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.vertices.len()).collect();
        order.sort_by_key(|&i| self.vertices[i].time_index);
        order
    }
}

/// Which invariant a [`ValidationIssue`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationCode {
    ZeroDimension,
    EmptyGraph,
    DuplicateVertexId,
    DuplicateEdge,
    NonContiguousLayers,
    NegativePixelWeight,
    NegativeDivergence,
    NonFiniteValue,
    DimensionMismatch,
    CovarianceNotSquare,
    CovarianceAsymmetric,
    NotPositiveDefinite,
    UnknownEndpoint,
    NonConsecutiveLayers,
    NonPositiveTimeDelay,
    NegativePixelFlow,
    NegativeGaussianEvolution,
    NegativeMutualInformation,
    DuplicateGraphId,
}

impl ValidationCode {
    pub fn describe(self) -> &'static str {
        match self {
            Self::ZeroDimension => "feature dimension must be at least 1",
            Self::EmptyGraph => "graph has no vertices",
            Self::DuplicateVertexId => "duplicate vertex id",
            Self::DuplicateEdge => "duplicate edge",
            Self::NonContiguousLayers => "time indices do not form a contiguous range from 0",
            Self::NegativePixelWeight => "negative pixel weight",
            Self::NegativeDivergence => "negative divergence",
            Self::NonFiniteValue => "non-finite value",
            Self::DimensionMismatch => "dimension mismatch",
            Self::CovarianceNotSquare => "covariance is not a d x d matrix",
            Self::CovarianceAsymmetric => "covariance is not symmetric",
            Self::NotPositiveDefinite => "not positive definite",
            Self::UnknownEndpoint => "edge endpoint does not exist",
            Self::NonConsecutiveLayers => "non-consecutive layers",
            Self::NonPositiveTimeDelay => "time delay must be positive",
            Self::NegativePixelFlow => "negative pixel flow",
            Self::NegativeGaussianEvolution => "negative gaussian evolution",
            Self::NegativeMutualInformation => "negative mutual information",
            Self::DuplicateGraphId => "duplicate graph id",
        }
    }
}

/// Where in a graph an issue was found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Location {
    Graph,
    Vertex { id: String },
    Edge { from: String, to: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub graph_id: String,
    pub location: Location,
    pub code: ValidationCode,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "graph '{}'", self.graph_id)?;
        match &self.location {
            Location::Graph => {}
            Location::Vertex { id } => write!(f, ", vertex '{id}'")?,
            Location::Edge { from, to } => write!(f, ", edge '{from}'->'{to}'")?,
        }
        write!(f, ": {}", self.code.describe())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, code: ValidationCode) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }

    fn push(&mut self, graph_id: &str, location: Location, code: ValidationCode) {
        self.issues.push(ValidationIssue {
            graph_id: graph_id.to_owned(),
            location,
            code,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Checks every graph, vertex, edge and Gaussian invariant. Never aborts early.
pub fn validate_graph(g: &GraphPattern, d: usize) -> ValidationReport {
    let mut report = ValidationReport::default();
    let gid = g.id.as_str();
    if d == 0 {
        report.push(gid, Location::Graph, ValidationCode::ZeroDimension);
    }
    if g.vertices.is_empty() {
        report.push(gid, Location::Graph, ValidationCode::EmptyGraph);
    }

    let mut by_id: HashMap<&str, &Vertex> = HashMap::new();
    for v in &g.vertices {
        let loc = || Location::Vertex { id: v.id.clone() };
        if by_id.insert(v.id.as_str(), v).is_some() {
            report.push(gid, loc(), ValidationCode::DuplicateVertexId);
        }
        if !v.pixel_weight.is_finite() || !v.divergence.is_finite() {
            report.push(gid, loc(), ValidationCode::NonFiniteValue);
        }
        if v.pixel_weight < 0.0 {
            report.push(gid, loc(), ValidationCode::NegativePixelWeight);
        }
        if v.divergence < 0.0 {
            report.push(gid, loc(), ValidationCode::NegativeDivergence);
        }
        for code in gaussian_issues(&v.gaussian, d) {
            report.push(gid, loc(), code);
        }
    }

    let mut layers: Vec<u32> = g.vertices.iter().map(|v| v.time_index).collect();
    layers.sort_unstable();
    layers.dedup();
    if layers.iter().enumerate().any(|(i, &t)| t as usize != i) {
        report.push(gid, Location::Graph, ValidationCode::NonContiguousLayers);
    }

    let mut seen_edges = HashSet::new();
    for e in &g.edges {
        let loc = || Location::Edge {
            from: e.from.clone(),
            to: e.to.clone(),
        };
        if !seen_edges.insert((e.from.as_str(), e.to.as_str())) {
            report.push(gid, loc(), ValidationCode::DuplicateEdge);
        }
        match (by_id.get(e.from.as_str()), by_id.get(e.to.as_str())) {
            (Some(a), Some(b)) => {
                if b.time_index != a.time_index + 1 {
                    report.push(gid, loc(), ValidationCode::NonConsecutiveLayers);
                }
            }
            _ => report.push(gid, loc(), ValidationCode::UnknownEndpoint),
        }
        let values = [
            e.time_delay,
            e.pixel_flow,
            e.gaussian_evolution,
            e.mutual_information,
        ];
        if values.iter().any(|x| !x.is_finite()) {
            report.push(gid, loc(), ValidationCode::NonFiniteValue);
        }
        if !(e.time_delay > 0.0) {
            report.push(gid, loc(), ValidationCode::NonPositiveTimeDelay);
        }
        if e.pixel_flow < 0.0 {
            report.push(gid, loc(), ValidationCode::NegativePixelFlow);
        }
        if e.gaussian_evolution < 0.0 {
            report.push(gid, loc(), ValidationCode::NegativeGaussianEvolution);
        }
        if e.mutual_information < 0.0 {
            report.push(gid, loc(), ValidationCode::NegativeMutualInformation);
        }
    }
    report
}

fn gaussian_issues(p: &GaussianParams, d: usize) -> Vec<ValidationCode> {
    let mut codes = Vec::new();
    if p.mean.len() != d {
        codes.push(ValidationCode::DimensionMismatch);
    }
    let n = p.mean.len();
    if p.covariance.len() != n || p.covariance.iter().any(|row| row.len() != n) {
        codes.push(ValidationCode::CovarianceNotSquare);
        return codes;
    }
    if p.mean.iter().chain(p.covariance.iter().flatten()).any(|x| !x.is_finite()) {
        codes.push(ValidationCode::NonFiniteValue);
        return codes;
    }
    if n == 0 {
        return codes;
    }
    let asymmetric = (0..n).any(|i| {
        (0..i).any(|j| (p.covariance[i][j] - p.covariance[j][i]).abs() > SYMMETRY_TOLERANCE)
    });
    if asymmetric {
        codes.push(ValidationCode::CovarianceAsymmetric);
        return codes;
    }
    let eigen = SymmetricEigen::new(p.covariance_matrix());
    let smallest = eigen.eigenvalues.min();
    let largest = eigen.eigenvalues.max();
    if !(largest > 0.0) || !(smallest > CONDITION_TOLERANCE * largest) {
        codes.push(ValidationCode::NotPositiveDefinite);
    }
    codes
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("invalid corpus: {report}")]
    Validation { report: ValidationReport },
    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl CorpusError {
    /// Ids of the graphs named in a validation failure.
    pub fn graph_ids(&self) -> Vec<&str> {
        match self {
            Self::Validation { report } => {
                let mut ids: Vec<&str> = report.issues.iter().map(|i| i.graph_id.as_str()).collect();
                ids.dedup();
                ids
            }
            _ => Vec::new(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusFile {
    feature_dimension: usize,
    graphs: Vec<GraphPattern>,
}

/// A validated set of graph patterns sharing one feature dimension.
///
/// Graphs keep their file order; lookups by id go through an index.
#[derive(Debug, Clone)]
pub struct Corpus {
    feature_dimension: usize,
    graphs: Vec<GraphPattern>,
    index: HashMap<String, usize>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.feature_dimension == other.feature_dimension && self.graphs == other.graphs
    }
}

impl Corpus {
    /// Builds a corpus, validating every graph and the id uniqueness constraint.
    pub fn new(feature_dimension: usize, graphs: Vec<GraphPattern>) -> Result<Self, CorpusError> {
        let mut report = ValidationReport::default();
        if feature_dimension == 0 {
            report.push("", Location::Graph, ValidationCode::ZeroDimension);
        }
        let mut index = HashMap::with_capacity(graphs.len());
        for (i, g) in graphs.iter().enumerate() {
            if index.insert(g.id.clone(), i).is_some() {
                report.push(&g.id, Location::Graph, ValidationCode::DuplicateGraphId);
            }
            report.issues.extend(validate_graph(g, feature_dimension).issues);
        }
        if !report.is_empty() {
            return Err(CorpusError::Validation { report });
        }
        Ok(Self {
            feature_dimension,
            graphs,
            index,
        })
    }

    pub fn feature_dimension(&self) -> usize {
        self.feature_dimension
    }

    pub fn graphs(&self) -> &[GraphPattern] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&GraphPattern> {
        self.index.get(id).map(|&i| &self.graphs[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Content address: hex SHA-256 prefix of the canonical serialization.
    pub fn content_id(&self) -> String {
        let bytes = save_corpus(self);
        let digest = Sha256::digest(&bytes);
        hex::encode(&digest[..8])
    }
}

/// Parses and validates a corpus file. Either the whole corpus or an error.
pub fn load_corpus(bytes: &[u8]) -> Result<Corpus, CorpusError> {
    let file: CorpusFile = serde_json::from_slice(bytes).map_err(|e| CorpusError::Parse {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    Corpus::new(file.feature_dimension, file.graphs)
}

/// Canonical pretty-printed JSON; identical corpora give identical bytes.
pub fn save_corpus(c: &Corpus) -> Vec<u8> {
    #[derive(Serialize)]
    struct CorpusRef<'a> {
        feature_dimension: usize,
        graphs: &'a [GraphPattern],
    }
    let mut out = serde_json::to_vec_pretty(&CorpusRef {
        feature_dimension: c.feature_dimension,
        graphs: &c.graphs,
    })
    .expect("corpus values are finite and serializable");
    out.push(b'\n');
    out
}

/// Converts serde_json's 1-based line/column to a byte offset.
pub(crate) fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut current = 1;
    let mut line_start = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if current == line {
            break;
        }
        if b == b'\n' {
            current += 1;
            line_start = i + 1;
        }
    }
    (line_start + column.saturating_sub(1)).min(bytes.len())
}
