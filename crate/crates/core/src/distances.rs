//! Per-attribute distance models and cost normalization.

use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use rayon::prelude::*;

use crate::graph_model::{Corpus, Edge, GaussianParams, GraphPattern, Vertex};
use crate::matcher::{match_with_model, CostModel, MatchConfig, MatchError, ParameterVector};

pub const ATTRIBUTE_COUNT: usize = 7;

/// The seven attribute types. Declaration order is the canonical index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeId {
    PixelWeight,
    Gaussian,
    Divergence,
    TimeDelay,
    PixelFlow,
    GaussianEvolution,
    MutualInformation,
}

impl AttributeId {
    pub const ALL: [AttributeId; ATTRIBUTE_COUNT] = [
        AttributeId::PixelWeight,
        AttributeId::Gaussian,
        AttributeId::Divergence,
        AttributeId::TimeDelay,
        AttributeId::PixelFlow,
        AttributeId::GaussianEvolution,
        AttributeId::MutualInformation,
    ];

    pub const VERTEX: [AttributeId; 3] = [
        AttributeId::PixelWeight,
        AttributeId::Gaussian,
        AttributeId::Divergence,
    ];

    pub const EDGE: [AttributeId; 4] = [
        AttributeId::TimeDelay,
        AttributeId::PixelFlow,
        AttributeId::GaussianEvolution,
        AttributeId::MutualInformation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_vertex_attribute(self) -> bool {
        self.index() < 3
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::PixelWeight => "pixel_weight",
            Self::Gaussian => "gaussian",
            Self::Divergence => "divergence",
            Self::TimeDelay => "time_delay",
            Self::PixelFlow => "pixel_flow",
            Self::GaussianEvolution => "gaussian_evolution",
            Self::MutualInformation => "mutual_information",
        }
    }
}

macro_rules! per_attribute_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub [f64; ATTRIBUTE_COUNT]);

        impl $name {
            pub fn splat(value: f64) -> Self {
                Self([value; ATTRIBUTE_COUNT])
            }

            pub fn as_array(&self) -> &[f64; ATTRIBUTE_COUNT] {
                &self.0
            }

            pub fn iter(&self) -> impl Iterator<Item = (AttributeId, f64)> + '_ {
                AttributeId::ALL.iter().map(move |&a| (a, self.0[a.index()]))
            }
        }

        impl Index<AttributeId> for $name {
            type Output = f64;
            fn index(&self, a: AttributeId) -> &f64 {
                &self.0[a.index()]
            }
        }

        impl IndexMut<AttributeId> for $name {
            fn index_mut(&mut self, a: AttributeId) -> &mut f64 {
                &mut self.0[a.index()]
            }
        }
    };
}

per_attribute_vector!(
    /// One nonnegative cost per attribute.
    CostVector
);
per_attribute_vector!(
    /// Per-attribute normalization denominators, all strictly positive.
    ScaleVector
);

impl CostVector {
    pub fn zero() -> Self {
        Self::splat(0.0)
    }

    pub fn add_assign(&mut self, other: &CostVector) {
        for (x, y) in self.0.iter_mut().zip(other.0) {
            *x += y;
        }
    }

    pub fn is_valid(&self) -> bool {
        self.0.iter().all(|x| x.is_finite() && *x >= 0.0)
    }
}

impl ScaleVector {
    pub fn ones() -> Self {
        Self::splat(1.0)
    }

    pub fn is_valid(&self) -> bool {
        self.0.iter().all(|x| x.is_finite() && *x > 0.0)
    }

    /// Replaces zero (or otherwise unusable) entries by 1.
    pub fn floored(mut self) -> Self {
        for x in &mut self.0 {
            if !(x.is_finite() && *x > 0.0) {
                *x = 1.0;
            }
        }
        self
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DistanceError {
    #[error("non-finite input to a distance")]
    NonFinite,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("covariance is not invertible")]
    Singular,
}

pub fn scalar_distance(a: f64, b: f64) -> Result<f64, DistanceError> {
    if !a.is_finite() || !b.is_finite() {
        return Err(DistanceError::NonFinite);
    }
    Ok((a - b).abs())
}

struct Factored {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

fn factor(p: &GaussianParams) -> Result<Factored, DistanceError> {
    let covariance = p.covariance_matrix();
    let inverse = covariance
        .clone()
        .cholesky()
        .ok_or(DistanceError::Singular)?
        .inverse();
    Ok(Factored {
        mean: DVector::from_column_slice(&p.mean),
        covariance,
        inverse,
    })
}

/// Symmetrized Kullback-Leibler (Jeffreys) divergence between two Gaussians.
///
/// `J(p, q) = KL(p||q) + KL(q||p)`; the log-determinant terms cancel, leaving
///
/// ```text
/// J = ½ [ tr(Σq⁻¹ Σp) + tr(Σp⁻¹ Σq) − 2d + (μp − μq)ᵀ (Σp⁻¹ + Σq⁻¹) (μp − μq) ]
/// ```
///
/// Every term is computed in a form that is invariant to swapping `p` and `q`,
/// so the result is exactly symmetric in floating point.
pub fn gaussian_divergence(p: &GaussianParams, q: &GaussianParams) -> Result<f64, DistanceError> {
    let d = p.dimension();
    if d != q.dimension() {
        return Err(DistanceError::DimensionMismatch(d, q.dimension()));
    }
    if p.mean.iter().chain(q.mean.iter()).any(|x| !x.is_finite()) {
        return Err(DistanceError::NonFinite);
    }
    let fp = factor(p)?;
    let fq = factor(q)?;
    if p == q {
        return Ok(0.0);
    }
    let trace_pq = (&fq.inverse * &fp.covariance).trace();
    let trace_qp = (&fp.inverse * &fq.covariance).trace();
    let delta = &fp.mean - &fq.mean;
    let precision_sum = &fp.inverse + &fq.inverse;
    let mahalanobis = delta.dot(&(&precision_sum * &delta));
    let j = 0.5 * ((trace_pq + trace_qp) - 2.0 * d as f64 + mahalanobis);
    if !j.is_finite() {
        return Err(DistanceError::NonFinite);
    }
    Ok(j.max(0.0))
}

/// Unweighted vertex distances; edge entries are zero.
pub fn vertex_cost_vector(v1: &Vertex, v2: &Vertex) -> Result<CostVector, DistanceError> {
    let mut c = CostVector::zero();
    c[AttributeId::PixelWeight] = scalar_distance(v1.pixel_weight, v2.pixel_weight)?;
    c[AttributeId::Gaussian] = gaussian_divergence(&v1.gaussian, &v2.gaussian)?;
    c[AttributeId::Divergence] = scalar_distance(v1.divergence, v2.divergence)?;
    Ok(c)
}

/// Unweighted edge distances; vertex entries are zero.
pub fn edge_cost_vector(e1: &Edge, e2: &Edge) -> Result<CostVector, DistanceError> {
    let mut c = CostVector::zero();
    c[AttributeId::TimeDelay] = scalar_distance(e1.time_delay, e2.time_delay)?;
    c[AttributeId::PixelFlow] = scalar_distance(e1.pixel_flow, e2.pixel_flow)?;
    c[AttributeId::GaussianEvolution] =
        scalar_distance(e1.gaussian_evolution, e2.gaussian_evolution)?;
    c[AttributeId::MutualInformation] =
        scalar_distance(e1.mutual_information, e2.mutual_information)?;
    Ok(c)
}

/// `min(raw / scale, 1)` per attribute.
pub fn normalize(raw: &CostVector, scales: &ScaleVector) -> CostVector {
    let mut out = CostVector::zero();
    for a in AttributeId::ALL {
        out[a] = (raw[a] / scales[a]).min(1.0);
    }
    out
}

/// Per-attribute raw units used to make the scale computation itself
/// scale-free: the largest element-level distance between any reference
/// element and any same-layer corpus element (edges are paired by source
/// layer). Zero entries become 1.
pub fn element_units(corpus: &Corpus, reference: &GraphPattern) -> Result<ScaleVector, DistanceError> {
    let mut units = ScaleVector::splat(0.0);
    let layer = |g: &GraphPattern, id: &str| g.vertex(id).map(|v| v.time_index);
    for g in corpus.graphs() {
        for v1 in &reference.vertices {
            for v2 in g.vertices.iter().filter(|v| v.time_index == v1.time_index) {
                raise(&mut units, &vertex_cost_vector(v1, v2)?);
            }
        }
        for e1 in &reference.edges {
            let t = layer(reference, &e1.from);
            for e2 in g.edges.iter().filter(|e| layer(g, &e.from) == t) {
                raise(&mut units, &edge_cost_vector(e1, e2)?);
            }
        }
    }
    Ok(units.floored())
}

fn raise(units: &mut ScaleVector, c: &CostVector) {
    for (u, x) in units.0.iter_mut().zip(c.0) {
        *u = u.max(x);
    }
}

/// Normalization denominators for a reference graph.
///
/// Each corpus graph is matched against the reference under neutral weights
/// with distances measured in [`element_units`] and without clamping; the
/// scale of attribute `l` is the largest matched-pair raw cost in `l` over
/// the corpus. Deletions and insertions are charged by `deletion_penalty` in
/// normalized units and so do not enter the scales.
pub fn compute_scales(
    corpus: &Corpus,
    reference: &GraphPattern,
    config: &MatchConfig,
) -> Result<ScaleVector, MatchError> {
    config.validate()?;
    let model = CostModel {
        scales: element_units(corpus, reference)?,
        deletion_penalty: config.deletion_penalty,
        clamp: false,
    };
    let phi = ParameterVector::uniform(1.0);
    let per_graph = corpus
        .graphs()
        .par_iter()
        .map(|g| match_with_model(reference, g, &phi, &model, 0, None).map(|r| r.raw.matched))
        .collect::<Result<Vec<_>, _>>()?;
    let mut scales = ScaleVector::splat(0.0);
    for matched in &per_graph {
        raise(&mut scales, matched);
    }
    Ok(scales.floored())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_gaussian(mean: f64, var: f64) -> GaussianParams {
        GaussianParams::new(vec![mean], vec![vec![var]])
    }

    #[test]
    fn scalar_distance_examples() {
        assert_eq!(scalar_distance(3.0, 3.0), Ok(0.0));
        assert_eq!(scalar_distance(1.0, 4.5), Ok(3.5));
        assert_eq!(scalar_distance(-2.0, 2.0), Ok(4.0));
        assert_eq!(scalar_distance(2.0, -2.0), Ok(4.0));
        assert_eq!(scalar_distance(f64::NAN, 1.0), Err(DistanceError::NonFinite));
        assert_eq!(scalar_distance(1.0, f64::INFINITY), Err(DistanceError::NonFinite));
    }

    #[test]
    fn jeffreys_closed_form_examples() {
        let std2 = GaussianParams::standard(2);
        assert_eq!(gaussian_divergence(&std2, &std2), Ok(0.0));

        let j = gaussian_divergence(&scalar_gaussian(0.0, 1.0), &scalar_gaussian(1.0, 1.0)).unwrap();
        assert!((j - 1.0).abs() < 1e-14);

        let j = gaussian_divergence(&scalar_gaussian(0.0, 1.0), &scalar_gaussian(0.0, 4.0)).unwrap();
        assert!((j - 1.125).abs() < 1e-14, "{j}");
    }

    #[test]
    fn divergence_errors() {
        let a = GaussianParams::standard(2);
        let b = GaussianParams::standard(3);
        assert_eq!(gaussian_divergence(&a, &b), Err(DistanceError::DimensionMismatch(2, 3)));
        let singular = GaussianParams::new(vec![0.0, 0.0], vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(gaussian_divergence(&a, &singular), Err(DistanceError::Singular));
    }

    #[test]
    fn normalize_clamps() {
        let scales = ScaleVector([0.4, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(normalize(&CostVector::zero(), &scales), CostVector::zero());
        let mut raw = CostVector::zero();
        raw[AttributeId::PixelWeight] = 0.4;
        raw[AttributeId::Gaussian] = 4.0;
        let n = normalize(&raw, &scales);
        assert_eq!(n[AttributeId::PixelWeight], 1.0);
        assert_eq!(n[AttributeId::Gaussian], 1.0);
        assert_eq!(n[AttributeId::Divergence], 0.0);
    }

    #[test]
    fn attribute_order_is_fixed() {
        for (i, a) in AttributeId::ALL.iter().enumerate() {
            assert_eq!(a.index(), i);
        }
        assert!(AttributeId::VERTEX.iter().all(|a| a.is_vertex_attribute()));
        assert!(AttributeId::EDGE.iter().all(|a| !a.is_vertex_attribute()));
    }

    #[test]
    fn floored_scales() {
        let s = ScaleVector([0.0, 0.3, 0.0, 2.0, 0.0, 0.0, 0.0]).floored();
        assert_eq!(s.0, [1.0, 0.3, 1.0, 2.0, 1.0, 1.0, 1.0]);
        assert!(s.is_valid());
    }
}
