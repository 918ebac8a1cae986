//! Per-attribute weight learning with Dirichlet-multinomial conjugate updates.
//!
//! Each attribute weight φ_l is discretized into `r` bins with midpoint
//! values `(j − ½)/r`. A training example contributes one count to the bin
//! of `1 − S_l(Ĝ_0, G)` for every attribute, and the weight estimate is the
//! posterior mean of the bin values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distances::{AttributeId, ScaleVector, ATTRIBUTE_COUNT, compute_scales};
use crate::graph_model::Corpus;
use crate::matcher::{match_graphs, MatchConfig, MatchError, ParameterVector};
use crate::semantics::{likelihood, SemanticsError};

pub const DEFAULT_LEVELS: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum LearnerError {
    #[error("quantizer needs at least 2 levels, got {0}")]
    InvalidQuantizer(usize),
    #[error("normalized cost {0} is outside [0, 1]")]
    Domain(f64),
    #[error("graph `{0}` is not in the corpus")]
    UnknownGraph(String),
    #[error("invalid model state: {0}")]
    State(String),
    #[error(transparent)]
    Match(#[from] MatchError),
}

impl From<SemanticsError> for LearnerError {
    fn from(e: SemanticsError) -> Self {
        match e {
            SemanticsError::Match(m) => LearnerError::Match(m),
            SemanticsError::UnknownGraph(id) => LearnerError::UnknownGraph(id),
            other => LearnerError::State(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quantizer {
    levels: usize,
}

impl Default for Quantizer {
    fn default() -> Self {
        Self {
            levels: DEFAULT_LEVELS,
        }
    }
}

impl Quantizer {
    pub fn new(levels: usize) -> Result<Self, LearnerError> {
        if levels < 2 {
            return Err(LearnerError::InvalidQuantizer(levels));
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Value of bin `j` (1-based).
    pub fn level_value(&self, j: usize) -> f64 {
        (j as f64 - 0.5) / self.levels as f64
    }

    pub fn level_values(&self) -> Vec<f64> {
        (1..=self.levels).map(|j| self.level_value(j)).collect()
    }

    /// Bin of the weight `1 − cost`, in `1..=r`.
    pub fn quantize(&self, normalized_cost: f64) -> Result<usize, LearnerError> {
        if !(0.0..=1.0).contains(&normalized_cost) {
            return Err(LearnerError::Domain(normalized_cost));
        }
        let j = ((1.0 - normalized_cost) * self.levels as f64).ceil() as usize;
        Ok(j.clamp(1, self.levels))
    }
}

pub fn quantize(q: &Quantizer, normalized_cost: f64) -> Result<usize, LearnerError> {
    q.quantize(normalized_cost)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeDistribution {
    attribute: AttributeId,
    alpha: Vec<f64>,
    alpha_sum: f64,
}

impl AttributeDistribution {
    pub fn uniform(attribute: AttributeId, q: &Quantizer) -> Self {
        Self {
            attribute,
            alpha: vec![1.0; q.levels()],
            alpha_sum: q.levels() as f64,
        }
    }

    pub fn from_alpha(attribute: AttributeId, alpha: Vec<f64>) -> Result<Self, LearnerError> {
        if alpha.len() < 2 {
            return Err(LearnerError::InvalidQuantizer(alpha.len()));
        }
        if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(LearnerError::State(format!(
                "{} hyper-parameters must be finite and positive",
                attribute.name()
            )));
        }
        let alpha_sum = alpha.iter().sum();
        Ok(Self {
            attribute,
            alpha,
            alpha_sum,
        })
    }

    pub fn attribute(&self) -> AttributeId {
        self.attribute
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_sum(&self) -> f64 {
        self.alpha_sum
    }

    pub fn levels(&self) -> usize {
        self.alpha.len()
    }

    /// Conjugate update for one observation in bin `j` (1-based).
    pub fn add_count(&mut self, j: usize) {
        self.alpha[j - 1] += 1.0;
        self.alpha_sum += 1.0;
    }

    /// Posterior mean of each bin probability, `α_j / Σα`.
    pub fn bin_means(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| a / self.alpha_sum).collect()
    }
}

/// Posterior-mean estimate of the attribute weight, `Σ_j φ^j α_j / Σα`.
pub fn mmse_weight(dist: &AttributeDistribution, q: &Quantizer) -> f64 {
    debug_assert_eq!(dist.levels(), q.levels());
    // Accumulate Σ (j − ½)·α_j first and divide once: exact for integer counts.
    let numerator: f64 = dist
        .alpha
        .iter()
        .enumerate()
        .map(|(i, a)| (i as f64 + 0.5) * a)
        .sum();
    numerator / (q.levels() as f64 * dist.alpha_sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticSign {
    Positive,
    Negative,
}

impl SemanticSign {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Positive => "positive",
            Self::Negative => "negative",
        }
    }
}

impl std::str::FromStr for SemanticSign {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "positive" => Ok(Self::Positive),
            "negative" => Ok(Self::Negative),
            other => Err(format!("label must be `positive` or `negative`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub graph_id: String,
    /// Logical timestamp: the session revision at which the example was accepted.
    pub sequence: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticModel {
    pub sign: SemanticSign,
    pub reference_graph_id: Option<String>,
    pub distributions: Vec<AttributeDistribution>,
    pub scales: ScaleVector,
    pub training_log: Vec<TrainingExample>,
}

impl SemanticModel {
    pub fn new(sign: SemanticSign, q: &Quantizer) -> Self {
        Self {
            sign,
            reference_graph_id: None,
            distributions: AttributeId::ALL
                .iter()
                .map(|&a| AttributeDistribution::uniform(a, q))
                .collect(),
            scales: ScaleVector::ones(),
            training_log: Vec::new(),
        }
    }

    pub fn is_trained(&self) -> bool {
        self.reference_graph_id.is_some()
    }

    pub fn distribution(&self, a: AttributeId) -> &AttributeDistribution {
        &self.distributions[a.index()]
    }

    pub fn validate(&self, q: &Quantizer) -> Result<(), LearnerError> {
        if self.distributions.len() != ATTRIBUTE_COUNT {
            return Err(LearnerError::State(format!(
                "expected {ATTRIBUTE_COUNT} attribute distributions, got {}",
                self.distributions.len()
            )));
        }
        for (d, a) in self.distributions.iter().zip(AttributeId::ALL) {
            if d.attribute != a {
                return Err(LearnerError::State(format!(
                    "distribution for {} is out of order",
                    d.attribute.name()
                )));
            }
            if d.levels() != q.levels() {
                return Err(LearnerError::State(format!(
                    "{} has {} levels, quantizer has {}",
                    a.name(),
                    d.levels(),
                    q.levels()
                )));
            }
        }
        if !self.scales.is_valid() {
            return Err(LearnerError::State("scales must be finite and positive".into()));
        }
        match &self.reference_graph_id {
            None if !self.training_log.is_empty() => Err(LearnerError::State(
                "model has training examples but no reference".into(),
            )),
            Some(r) if !self.training_log.iter().any(|e| &e.graph_id == r) => Err(
                LearnerError::State(format!("reference `{r}` is not one of the model's examples")),
            ),
            _ => Ok(()),
        }
    }
}

/// Per-attribute normalized costs used for count updates. Costs are taken
/// from the optimal mapping under neutral weights, so the bin an example
/// falls into depends only on the reference and the example.
pub fn observation_costs(
    model: &SemanticModel,
    corpus: &Corpus,
    example_id: &str,
    config: &MatchConfig,
) -> Result<crate::distances::CostVector, LearnerError> {
    let reference_id = model
        .reference_graph_id
        .as_deref()
        .ok_or_else(|| LearnerError::State("model has no reference".into()))?;
    let reference = corpus
        .get(reference_id)
        .ok_or_else(|| LearnerError::UnknownGraph(reference_id.to_string()))?;
    let example = corpus
        .get(example_id)
        .ok_or_else(|| LearnerError::UnknownGraph(example_id.to_string()))?;
    let neutral = ParameterVector::uniform(1.0);
    Ok(match_graphs(reference, example, &neutral, &model.scales, config)?.per_attribute)
}

/// Incorporates one training example.
pub fn observe(
    model: &SemanticModel,
    corpus: &Corpus,
    example_id: &str,
    q: &Quantizer,
    config: &MatchConfig,
    sequence: u64,
) -> Result<SemanticModel, LearnerError> {
    let example = corpus
        .get(example_id)
        .ok_or_else(|| LearnerError::UnknownGraph(example_id.to_string()))?;
    let mut next = model.clone();
    if model.reference_graph_id.is_none() {
        next.scales = compute_scales(corpus, example, config)?;
        next.reference_graph_id = Some(example_id.to_string());
    } else {
        let costs = observation_costs(model, corpus, example_id, config)?;
        for (dist, (_, cost)) in next.distributions.iter_mut().zip(costs.iter()) {
            dist.add_count(q.quantize(cost)?);
        }
    }
    next.training_log.push(TrainingExample {
        graph_id: example_id.to_string(),
        sequence,
    });
    Ok(next)
}

/// Componentwise MMSE weights.
pub fn estimate_phi(model: &SemanticModel, q: &Quantizer) -> ParameterVector {
    let mut phi = [0.0; ATTRIBUTE_COUNT];
    for (w, d) in phi.iter_mut().zip(&model.distributions) {
        *w = mmse_weight(d, q);
    }
    ParameterVector(phi)
}

/// Argmax of the likelihoods; ties go to the smallest graph id.
pub fn select_reference(candidates: &[(String, f64)]) -> Option<String> {
    candidates
        .iter()
        .fold(None::<&(String, f64)>, |best, c| match best {
            None => Some(c),
            Some(b) if c.1 > b.1 || (c.1 == b.1 && c.0 < b.0) => Some(c),
            keep => keep,
        })
        .map(|(id, _)| id.clone())
}

/// Re-selects the reference among this model's own examples.
pub fn update_reference(
    model: &SemanticModel,
    corpus: &Corpus,
    q: &Quantizer,
    config: &MatchConfig,
) -> Result<SemanticModel, LearnerError> {
    if model.training_log.is_empty() {
        return Err(LearnerError::State("no examples to choose a reference from".into()));
    }
    let mut ids: Vec<&str> = model.training_log.iter().map(|e| e.graph_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut scored = Vec::with_capacity(ids.len());
    for id in ids {
        let g = corpus
            .get(id)
            .ok_or_else(|| LearnerError::UnknownGraph(id.to_string()))?;
        scored.push((id.to_string(), likelihood(g, model, corpus, q, config)?.value));
    }
    let chosen = select_reference(&scored).expect("candidate set is nonempty");
    let mut next = model.clone();
    if next.reference_graph_id.as_deref() != Some(chosen.as_str()) {
        let reference = corpus.get(&chosen).expect("candidate came from the corpus");
        next.scales = compute_scales(corpus, reference, config)?;
        next.reference_graph_id = Some(chosen);
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_examples() {
        let q = Quantizer::default();
        assert_eq!(q.quantize(0.0), Ok(1000));
        let q4 = Quantizer::new(4).unwrap();
        assert_eq!(q4.quantize(1.0), Ok(1));
        assert_eq!(q4.quantize(0.3), Ok(3));
        assert_eq!(q4.quantize(1.2), Err(LearnerError::Domain(1.2)));
        assert_eq!(q4.quantize(-0.1), Err(LearnerError::Domain(-0.1)));
        assert!(matches!(Quantizer::new(1), Err(LearnerError::InvalidQuantizer(1))));
    }

    #[test]
    fn level_values_are_midpoints() {
        let q = Quantizer::new(4).unwrap();
        assert_eq!(q.level_values(), vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn mmse_examples() {
        let q = Quantizer::new(4).unwrap();
        let mut d = AttributeDistribution::uniform(AttributeId::PixelWeight, &q);
        assert_eq!(mmse_weight(&d, &q), 0.5);
        d.add_count(3);
        assert_eq!(d.alpha(), &[1.0, 1.0, 2.0, 1.0]);
        assert_eq!(d.alpha_sum(), 5.0);
        assert!((mmse_weight(&d, &q) - 0.525).abs() < 1e-15);

        let d = AttributeDistribution::from_alpha(AttributeId::Gaussian, vec![1.0, 1.0, 1.0, 101.0]).unwrap();
        let expected = (0.125 + 0.375 + 0.625 + 0.875 * 101.0) / 104.0;
        assert!((mmse_weight(&d, &q) - expected).abs() < 1e-15);
        assert!((mmse_weight(&d, &q) - 89.5 / 104.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_mmse_is_half_for_many_r() {
        for r in [2, 3, 7, 16, 1000] {
            let q = Quantizer::new(r).unwrap();
            let d = AttributeDistribution::uniform(AttributeId::Divergence, &q);
            assert_eq!(mmse_weight(&d, &q), 0.5, "r = {r}");
        }
    }

    #[test]
    fn fresh_model_estimates_half() {
        let q = Quantizer::new(8).unwrap();
        let m = SemanticModel::new(SemanticSign::Positive, &q);
        assert_eq!(estimate_phi(&m, &q), ParameterVector::uniform(0.5));
        assert!(m.validate(&q).is_ok());
    }

    #[test]
    fn select_reference_examples() {
        assert_eq!(
            select_reference(&[("x".into(), 0.4), ("y".into(), 0.9)]),
            Some("y".to_string())
        );
        assert_eq!(
            select_reference(&[("b".into(), 0.7), ("a".into(), 0.7)]),
            Some("a".to_string())
        );
        assert_eq!(select_reference(&[("only".into(), 0.1)]), Some("only".to_string()));
        assert_eq!(select_reference(&[]), None);
    }

    #[test]
    fn invalid_alpha_rejected() {
        assert!(AttributeDistribution::from_alpha(AttributeId::PixelWeight, vec![1.0, 0.0]).is_err());
        assert!(AttributeDistribution::from_alpha(AttributeId::PixelWeight, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn sign_parsing() {
        assert_eq!("positive".parse::<SemanticSign>(), Ok(SemanticSign::Positive));
        assert_eq!("negative".parse::<SemanticSign>(), Ok(SemanticSign::Negative));
        assert!("maybe".parse::<SemanticSign>().is_err());
    }
}
