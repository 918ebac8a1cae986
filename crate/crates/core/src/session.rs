//! A training session: a positive and a negative semantic model over one
//! corpus, advanced by labeled examples, and its snapshot format.
//!
//! Sessions are values. Every accepted mutation returns a new session with
//! the revision incremented by one. Snapshot bytes depend only on the
//! corpus, the configuration and the sequence of mutations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distances::{AttributeId, ScaleVector};
use crate::graph_model::Corpus;
use crate::learner::{
    observe, update_reference, AttributeDistribution, LearnerError, Quantizer, SemanticModel,
    SemanticSign, TrainingExample, DEFAULT_LEVELS,
};
use crate::matcher::{CancellationToken, MatchConfig};
use crate::semantics::{rank_corpus, Ranking, SemanticsError};

pub const SNAPSHOT_FORMAT: &str = "stsem-session/1";
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("graph `{0}` is not in the corpus")]
    UnknownGraph(String),
    #[error("snapshot was taken on corpus {expected}, not {actual}")]
    CorpusMismatch { expected: String, actual: String },
    #[error("invalid snapshot: {0}")]
    Snapshot(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Learner(LearnerError),
    #[error(transparent)]
    Semantics(SemanticsError),
}

impl From<LearnerError> for SessionError {
    fn from(e: LearnerError) -> Self {
        match e {
            LearnerError::UnknownGraph(id) => SessionError::UnknownGraph(id),
            other => SessionError::Learner(other),
        }
    }
}

impl From<SemanticsError> for SessionError {
    fn from(e: SemanticsError) -> Self {
        match e {
            SemanticsError::UnknownGraph(id) => SessionError::UnknownGraph(id),
            other => SessionError::Semantics(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionConfig {
    pub levels: usize,
    pub matcher: MatchConfig,
    pub threshold: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            levels: DEFAULT_LEVELS,
            matcher: MatchConfig::default(),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub corpus_id: String,
    pub quantizer: Quantizer,
    pub matcher: MatchConfig,
    pub threshold: f64,
    pub revision: u64,
    pub positive: SemanticModel,
    pub negative: SemanticModel,
}

fn check_threshold(t: f64) -> Result<(), SessionError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(SessionError::Config(format!("threshold {t} is outside [0, 1]")))
    }
}

impl Session {
    pub fn new(corpus: &Corpus, config: SessionConfig) -> Result<Self, SessionError> {
        let quantizer = Quantizer::new(config.levels).map_err(|e| SessionError::Config(e.to_string()))?;
        config
            .matcher
            .validate()
            .map_err(|e| SessionError::Config(e.to_string()))?;
        check_threshold(config.threshold)?;
        Ok(Self {
            corpus_id: corpus.content_id(),
            positive: SemanticModel::new(SemanticSign::Positive, &quantizer),
            negative: SemanticModel::new(SemanticSign::Negative, &quantizer),
            quantizer,
            matcher: config.matcher,
            threshold: config.threshold,
            revision: 0,
        })
    }

    pub fn model(&self, sign: SemanticSign) -> &SemanticModel {
        match sign {
            SemanticSign::Positive => &self.positive,
            SemanticSign::Negative => &self.negative,
        }
    }

    pub fn is_trained(&self) -> bool {
        self.positive.is_trained()
    }

    pub fn check_corpus(&self, corpus: &Corpus) -> Result<(), SessionError> {
        let actual = corpus.content_id();
        if actual != self.corpus_id {
            return Err(SessionError::CorpusMismatch {
                expected: self.corpus_id.clone(),
                actual,
            });
        }
        for model in [&self.positive, &self.negative] {
            for e in &model.training_log {
                if !corpus.contains(&e.graph_id) {
                    return Err(SessionError::UnknownGraph(e.graph_id.clone()));
                }
            }
        }
        Ok(())
    }

    /// Observes one example with the model of the given sign, then
    /// re-selects that model's reference.
    pub fn apply_feedback(
        &self,
        corpus: &Corpus,
        graph_id: &str,
        label: SemanticSign,
    ) -> Result<Self, SessionError> {
        if !corpus.contains(graph_id) {
            return Err(SessionError::UnknownGraph(graph_id.to_string()));
        }
        let revision = self.revision + 1;
        let model = observe(
            self.model(label),
            corpus,
            graph_id,
            &self.quantizer,
            &self.matcher,
            revision,
        )?;
        let model = update_reference(&model, corpus, &self.quantizer, &self.matcher)?;
        let mut next = self.clone();
        match label {
            SemanticSign::Positive => next.positive = model,
            SemanticSign::Negative => next.negative = model,
        }
        next.revision = revision;
        Ok(next)
    }

    pub fn set_threshold(&self, threshold: f64) -> Result<Self, SessionError> {
        check_threshold(threshold)?;
        let mut next = self.clone();
        next.threshold = threshold;
        next.revision += 1;
        Ok(next)
    }

    /// `None` while the positive model has no reference.
    pub fn rank(
        &self,
        corpus: &Corpus,
        cancel: Option<&CancellationToken>,
    ) -> Result<Option<Ranking>, SessionError> {
        if !self.is_trained() {
            return Ok(None);
        }
        Ok(Some(rank_corpus(
            corpus,
            &self.positive,
            &self.negative,
            self.threshold,
            &self.quantizer,
            &self.matcher,
            cancel,
        )?))
    }

    pub fn to_snapshot_bytes(&self) -> Vec<u8> {
        let snapshot = SnapshotRepr {
            format: SNAPSHOT_FORMAT.to_string(),
            corpus_id: self.corpus_id.clone(),
            revision: self.revision,
            threshold: self.threshold,
            quantizer: self.quantizer,
            matcher: self.matcher,
            positive: ModelRepr::from(&self.positive),
            negative: ModelRepr::from(&self.negative),
        };
        let mut bytes = serde_json::to_vec_pretty(&snapshot).expect("snapshot serializes");
        bytes.push(b'\n');
        bytes
    }

    pub fn from_snapshot_bytes(bytes: &[u8]) -> Result<Self, SessionError> {
        let repr: SnapshotRepr =
            serde_json::from_slice(bytes).map_err(|e| SessionError::Snapshot(e.to_string()))?;
        if repr.format != SNAPSHOT_FORMAT {
            return Err(SessionError::Snapshot(format!(
                "unsupported format `{}`",
                repr.format
            )));
        }
        let quantizer = Quantizer::new(repr.quantizer.levels())
            .map_err(|e| SessionError::Snapshot(e.to_string()))?;
        repr.matcher
            .validate()
            .map_err(|e| SessionError::Snapshot(e.to_string()))?;
        check_threshold(repr.threshold).map_err(|e| SessionError::Snapshot(e.to_string()))?;
        let positive = repr.positive.into_model(SemanticSign::Positive, &quantizer, repr.revision)?;
        let negative = repr.negative.into_model(SemanticSign::Negative, &quantizer, repr.revision)?;
        Ok(Self {
            corpus_id: repr.corpus_id,
            quantizer,
            matcher: repr.matcher,
            threshold: repr.threshold,
            revision: repr.revision,
            positive,
            negative,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotRepr {
    format: String,
    corpus_id: String,
    revision: u64,
    threshold: f64,
    quantizer: Quantizer,
    matcher: MatchConfig,
    positive: ModelRepr,
    negative: ModelRepr,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistributionRepr {
    attribute: AttributeId,
    alpha: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRepr {
    sign: SemanticSign,
    reference_graph_id: Option<String>,
    scales: ScaleVector,
    distributions: Vec<DistributionRepr>,
    training_log: Vec<TrainingExample>,
}

impl From<&SemanticModel> for ModelRepr {
    fn from(m: &SemanticModel) -> Self {
        Self {
            sign: m.sign,
            reference_graph_id: m.reference_graph_id.clone(),
            scales: m.scales,
            distributions: m
                .distributions
                .iter()
                .map(|d| DistributionRepr {
                    attribute: d.attribute(),
                    alpha: d.alpha().to_vec(),
                })
                .collect(),
            training_log: m.training_log.clone(),
        }
    }
}

impl ModelRepr {
    fn into_model(
        self,
        expected: SemanticSign,
        q: &Quantizer,
        revision: u64,
    ) -> Result<SemanticModel, SessionError> {
        let bad = |m: String| SessionError::Snapshot(m);
        if self.sign != expected {
            return Err(bad(format!("expected the {} model", expected.as_str())));
        }
        let mut last = 0;
        for e in &self.training_log {
            if e.sequence <= last || e.sequence > revision {
                return Err(bad(format!(
                    "{} training log sequence numbers must increase and not exceed the revision",
                    expected.as_str()
                )));
            }
            last = e.sequence;
        }
        let distributions = self
            .distributions
            .into_iter()
            .map(|d| AttributeDistribution::from_alpha(d.attribute, d.alpha))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(e.to_string()))?;
        let model = SemanticModel {
            sign: self.sign,
            reference_graph_id: self.reference_graph_id,
            distributions,
            scales: self.scales,
            training_log: self.training_log,
        };
        model.validate(q).map_err(|e| bad(e.to_string()))?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_model::{GaussianParams, GraphPattern, Vertex};

    fn corpus() -> Corpus {
        let g = |id: &str, w: f64| GraphPattern {
            id: id.into(),
            vertices: vec![Vertex {
                id: "a".into(),
                time_index: 0,
                pixel_weight: w,
                gaussian: GaussianParams::standard(1),
                divergence: 0.0,
            }],
            edges: vec![],
            metadata: None,
        };
        Corpus::new(1, vec![g("x", 0.0), g("y", 0.5), g("z", 1.0)]).unwrap()
    }

    fn config() -> SessionConfig {
        SessionConfig {
            levels: 4,
            ..SessionConfig::default()
        }
    }

    #[test]
    fn fresh_session_is_untrained() {
        let c = corpus();
        let s = Session::new(&c, config()).unwrap();
        assert_eq!(s.revision, 0);
        assert!(s.rank(&c, None).unwrap().is_none());
    }

    #[test]
    fn feedback_increments_revision_and_sets_reference() {
        let c = corpus();
        let s = Session::new(&c, config()).unwrap();
        let s = s.apply_feedback(&c, "x", SemanticSign::Positive).unwrap();
        assert_eq!(s.revision, 1);
        assert_eq!(s.positive.reference_graph_id.as_deref(), Some("x"));
        let ranking = s.rank(&c, None).unwrap().unwrap();
        assert_eq!(ranking.records[0].graph_id, "x");
        assert_eq!(ranking.records[0].likelihood_pos, 1.0);
        assert!(matches!(
            s.apply_feedback(&c, "nope", SemanticSign::Negative),
            Err(SessionError::UnknownGraph(_))
        ));
    }

    #[test]
    fn snapshot_round_trip() {
        let c = corpus();
        let s = Session::new(&c, config())
            .unwrap()
            .apply_feedback(&c, "x", SemanticSign::Positive)
            .unwrap()
            .apply_feedback(&c, "y", SemanticSign::Positive)
            .unwrap()
            .apply_feedback(&c, "z", SemanticSign::Negative)
            .unwrap()
            .set_threshold(0.3)
            .unwrap();
        let bytes = s.to_snapshot_bytes();
        let back = Session::from_snapshot_bytes(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_snapshot_bytes(), bytes);
        back.check_corpus(&c).unwrap();
    }

    #[test]
    fn truncated_snapshot_rejected() {
        let c = corpus();
        let bytes = Session::new(&c, config()).unwrap().to_snapshot_bytes();
        assert!(matches!(
            Session::from_snapshot_bytes(&bytes[..bytes.len() / 2]),
            Err(SessionError::Snapshot(_))
        ));
    }

    #[test]
    fn threshold_validation() {
        let c = corpus();
        let s = Session::new(&c, config()).unwrap();
        assert!(s.set_threshold(1.5).is_err());
        assert_eq!(s.set_threshold(1.0).unwrap().revision, 1);
        let bad = SessionConfig {
            threshold: -0.1,
            ..config()
        };
        assert!(Session::new(&c, bad).is_err());
    }
}
