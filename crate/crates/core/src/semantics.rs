//! Likelihoods, posteriors and corpus ranking for a positive/negative
//! semantic pair.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph_model::{Corpus, GraphPattern};
use crate::learner::{estimate_phi, Quantizer, SemanticModel};
use crate::matcher::{
    match_graphs, match_graphs_cancellable, CancellationToken, MatchConfig, MatchError,
    ParameterVector,
};

/// Likelihood assigned by an untrained model: it carries no evidence.
pub const UNINFORMATIVE_LIKELIHOOD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum SemanticsError {
    #[error("the {0} model has no reference graph")]
    NoReference(&'static str),
    #[error("graph `{0}` is not in the corpus")]
    UnknownGraph(String),
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Match(#[from] MatchError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Likelihood {
    pub value: f64,
    /// All weights are zero; every graph gets likelihood 1.
    pub degenerate: bool,
}

/// Everything needed to score graphs against one model.
struct Scorer<'a> {
    reference: &'a GraphPattern,
    model: &'a SemanticModel,
    phi: ParameterVector,
    z: f64,
    config: &'a MatchConfig,
}

impl<'a> Scorer<'a> {
    fn new(
        model: &'a SemanticModel,
        corpus: &'a Corpus,
        q: &Quantizer,
        config: &'a MatchConfig,
    ) -> Result<Self, SemanticsError> {
        let id = model
            .reference_graph_id
            .as_deref()
            .ok_or(SemanticsError::NoReference(model.sign.as_str()))?;
        let reference = corpus
            .get(id)
            .ok_or_else(|| SemanticsError::UnknownGraph(id.to_string()))?;
        let phi = estimate_phi(model, q);
        Ok(Self {
            reference,
            model,
            z: phi.sum(),
            phi,
            config,
        })
    }

    fn score(&self, g: &GraphPattern, cancel: Option<&CancellationToken>) -> Result<Likelihood, SemanticsError> {
        if self.z == 0.0 {
            return Ok(Likelihood {
                value: 1.0,
                degenerate: true,
            });
        }
        let result = match cancel {
            Some(c) => match_graphs_cancellable(
                self.reference,
                g,
                &self.phi,
                &self.model.scales,
                self.config,
                c,
            )?,
            None => match_graphs(self.reference, g, &self.phi, &self.model.scales, self.config)?,
        };
        Ok(Likelihood {
            value: likelihood_from_cost(result.total_cost, self.z),
            degenerate: false,
        })
    }
}

/// `1 − S/Z`, clamped to `[0, 1]`.
pub fn likelihood_from_cost(cost: f64, z: f64) -> f64 {
    if z == 0.0 {
        return 1.0;
    }
    (1.0 - cost / z).clamp(0.0, 1.0)
}

/// Likelihood of `g` under `model`, normalized by the sum of the estimated
/// weights (the largest cost any graph can reach).
pub fn likelihood(
    g: &GraphPattern,
    model: &SemanticModel,
    corpus: &Corpus,
    q: &Quantizer,
    config: &MatchConfig,
) -> Result<Likelihood, SemanticsError> {
    Scorer::new(model, corpus, q, config)?.score(g, None)
}

/// Bayes rule with equal semantic priors; `0/0` is 0.5.
pub fn posterior(likelihood_pos: f64, likelihood_neg: f64) -> f64 {
    let total = likelihood_pos + likelihood_neg;
    if total == 0.0 {
        0.5
    } else {
        likelihood_pos / total
    }
}

pub fn graph_prior(likelihood_pos: f64, likelihood_neg: f64) -> f64 {
    0.5 * likelihood_pos + 0.5 * likelihood_neg
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRecord {
    pub graph_id: String,
    pub likelihood_pos: f64,
    pub likelihood_neg: f64,
    pub posterior: f64,
    pub labeled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub records: Vec<PosteriorRecord>,
    pub threshold: f64,
    /// Some model had all-zero weights.
    pub degenerate: bool,
}

impl Ranking {
    pub fn relabel(&mut self, threshold: f64) -> Result<(), SemanticsError> {
        check_threshold(threshold)?;
        self.threshold = threshold;
        for r in &mut self.records {
            r.labeled = r.posterior >= threshold;
        }
        Ok(())
    }

    pub fn labeled_count(&self) -> usize {
        self.records.iter().filter(|r| r.labeled).count()
    }

    pub fn to_export_json(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(&self.records).expect("records serialize");
        bytes.push(b'\n');
        bytes
    }
}

pub fn parse_ranking_export(bytes: &[u8]) -> Result<Vec<PosteriorRecord>, serde_json::Error> {
    serde_json::from_slice(bytes)
}

fn check_threshold(t: f64) -> Result<(), SemanticsError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(SemanticsError::InvalidThreshold(t))
    }
}

fn rank_order(a: &PosteriorRecord, b: &PosteriorRecord) -> Ordering {
    b.posterior
        .total_cmp(&a.posterior)
        .then_with(|| a.graph_id.cmp(&b.graph_id))
}

/// Scores every corpus graph and sorts by descending posterior, ascending id.
///
/// A negative model without a reference contributes the uninformative
/// likelihood; the positive model must be trained.
pub fn rank_corpus(
    corpus: &Corpus,
    positive: &SemanticModel,
    negative: &SemanticModel,
    threshold: f64,
    q: &Quantizer,
    config: &MatchConfig,
    cancel: Option<&CancellationToken>,
) -> Result<Ranking, SemanticsError> {
    check_threshold(threshold)?;
    let pos = Scorer::new(positive, corpus, q, config)?;
    let neg = if negative.is_trained() {
        Some(Scorer::new(negative, corpus, q, config)?)
    } else {
        None
    };

    let scored = corpus
        .graphs()
        .par_iter()
        .map(|g| {
            let lp = pos.score(g, cancel)?;
            let ln = match &neg {
                Some(s) => s.score(g, cancel)?,
                None => Likelihood {
                    value: UNINFORMATIVE_LIKELIHOOD,
                    degenerate: false,
                },
            };
            let p = posterior(lp.value, ln.value);
            Ok((
                PosteriorRecord {
                    graph_id: g.id.clone(),
                    likelihood_pos: lp.value,
                    likelihood_neg: ln.value,
                    posterior: p,
                    labeled: p >= threshold,
                },
                lp.degenerate || ln.degenerate,
            ))
        })
        .collect::<Result<Vec<_>, SemanticsError>>()?;

    let degenerate = scored.iter().any(|(_, d)| *d);
    let mut records: Vec<PosteriorRecord> = scored.into_iter().map(|(r, _)| r).collect();
    records.sort_by(rank_order);
    Ok(Ranking {
        records,
        threshold,
        degenerate,
    })
}
