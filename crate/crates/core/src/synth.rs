//! Synthetic corpora with planted classes.
//!
//! Each class has prototype attribute values; its graphs are drawn around
//! them with Gaussian jitter. Graph ids are neutral (`g0000`, ...) and
//! assigned after a shuffle, so the class is only recoverable from the
//! separately returned ground truth.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::graph_model::{Corpus, CorpusError, Edge, GaussianParams, GraphPattern, Vertex};

pub const GENERATOR_NAME: &str = "chacha8";
const MIN_VARIANCE: f64 = 0.5;
const MAX_VARIANCE: f64 = 2.0;
const MIN_TIME_DELAY: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid class spec `{label}`: {message}")]
    InvalidSpec { label: String, message: String },
    #[error("no classes given")]
    Empty,
    #[error("feature dimension must be at least 1")]
    ZeroDimension,
    #[error("generated corpus failed validation: {0}")]
    Corpus(#[from] CorpusError),
}

/// Class prototype values. The Gaussian mean is the same in every dimension
/// and covariances are diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeCenters {
    pub pixel_weight: f64,
    pub gaussian_mean: f64,
    pub gaussian_variance: f64,
    pub divergence: f64,
    pub time_delay: f64,
    pub pixel_flow: f64,
    pub gaussian_evolution: f64,
    pub mutual_information: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub class_label: String,
    pub count: usize,
    pub layers: u32,
    /// Inclusive `[min, max]` vertices per layer.
    pub vertices_per_layer: (usize, usize),
    pub attribute_centers: AttributeCenters,
    pub within_class_spread: f64,
    /// Probability that a layer transition gets an extra split or merge edge.
    pub split_merge_rate: f64,
}

/// Contents of a generator spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub feature_dimension: usize,
    pub classes: Vec<ClassSpec>,
}

impl ClassSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |message: &str| {
            Err(SynthError::InvalidSpec {
                label: self.class_label.clone(),
                message: message.to_string(),
            })
        };
        let c = &self.attribute_centers;
        let centers = [
            c.pixel_weight,
            c.gaussian_mean,
            c.gaussian_variance,
            c.divergence,
            c.time_delay,
            c.pixel_flow,
            c.gaussian_evolution,
            c.mutual_information,
        ];
        if self.count == 0 {
            fail("count must be at least 1")
        } else if self.layers == 0 {
            fail("layers must be at least 1")
        } else if self.vertices_per_layer.0 == 0 || self.vertices_per_layer.0 > self.vertices_per_layer.1 {
            fail("vertices_per_layer must be a range [min, max] with 1 <= min <= max")
        } else if !(self.within_class_spread.is_finite() && self.within_class_spread >= 0.0) {
            fail("within_class_spread must be finite and nonnegative")
        } else if !(0.0..=1.0).contains(&self.split_merge_rate) {
            fail("split_merge_rate must be in [0, 1]")
        } else if centers.iter().any(|x| !x.is_finite()) {
            fail("attribute centers must be finite")
        } else if !(MIN_VARIANCE..=MAX_VARIANCE).contains(&c.gaussian_variance) {
            fail("gaussian_variance must be in [0.5, 2.0]")
        } else if c.time_delay <= 0.0 {
            fail("time_delay must be positive")
        } else if [c.pixel_weight, c.divergence, c.pixel_flow, c.gaussian_evolution, c.mutual_information]
            .iter()
            .any(|x| *x < 0.0)
        {
            fail("nonnegative attributes need nonnegative centers")
        } else {
            Ok(())
        }
    }
}

struct Jitter<'r> {
    rng: &'r mut ChaCha8Rng,
    spread: f64,
}

impl Jitter<'_> {
    fn around(&mut self, center: f64) -> f64 {
        let z: f64 = StandardNormal.sample(self.rng);
        center + self.spread * z
    }

    fn nonnegative(&mut self, center: f64) -> f64 {
        self.around(center).max(0.0)
    }
}

/// Base edges connect vertex `i` to vertex `i` of the next layer (the last
/// vertex absorbs any surplus), which keeps every vertex on a trajectory.
fn transition_edges(n_from: usize, n_to: usize) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = (0..n_from.max(n_to))
        .map(|i| (i.min(n_from - 1), i.min(n_to - 1)))
        .collect();
    pairs.dedup();
    pairs
}

fn build_graph(
    rng: &mut ChaCha8Rng,
    spec: &ClassSpec,
    d: usize,
) -> GraphPattern {
    let c = spec.attribute_centers;
    let (lo, hi) = spec.vertices_per_layer;
    let sizes: Vec<usize> = (0..spec.layers).map(|_| rng.random_range(lo..=hi)).collect();
    let vid = |t: usize, k: usize| format!("v{t}_{k}");

    let mut vertices = Vec::new();
    let mut jitter = Jitter {
        rng,
        spread: spec.within_class_spread,
    };
    for (t, &n) in sizes.iter().enumerate() {
        for k in 0..n {
            let mean = (0..d).map(|_| jitter.around(c.gaussian_mean)).collect();
            let mut covariance = vec![vec![0.0; d]; d];
            for (i, row) in covariance.iter_mut().enumerate() {
                row[i] = jitter.around(c.gaussian_variance).clamp(MIN_VARIANCE, MAX_VARIANCE);
            }
            vertices.push(Vertex {
                id: vid(t, k),
                time_index: t as u32,
                pixel_weight: jitter.nonnegative(c.pixel_weight),
                gaussian: GaussianParams::new(mean, covariance),
                divergence: jitter.nonnegative(c.divergence),
            });
        }
    }

    let mut edges = Vec::new();
    for t in 0..sizes.len().saturating_sub(1) {
        let mut pairs = transition_edges(sizes[t], sizes[t + 1]);
        if spec.split_merge_rate > 0.0 && jitter.rng.random_bool(spec.split_merge_rate) {
            let extra = (jitter.rng.random_range(0..sizes[t]), jitter.rng.random_range(0..sizes[t + 1]));
            if !pairs.contains(&extra) {
                pairs.push(extra);
            }
        }
        for (a, b) in pairs {
            edges.push(Edge {
                from: vid(t, a),
                to: vid(t + 1, b),
                time_delay: jitter.around(c.time_delay).max(MIN_TIME_DELAY),
                pixel_flow: jitter.nonnegative(c.pixel_flow),
                gaussian_evolution: jitter.nonnegative(c.gaussian_evolution),
                mutual_information: jitter.nonnegative(c.mutual_information),
            });
        }
    }

    GraphPattern {
        id: String::new(),
        vertices,
        edges,
        metadata: None,
    }
}

/// Draws every class's graphs, shuffles them and assigns neutral ids.
/// Returns the corpus and the `graph id -> class label` ground truth.
pub fn generate_corpus(
    specs: &[ClassSpec],
    d: usize,
    seed: u64,
) -> Result<(Corpus, BTreeMap<String, String>), SynthError> {
    if specs.is_empty() {
        return Err(SynthError::Empty);
    }
    if d == 0 {
        return Err(SynthError::ZeroDimension);
    }
    for s in specs {
        s.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drawn: Vec<(GraphPattern, &str)> = Vec::new();
    for spec in specs {
        for _ in 0..spec.count {
            drawn.push((build_graph(&mut rng, spec, d), &spec.class_label));
        }
    }
    drawn.shuffle(&mut rng);

    let width = drawn.len().saturating_sub(1).to_string().len().max(4);
    let mut truth = BTreeMap::new();
    let mut graphs = Vec::with_capacity(drawn.len());
    for (index, (mut g, label)) in drawn.into_iter().enumerate() {
        g.id = format!("g{index:0width$}");
        g.metadata = Some(json!({"generator": GENERATOR_NAME, "seed": seed, "index": index}));
        truth.insert(g.id.clone(), label.to_string());
        graphs.push(g);
    }
    Ok((Corpus::new(d, graphs)?, truth))
}

/// Two classes, `"positive"` and `"negative"`, whose prototypes differ by
/// `separation` in every attribute, with a fixed layer structure so that
/// within-class graphs always admit a complete vertex matching.
pub fn two_class_specs(per_class: usize, spread: f64, separation: f64, layers: u32, vertices_per_layer: usize) -> Vec<ClassSpec> {
    let base = AttributeCenters {
        pixel_weight: 1.0,
        gaussian_mean: 0.0,
        gaussian_variance: 1.0,
        divergence: 1.0,
        time_delay: 1.0,
        pixel_flow: 1.0,
        gaussian_evolution: 1.0,
        mutual_information: 1.0,
    };
    let shifted = AttributeCenters {
        pixel_weight: base.pixel_weight + separation,
        gaussian_mean: base.gaussian_mean + separation,
        gaussian_variance: base.gaussian_variance,
        divergence: base.divergence + separation,
        time_delay: base.time_delay + separation,
        pixel_flow: base.pixel_flow + separation,
        gaussian_evolution: base.gaussian_evolution + separation,
        mutual_information: base.mutual_information + separation,
    };
    [("positive", base), ("negative", shifted)]
        .into_iter()
        .map(|(label, centers)| ClassSpec {
            class_label: label.to_string(),
            count: per_class,
            layers,
            vertices_per_layer: (vertices_per_layer, vertices_per_layer),
            attribute_centers: centers,
            within_class_spread: spread,
            split_merge_rate: 0.0,
        })
        .collect()
}

/// A single random valid graph with unit-scale attributes, used by property
/// tests and benchmarks. Every vertex gets an edge to the next layer with
/// probability `edge_probability`, plus the base trajectory edges.
pub fn random_graph<R: Rng + ?Sized>(
    rng: &mut R,
    id: &str,
    d: usize,
    layers: u32,
    vertices_per_layer: (usize, usize),
    edge_probability: f64,
) -> GraphPattern {
    let sizes: Vec<usize> = (0..layers)
        .map(|_| rng.random_range(vertices_per_layer.0..=vertices_per_layer.1))
        .collect();
    let vid = |t: usize, k: usize| format!("v{t}_{k}");
    let mut vertices = Vec::new();
    for (t, &n) in sizes.iter().enumerate() {
        for k in 0..n {
            let mean = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut covariance = vec![vec![0.0; d]; d];
            for (i, row) in covariance.iter_mut().enumerate() {
                row[i] = rng.random_range(MIN_VARIANCE..=MAX_VARIANCE);
            }
            vertices.push(Vertex {
                id: vid(t, k),
                time_index: t as u32,
                pixel_weight: rng.random_range(0.0..1.0),
                gaussian: GaussianParams::new(mean, covariance),
                divergence: rng.random_range(0.0..1.0),
            });
        }
    }
    let mut edges = Vec::new();
    for t in 0..sizes.len().saturating_sub(1) {
        for a in 0..sizes[t] {
            for b in 0..sizes[t + 1] {
                if rng.random_bool(edge_probability) {
                    edges.push(Edge {
                        from: vid(t, a),
                        to: vid(t + 1, b),
                        time_delay: rng.random_range(0.1..2.0),
                        pixel_flow: rng.random_range(0.0..1.0),
                        gaussian_evolution: rng.random_range(0.0..1.0),
                        mutual_information: rng.random_range(0.0..1.0),
                    });
                }
            }
        }
    }
    GraphPattern {
        id: id.to_string(),
        vertices,
        edges,
        metadata: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn centers(offset: f64) -> AttributeCenters {
        AttributeCenters {
            pixel_weight: 1.0 + offset,
            gaussian_mean: offset,
            gaussian_variance: 1.0,
            divergence: 0.5 + offset,
            time_delay: 1.0 + offset,
            pixel_flow: 0.5 + offset,
            gaussian_evolution: 0.5 + offset,
            mutual_information: 0.5 + offset,
        }
    }

    fn class(label: &str, count: usize, offset: f64, spread: f64) -> ClassSpec {
        ClassSpec {
            class_label: label.into(),
            count,
            layers: 3,
            vertices_per_layer: (1, 3),
            attribute_centers: centers(offset),
            within_class_spread: spread,
            split_merge_rate: 0.5,
        }
    }

    #[test]
    fn transition_edges_cover_both_layers() {
        assert_eq!(transition_edges(1, 1), vec![(0, 0)]);
        assert_eq!(transition_edges(1, 2), vec![(0, 0), (0, 1)]);
        assert_eq!(transition_edges(3, 1), vec![(0, 0), (1, 0), (2, 0)]);
        assert_eq!(transition_edges(2, 3), vec![(0, 0), (1, 1), (1, 2)]);
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        let specs = [class("a", 4, 0.0, 0.1), class("b", 3, 2.0, 0.1)];
        let (c1, t1) = generate_corpus(&specs, 2, 7).unwrap();
        let (c2, t2) = generate_corpus(&specs, 2, 7).unwrap();
        assert_eq!(crate::graph_model::save_corpus(&c1), crate::graph_model::save_corpus(&c2));
        assert_eq!(t1, t2);
        assert_eq!(c1.len(), 7);
        assert_eq!(t1.values().filter(|l| *l == "a").count(), 4);
        let (c3, _) = generate_corpus(&specs, 2, 8).unwrap();
        assert_ne!(c1, c3);
    }

    #[test]
    fn metadata_names_generator() {
        let (c, _) = generate_corpus(&[class("a", 1, 0.0, 0.0)], 1, 3).unwrap();
        let meta = c.graphs()[0].metadata.as_ref().unwrap();
        assert_eq!(meta["generator"], "chacha8");
        assert_eq!(meta["seed"], 3);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = class("a", 0, 0.0, 0.1);
        assert!(matches!(generate_corpus(&[s.clone()], 2, 1), Err(SynthError::InvalidSpec { .. })));
        s.count = 1;
        s.vertices_per_layer = (3, 2);
        assert!(generate_corpus(&[s.clone()], 2, 1).is_err());
        s.vertices_per_layer = (1, 2);
        s.split_merge_rate = 1.5;
        assert!(generate_corpus(&[s.clone()], 2, 1).is_err());
        s.split_merge_rate = 0.0;
        s.within_class_spread = -1.0;
        assert!(generate_corpus(&[s], 2, 1).is_err());
        assert!(matches!(generate_corpus(&[], 2, 1), Err(SynthError::Empty)));
    }

    #[test]
    fn random_graphs_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..50 {
            let g = random_graph(&mut rng, &format!("r{i}"), 2, 3, (1, 3), 0.5);
            let report = crate::graph_model::validate_graph(&g, 2);
            assert!(report.is_empty(), "{report}");
        }
    }
}
