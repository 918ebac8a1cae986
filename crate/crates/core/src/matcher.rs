//! Inexact graph matching between two patterns.
//!
//! A mapping assigns every vertex of the first graph either to a vertex of the
//! second graph in the same (0-aligned) time layer or to the null vertex λ
//! (deletion); second-graph vertices left unassigned are insertions. The cost
//! of a mapping accumulates, per attribute:
//!
//! - the raw distance of every matched vertex pair and of every edge pair
//!   induced between matched vertex pairs, divided by that attribute's scale;
//! - `deletion_penalty` for every deleted or inserted vertex (vertex
//!   attributes) and for every edge present on only one side (edge
//!   attributes).
//!
//! Each accumulated attribute cost is clamped to 1 and the weighted sum over
//! attributes is the total. [`match_graphs`] finds the cheapest mapping with a
//! depth-first branch-and-bound; [`brute_force_match`] enumerates every
//! mapping and serves as its oracle.

use std::cmp::Ordering;
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distances::{
    edge_cost_vector, vertex_cost_vector, AttributeId, CostVector, DistanceError, ScaleVector,
    ATTRIBUTE_COUNT,
};
use crate::graph_model::GraphPattern;

/// Largest `|V1| + |V2|` the exhaustive oracle accepts.
pub const BRUTE_FORCE_LIMIT: usize = 10;

const LAMBDA_RANK: u32 = u32::MAX;

/// Per-attribute weights, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub [f64; ATTRIBUTE_COUNT]);

impl ParameterVector {
    pub fn new(weights: [f64; ATTRIBUTE_COUNT]) -> Result<Self, MatchError> {
        let phi = Self(weights);
        if phi.is_valid() {
            Ok(phi)
        } else {
            Err(MatchError::InvalidParameters)
        }
    }

    pub fn uniform(weight: f64) -> Self {
        Self([weight; ATTRIBUTE_COUNT])
    }

    pub fn is_valid(&self) -> bool {
        self.0.iter().all(|x| x.is_finite() && (0.0..=1.0).contains(x))
    }

    pub fn get(&self, a: AttributeId) -> f64 {
        self.0[a.index()]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// 0 runs the exact search; `b > 0` expands only the `b` cheapest
    /// children of every search node.
    pub beam_width: usize,
    pub deletion_penalty: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            beam_width: 0,
            deletion_penalty: 1.0,
        }
    }
}

impl MatchConfig {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn beam(width: usize) -> Self {
        Self {
            beam_width: width,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), MatchError> {
        if self.deletion_penalty > 0.0 && self.deletion_penalty <= 1.0 {
            Ok(())
        } else {
            Err(MatchError::InvalidConfig(format!(
                "deletion_penalty must be in (0, 1], got {}",
                self.deletion_penalty
            )))
        }
    }
}

/// How accumulated per-attribute distances turn into a cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub scales: ScaleVector,
    pub deletion_penalty: f64,
    /// Clamp each attribute's accumulated cost at 1.
    pub clamp: bool,
}

impl CostModel {
    pub fn normalized(scales: ScaleVector, deletion_penalty: f64) -> Self {
        Self {
            scales,
            deletion_penalty,
            clamp: true,
        }
    }

    fn attribute_cost(&self, acc: &Accumulator, a: AttributeId) -> f64 {
        let l = a.index();
        let value =
            acc.matched.0[l] / self.scales.0[l] + self.deletion_penalty * acc.structural[l] as f64;
        if self.clamp {
            value.min(1.0)
        } else {
            value
        }
    }

    fn per_attribute(&self, acc: &Accumulator) -> CostVector {
        let mut out = CostVector::zero();
        for a in AttributeId::ALL {
            out[a] = self.attribute_cost(acc, a);
        }
        out
    }

    fn total(&self, phi: &ParameterVector, acc: &Accumulator) -> f64 {
        weighted_sum(phi, &self.per_attribute(acc))
    }
}

fn weighted_sum(phi: &ParameterVector, costs: &CostVector) -> f64 {
    AttributeId::ALL
        .iter()
        .map(|&a| phi.get(a) * costs[a])
        .sum()
}

/// Unnormalized breakdown of a mapping's cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawCosts {
    /// Summed raw distances over matched vertex and edge pairs.
    pub matched: CostVector,
    /// Count of deletions, insertions and dangling edges charged per attribute.
    pub structural: [u32; ATTRIBUTE_COUNT],
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Accumulator {
    matched: CostVector,
    structural: [u32; ATTRIBUTE_COUNT],
}

impl Accumulator {
    fn zero() -> Self {
        Self {
            matched: CostVector::zero(),
            structural: [0; ATTRIBUTE_COUNT],
        }
    }

    fn add_matched(&mut self, c: &CostVector) {
        self.matched.add_assign(c);
    }

    fn add_vertex_structural(&mut self, count: u32) {
        for a in AttributeId::VERTEX {
            self.structural[a.index()] += count;
        }
    }

    fn add_edge_structural(&mut self, count: u32) {
        for a in AttributeId::EDGE {
            self.structural[a.index()] += count;
        }
    }

    fn into_raw(self) -> RawCosts {
        RawCosts {
            matched: self.matched,
            structural: self.structural,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub source: String,
    /// `None` is the null vertex λ.
    pub target: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mapping {
    /// One entry per vertex of the first graph, in search order.
    pub assignments: Vec<Assignment>,
}

impl Mapping {
    pub fn target_of(&self, source: &str) -> Option<Option<&str>> {
        self.assignments
            .iter()
            .find(|a| a.source == source)
            .map(|a| a.target.as_deref())
    }

    pub fn is_injective(&self) -> bool {
        let mut targets: Vec<&str> = self
            .assignments
            .iter()
            .filter_map(|a| a.target.as_deref())
            .collect();
        let n = targets.len();
        targets.sort_unstable();
        targets.dedup();
        targets.len() == n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub total_cost: f64,
    /// Normalized per-attribute costs; `total_cost = Σ φ_l · per_attribute_l`.
    pub per_attribute: CostVector,
    pub mapping: Mapping,
    /// False when beam truncation discarded part of the search tree.
    pub exact: bool,
    pub raw: RawCosts,
}

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error("match cancelled")]
    Cancelled,
    #[error("brute force refused: {vertices} vertices exceed the limit of {limit}")]
    TooLarge { vertices: usize, limit: usize },
    #[error("invalid matcher configuration: {0}")]
    InvalidConfig(String),
    #[error("parameter weights must be finite and within [0, 1]")]
    InvalidParameters,
    #[error("scales must be finite and positive")]
    InvalidScales,
}

/// Cooperative cancellation flag, checked at every node expansion.
#[derive(Debug, Clone, Default)]
pub struct CancellationToken(Arc<AtomicBool>);

impl CancellationToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, AtomicOrdering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(AtomicOrdering::Relaxed)
    }
}

/// Precomputed distances and adjacency for one graph pair.
struct Problem<'a> {
    g1: &'a GraphPattern,
    g2: &'a GraphPattern,
    /// First-graph vertex indices in search order (layer, then position).
    order: Vec<usize>,
    /// Per search position: same-layer second-graph vertices sorted by id.
    candidates: Vec<Vec<usize>>,
    /// Rank of each second-graph vertex in id order (tie-breaking key).
    rank2: Vec<u32>,
    vertex_costs: Vec<Vec<Option<CostVector>>>,
    edge_costs: Vec<Vec<CostVector>>,
    adj1: Vec<Vec<Option<usize>>>,
    adj2: Vec<Vec<Option<usize>>>,
    layer1: Vec<usize>,
    layer2: Vec<usize>,
    layer_count: usize,
}

fn adjacency(g: &GraphPattern) -> Vec<Vec<Option<usize>>> {
    let n = g.vertices.len();
    let pos = |id: &str| g.vertices.iter().position(|v| v.id == id);
    let mut adj = vec![vec![None; n]; n];
    for (k, e) in g.edges.iter().enumerate() {
        if let (Some(a), Some(b)) = (pos(&e.from), pos(&e.to)) {
            adj[a][b] = Some(k);
        }
    }
    adj
}

impl<'a> Problem<'a> {
    fn new(g1: &'a GraphPattern, g2: &'a GraphPattern) -> Result<Self, MatchError> {
        let d1 = g1.vertices.first().map(|v| v.gaussian.dimension());
        let d2 = g2.vertices.first().map(|v| v.gaussian.dimension());
        if let (Some(d1), Some(d2)) = (d1, d2) {
            if d1 != d2 {
                return Err(DistanceError::DimensionMismatch(d1, d2).into());
            }
        }

        let order = g1.topological_order();
        let mut by_id: Vec<usize> = (0..g2.vertices.len()).collect();
        by_id.sort_by(|&a, &b| g2.vertices[a].id.cmp(&g2.vertices[b].id));
        let mut rank2 = vec![0u32; g2.vertices.len()];
        for (r, &i) in by_id.iter().enumerate() {
            rank2[i] = r as u32;
        }
        let candidates = order
            .iter()
            .map(|&i| {
                let t = g1.vertices[i].time_index;
                by_id
                    .iter()
                    .copied()
                    .filter(|&j| g2.vertices[j].time_index == t)
                    .collect()
            })
            .collect();

        let mut vertex_costs = vec![vec![None; g2.vertices.len()]; g1.vertices.len()];
        for (i, v1) in g1.vertices.iter().enumerate() {
            for (j, v2) in g2.vertices.iter().enumerate() {
                if v1.time_index == v2.time_index {
                    vertex_costs[i][j] = Some(vertex_cost_vector(v1, v2)?);
                }
            }
        }
        let edge_costs = g1
            .edges
            .iter()
            .map(|e1| g2.edges.iter().map(|e2| edge_cost_vector(e1, e2)).collect())
            .collect::<Result<Vec<Vec<_>>, _>>()?;

        let layer1: Vec<usize> = g1.vertices.iter().map(|v| v.time_index as usize).collect();
        let layer2: Vec<usize> = g2.vertices.iter().map(|v| v.time_index as usize).collect();
        let layer_count = layer1.iter().chain(&layer2).map(|t| t + 1).max().unwrap_or(0);

        Ok(Self {
            g1,
            g2,
            order,
            candidates,
            rank2,
            vertex_costs,
            edge_costs,
            adj1: adjacency(g1),
            adj2: adjacency(g2),
            layer1,
            layer2,
            layer_count,
        })
    }

    /// Charges assigning search position `k` to `choice`, given the choices
    /// already made for positions `0..k`.
    fn extend(&self, acc: &mut Accumulator, k: usize, choice: Option<usize>, prefix: &[Option<usize>]) {
        let v = self.order[k];
        match choice {
            Some(w) => {
                let c = self.vertex_costs[v][w].as_ref().expect("candidate shares the layer");
                acc.add_matched(c);
            }
            None => acc.add_vertex_structural(1),
        }
        for (k2, &prev_choice) in prefix.iter().enumerate() {
            let u = self.order[k2];
            for (from1, to1, from2, to2) in [(u, v, prev_choice, choice), (v, u, choice, prev_choice)] {
                let e1 = self.adj1[from1][to1];
                let e2 = match (from2, to2) {
                    (Some(a), Some(b)) => self.adj2[a][b],
                    _ => None,
                };
                match (e1, e2) {
                    (Some(x), Some(y)) => acc.add_matched(&self.edge_costs[x][y]),
                    (Some(_), None) | (None, Some(_)) => acc.add_edge_structural(1),
                    (None, None) => {}
                }
            }
        }
    }

    /// Charges the insertions left once every first-graph vertex is assigned.
    fn finish(&self, acc: &mut Accumulator, used2: &[bool]) {
        let inserted = used2.iter().filter(|u| !**u).count() as u32;
        acc.add_vertex_structural(inserted);
        let pos = |id: &str| self.g2.vertices.iter().position(|v| v.id == id);
        let dangling = self
            .g2
            .edges
            .iter()
            .filter(|e| match (pos(&e.from), pos(&e.to)) {
                (Some(a), Some(b)) => !used2[a] || !used2[b],
                _ => false,
            })
            .count() as u32;
        acc.add_edge_structural(dangling);
    }

    fn mapping(&self, assignment: &[Option<usize>]) -> Mapping {
        Mapping {
            assignments: assignment
                .iter()
                .enumerate()
                .map(|(k, choice)| Assignment {
                    source: self.g1.vertices[self.order[k]].id.clone(),
                    target: choice.map(|w| self.g2.vertices[w].id.clone()),
                })
                .collect(),
        }
    }

    fn rank(&self, choice: Option<usize>) -> u32 {
        choice.map_or(LAMBDA_RANK, |w| self.rank2[w])
    }
}

struct Best {
    cost: f64,
    ranks: Vec<u32>,
    assignment: Vec<Option<usize>>,
    acc: Accumulator,
}

struct Child {
    bound: f64,
    rank: u32,
    choice: Option<usize>,
    acc: Accumulator,
}

struct Search<'p, 'a> {
    problem: &'p Problem<'a>,
    phi: &'p ParameterVector,
    model: &'p CostModel,
    beam_width: usize,
    cancel: Option<&'p CancellationToken>,
    assignment: Vec<Option<usize>>,
    ranks: Vec<u32>,
    used2: Vec<bool>,
    remaining1: Vec<u32>,
    available2: Vec<u32>,
    best: Option<Best>,
    truncated: bool,
}

impl<'p, 'a> Search<'p, 'a> {
    fn new(
        problem: &'p Problem<'a>,
        phi: &'p ParameterVector,
        model: &'p CostModel,
        beam_width: usize,
        cancel: Option<&'p CancellationToken>,
    ) -> Self {
        let mut remaining1 = vec![0u32; problem.layer_count];
        for &t in &problem.layer1 {
            remaining1[t] += 1;
        }
        let mut available2 = vec![0u32; problem.layer_count];
        for &t in &problem.layer2 {
            available2[t] += 1;
        }
        Self {
            problem,
            phi,
            model,
            beam_width,
            cancel,
            assignment: Vec::with_capacity(problem.order.len()),
            ranks: Vec::with_capacity(problem.order.len()),
            used2: vec![false; problem.g2.vertices.len()],
            remaining1,
            available2,
            best: None,
            truncated: false,
        }
    }

    /// Deletions and insertions that every completion must still pay.
    fn forced_structural(&self) -> u32 {
        self.remaining1
            .iter()
            .zip(&self.available2)
            .map(|(&a, &b)| a.abs_diff(b))
            .sum()
    }

    fn lower_bound(&self, acc: &Accumulator) -> f64 {
        let mut bounded = *acc;
        bounded.add_vertex_structural(self.forced_structural());
        self.model.total(self.phi, &bounded)
    }

    fn dominated(&self, bound: f64, rank: u32) -> bool {
        let Some(best) = &self.best else {
            return false;
        };
        match bound.total_cmp(&best.cost) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => {
                let depth = self.ranks.len();
                let prefix = self.ranks.iter().copied().chain(std::iter::once(rank));
                prefix.cmp(best.ranks[..=depth].iter().copied()) == Ordering::Greater
            }
        }
    }

    fn run(&mut self, acc: Accumulator) -> Result<(), MatchError> {
        if self.cancel.is_some_and(|c| c.is_cancelled()) {
            return Err(MatchError::Cancelled);
        }
        let k = self.assignment.len();
        if k == self.problem.order.len() {
            let mut leaf = acc;
            self.problem.finish(&mut leaf, &self.used2);
            let cost = self.model.total(self.phi, &leaf);
            let better = match &self.best {
                None => true,
                Some(best) => match cost.total_cmp(&best.cost) {
                    Ordering::Less => true,
                    Ordering::Equal => self.ranks < best.ranks,
                    Ordering::Greater => false,
                },
            };
            if better {
                self.best = Some(Best {
                    cost,
                    ranks: self.ranks.clone(),
                    assignment: self.assignment.clone(),
                    acc: leaf,
                });
            }
            return Ok(());
        }

        let v = self.problem.order[k];
        let layer = self.problem.layer1[v];
        let mut children = Vec::with_capacity(self.problem.candidates[k].len() + 1);
        let options = self.problem.candidates[k]
            .iter()
            .filter(|&&w| !self.used2[w])
            .map(|&w| Some(w))
            .chain(std::iter::once(None));
        self.remaining1[layer] -= 1;
        for choice in options {
            let mut child = acc;
            self.problem.extend(&mut child, k, choice, &self.assignment);
            if choice.is_some() {
                self.available2[layer] -= 1;
            }
            let bound = self.lower_bound(&child);
            if choice.is_some() {
                self.available2[layer] += 1;
            }
            children.push(Child {
                bound,
                rank: self.problem.rank(choice),
                choice,
                acc: child,
            });
        }
        children.sort_by(|a, b| a.bound.total_cmp(&b.bound).then(a.rank.cmp(&b.rank)));
        if self.beam_width > 0 && children.len() > self.beam_width {
            children.truncate(self.beam_width);
            self.truncated = true;
        }

        let mut outcome = Ok(());
        for child in children {
            if self.dominated(child.bound, child.rank) {
                continue;
            }
            if let Some(w) = child.choice {
                self.used2[w] = true;
                self.available2[layer] -= 1;
            }
            self.assignment.push(child.choice);
            self.ranks.push(child.rank);
            outcome = self.run(child.acc);
            self.assignment.pop();
            self.ranks.pop();
            if let Some(w) = child.choice {
                self.used2[w] = false;
                self.available2[layer] += 1;
            }
            if outcome.is_err() {
                break;
            }
        }
        self.remaining1[layer] += 1;
        outcome
    }
}

fn check_inputs(phi: &ParameterVector, model: &CostModel) -> Result<(), MatchError> {
    if !phi.is_valid() {
        return Err(MatchError::InvalidParameters);
    }
    if !model.scales.is_valid() {
        return Err(MatchError::InvalidScales);
    }
    if !(model.deletion_penalty > 0.0 && model.deletion_penalty.is_finite()) {
        return Err(MatchError::InvalidConfig("deletion penalty must be positive".into()));
    }
    Ok(())
}

/// Branch-and-bound search under an arbitrary cost model.
pub fn match_with_model(
    g1: &GraphPattern,
    g2: &GraphPattern,
    phi: &ParameterVector,
    model: &CostModel,
    beam_width: usize,
    cancel: Option<&CancellationToken>,
) -> Result<MatchResult, MatchError> {
    check_inputs(phi, model)?;
    let problem = Problem::new(g1, g2)?;
    let mut search = Search::new(&problem, phi, model, beam_width, cancel);
    search.run(Accumulator::zero())?;
    let best = search
        .best
        .take()
        .expect("the all-deletion mapping is never pruned before a leaf exists");
    let per_attribute = model.per_attribute(&best.acc);
    Ok(MatchResult {
        total_cost: weighted_sum(phi, &per_attribute),
        per_attribute,
        mapping: problem.mapping(&best.assignment),
        exact: !search.truncated,
        raw: best.acc.into_raw(),
    })
}

/// Minimum-cost mapping from `g1` to `g2`. Globally optimal when
/// `config.beam_width == 0`.
pub fn match_graphs(
    g1: &GraphPattern,
    g2: &GraphPattern,
    phi: &ParameterVector,
    scales: &ScaleVector,
    config: &MatchConfig,
) -> Result<MatchResult, MatchError> {
    config.validate()?;
    let model = CostModel::normalized(*scales, config.deletion_penalty);
    match_with_model(g1, g2, phi, &model, config.beam_width, None)
}

pub fn match_graphs_cancellable(
    g1: &GraphPattern,
    g2: &GraphPattern,
    phi: &ParameterVector,
    scales: &ScaleVector,
    config: &MatchConfig,
    cancel: &CancellationToken,
) -> Result<MatchResult, MatchError> {
    config.validate()?;
    let model = CostModel::normalized(*scales, config.deletion_penalty);
    match_with_model(g1, g2, phi, &model, config.beam_width, Some(cancel))
}

/// Normalized per-attribute costs of the jointly optimal mapping.
pub fn per_attribute_costs(
    g1: &GraphPattern,
    g2: &GraphPattern,
    phi: &ParameterVector,
    scales: &ScaleVector,
    config: &MatchConfig,
) -> Result<CostVector, MatchError> {
    Ok(match_graphs(g1, g2, phi, scales, config)?.per_attribute)
}

/// Exhaustive enumeration of every layer-preserving injective mapping.
///
/// Costs are evaluated on the complete mapping, independently of the
/// incremental bookkeeping used by the search.
pub fn brute_force_match(
    g1: &GraphPattern,
    g2: &GraphPattern,
    phi: &ParameterVector,
    scales: &ScaleVector,
    config: &MatchConfig,
) -> Result<MatchResult, MatchError> {
    config.validate()?;
    brute_force_with_model(g1, g2, phi, &CostModel::normalized(*scales, config.deletion_penalty))
}

pub fn brute_force_with_model(
    g1: &GraphPattern,
    g2: &GraphPattern,
    phi: &ParameterVector,
    model: &CostModel,
) -> Result<MatchResult, MatchError> {
    let vertices = g1.vertices.len() + g2.vertices.len();
    if vertices > BRUTE_FORCE_LIMIT {
        return Err(MatchError::TooLarge {
            vertices,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    check_inputs(phi, model)?;
    if let (Some(a), Some(b)) = (g1.vertices.first(), g2.vertices.first()) {
        if a.gaussian.dimension() != b.gaussian.dimension() {
            return Err(DistanceError::DimensionMismatch(
                a.gaussian.dimension(),
                b.gaussian.dimension(),
            )
            .into());
        }
    }

    let order = g1.topological_order();
    let mut targets: Vec<usize> = (0..g2.vertices.len()).collect();
    targets.sort_by(|&a, &b| g2.vertices[a].id.cmp(&g2.vertices[b].id));

    let mut best: Option<(f64, CostVector, Accumulator, Vec<Option<usize>>)> = None;
    let mut current = vec![None; order.len()];
    let mut error = None;
    enumerate(g1, g2, &order, &targets, 0, &mut current, &mut |assignment| {
        if error.is_some() {
            return;
        }
        match evaluate(g1, g2, &order, assignment, model) {
            Ok((per_attribute, acc)) => {
                let total = weighted_sum(phi, &per_attribute);
                if best.as_ref().is_none_or(|(b, ..)| total < *b) {
                    best = Some((total, per_attribute, acc, assignment.to_vec()));
                }
            }
            Err(e) => error = Some(e),
        }
    });
    if let Some(e) = error {
        return Err(e);
    }
    let (total_cost, per_attribute, acc, assignment) = best.expect("at least one mapping exists");
    let mapping = Mapping {
        assignments: assignment
            .iter()
            .enumerate()
            .map(|(k, t)| Assignment {
                source: g1.vertices[order[k]].id.clone(),
                target: t.map(|w| g2.vertices[w].id.clone()),
            })
            .collect(),
    };
    Ok(MatchResult {
        total_cost,
        per_attribute,
        mapping,
        exact: true,
        raw: acc.into_raw(),
    })
}

fn enumerate(
    g1: &GraphPattern,
    g2: &GraphPattern,
    order: &[usize],
    targets: &[usize],
    k: usize,
    current: &mut Vec<Option<usize>>,
    visit: &mut dyn FnMut(&[Option<usize>]),
) {
    if k == order.len() {
        visit(current);
        return;
    }
    let t = g1.vertices[order[k]].time_index;
    for &w in targets {
        if g2.vertices[w].time_index == t && !current[..k].contains(&Some(w)) {
            current[k] = Some(w);
            enumerate(g1, g2, order, targets, k + 1, current, visit);
        }
    }
    current[k] = None;
    enumerate(g1, g2, order, targets, k + 1, current, visit);
}

fn evaluate(
    g1: &GraphPattern,
    g2: &GraphPattern,
    order: &[usize],
    assignment: &[Option<usize>],
    model: &CostModel,
) -> Result<(CostVector, Accumulator), MatchError> {
    let mut image = vec![None; g1.vertices.len()];
    for (k, &t) in assignment.iter().enumerate() {
        image[order[k]] = t;
    }
    let mut covered = vec![false; g2.vertices.len()];
    let mut normalized = CostVector::zero();
    let mut acc = Accumulator::zero();
    let charge = |costs: &CostVector, acc: &mut Accumulator, normalized: &mut CostVector| {
        acc.add_matched(costs);
        for a in AttributeId::ALL {
            normalized[a] += costs[a] / model.scales[a];
        }
    };

    for (i, t) in image.iter().enumerate() {
        match t {
            Some(w) => {
                covered[*w] = true;
                let c = vertex_cost_vector(&g1.vertices[i], &g2.vertices[*w])?;
                charge(&c, &mut acc, &mut normalized);
            }
            None => acc.add_vertex_structural(1),
        }
    }
    acc.add_vertex_structural(covered.iter().filter(|c| !**c).count() as u32);

    let index1 = |id: &str| g1.vertices.iter().position(|v| v.id == id).unwrap();
    let index2 = |id: &str| g2.vertices.iter().position(|v| v.id == id).unwrap();
    let mut matched_g2_edges = vec![false; g2.edges.len()];
    for e1 in &g1.edges {
        let pair = (image[index1(&e1.from)], image[index1(&e1.to)]);
        let counterpart = match pair {
            (Some(a), Some(b)) => g2
                .edges
                .iter()
                .position(|e2| index2(&e2.from) == a && index2(&e2.to) == b),
            _ => None,
        };
        match counterpart {
            Some(k) => {
                matched_g2_edges[k] = true;
                let c = edge_cost_vector(e1, &g2.edges[k])?;
                charge(&c, &mut acc, &mut normalized);
            }
            None => acc.add_edge_structural(1),
        }
    }
    acc.add_edge_structural(matched_g2_edges.iter().filter(|m| !**m).count() as u32);

    let mut per_attribute = CostVector::zero();
    for a in AttributeId::ALL {
        let value = normalized[a] + model.deletion_penalty * acc.structural[a.index()] as f64;
        per_attribute[a] = if model.clamp { value.min(1.0) } else { value };
    }
    Ok((per_attribute, acc))
}
