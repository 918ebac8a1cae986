#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stsem_core::matcher::ParameterVector;
use stsem_core::synth::random_graph;
use stsem_core::{GraphPattern, ScaleVector, ATTRIBUTE_COUNT};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A graph with at most `max_per_layer * max_layers` vertices.
pub fn small_graph(rng: &mut ChaCha8Rng, id: &str, d: usize, max_layers: u32, max_per_layer: usize) -> GraphPattern {
    let layers = rng.random_range(1..=max_layers);
    random_graph(rng, id, d, layers, (1, max_per_layer), 0.6)
}

pub fn random_phi(rng: &mut ChaCha8Rng) -> ParameterVector {
    let mut w = [0.0; ATTRIBUTE_COUNT];
    for x in &mut w {
        *x = rng.random_range(0.0..=1.0);
    }
    ParameterVector(w)
}

pub fn random_scales(rng: &mut ChaCha8Rng) -> ScaleVector {
    let mut s = [0.0; ATTRIBUTE_COUNT];
    for x in &mut s {
        *x = rng.random_range(0.2..3.0);
    }
    ScaleVector(s)
}
