#![allow(dead_code)]

use lemp::experiment::{SynthKind, SynthSpec};
use lemp::graph::{Graph, Split};
use lemp::models::EnhancedEdgeSet;
use lemp::ndmath::Matrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small labelled graph with random features and a random subset of its
/// edges enhanced with random messages.
pub struct Instance {
    pub graph: Graph,
    pub features: Matrix,
    pub enhanced: EnhancedEdgeSet,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::uniform(rows, cols, -1.0, 1.0, rng)
}

pub fn random_graph(n: usize, p: f64, classes: usize, rng: &mut impl Rng) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    // every class gets a node before random labels
    let labels: Vec<Option<usize>> =
        (0..n).map(|i| Some(if i < classes { i } else { rng.random_range(0..classes) })).collect();
    let splits: Vec<Split> = (0..n).map(|i| if i % 3 == 2 { Split::Val } else { Split::Train }).collect();
    Graph::build(n, &edges, labels, splits, Some(classes)).unwrap()
}

pub fn random_instance(seed: u64, n: usize, d: usize, msg_dim: usize) -> Instance {
    let mut r = rng(seed);
    let graph = random_graph(n, 0.4, 3, &mut r);
    let features = random_matrix(n, d, &mut r);
    let mut edges = graph.edges().to_vec();
    edges.shuffle(&mut r);
    let mut enhanced = EnhancedEdgeSet::new();
    for &(u, v) in edges.iter().take(edges.len().div_ceil(2)) {
        let m: Vec<f32> = (0..msg_dim).map(|_| r.random_range(-1.0f32..1.0)).collect();
        enhanced.insert(u, v, m, 0).unwrap();
    }
    Instance { graph, features, enhanced }
}

/// Malignant two-class benchmark: sparse, mostly cross-class edges and
/// low-dimensional informative features.
pub fn heterophilic_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        kind: SynthKind::Heterophilic,
        p_intra: 0.01,
        p_inter: 0.012,
        feature_noise: 0.5,
        feature_dim: 4,
        seed,
        ..SynthSpec::default()
    }
}

pub fn homophilic_spec(seed: u64) -> SynthSpec {
    SynthSpec { kind: SynthKind::Homophilic, p_intra: 0.05, p_inter: 0.005, seed, ..SynthSpec::default() }
}

pub fn cross_rate(graph: &Graph, edges: &[(usize, usize)]) -> f64 {
    let cross = edges.iter().filter(|&&(u, v)| graph.label(u) != graph.label(v)).count();
    cross as f64 / edges.len() as f64
}
