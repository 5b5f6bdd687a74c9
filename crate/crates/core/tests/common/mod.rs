#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uygraph::graph::LabeledGraph;

/// Connected random labeled graph: a random spanning tree plus extra edges.
/// Every class gets at least one train node.
pub fn random_graph(seed: u64, n: usize, classes: usize, extra_edges: usize, train_frac: f64) -> LabeledGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.random_range(0..i), i));
    }
    for _ in 0..extra_edges {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        edges.push((a, b));
    }
    let labels: Vec<Option<usize>> = (0..n).map(|i| Some(if i < classes { i } else { rng.random_range(0..classes) })).collect();
    let d = 3;
    let features = Array2::from_shape_simple_fn((n, d), || rng.random_range(-1.0..1.0));
    let train: Vec<bool> = (0..n).map(|i| i < classes || rng.random::<f64>() < train_frac).collect();
    let val: Vec<bool> = (0..n).map(|i| !train[i] && i % 2 == 0).collect();
    let test: Vec<bool> = (0..n).map(|i| !train[i] && !val[i]).collect();
    LabeledGraph::new(n, edges, features, labels, classes)
        .unwrap()
        .with_masks(train, val, test)
        .unwrap()
}
