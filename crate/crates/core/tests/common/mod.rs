#![allow(dead_code)]

use anomix::graph::AttributedGraph;
use anomix::linalg::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdős–Rényi graph with dense uniform attributes.
pub fn random_graph(n: usize, d: usize, p: f64, seed: u64) -> AttributedGraph {
    let mut r = rng(seed);
    let attrs = Matrix::from_vec(n, d, (0..n * d).map(|_| r.random_range(0.0..1.0)).collect()).unwrap();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    AttributedGraph::from_edges(attrs, &edges).unwrap()
}

/// `blocks` communities on a ring of `n` nodes. Each community shares a
/// sparse binary attribute profile (a few bits flipped per node) and is
/// densely wired inside.
pub fn community_graph(n: usize, blocks: usize, d: usize, seed: u64) -> AttributedGraph {
    let mut r = rng(seed);
    let block_of = |i: usize| i * blocks / n;
    let profiles: Vec<Vec<bool>> = (0..blocks)
        .map(|_| (0..d).map(|_| r.random::<f64>() < 0.3).collect())
        .collect();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        for &on in &profiles[block_of(i)] {
            let bit = on ^ (r.random::<f64>() < 0.05);
            data.push(if bit { 1.0 } else { 0.0 });
        }
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if block_of(u) == block_of(v) { 0.5 } else { 0.01 };
            if r.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    AttributedGraph::from_edges(Matrix::from_vec(n, d, data).unwrap(), &edges).unwrap()
}

/// Community graph whose first `anomalies` nodes get the profile of a
/// different community, labelled as anomalies.
pub fn planted_attribute_graph(n: usize, d: usize, anomalies: usize, seed: u64) -> AttributedGraph {
    let g = community_graph(n, 2, d, seed);
    let mut attrs = g.attributes().clone();
    let far = n - 1; // a node of the other community
    for i in 0..anomalies {
        let row = g.attribute_row(far).to_vec();
        attrs.row_mut(i).copy_from_slice(&row);
    }
    g.with_attributes(attrs)
        .unwrap()
        .with_labels((0..n).map(|i| i < anomalies).collect())
        .unwrap()
}

/// Ring-of-cliques style graph where anomalies sit among normal neighbours
/// and carry an attribute offset of `delta` in every dimension.
pub fn offset_graph(n: usize, d: usize, anomalies: usize, delta: f64, seed: u64) -> AttributedGraph {
    let mut r = rng(seed);
    let mut data = Vec::with_capacity(n * d);
    let is_anomaly = |i: usize| i.is_multiple_of(n / anomalies) && i / (n / anomalies) < anomalies;
    for i in 0..n {
        for _ in 0..d {
            let base: f64 = r.random_range(0.0..1.0);
            data.push(if is_anomaly(i) { base + delta } else { base });
        }
    }
    let mut edges = Vec::new();
    for u in 0..n {
        // a ring plus random chords keeps every node well connected
        edges.push((u, (u + 1) % n));
        for _ in 0..2 {
            let v = r.random_range(0..n);
            if v != u {
                edges.push((u, v));
            }
        }
    }
    AttributedGraph::from_edges(Matrix::from_vec(n, d, data).unwrap(), &edges)
        .unwrap()
        .with_labels((0..n).map(is_anomaly).collect())
        .unwrap()
}

/// Writes `edges.txt`, `attrs.csv` and (if labelled) `labels.csv` under
/// `dir/name`, the layout a dataset directory uses.
pub fn write_dataset(graph: &AttributedGraph, dir: &std::path::Path, name: &str) -> std::path::PathBuf {
    let root = dir.join(name);
    std::fs::create_dir_all(&root).unwrap();
    anomix::graph::save_edges(graph, root.join("edges.txt")).unwrap();
    anomix::graph::save_attributes(graph, root.join("attrs.csv")).unwrap();
    if graph.labels().is_some() {
        anomix::graph::save_labels(graph, root.join("labels.csv")).unwrap();
    }
    root
}
