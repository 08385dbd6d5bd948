//! Synthetic anomaly injection: dense cliques (structural) and attribute
//! replacement with the most distant of a random candidate set (contextual).

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::linalg::l2_distance;
use crate::rng::{self, domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectionConfig {
    pub clique_size: usize,
    pub num_cliques: usize,
    pub num_attr_targets: usize,
    pub candidate_pool: usize,
    pub seed: u64,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        Self::for_budget(150, 15, 0)
    }
}

impl InjectionConfig {
    /// Splits an anomaly budget evenly between clique members and attribute
    /// targets (150 with c = 15 gives 5 cliques and 75 attribute anomalies).
    pub fn for_budget(total: usize, clique_size: usize, seed: u64) -> Self {
        let num_cliques = (total / 2).checked_div(clique_size).unwrap_or(0);
        Self {
            clique_size,
            num_cliques,
            num_attr_targets: total - num_cliques * clique_size,
            candidate_pool: 50,
            seed,
        }
    }

    pub fn total(&self) -> usize {
        self.num_cliques * self.clique_size + self.num_attr_targets
    }

    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        if self.num_cliques > 0 && self.clique_size < 2 {
            return Err(Error::Argument(format!(
                "clique size must be at least 2, got {}",
                self.clique_size
            )));
        }
        if self.total() > num_nodes {
            return Err(Error::Capacity(format!(
                "{} anomalies requested but the graph has {num_nodes} nodes",
                self.total()
            )));
        }
        Ok(())
    }
}

fn normal_nodes(graph: &AttributedGraph) -> Vec<usize> {
    (0..graph.num_nodes()).filter(|&i| !graph.is_anomaly(i)).collect()
}

fn labels_or_default(graph: &AttributedGraph) -> Vec<bool> {
    graph
        .labels()
        .map(<[bool]>::to_vec)
        .unwrap_or_else(|| vec![false; graph.num_nodes()])
}

/// Turns `num_cliques` node-disjoint groups of `clique_size` currently
/// normal nodes into cliques and labels their members anomalous.
pub fn inject_structural(graph: &AttributedGraph, cfg: &InjectionConfig) -> Result<AttributedGraph> {
    cfg.validate(graph.num_nodes())?;
    let mut pool = normal_nodes(graph);
    let needed = cfg.num_cliques * cfg.clique_size;
    if needed > pool.len() {
        return Err(Error::Capacity(format!(
            "{needed} clique members requested, only {} unlabelled nodes",
            pool.len()
        )));
    }
    let mut rng = rng::stream(cfg.seed, &[domain::INJECT_STRUCT]);
    pool.shuffle(&mut rng);
    let mut edges = graph.edges();
    let mut labels = labels_or_default(graph);
    for clique in pool[..needed].chunks(cfg.clique_size) {
        for (a, &u) in clique.iter().enumerate() {
            labels[u] = true;
            for &v in &clique[a + 1..] {
                if !graph.has_edge(u, v) {
                    edges.push((u, v));
                }
            }
        }
    }
    graph.with_edges(&edges)?.with_labels(labels)
}

/// For each of `num_attr_targets` normal nodes, copies the attributes of
/// the farthest (Euclidean) of `candidate_pool` random other nodes.
/// Candidates are compared on the attributes as they were before injection.
pub fn inject_attribute(graph: &AttributedGraph, cfg: &InjectionConfig) -> Result<AttributedGraph> {
    cfg.validate(graph.num_nodes())?;
    let n = graph.num_nodes();
    if cfg.num_attr_targets == 0 {
        return Ok(graph.clone());
    }
    if cfg.candidate_pool == 0 || cfg.candidate_pool > n.saturating_sub(1) {
        return Err(Error::Argument(format!(
            "candidate pool {} must be in 1..={}",
            cfg.candidate_pool,
            n.saturating_sub(1)
        )));
    }
    let mut pool = normal_nodes(graph);
    if cfg.num_attr_targets > pool.len() {
        return Err(Error::Capacity(format!(
            "{} attribute targets requested, only {} unlabelled nodes",
            cfg.num_attr_targets,
            pool.len()
        )));
    }
    let mut rng = rng::stream(cfg.seed, &[domain::INJECT_ATTR]);
    pool.shuffle(&mut rng);
    let original = graph.attributes();
    let mut attrs = original.clone();
    let mut labels = labels_or_default(graph);
    for &target in &pool[..cfg.num_attr_targets] {
        // draw from the n-1 other nodes, shifting indices past the target
        let best = index::sample(&mut rng, n - 1, cfg.candidate_pool)
            .into_iter()
            .map(|j| if j >= target { j + 1 } else { j })
            .map(|j| (j, l2_distance(original.row(target), original.row(j))))
            .fold(None::<(usize, f64)>, |best, (j, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((j, d)),
            })
            .map(|(j, _)| j)
            .expect("candidate pool is non-empty");
        attrs.row_mut(target).copy_from_slice(original.row(best));
        labels[target] = true;
    }
    graph.with_attributes(attrs)?.with_labels(labels)
}

/// Structural then attribute injection with one config.
pub fn inject(graph: &AttributedGraph, cfg: &InjectionConfig) -> Result<AttributedGraph> {
    cfg.validate(graph.num_nodes())?;
    let g = inject_structural(graph, cfg)?;
    inject_attribute(&g, cfg)
}
