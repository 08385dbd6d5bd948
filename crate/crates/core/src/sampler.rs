//! Fixed-size ego-net sampling by random walk with restart.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalize_subgraph, AttributedGraph, NormalizedAdjacency};
use crate::linalg::Matrix;
use crate::rng::{self, domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Normal,
    Abnormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Node,
    Subgraph,
}

impl Level {
    pub const BOTH: [Level; 2] = [Level::Node, Level::Subgraph];

    pub(crate) fn tag(self) -> u64 {
        match self {
            Level::Node => 0,
            Level::Subgraph => 1,
        }
    }
}

impl Branch {
    pub(crate) fn tag(self) -> u64 {
        match self {
            Branch::Normal => 0,
            Branch::Abnormal => 1,
        }
    }
}

/// Where an ego-net attribute row comes from. Rows are kept symbolic so an
/// ego-net never copies a d-wide attribute vector; [`EgoNet::attrs`]
/// materializes the dense block on demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RowSource {
    /// Masked row.
    Zero,
    /// Attributes of a graph node.
    Node(usize),
    /// `tau · x_donor + (1 - tau) · x_base`.
    Blend { base: usize, donor: usize, tau: f64 },
}

impl RowSource {
    pub fn write_dense(&self, graph: &AttributedGraph, out: &mut [f64]) {
        match *self {
            RowSource::Zero => out.fill(0.0),
            RowSource::Node(j) => out.copy_from_slice(graph.attribute_row(j)),
            RowSource::Blend { base, donor, tau } => {
                let (xb, xd) = (graph.attribute_row(base), graph.attribute_row(donor));
                for ((o, b), d) in out.iter_mut().zip(xb).zip(xd) {
                    *o = tau * d + (1.0 - tau) * b;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub subgraph_size: usize,
    pub restart_prob: f64,
    pub max_steps: usize,
    /// Walk attempts per ego-net; the first walk that reaches K distinct nodes
    /// wins, otherwise the attempt with the most distinct nodes is padded.
    pub walks_per_node: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            subgraph_size: 4,
            restart_prob: 0.5,
            max_steps: 100,
            walks_per_node: 1,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subgraph_size < 2 {
            return Err(Error::Argument(format!(
                "subgraph size must be at least 2, got {}",
                self.subgraph_size
            )));
        }
        if !(self.restart_prob > 0.0 && self.restart_prob < 1.0) {
            return Err(Error::Argument(format!(
                "restart probability must be in (0, 1), got {}",
                self.restart_prob
            )));
        }
        if self.max_steps < self.subgraph_size {
            return Err(Error::Argument(format!(
                "max steps {} below subgraph size {}",
                self.max_steps, self.subgraph_size
            )));
        }
        if self.walks_per_node == 0 {
            return Err(Error::Argument("walks per node must be positive".into()));
        }
        Ok(())
    }
}

/// A sampled subgraph around `target`; `members[0] == target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoNet {
    pub target: usize,
    pub members: Vec<usize>,
    pub adj: NormalizedAdjacency,
    pub rows: Vec<RowSource>,
    pub branch: Branch,
    pub level: Level,
}

impl EgoNet {
    /// Builds an (unmasked) ego-net over explicit members.
    pub fn from_members(graph: &AttributedGraph, members: Vec<usize>, branch: Branch, level: Level) -> Result<Self> {
        let adj = normalize_subgraph(graph, &members)?;
        Ok(Self {
            target: members[0],
            rows: members.iter().map(|&m| RowSource::Node(m)).collect(),
            members,
            adj,
            branch,
            level,
        })
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn adjacency(&self) -> &NormalizedAdjacency {
        &self.adj
    }

    pub fn is_masked(&self) -> bool {
        matches!(self.rows[0], RowSource::Zero)
    }

    /// Dense K×d attribute block.
    pub fn attrs(&self, graph: &AttributedGraph) -> Matrix {
        let mut m = Matrix::zeros(self.size(), graph.num_attrs());
        for (r, src) in self.rows.iter().enumerate() {
            src.write_dense(graph, m.row_mut(r));
        }
        m
    }
}

/// Zeroes the target's attribute row.
pub fn mask_target(mut ego: EgoNet) -> EgoNet {
    ego.rows[0] = RowSource::Zero;
    ego
}

fn walk<R: Rng>(graph: &AttributedGraph, target: usize, cfg: &SamplerConfig, rng: &mut R) -> Vec<usize> {
    let k = cfg.subgraph_size;
    let mut visited = Vec::with_capacity(k);
    visited.push(target);
    let mut current = target;
    for _ in 0..cfg.max_steps {
        if visited.len() == k {
            break;
        }
        let nbrs = graph.neighbors(current);
        current = if nbrs.is_empty() || rng.random::<f64>() < cfg.restart_prob {
            target
        } else {
            nbrs[rng.random_range(0..nbrs.len())]
        };
        if !visited.contains(&current) {
            visited.push(current);
        }
    }
    visited
}

/// One unmasked ego-net around `target`. The walk draws from the RNG stream
/// keyed by `(cfg.seed, target, rng_stream)`.
pub fn sample_ego_net(graph: &AttributedGraph, target: usize, cfg: &SamplerConfig, rng_stream: u64) -> Result<EgoNet> {
    graph.check_node(target)?;
    let k = cfg.subgraph_size;
    let mut rng = rng::stream(cfg.seed, &[domain::WALK, target as u64, rng_stream]);
    let mut best = Vec::new();
    for _ in 0..cfg.walks_per_node.max(1) {
        let visited = walk(graph, target, cfg, &mut rng);
        if visited.len() > best.len() {
            best = visited;
        }
        if best.len() == k {
            break;
        }
    }
    best.resize(k, target);
    EgoNet::from_members(graph, best, Branch::Normal, Level::Node)
}

/// Stream key for one draw of `(round, level, branch)` within a phase.
pub fn stream_key(phase: u64, round: u64, level: Level, branch: Branch) -> u64 {
    rng::mix_key(&[phase, round, level.tag(), branch.tag()])
}

/// For every target, `rounds` node-level and `rounds` subgraph-level masked
/// ego-nets, ordered target-major, then round, then level.
pub fn sample_batch(
    graph: &AttributedGraph,
    targets: &[usize],
    cfg: &SamplerConfig,
    rounds: usize,
) -> Result<Vec<EgoNet>> {
    if targets.is_empty() {
        return Err(Error::Argument("sample_batch needs at least one target".into()));
    }
    cfg.validate()?;
    let jobs: Vec<(usize, usize, Level)> = targets
        .iter()
        .flat_map(|&t| (0..rounds).flat_map(move |r| Level::BOTH.map(|l| (t, r, l))))
        .collect();
    jobs.par_iter()
        .map(|&(t, r, level)| {
            let key = stream_key(0, r as u64, level, Branch::Normal);
            let mut ego = mask_target(sample_ego_net(graph, t, cfg, key)?);
            ego.level = level;
            Ok(ego)
        })
        .collect()
}
