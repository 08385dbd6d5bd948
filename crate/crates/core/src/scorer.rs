//! Multi-round inference. Every node is scored in `tr` rounds; each round
//! contributes a positive and a negative score per level for both the
//! normal and the abnormal branch (8 numbers per round).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{gcn_forward_with, logistic, CachedProjector, ModelParams, Projector};
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::linalg::dot;
use crate::rng::{self, domain};
use crate::sampler::{mask_target, sample_ego_net, Branch, Level, SamplerConfig};
use crate::trainer::{partner, split_batches};

/// `((s̃ - s) + (ãs - as)) / 2`
pub fn base_score(s: f64, s_neg: f64, as_: f64, as_neg: f64) -> f64 {
    ((s_neg - s) + (as_neg - as_)) / 2.0
}

/// Mean plus population standard deviation.
pub fn aggregate(node_scores: &[f64]) -> Result<f64> {
    if node_scores.is_empty() {
        return Err(Error::Shape("aggregate over zero rounds".into()));
    }
    let r = node_scores.len() as f64;
    let mean = node_scores.iter().sum::<f64>() / r;
    let var = node_scores.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / r;
    Ok(mean + var.sqrt())
}

/// The four scores of one node, round and level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundScores {
    pub s: f64,
    pub s_neg: f64,
    pub as_: f64,
    pub as_neg: f64,
}

impl RoundScores {
    pub fn base(&self) -> f64 {
        base_score(self.s, self.s_neg, self.as_, self.as_neg)
    }
}

const PER_LEVEL: usize = 4;
const PER_ROUND: usize = 2 * PER_LEVEL;

fn level_index(level: Level) -> usize {
    match level {
        Level::Node => 0,
        Level::Subgraph => 1,
    }
}

/// Flat `node × round × level × {s, s̃, as, ãs}` store.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    num_nodes: usize,
    rounds: usize,
    data: Vec<f64>,
    filled: Vec<u8>,
}

impl ScoreTable {
    pub fn new(num_nodes: usize, rounds: usize) -> Self {
        Self {
            num_nodes,
            rounds,
            data: vec![f64::NAN; num_nodes * rounds * PER_ROUND],
            filled: vec![0; num_nodes * rounds * 2],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    fn offset(&self, node: usize, round: usize, level: Level) -> usize {
        (node * self.rounds + round) * PER_ROUND + level_index(level) * PER_LEVEL
    }

    /// Stores the positive/negative pair of one branch.
    pub fn record(
        &mut self,
        node: usize,
        round: usize,
        level: Level,
        branch: Branch,
        pos: f64,
        neg: f64,
    ) -> Result<()> {
        if node >= self.num_nodes || round >= self.rounds {
            return Err(Error::Index {
                index: node,
                len: self.num_nodes,
            });
        }
        let o = self.offset(node, round, level)
            + match branch {
                Branch::Normal => 0,
                Branch::Abnormal => 2,
            };
        self.data[o] = pos;
        self.data[o + 1] = neg;
        let slot = (node * self.rounds + round) * 2 + level_index(level);
        self.filled[slot] |= match branch {
            Branch::Normal => 1,
            Branch::Abnormal => 2,
        };
        Ok(())
    }

    pub fn get(&self, node: usize, round: usize, level: Level) -> RoundScores {
        let o = self.offset(node, round, level);
        RoundScores {
            s: self.data[o],
            s_neg: self.data[o + 1],
            as_: self.data[o + 2],
            as_neg: self.data[o + 3],
        }
    }

    /// All `8 · rounds` recorded values of one node.
    pub fn node_entries(&self, node: usize) -> &[f64] {
        let start = node * self.rounds * PER_ROUND;
        &self.data[start..start + self.rounds * PER_ROUND]
    }

    pub fn entries_per_node(&self) -> usize {
        self.rounds * PER_ROUND
    }

    pub fn is_complete(&self) -> bool {
        self.filled.iter().all(|&f| f == 3)
    }

    /// Per-round base scores of one node at one level.
    pub fn base_scores(&self, node: usize, level: Level) -> Vec<f64> {
        (0..self.rounds).map(|r| self.get(node, r, level).base()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub test_rounds: usize,
    pub batch_size: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            test_rounds: 100,
            batch_size: 300,
            alpha: 0.4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScoreResult {
    pub table: ScoreTable,
    pub ts_nd: Vec<f64>,
    pub ts_sb: Vec<f64>,
    /// `alpha · ts_sb + (1 - alpha) · ts_nd`; higher is more anomalous.
    pub scores: Vec<f64>,
}

type BatchRecord = (usize, Level, Branch, Vec<(usize, f64, f64)>);

pub fn score_all(
    graph: &AttributedGraph,
    params: &ModelParams,
    sampler: &SamplerConfig,
    cfg: &ScoreConfig,
) -> Result<ScoreResult> {
    sampler.validate()?;
    params.validate()?;
    if cfg.test_rounds == 0 {
        return Err(Error::Argument("test rounds must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.alpha) {
        return Err(Error::Argument(format!("alpha = {} outside [0, 1]", cfg.alpha)));
    }
    let n = graph.num_nodes();
    if n < 2 {
        return Err(Error::State("scoring needs at least two nodes".into()));
    }
    let projector = CachedProjector::new(graph, params)?;
    let act = params.activation;
    let f = params.hidden();

    let orders: Vec<Vec<usize>> = (0..cfg.test_rounds)
        .map(|round| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng::stream(cfg.seed, &[domain::TEST_ORDER, round as u64]));
            order
        })
        .collect();
    let batches = split_batches(n, cfg.batch_size.max(2));
    let jobs: Vec<(usize, usize, Level, Branch)> = (0..cfg.test_rounds)
        .flat_map(|r| {
            (0..batches.len()).flat_map(move |b| {
                Level::BOTH
                    .into_iter()
                    .flat_map(move |l| [Branch::Normal, Branch::Abnormal].map(|br| (r, b, l, br)))
            })
        })
        .collect();

    let records = jobs
        .par_iter()
        .map(|&(round, b, level, branch)| -> Result<BatchRecord> {
            let targets = &orders[round][batches[b].clone()];
            let key = rng::mix_key(&[domain::TEST_ORDER, round as u64, level.tag(), branch.tag()]);
            let wb = params.bilinear(level);
            let mut h = Vec::with_capacity(targets.len());
            let mut wz = Vec::with_capacity(targets.len());
            let mut z = vec![0.0; f];
            for &t in targets {
                let ego = mask_target(sample_ego_net(graph, t, sampler, key)?);
                let emb = gcn_forward_with(&ego, &projector, act)?;
                h.push(emb.summary(level));
                projector.project_node(t, &mut z);
                z.iter_mut().for_each(|v| *v = act.apply(*v));
                wz.push(wb.mul_vec(&z));
            }
            let width = targets.len();
            let out = (0..width)
                .map(|i| {
                    let pos = logistic(dot(&h[i], &wz[i]));
                    let neg = logistic(dot(&h[partner(i, width)], &wz[i]));
                    (targets[i], pos, neg)
                })
                .collect();
            Ok((round, level, branch, out))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = ScoreTable::new(n, cfg.test_rounds);
    for (round, level, branch, rows) in records {
        for (node, pos, neg) in rows {
            table.record(node, round, level, branch, pos, neg)?;
        }
    }
    debug_assert!(table.is_complete());
    finish(table, cfg.alpha)
}

/// Aggregates a filled table into per-level and fused scores.
pub fn finish(table: ScoreTable, alpha: f64) -> Result<ScoreResult> {
    let n = table.num_nodes();
    let mut ts_nd = Vec::with_capacity(n);
    let mut ts_sb = Vec::with_capacity(n);
    for i in 0..n {
        ts_nd.push(aggregate(&table.base_scores(i, Level::Node))?);
        ts_sb.push(aggregate(&table.base_scores(i, Level::Subgraph))?);
    }
    let scores = ts_nd
        .iter()
        .zip(&ts_sb)
        .map(|(nd, sb)| alpha * sb + (1.0 - alpha) * nd)
        .collect();
    Ok(ScoreResult {
        table,
        ts_nd,
        ts_sb,
        scores,
    })
}

/// CSV `node_id,score,ts_nd,ts_sb`; floats use shortest round-trip form.
pub fn write_scores(result: &ScoreResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "node_id,score,ts_nd,ts_sb").map_err(io)?;
    for i in 0..result.scores.len() {
        writeln!(w, "{i},{},{},{}", result.scores[i], result.ts_nd[i], result.ts_sb[i]).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads the `score` column of a file written by [`write_scores`], indexed
/// by `node_id`.
pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let mut fields = line.split(',');
        let (Some(id), Some(score)) = (fields.next(), fields.next()) else {
            return Err(bad(i + 1, format!("expected node_id,score,..., got {line:?}")));
        };
        let id = id.trim().parse().map_err(|e| bad(i + 1, format!("node id: {e}")))?;
        let score = score.trim().parse().map_err(|e| bad(i + 1, format!("score: {e}")))?;
        rows.push((id, score));
    }
    let mut out = vec![f64::NAN; rows.len()];
    for (id, score) in rows {
        if id >= out.len() || !out[id].is_nan() {
            return Err(Error::Shape(format!(
                "{}: node ids must be 0..{} once each",
                path.display(),
                out.len()
            )));
        }
        out[id] = score;
    }
    Ok(out)
}
