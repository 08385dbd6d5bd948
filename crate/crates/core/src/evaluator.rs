//! ROC/AUC against ground truth, report export, and an embedding-distance
//! probe of how close mixed abnormal ego-nets sit to normal ones.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::encoder::{gcn_forward_with, CachedProjector, ModelParams};
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::linalg::l2_distance;
use crate::mixer::{MixConfig, Mixer};
use crate::rng::{self, domain};
use crate::sampler::{mask_target, sample_ego_net, Level, SamplerConfig};
use crate::scorer::{write_scores, ScoreResult};

fn class_counts(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("scores".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::State("AUC needs both anomalous and normal labels".into()));
    }
    Ok((pos, neg))
}

/// Indices grouped by equal score, highest score first.
fn tie_groups(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in idx {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Probability that a random anomaly outranks a random normal node, ties
/// counting one half (Mann-Whitney statistic with midranks).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = class_counts(scores, labels)?;
    // ascending midranks, doubled to stay integral
    let mut rank_sum2: u128 = 0;
    let mut below = 0u128;
    for g in tie_groups(scores).into_iter().rev() {
        let len = g.len() as u128;
        let mid2 = 2 * below + len + 1;
        let p = g.iter().filter(|&&i| labels[i]).count() as u128;
        rank_sum2 += p * mid2;
        below += len;
    }
    let (p, n) = (pos as u128, neg as u128);
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * n) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Threshold sweep over distinct scores, highest first.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u128, 0u128);
    let mut area2: u128 = 0;
    for g in tie_groups(scores) {
        let p = g.iter().filter(|&&i| labels[i]).count() as u128;
        let f = g.len() as u128 - p;
        area2 += f * (2 * tp + p);
        tp += p;
        fp += f;
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = area2 as f64 / (2 * pos as u128 * neg as u128) as f64;
    Ok(RocCurve { points, auc })
}

/// Trapezoidal area under a list of points.
pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Ego-nets drawn per anomaly and per normal node.
    pub samples: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { samples: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardnessReport {
    /// Mean distance between mixed abnormal and normal readouts.
    pub mixed: f64,
    /// Same slots and donors with the donor copied outright (`tau = 1`).
    pub unmixed: f64,
    /// Abnormal ego-nets with no substitutions at all.
    pub plain: f64,
    /// `mixed / unmixed`
    pub ratio: f64,
}

fn mean_cross_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let total: f64 = a.iter().map(|x| b.iter().map(|y| l2_distance(x, y)).sum::<f64>()).sum();
    total / (a.len() * b.len()) as f64
}

/// Mean pairwise distance between subgraph readouts of abnormal ego-nets
/// (anomaly targets) and of normal ego-nets, with and without blending.
pub fn hardness_probe(
    graph: &AttributedGraph,
    params: &ModelParams,
    sampler: &SamplerConfig,
    mix: &MixConfig,
    cfg: &ProbeConfig,
) -> Result<HardnessReport> {
    sampler.validate()?;
    if cfg.samples == 0 {
        return Err(Error::Argument("probe needs at least one sample".into()));
    }
    let anomalies = graph.anomalies();
    if anomalies.is_empty() {
        return Err(Error::State("hardness probe needs labelled anomalies".into()));
    }
    let revealed = graph.revealed_anomalies();
    let centres = if revealed.is_empty() {
        anomalies.clone()
    } else {
        revealed
    };
    let normals: Vec<usize> = (0..graph.num_nodes()).filter(|&i| !graph.is_anomaly(i)).collect();
    if normals.is_empty() {
        return Err(Error::State("hardness probe needs normal nodes".into()));
    }
    let mixer = Mixer::new(graph, *mix)?;
    let projector = CachedProjector::new(graph, params)?;
    let embed = |ego| -> Result<Vec<f64>> {
        Ok(gcn_forward_with(&ego, &projector, params.activation)?.summary(Level::Subgraph))
    };

    let (mut mixed, mut unmixed, mut plain, mut normal) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for s in 0..cfg.samples {
        let key = rng::mix_key(&[domain::PROBE, cfg.seed, s as u64]);
        for &a in &centres {
            mixed.push(embed(mixer.abnormal_ego_with_tau(graph, a, sampler, mix.tau, key)?)?);
            unmixed.push(embed(mixer.abnormal_ego_with_tau(graph, a, sampler, 1.0, key)?)?);
            plain.push(embed(mask_target(sample_ego_net(graph, a, sampler, key)?))?);
        }
        // cap the normal side so large graphs stay cheap
        let mut rng = rng::stream(cfg.seed, &[domain::PROBE, s as u64]);
        let take = normals.len().min(1000);
        for j in index::sample(&mut rng, normals.len(), take) {
            normal.push(embed(mask_target(sample_ego_net(graph, normals[j], sampler, key)?))?);
        }
    }
    let m = mean_cross_distance(&mixed, &normal);
    let u = mean_cross_distance(&unmixed, &normal);
    Ok(HardnessReport {
        mixed: m,
        unmixed: u,
        plain: mean_cross_distance(&plain, &normal),
        ratio: if m == u { 1.0 } else { m / u },
    })
}

/// JSON summary written next to the score and ROC files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub auc: f64,
    pub seed: u64,
    pub wall_clock_secs: f64,
    pub stage_secs: BTreeMap<String, f64>,
    pub num_nodes: usize,
    pub num_anomalies: usize,
    /// Resolved configuration, keys as in the config file.
    pub config: BTreeMap<String, String>,
}

pub struct Report<'a> {
    pub scores: &'a ScoreResult,
    pub roc: &'a RocCurve,
    pub summary: &'a RunSummary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub scores: PathBuf,
    pub roc: PathBuf,
    pub summary: PathBuf,
}

pub fn write_roc(roc: &RocCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if roc.points.is_empty() {
        return Err(Error::State("refusing to write an empty ROC curve".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "fpr,tpr").map_err(io)?;
    for (x, y) in &roc.points {
        writeln!(w, "{x},{y}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_summary(summary: &RunSummary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, summary)?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `scores.csv`, `roc.csv` and `summary.json` into `dir`.
pub fn export_report(report: &Report<'_>, dir: impl AsRef<Path>) -> Result<ReportPaths> {
    let dir = dir.as_ref();
    if report.roc.points.is_empty() {
        return Err(Error::State("refusing to write an empty ROC curve".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = ReportPaths {
        scores: dir.join("scores.csv"),
        roc: dir.join("roc.csv"),
        summary: dir.join("summary.json"),
    };
    write_scores(report.scores, &paths.scores)?;
    write_roc(report.roc, &paths.roc)?;
    write_summary(report.summary, &paths.summary)?;
    Ok(paths)
}
