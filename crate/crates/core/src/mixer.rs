//! Abnormality-centered ego-nets with label-guided attribute mixing.
//!
//! A mixed ego-net keeps the sampled structure. Of its K slots,
//! `q = round(gamma * K)` carry anomaly-sourced content: the anomaly target
//! itself plus `q - 1` randomly chosen non-target slots whose attribute rows
//! are blended with a donor, `tau * x_donor + (1 - tau) * x_slot`.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::rng::{self, domain};
use crate::sampler::{mask_target, sample_ego_net, Branch, EgoNet, RowSource, SamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixStrategy {
    /// No substitutions.
    None,
    /// Donors drawn uniformly from all nodes.
    Random,
    /// Donors drawn from revealed anomalies.
    Labeled,
}

impl std::str::FromStr for MixStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(MixStrategy::None),
            "random" => Ok(MixStrategy::Random),
            "labeled" | "labelled" => Ok(MixStrategy::Labeled),
            other => Err(Error::Argument(format!(
                "unknown mix strategy {other:?} (expected none, random or labeled)"
            ))),
        }
    }
}

impl std::fmt::Display for MixStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MixStrategy::None => "none",
            MixStrategy::Random => "random",
            MixStrategy::Labeled => "labeled",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixConfig {
    pub gamma: f64,
    pub tau: f64,
    pub strategy: MixStrategy,
    pub seed: u64,
}

impl Default for MixConfig {
    fn default() -> Self {
        Self {
            gamma: 0.4,
            tau: 0.5,
            strategy: MixStrategy::Labeled,
            seed: 0,
        }
    }
}

impl MixConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("tau", self.tau)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Argument(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Anomaly-sourced slots (target included) in a K-node ego-net.
    pub fn anomaly_slots(&self, k: usize) -> usize {
        ((self.gamma * k as f64).round() as usize).min(k)
    }
}

/// Donor pool resolved once per graph.
#[derive(Debug, Clone)]
pub struct Mixer {
    cfg: MixConfig,
    pool: Vec<usize>,
}

impl Mixer {
    pub fn new(graph: &AttributedGraph, cfg: MixConfig) -> Result<Self> {
        cfg.validate()?;
        let pool = match cfg.strategy {
            MixStrategy::None => Vec::new(),
            MixStrategy::Random => (0..graph.num_nodes()).collect(),
            MixStrategy::Labeled => {
                let pool = graph.revealed_anomalies();
                if pool.is_empty() {
                    return Err(Error::State(
                        "labeled mixing needs at least one revealed anomaly".into(),
                    ));
                }
                pool
            }
        };
        Ok(Self { cfg, pool })
    }

    pub fn config(&self) -> &MixConfig {
        &self.cfg
    }

    pub fn pool(&self) -> &[usize] {
        &self.pool
    }

    fn mix(&self, graph: &AttributedGraph, ego: EgoNet, tau: f64, rng_stream: u64) -> Result<EgoNet> {
        if self.cfg.strategy == MixStrategy::None {
            return Ok(ego);
        }
        mix_with_pool(ego, &self.pool, graph, self.cfg.gamma, tau, self.cfg.seed, rng_stream)
    }

    /// Sampled, mixed and masked ego-net around any node.
    pub fn mixed_ego(
        &self,
        graph: &AttributedGraph,
        target: usize,
        sampler_cfg: &SamplerConfig,
        rng_stream: u64,
    ) -> Result<EgoNet> {
        let ego = sample_ego_net(graph, target, sampler_cfg, rng_stream)?;
        let mut ego = mask_target(self.mix(graph, ego, self.cfg.tau, rng_stream)?);
        ego.branch = Branch::Abnormal;
        Ok(ego)
    }

    /// Sampled, mixed and masked ego-net around an anomaly target.
    pub fn abnormal_ego(
        &self,
        graph: &AttributedGraph,
        anomaly_target: usize,
        sampler_cfg: &SamplerConfig,
        rng_stream: u64,
    ) -> Result<EgoNet> {
        self.abnormal_ego_with_tau(graph, anomaly_target, sampler_cfg, self.cfg.tau, rng_stream)
    }

    /// As [`Mixer::abnormal_ego`] with an explicit blend weight. The same
    /// stream with a different `tau` picks the same slots and donors.
    pub fn abnormal_ego_with_tau(
        &self,
        graph: &AttributedGraph,
        anomaly_target: usize,
        sampler_cfg: &SamplerConfig,
        tau: f64,
        rng_stream: u64,
    ) -> Result<EgoNet> {
        if self.cfg.strategy == MixStrategy::Labeled && !graph.is_revealed(anomaly_target) {
            return Err(Error::Argument(format!(
                "node {anomaly_target} is not a revealed anomaly"
            )));
        }
        let ego = sample_ego_net(graph, anomaly_target, sampler_cfg, rng_stream)?;
        let mut ego = mask_target(self.mix(graph, ego, tau, rng_stream)?);
        ego.branch = Branch::Abnormal;
        Ok(ego)
    }
}

fn mix_with_pool(
    mut ego: EgoNet,
    pool: &[usize],
    graph: &AttributedGraph,
    gamma: f64,
    tau: f64,
    seed: u64,
    rng_stream: u64,
) -> Result<EgoNet> {
    let k = ego.size();
    let q = ((gamma * k as f64).round() as usize).min(k);
    let subs = q.saturating_sub(1);
    if subs == 0 {
        return Ok(ego);
    }
    if pool.is_empty() {
        return Err(Error::State("donor pool is empty".into()));
    }
    let mut rng = rng::stream(seed, &[domain::MIX, ego.target as u64, rng_stream]);
    for slot in index::sample(&mut rng, k - 1, subs).into_iter().map(|s| s + 1) {
        let donor = pool[rng.random_range(0..pool.len())];
        let base = match ego.rows[slot] {
            RowSource::Node(j) => j,
            RowSource::Blend { base, .. } => base,
            RowSource::Zero => {
                return Err(Error::State("mixing must happen before masking".into()));
            }
        };
        graph.check_node(donor)?;
        ego.rows[slot] = RowSource::Blend { base, donor, tau };
    }
    Ok(ego)
}

/// Blends anomaly content into `q - 1` non-target slots of an unmasked
/// ego-net. Structure is left untouched.
pub fn mix_nodes(
    ego: EgoNet,
    anomaly_pool: &[usize],
    graph: &AttributedGraph,
    mix_cfg: &MixConfig,
    rng_stream: u64,
) -> Result<EgoNet> {
    mix_cfg.validate()?;
    if ego.is_masked() {
        return Err(Error::State("mixing must happen before masking".into()));
    }
    if mix_cfg.strategy == MixStrategy::None {
        return Ok(ego);
    }
    mix_with_pool(
        ego,
        anomaly_pool,
        graph,
        mix_cfg.gamma,
        mix_cfg.tau,
        mix_cfg.seed,
        rng_stream,
    )
}

pub fn build_abnormal_ego(
    graph: &AttributedGraph,
    anomaly_target: usize,
    sampler_cfg: &SamplerConfig,
    mix_cfg: &MixConfig,
    rng_stream: u64,
) -> Result<EgoNet> {
    Mixer::new(graph, *mix_cfg)?.abnormal_ego(graph, anomaly_target, sampler_cfg, rng_stream)
}

/// Plain masked ego-net for the normal branch.
pub fn build_normal_ego(
    graph: &AttributedGraph,
    target: usize,
    sampler_cfg: &SamplerConfig,
    rng_stream: u64,
) -> Result<EgoNet> {
    graph.check_node(target)?;
    if graph.is_revealed(target) {
        return Err(Error::Argument(format!(
            "node {target} is a revealed anomaly and cannot centre a normal ego-net"
        )));
    }
    let mut ego = mask_target(sample_ego_net(graph, target, sampler_cfg, rng_stream)?);
    ego.branch = Branch::Normal;
    Ok(ego)
}
