//! End-to-end runs: configuration, stage sequencing and parameter sweeps.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::encoder::{save_params, Activation, ModelParams};
use crate::error::{Error, Result};
use crate::evaluator::{auc, export_report, roc_curve, Report, ReportPaths, RocCurve, RunSummary};
use crate::graph::{load_graph, reveal_labels, AttributedGraph, RowNorm};
use crate::injector::{inject, InjectionConfig};
use crate::mixer::{MixConfig, MixStrategy, Mixer};
use crate::sampler::{mask_target, sample_ego_net, SamplerConfig};
use crate::scorer::{score_all, ScoreConfig, ScoreResult};
use crate::trainer::{train, write_loss_history, EpochLoss, OptimizerKind, TrainConfig};

/// Per-epoch cap on drawn negative pairs, counted in targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SampleBudget {
    Full,
    Count(usize),
    /// Share of the full budget, in `(0, 1]`.
    Fraction(f64),
}

impl SampleBudget {
    pub fn resolve(self, eligible: usize) -> Option<usize> {
        match self {
            SampleBudget::Full => None,
            SampleBudget::Count(c) => Some(c.min(eligible)),
            SampleBudget::Fraction(f) => Some(((f * eligible as f64).round() as usize).clamp(2, eligible.max(2))),
        }
    }
}

impl std::str::FromStr for SampleBudget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(SampleBudget::Full);
        }
        if let Ok(c) = s.parse::<usize>() {
            return if c >= 2 {
                Ok(SampleBudget::Count(c))
            } else {
                Err(Error::Argument(format!("sample budget {c} below 2")))
            };
        }
        match s.parse::<f64>() {
            Ok(f) if f > 0.0 && f <= 1.0 => Ok(SampleBudget::Fraction(f)),
            _ => Err(Error::Argument(format!(
                "sample budget {s:?} is neither \"full\", a count, nor a fraction in (0, 1]"
            ))),
        }
    }
}

impl std::fmt::Display for SampleBudget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SampleBudget::Full => f.write_str("full"),
            SampleBudget::Count(c) => write!(f, "{c}"),
            // Debug keeps the decimal point, so "1.0" never reads back as a count
            SampleBudget::Fraction(x) => write!(f, "{x:?}"),
        }
    }
}

/// Every hyperparameter and path of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: Option<String>,
    pub data_dir: PathBuf,
    pub edges: Option<PathBuf>,
    pub attrs: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub inject: bool,
    pub num_anomalies: usize,
    pub clique_size: usize,
    pub candidate_pool: usize,
    /// Defaults to `seed`.
    pub inject_seed: Option<u64>,
    pub normalize: RowNorm,
    pub subgraph_size: usize,
    pub restart_prob: f64,
    pub max_steps: usize,
    pub walks_per_node: usize,
    pub train_rounds: usize,
    pub test_rounds: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_dim: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub activation: Activation,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tau: f64,
    pub reveal_ratio: f64,
    pub mix: MixStrategy,
    pub sample_budget: SampleBudget,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            data_dir: PathBuf::from("data"),
            edges: None,
            attrs: None,
            labels: None,
            out_dir: None,
            inject: true,
            num_anomalies: 150,
            clique_size: 15,
            candidate_pool: 50,
            inject_seed: None,
            normalize: RowNorm::L1,
            subgraph_size: 4,
            restart_prob: 0.5,
            max_steps: 100,
            walks_per_node: 1,
            train_rounds: 4,
            test_rounds: 100,
            epochs: 100,
            batch_size: 300,
            hidden_dim: 64,
            lr: 1e-3,
            optimizer: OptimizerKind::Adam,
            activation: Activation::Relu,
            alpha: 0.4,
            beta: 0.5,
            gamma: 0.4,
            tau: 0.5,
            reveal_ratio: 0.1,
            mix: MixStrategy::Labeled,
            sample_budget: SampleBudget::Full,
            seed: 0,
        }
    }
}

/// Config keys in file order.
pub const CONFIG_KEYS: &[&str] = &[
    "dataset",
    "data_dir",
    "edges",
    "attrs",
    "labels",
    "out_dir",
    "inject",
    "num_anomalies",
    "clique_size",
    "candidate_pool",
    "inject_seed",
    "normalize",
    "subgraph_size",
    "restart_prob",
    "max_steps",
    "walks_per_node",
    "train_rounds",
    "test_rounds",
    "epochs",
    "batch_size",
    "hidden_dim",
    "lr",
    "optimizer",
    "activation",
    "alpha",
    "beta",
    "gamma",
    "tau",
    "reveal_ratio",
    "mix",
    "sample_budget",
    "seed",
];

/// Parameters accepted by [`sweep`].
pub const SWEEP_PARAMS: &[&str] = &["alpha", "beta", "r", "gamma", "sample_budget"];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Argument(format!("{key} = {value:?}: {e}")))
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Canonical key for `key`, accepting kebab-case and short aliases.
    pub fn canonical_key(key: &str) -> Result<&'static str> {
        let k = key.trim().replace('-', "_");
        let k = match k.as_str() {
            "r" | "contamination" => "reveal_ratio",
            "k" => "subgraph_size",
            "rounds" => "train_rounds",
            "tr" => "test_rounds",
            "hidden" => "hidden_dim",
            other => other,
        };
        CONFIG_KEYS
            .iter()
            .find(|&&c| c == k)
            .copied()
            .ok_or_else(|| Error::Argument(format!("unknown config key {key:?}")))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let key = Self::canonical_key(key)?;
        match key {
            "dataset" => self.dataset = (!value.is_empty()).then(|| value.to_string()),
            "data_dir" => self.data_dir = PathBuf::from(value),
            "edges" => self.edges = opt_path(value),
            "attrs" => self.attrs = opt_path(value),
            "labels" => self.labels = opt_path(value),
            "out_dir" => self.out_dir = opt_path(value),
            "inject" => self.inject = parse(key, value)?,
            "num_anomalies" => self.num_anomalies = parse(key, value)?,
            "clique_size" => self.clique_size = parse(key, value)?,
            "candidate_pool" => self.candidate_pool = parse(key, value)?,
            "inject_seed" => {
                self.inject_seed = if value.is_empty() {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            "normalize" => self.normalize = parse(key, value)?,
            "subgraph_size" => self.subgraph_size = parse(key, value)?,
            "restart_prob" => self.restart_prob = parse(key, value)?,
            "max_steps" => self.max_steps = parse(key, value)?,
            "walks_per_node" => self.walks_per_node = parse(key, value)?,
            "train_rounds" => self.train_rounds = parse(key, value)?,
            "test_rounds" => self.test_rounds = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "hidden_dim" => self.hidden_dim = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "optimizer" => self.optimizer = parse(key, value)?,
            "activation" => self.activation = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "reveal_ratio" => self.reveal_ratio = parse(key, value)?,
            "mix" => self.mix = parse(key, value)?,
            "sample_budget" => self.sample_budget = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => unreachable!("canonical_key only returns known keys"),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<String> {
        let key = Self::canonical_key(key)?;
        Ok(match key {
            "dataset" => self.dataset.clone().unwrap_or_default(),
            "data_dir" => self.data_dir.display().to_string(),
            "edges" => show_path(&self.edges),
            "attrs" => show_path(&self.attrs),
            "labels" => show_path(&self.labels),
            "out_dir" => show_path(&self.out_dir),
            "inject" => self.inject.to_string(),
            "num_anomalies" => self.num_anomalies.to_string(),
            "clique_size" => self.clique_size.to_string(),
            "candidate_pool" => self.candidate_pool.to_string(),
            "inject_seed" => self.inject_seed.map(|s| s.to_string()).unwrap_or_default(),
            "normalize" => self.normalize.to_string(),
            "subgraph_size" => self.subgraph_size.to_string(),
            "restart_prob" => self.restart_prob.to_string(),
            "max_steps" => self.max_steps.to_string(),
            "walks_per_node" => self.walks_per_node.to_string(),
            "train_rounds" => self.train_rounds.to_string(),
            "test_rounds" => self.test_rounds.to_string(),
            "epochs" => self.epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "hidden_dim" => self.hidden_dim.to_string(),
            "lr" => self.lr.to_string(),
            "optimizer" => self.optimizer.to_string(),
            "activation" => self.activation.to_string(),
            "alpha" => self.alpha.to_string(),
            "beta" => self.beta.to_string(),
            "gamma" => self.gamma.to_string(),
            "tau" => self.tau.to_string(),
            "reveal_ratio" => self.reveal_ratio.to_string(),
            "mix" => self.mix.to_string(),
            "sample_budget" => self.sample_budget.to_string(),
            "seed" => self.seed.to_string(),
            _ => unreachable!("canonical_key only returns known keys"),
        })
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        CONFIG_KEYS
            .iter()
            .map(|&k| (k.to_string(), self.get(k).expect("known key")))
            .collect()
    }

    /// `key = value` lines in [`CONFIG_KEYS`] order; parsing the output
    /// reproduces `self` exactly.
    pub fn to_kv_string(&self) -> String {
        CONFIG_KEYS
            .iter()
            .map(|&k| format!("{k} = {}\n", self.get(k).expect("known key")))
            .collect()
    }

    /// Applies `key = value` lines on top of `self`; `#` starts a comment.
    pub fn apply_kv_str(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message: format!("expected `key = value`, got {raw:?}"),
            })?;
            self.set(key, value).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv_str(text, Path::new("<config>"))?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_kv_str(&text, path)?;
        Ok(cfg)
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            subgraph_size: self.subgraph_size,
            restart_prob: self.restart_prob,
            max_steps: self.max_steps,
            walks_per_node: self.walks_per_node,
            seed: self.seed,
        }
    }

    pub fn mixing(&self) -> MixConfig {
        MixConfig {
            gamma: self.gamma,
            tau: self.tau,
            strategy: self.mix,
            seed: self.seed,
        }
    }

    /// Training config; `eligible` is the number of normal-branch targets
    /// and resolves fractional sample budgets.
    pub fn training(&self, eligible: usize) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            alpha: self.alpha,
            beta: self.beta,
            rounds: self.train_rounds,
            optimizer: self.optimizer,
            hidden: self.hidden_dim,
            activation: self.activation,
            sample_budget: self.sample_budget.resolve(eligible),
            seed: self.seed,
        }
    }

    pub fn scoring(&self) -> ScoreConfig {
        ScoreConfig {
            test_rounds: self.test_rounds,
            batch_size: self.batch_size,
            alpha: self.alpha,
            seed: self.seed,
        }
    }

    pub fn injection(&self) -> InjectionConfig {
        InjectionConfig {
            candidate_pool: self.candidate_pool,
            ..InjectionConfig::for_budget(
                self.num_anomalies,
                self.clique_size,
                self.inject_seed.unwrap_or(self.seed),
            )
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler().validate()?;
        self.mixing().validate()?;
        self.training(usize::MAX).validate()?;
        if !(0.0..=1.0).contains(&self.reveal_ratio) {
            return Err(Error::Argument(format!(
                "reveal ratio {} outside [0, 1]",
                self.reveal_ratio
            )));
        }
        if self.test_rounds == 0 {
            return Err(Error::Argument("test rounds must be positive".into()));
        }
        Ok(())
    }

    fn dataset_file(&self, name: &str) -> Option<PathBuf> {
        self.dataset.as_ref().map(|d| self.data_dir.join(d).join(name))
    }

    pub fn edge_path(&self) -> Result<PathBuf> {
        self.edges
            .clone()
            .or_else(|| self.dataset_file("edges.txt"))
            .ok_or_else(|| Error::Argument("no dataset or edge file given".into()))
    }

    pub fn attr_path(&self) -> Result<PathBuf> {
        self.attrs
            .clone()
            .or_else(|| self.dataset_file("attrs.csv"))
            .ok_or_else(|| Error::Argument("no dataset or attribute file given".into()))
    }

    /// Explicit label file, else `labels.csv` of the dataset if present.
    pub fn label_path(&self) -> Option<PathBuf> {
        self.labels
            .clone()
            .or_else(|| self.dataset_file("labels.csv").filter(|p| p.exists()))
    }
}

/// Wall-clock seconds per named stage, in execution order.
#[derive(Debug, Default)]
struct Stopwatch {
    stages: BTreeMap<String, f64>,
}

impl Stopwatch {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage))?;
        let secs = start.elapsed().as_secs_f64();
        log::info!("{stage}: {secs:.2}s");
        self.stages.insert(stage.to_string(), secs);
        Ok(out)
    }
}

/// Loads the graph and, per config, injects anomalies, rescales attributes and
/// reveals labels.
pub fn prepare_graph(cfg: &RunConfig) -> Result<AttributedGraph> {
    prepare_timed(cfg, &mut Stopwatch::default())
}

fn prepare_timed(cfg: &RunConfig, sw: &mut Stopwatch) -> Result<AttributedGraph> {
    let graph = sw.time("load", || {
        let labels = if cfg.inject { None } else { cfg.label_path() };
        load_graph(cfg.edge_path()?, cfg.attr_path()?, labels.as_deref())
    })?;
    let graph = if cfg.inject {
        sw.time("inject", || inject(&graph, &cfg.injection()))?
    } else {
        graph
    };
    let graph = graph.row_normalized(cfg.normalize);
    sw.time("reveal", || {
        if graph.labels().is_none() {
            return Err(Error::State(
                "no anomaly labels: enable injection or give a label file".into(),
            ));
        }
        reveal_labels(&graph, cfg.reveal_ratio, cfg.seed)
    })
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub auc: f64,
    pub params: ModelParams,
    pub history: Vec<EpochLoss>,
    pub scores: ScoreResult,
    pub roc: RocCurve,
    pub summary: RunSummary,
    pub paths: Option<ReportPaths>,
}

/// Full pipeline on a prepared graph.
pub fn run_on(graph: &AttributedGraph, cfg: &RunConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let mut sw = Stopwatch::default();
    run_timed(graph, cfg, &mut sw, start)
}

/// inject → reveal → train → score → evaluate → export.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let mut sw = Stopwatch::default();
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let graph = prepare_timed(cfg, &mut sw)?;
    run_timed(&graph, cfg, &mut sw, start)
}

fn run_timed(graph: &AttributedGraph, cfg: &RunConfig, sw: &mut Stopwatch, start: Instant) -> Result<RunOutcome> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let eligible = (0..graph.num_nodes()).filter(|&i| !graph.is_revealed(i)).count();
    let trained = sw.time("train", || {
        train(graph, &cfg.sampler(), &cfg.mixing(), &cfg.training(eligible))
    })?;
    let scores = sw.time("score", || {
        score_all(graph, &trained.params, &cfg.sampler(), &cfg.scoring())
    })?;
    let (value, roc) = sw.time("eval", || {
        let labels = graph
            .labels()
            .ok_or_else(|| Error::State("graph has no labels to evaluate against".into()))?;
        Ok((auc(&scores.scores, labels)?, roc_curve(&scores.scores, labels)?))
    })?;
    let mut summary = RunSummary {
        auc: value,
        seed: cfg.seed,
        wall_clock_secs: 0.0,
        stage_secs: BTreeMap::new(),
        num_nodes: graph.num_nodes(),
        num_anomalies: graph.anomalies().len(),
        config: cfg.to_map(),
    };
    let paths = match &cfg.out_dir {
        Some(dir) => {
            let t = Instant::now();
            summary.stage_secs = sw.stages.clone();
            summary.wall_clock_secs = start.elapsed().as_secs_f64();
            let written = export_artifacts(dir, cfg, &trained.history, &trained.params)
                .and_then(|_| {
                    export_report(
                        &Report {
                            scores: &scores,
                            roc: &roc,
                            summary: &summary,
                        },
                        dir,
                    )
                })
                .map_err(|e| e.in_stage("export"))?;
            sw.stages.insert("export".into(), t.elapsed().as_secs_f64());
            Some(written)
        }
        None => None,
    };
    summary.stage_secs = sw.stages.clone();
    summary.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(RunOutcome {
        auc: value,
        params: trained.params,
        history: trained.history,
        scores,
        roc,
        summary,
        paths,
    })
}

fn export_artifacts(dir: &Path, cfg: &RunConfig, history: &[EpochLoss], params: &ModelParams) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let config_path = dir.join("config.txt");
    std::fs::write(&config_path, cfg.to_kv_string()).map_err(|e| Error::io(&config_path, e))?;
    write_loss_history(history, dir.join("loss.csv"))?;
    save_params(params, dir.join("params.bin"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    pub auc: f64,
}

/// Reruns the whole pipeline once per value of `param` with everything
/// else fixed. The graph is prepared once unless the swept value changes it.
pub fn sweep(cfg: &RunConfig, param: &str, values: &[String]) -> Result<Vec<SweepRow>> {
    if !SWEEP_PARAMS.contains(&param) {
        return Err(Error::Argument(format!(
            "cannot sweep {param:?}; expected one of {}",
            SWEEP_PARAMS.join(", ")
        )));
    }
    let base = prepare_graph(cfg)?;
    let mut rows = Vec::with_capacity(values.len());
    for value in values {
        let mut c = cfg.clone();
        c.set(param, value)?;
        c.out_dir = cfg.out_dir.as_ref().map(|d| d.join(format!("{param}={value}")));
        let graph = if param == "r" { prepare_graph(&c)? } else { base.clone() };
        let out = run_on(&graph, &c)?;
        log::info!("{param} = {value}: AUC {:.4}", out.auc);
        rows.push(SweepRow {
            value: value.clone(),
            auc: out.auc,
        });
    }
    Ok(rows)
}

/// CSV `value,auc`.
pub fn write_sweep(rows: &[SweepRow], param: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{param},auc").map_err(io)?;
    for r in rows {
        writeln!(w, "{},{}", r.value, r.auc).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes one JSON line per ego-net (normal then abnormal) for the first
/// `limit` eligible targets, as sampled at training time.
pub fn dump_ego_nets(graph: &AttributedGraph, cfg: &RunConfig, limit: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let sampler = cfg.sampler();
    let mixer = Mixer::new(graph, cfg.mixing())?;
    let targets = (0..graph.num_nodes()).filter(|&i| !graph.is_revealed(i)).take(limit);
    for t in targets {
        let normal = mask_target(sample_ego_net(graph, t, &sampler, 0)?);
        let abnormal = mixer.mixed_ego(graph, t, &sampler, 0)?;
        for ego in [normal, abnormal] {
            serde_json::to_writer(&mut w, &ego)?;
            writeln!(w).map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip_is_exact() {
        let mut cfg = RunConfig::default();
        cfg.set("lr", "0.000123456789").unwrap();
        cfg.set("alpha", "0.1").unwrap();
        cfg.set("sample-budget", "0.2").unwrap();
        cfg.set("activation", "prelu:0.25").unwrap();
        cfg.set("dataset", "cora").unwrap();
        let text = cfg.to_kv_string();
        let back = RunConfig::from_kv_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_kv_string(), text);
    }

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(
            (c.subgraph_size, c.train_rounds, c.test_rounds, c.epochs),
            (4, 4, 100, 100)
        );
        assert_eq!((c.batch_size, c.hidden_dim), (300, 64));
        assert_eq!(
            (c.alpha, c.beta, c.gamma, c.tau, c.reveal_ratio),
            (0.4, 0.5, 0.4, 0.5, 0.1)
        );
        assert_eq!(c.mix, MixStrategy::Labeled);
        assert_eq!(c.normalize, RowNorm::L1);
        c.validate().unwrap();
    }

    #[test]
    fn bad_lines_report_position() {
        let err = RunConfig::from_kv_str("alpha = 0.2\nnot a pair\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(RunConfig::from_kv_str("bogus = 1").is_err());
        assert_eq!(
            RunConfig::from_kv_str("# c\n\nr = 0.3 # inline\n")
                .unwrap()
                .reveal_ratio,
            0.3
        );
    }

    #[test]
    fn budgets() {
        assert_eq!("full".parse::<SampleBudget>().unwrap(), SampleBudget::Full);
        assert_eq!("500".parse::<SampleBudget>().unwrap(), SampleBudget::Count(500));
        assert_eq!("1.0".parse::<SampleBudget>().unwrap(), SampleBudget::Fraction(1.0));
        assert_eq!(SampleBudget::Fraction(1.0).to_string(), "1.0");
        assert_eq!(SampleBudget::Fraction(0.2).resolve(1000), Some(200));
        assert!("1".parse::<SampleBudget>().is_err());
        assert!("1.5".parse::<SampleBudget>().is_err());
    }

    #[test]
    fn unknown_sweep_param() {
        assert!(matches!(
            sweep(&RunConfig::default(), "lr", &[]),
            Err(Error::Argument(_))
        ));
    }
}
