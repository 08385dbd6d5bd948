//! Contrastive losses, hand-derived gradients, optimizers and the training
//! loop.
//!
//! Each batch holds four contrast groups (normal/abnormal × node/subgraph).
//! Within a group, item `i` is paired with its own target for the positive
//! score and with the summary of item `(i + 1) mod width` of the same round
//! block for the negative score.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{gcn_forward_with, logistic, Activation, DirectProjector, EgoEmbedding, ModelParams, Projector};
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::linalg::{axpy, dot, Matrix};
use crate::mixer::{build_normal_ego, MixConfig, Mixer};
use crate::rng::{self, domain};
use crate::sampler::{Branch, EgoNet, Level, RowSource, SamplerConfig};

/// Scores are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_nd_norm: f64,
    pub l_sb_norm: f64,
    pub l_nd_ab: f64,
    pub l_sb_ab: f64,
    pub l_norm: f64,
    pub l_ab: f64,
    pub l_joint: f64,
}

/// Per-group contrastive losses before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LevelLosses {
    pub nd_norm: f64,
    pub sb_norm: f64,
    pub nd_ab: f64,
    pub sb_ab: f64,
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Argument(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

pub fn joint_loss(parts: LevelLosses, alpha: f64, beta: f64) -> Result<LossBreakdown> {
    check_unit("alpha", alpha)?;
    check_unit("beta", beta)?;
    let l_norm = alpha * parts.sb_norm + (1.0 - alpha) * parts.nd_norm;
    let l_ab = alpha * parts.sb_ab + (1.0 - alpha) * parts.nd_ab;
    Ok(LossBreakdown {
        l_nd_norm: parts.nd_norm,
        l_sb_norm: parts.sb_norm,
        l_nd_ab: parts.nd_ab,
        l_sb_ab: parts.sb_ab,
        l_norm,
        l_ab,
        l_joint: beta * l_norm + (1.0 - beta) * l_ab,
    })
}

#[inline]
fn clamp_score(s: f64) -> f64 {
    s.clamp(EPS, 1.0 - EPS)
}

/// Jensen-Shannon style objective `-(1/2n) Σ [log s + log(1 - s̃)]`.
pub fn js_loss(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.len() != negatives.len() {
        return Err(Error::Shape(format!(
            "{} positives but {} negatives",
            positives.len(),
            negatives.len()
        )));
    }
    if positives.is_empty() {
        return Err(Error::Shape("loss over an empty batch".into()));
    }
    let total: f64 = positives
        .iter()
        .zip(negatives)
        .map(|(&s, &sn)| clamp_score(s).ln() + (1.0 - clamp_score(sn)).ln())
        .sum();
    Ok(-total / (2.0 * positives.len() as f64))
}

/// Like [`js_loss`], but only items flagged in `drawn` contribute a negative
/// term, averaged over the drawn ones.
pub fn js_loss_drawn(positives: &[f64], negatives: &[f64], drawn: Option<&[bool]>) -> Result<f64> {
    let Some(drawn) = drawn else {
        return js_loss(positives, negatives);
    };
    if drawn.len() != negatives.len() {
        return Err(Error::Shape(format!(
            "{} draw flags for {} negatives",
            drawn.len(),
            negatives.len()
        )));
    }
    js_loss(positives, negatives)?;
    let pos: f64 = positives.iter().map(|&s| clamp_score(s).ln()).sum::<f64>() / positives.len() as f64;
    let m = drawn.iter().filter(|&&d| d).count();
    let neg = if m == 0 {
        0.0
    } else {
        negatives
            .iter()
            .zip(drawn)
            .filter(|(_, &d)| d)
            .map(|(&sn, _)| (1.0 - clamp_score(sn)).ln())
            .sum::<f64>()
            / m as f64
    };
    Ok(-(pos + neg) / 2.0)
}

/// Index of the negative partner of item `i` in blocks of `width`.
#[inline]
pub fn partner(i: usize, width: usize) -> usize {
    let block = i - i % width;
    block + (i % width + 1) % width
}

fn pair_scores(h: &[Vec<f64>], wz: &[Vec<f64>], width: usize) -> (Vec<f64>, Vec<f64>) {
    (0..h.len())
        .map(|i| {
            (
                logistic(dot(&h[i], &wz[i])),
                logistic(dot(&h[partner(i, width)], &wz[i])),
            )
        })
        .unzip()
}

/// Positive and shifted-negative bilinear scores over one batch.
pub fn contrast_pair(
    graph: &AttributedGraph,
    batch: &[EgoNet],
    targets_z: &[Vec<f64>],
    params: &ModelParams,
    level: Level,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if batch.len() < 2 {
        return Err(Error::State(format!(
            "contrast needs at least 2 ego-nets, got {}",
            batch.len()
        )));
    }
    if targets_z.len() != batch.len() {
        return Err(Error::Shape(format!(
            "{} ego-nets but {} target projections",
            batch.len(),
            targets_z.len()
        )));
    }
    let projector = DirectProjector::new(graph, params)?;
    let wb = params.bilinear(level);
    let h = batch
        .iter()
        .map(|ego| Ok(gcn_forward_with(ego, &projector, params.activation)?.summary(level)))
        .collect::<Result<Vec<_>>>()?;
    let wz: Vec<_> = targets_z.iter().map(|z| wb.mul_vec(z)).collect();
    Ok(pair_scores(&h, &wz, batch.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Argument(format!("unknown optimizer {other:?}"))),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub alpha: f64,
    pub beta: f64,
    pub rounds: usize,
    pub optimizer: OptimizerKind,
    pub hidden: usize,
    pub activation: Activation,
    /// Targets per epoch whose negative pairs are drawn; `None` draws one for
    /// every target.
    pub sample_budget: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 300,
            lr: 1e-3,
            alpha: 0.4,
            beta: 0.5,
            rounds: 4,
            optimizer: OptimizerKind::Adam,
            hidden: 64,
            activation: Activation::Relu,
            sample_budget: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_unit("alpha", self.alpha)?;
        check_unit("beta", self.beta)?;
        if self.batch_size < 2 {
            return Err(Error::Argument(format!(
                "batch size must be at least 2, got {}",
                self.batch_size
            )));
        }
        if self.rounds == 0 || self.hidden == 0 {
            return Err(Error::Argument("rounds and hidden dim must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Argument(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.sample_budget.is_some_and(|b| b < 2) {
            return Err(Error::Argument("sample budget must be at least 2".into()));
        }
        Ok(())
    }

    /// Weight of one contrast group in `l_joint`.
    pub fn group_weight(&self, branch: Branch, level: Level) -> f64 {
        level_weight(self.alpha, level) * branch_weight(self.beta, branch)
    }
}

fn level_weight(alpha: f64, level: Level) -> f64 {
    match level {
        Level::Subgraph => alpha,
        Level::Node => 1.0 - alpha,
    }
}

fn branch_weight(beta: f64, branch: Branch) -> f64 {
    match branch {
        Branch::Normal => beta,
        Branch::Abnormal => 1.0 - beta,
    }
}

/// Gradients with the shapes of [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w_shared: Matrix,
    pub w_bilinear_nd: Matrix,
    pub w_bilinear_sb: Matrix,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        let f = params.hidden();
        Self {
            w_shared: Matrix::zeros(params.num_attrs(), f),
            w_bilinear_nd: Matrix::zeros(f, f),
            w_bilinear_sb: Matrix::zeros(f, f),
        }
    }

    fn bilinear_mut(&mut self, level: Level) -> &mut Matrix {
        match level {
            Level::Node => &mut self.w_bilinear_nd,
            Level::Subgraph => &mut self.w_bilinear_sb,
        }
    }
}

/// Ego-nets contrasted together; pairing happens inside blocks of `width`.
#[derive(Debug, Clone)]
pub struct ContrastGroup {
    pub branch: Branch,
    pub level: Level,
    pub egos: Vec<EgoNet>,
    pub width: usize,
    /// Items whose negative pair is drawn; `None` draws all of them.
    pub drawn: Option<Vec<bool>>,
}

impl ContrastGroup {
    pub fn new(branch: Branch, level: Level, egos: Vec<EgoNet>, width: usize) -> Result<Self> {
        if width < 2 {
            return Err(Error::State(format!(
                "contrast block width must be at least 2, got {width}"
            )));
        }
        if egos.is_empty() || !egos.len().is_multiple_of(width) {
            return Err(Error::Shape(format!(
                "{} ego-nets do not split into blocks of {width}",
                egos.len()
            )));
        }
        Ok(Self {
            branch,
            level,
            egos,
            width,
            drawn: None,
        })
    }

    pub fn with_drawn(mut self, drawn: Vec<bool>) -> Result<Self> {
        if drawn.len() != self.egos.len() {
            return Err(Error::Shape(format!(
                "{} draw flags for {} ego-nets",
                drawn.len(),
                self.egos.len()
            )));
        }
        self.drawn = Some(drawn);
        Ok(self)
    }
}

struct ItemCache {
    emb: EgoEmbedding,
    z_pre: Vec<f64>,
    h: Vec<f64>,
    z: Vec<f64>,
    wz: Vec<f64>,
}

struct GroupCache {
    items: Vec<ItemCache>,
    pos: Vec<f64>,
    neg: Vec<f64>,
}

/// A batch of contrast groups plus the intermediates of its last forward pass.
pub struct BatchState {
    pub groups: Vec<ContrastGroup>,
    pub alpha: f64,
    pub beta: f64,
    cache: Option<Vec<GroupCache>>,
}

/// Which routes into `w_shared` receive gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradientPaths {
    pub gcn: bool,
    pub mlp: bool,
}

impl GradientPaths {
    pub const BOTH: Self = Self { gcn: true, mlp: true };
}

impl BatchState {
    pub fn new(groups: Vec<ContrastGroup>, alpha: f64, beta: f64) -> Result<Self> {
        check_unit("alpha", alpha)?;
        check_unit("beta", beta)?;
        Ok(Self {
            groups,
            alpha,
            beta,
            cache: None,
        })
    }

    fn coefficient(&self, g: &ContrastGroup) -> f64 {
        level_weight(self.alpha, g.level) * branch_weight(self.beta, g.branch)
    }

    /// Runs the forward pass, keeps the intermediates and returns the loss.
    pub fn forward(&mut self, graph: &AttributedGraph, params: &ModelParams) -> Result<LossBreakdown> {
        let projector = DirectProjector::new(graph, params)?;
        self.forward_with(&projector, params)
    }

    pub fn forward_with(&mut self, projector: &dyn Projector, params: &ModelParams) -> Result<LossBreakdown> {
        let act = params.activation;
        let mut caches = Vec::with_capacity(self.groups.len());
        let mut parts = LevelLosses::default();
        for g in &self.groups {
            let wb = params.bilinear(g.level);
            let items = g
                .egos
                .par_iter()
                .map(|ego| {
                    let emb = gcn_forward_with(ego, projector, act)?;
                    let mut z_pre = vec![0.0; projector.hidden()];
                    projector.project(&RowSource::Node(ego.target), &mut z_pre);
                    let z: Vec<f64> = z_pre.iter().map(|&v| act.apply(v)).collect();
                    let h = emb.summary(g.level);
                    let wz = wb.mul_vec(&z);
                    Ok(ItemCache { emb, z_pre, h, z, wz })
                })
                .collect::<Result<Vec<_>>>()?;
            let h: Vec<_> = items.iter().map(|it| it.h.clone()).collect();
            let wz: Vec<_> = items.iter().map(|it| it.wz.clone()).collect();
            let (pos, neg) = pair_scores(&h, &wz, g.width);
            let loss = js_loss_drawn(&pos, &neg, g.drawn.as_deref())?;
            let slot = match (g.branch, g.level) {
                (Branch::Normal, Level::Node) => &mut parts.nd_norm,
                (Branch::Normal, Level::Subgraph) => &mut parts.sb_norm,
                (Branch::Abnormal, Level::Node) => &mut parts.nd_ab,
                (Branch::Abnormal, Level::Subgraph) => &mut parts.sb_ab,
            };
            *slot += loss;
            caches.push(GroupCache { items, pos, neg });
        }
        self.cache = Some(caches);
        joint_loss(parts, self.alpha, self.beta)
    }
}

pub fn backward(state: &BatchState, graph: &AttributedGraph, params: &ModelParams) -> Result<Gradients> {
    backward_paths(state, graph, params, GradientPaths::BOTH)
}

/// Gradient of `l_joint`; `paths` masks the GCN or target-projection route
/// into `w_shared` (the bilinear gradients are unaffected).
pub fn backward_paths(
    state: &BatchState,
    graph: &AttributedGraph,
    params: &ModelParams,
    paths: GradientPaths,
) -> Result<Gradients> {
    let caches = state
        .cache
        .as_ref()
        .ok_or_else(|| Error::State("backward called before forward".into()))?;
    let act = params.activation;
    let f = params.hidden();
    let mut grads = Gradients::zeros_like(params);
    for (g, cache) in state.groups.iter().zip(caches) {
        let n = g.egos.len();
        let c = state.coefficient(g) / (2.0 * n as f64);
        let drawn_count = g.drawn.as_ref().map_or(n, |d| d.iter().filter(|&&x| x).count());
        let c_neg = state.coefficient(g) / (2.0 * drawn_count.max(1) as f64);
        let wb = params.bilinear(g.level);
        let mut dh = vec![vec![0.0; f]; n];
        let mut dz = Vec::with_capacity(n);
        {
            let dwb = grads.bilinear_mut(g.level);
            for i in 0..n {
                let j = partner(i, g.width);
                let (s, sn) = (cache.pos[i], cache.neg[i]);
                // d loss / d logit, zero where the score is clamped
                let gp = if (EPS..=1.0 - EPS).contains(&s) {
                    c * (s - 1.0)
                } else {
                    0.0
                };
                let is_drawn = g.drawn.as_ref().is_none_or(|d| d[i]);
                let gn = if is_drawn && (EPS..=1.0 - EPS).contains(&sn) {
                    c_neg * sn
                } else {
                    0.0
                };
                let it = &cache.items[i];
                let mut a = vec![0.0; f];
                axpy(gp, &it.h, &mut a);
                axpy(gn, &cache.items[j].h, &mut a);
                for (r, &ar) in a.iter().enumerate() {
                    if ar != 0.0 {
                        axpy(ar, &it.z, dwb.row_mut(r));
                    }
                }
                axpy(gp, &it.wz, &mut dh[i]);
                axpy(gn, &it.wz, &mut dh[j]);
                dz.push(wb.vec_mul(&a));
            }
        }
        // per-item upstream gradients at the projection rows and at z
        let upstream: Vec<(Matrix, Vec<f64>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let it = &cache.items[i];
                let ego = &g.egos[i];
                let k = ego.size();
                let pre = &it.emb.pre;
                let mut dp = Matrix::zeros(k, f);
                let (rows, scale) = match g.level {
                    Level::Node => (0..1, 1.0),
                    Level::Subgraph => (0..k, 1.0 / k as f64),
                };
                for r in rows {
                    for (col, out) in dp.row_mut(r).iter_mut().enumerate() {
                        *out = dh[i][col] * scale * act.derivative(pre[(r, col)]);
                    }
                }
                // Âᵀ · dP
                let adj = ego.adjacency().matrix();
                let mut grad_rows = Matrix::zeros(k, f);
                for r in 0..k {
                    for cidx in 0..k {
                        let a = adj[(r, cidx)];
                        if a != 0.0 {
                            axpy(a, dp.row(r), grad_rows.row_mut(cidx));
                        }
                    }
                }
                let dz_pre: Vec<f64> = dz[i]
                    .iter()
                    .zip(&it.z_pre)
                    .map(|(&d, &p)| d * act.derivative(p))
                    .collect();
                (grad_rows, dz_pre)
            })
            .collect();
        let dw = &mut grads.w_shared;
        for (ego, (grad_rows, dz_pre)) in g.egos.iter().zip(&upstream) {
            if paths.gcn {
                for (r, src) in ego.rows.iter().enumerate() {
                    accumulate_row(graph, src, grad_rows.row(r), dw);
                }
            }
            if paths.mlp {
                accumulate_row(graph, &RowSource::Node(ego.target), dz_pre, dw);
            }
        }
    }
    Ok(grads)
}

/// `dW += xᵀ · g` for the attribute row described by `src`.
fn accumulate_row(graph: &AttributedGraph, src: &RowSource, g: &[f64], dw: &mut Matrix) {
    let mut add = |node: usize, weight: f64| {
        let (cols, vals) = graph.attribute_nonzeros(node);
        for (&k, &v) in cols.iter().zip(vals) {
            axpy(weight * v, g, dw.row_mut(k));
        }
    };
    match *src {
        RowSource::Zero => {}
        RowSource::Node(j) => add(j, 1.0),
        RowSource::Blend { base, donor, tau } => {
            add(donor, tau);
            add(base, 1.0 - tau);
        }
    }
}

/// SGD or Adam with moments (0.9, 0.999) and eps 1e-8.
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(kind: OptimizerKind, lr: f64, params: &ModelParams) -> Self {
        let sizes = [
            params.w_shared.as_slice().len(),
            params.w_bilinear_nd.as_slice().len(),
            params.w_bilinear_sb.as_slice().len(),
        ];
        Self {
            kind,
            lr,
            step: 0,
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let (bc1, bc2) = (1.0 - Self::BETA1.powi(t), 1.0 - Self::BETA2.powi(t));
        let pairs = [
            (params.w_shared.as_mut_slice(), grads.w_shared.as_slice()),
            (params.w_bilinear_nd.as_mut_slice(), grads.w_bilinear_nd.as_slice()),
            (params.w_bilinear_sb.as_mut_slice(), grads.w_bilinear_sb.as_slice()),
        ];
        for (idx, (w, g)) in pairs.into_iter().enumerate() {
            match self.kind {
                OptimizerKind::Sgd => axpy(-self.lr, g, w),
                OptimizerKind::Adam => {
                    let (m, v) = (&mut self.m[idx], &mut self.v[idx]);
                    for p in 0..w.len() {
                        m[p] = Self::BETA1 * m[p] + (1.0 - Self::BETA1) * g[p];
                        v[p] = Self::BETA2 * v[p] + (1.0 - Self::BETA2) * g[p] * g[p];
                        let (mh, vh) = (m[p] / bc1, v[p] / bc2);
                        w[p] -= self.lr * mh / (vh.sqrt() + Self::EPS);
                    }
                }
            }
        }
    }
}

/// Consecutive batch ranges of at most `size`; a trailing batch of one is
/// folded into its predecessor so every batch can form negatives.
pub fn split_batches(len: usize, size: usize) -> Vec<Range<usize>> {
    let mut out: Vec<Range<usize>> = (0..len).step_by(size.max(1)).map(|s| s..(s + size).min(len)).collect();
    if out.len() > 1 && out.last().is_some_and(|r| r.len() == 1) {
        let last = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").end = last.end;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochLoss>,
}

/// Builds the four contrast groups of one training batch. Both branches
/// centre on the batch targets; the abnormal ego-nets carry mixed-in donor
/// rows.
fn training_batch(
    graph: &AttributedGraph,
    mixer: &Mixer,
    sampler: &SamplerConfig,
    cfg: &TrainConfig,
    epoch: usize,
    targets: &[usize],
    drawn: Option<&[bool]>,
) -> Result<BatchState> {
    let b = targets.len();
    let mut groups = Vec::with_capacity(4);
    for branch in [Branch::Normal, Branch::Abnormal] {
        for level in Level::BOTH {
            let jobs: Vec<(usize, usize)> = (0..cfg.rounds).flat_map(|r| (0..b).map(move |s| (r, s))).collect();
            let egos = jobs
                .par_iter()
                .map(|&(r, s)| {
                    let key = rng::mix_key(&[domain::EPOCH, epoch as u64, r as u64, level.tag(), branch.tag()]);
                    let mut ego = match branch {
                        Branch::Normal => build_normal_ego(graph, targets[s], sampler, key)?,
                        Branch::Abnormal => mixer.mixed_ego(graph, targets[s], sampler, key)?,
                    };
                    ego.level = level;
                    Ok(ego)
                })
                .collect::<Result<Vec<_>>>()?;
            let group = ContrastGroup::new(branch, level, egos, b)?;
            groups.push(match drawn {
                Some(d) => group.with_drawn(jobs.iter().map(|&(_, s)| d[targets[s]]).collect())?,
                None => group,
            });
        }
    }
    BatchState::new(groups, cfg.alpha, cfg.beta)
}

/// Trains from a fresh seeded initialization.
pub fn train(
    graph: &AttributedGraph,
    sampler: &SamplerConfig,
    mix: &MixConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let params = ModelParams::init(graph.num_attrs(), cfg.hidden, cfg.activation, cfg.seed);
    train_from(graph, sampler, mix, cfg, params)
}

pub fn train_from(
    graph: &AttributedGraph,
    sampler: &SamplerConfig,
    mix: &MixConfig,
    cfg: &TrainConfig,
    mut params: ModelParams,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    sampler.validate()?;
    params.validate()?;
    if params.num_attrs() != graph.num_attrs() {
        return Err(Error::Shape(format!(
            "weights expect {} attributes, graph has {}",
            params.num_attrs(),
            graph.num_attrs()
        )));
    }
    let mut history = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 {
        return Ok(TrainOutcome { params, history });
    }
    let mixer = Mixer::new(graph, *mix)?;
    let normal_pool: Vec<usize> = (0..graph.num_nodes()).filter(|&i| !graph.is_revealed(i)).collect();
    if normal_pool.len() < 2 {
        return Err(Error::State(
            "fewer than two nodes available for the normal branch".into(),
        ));
    }
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, &params);

    for epoch in 0..cfg.epochs {
        let mut order = normal_pool.clone();
        order.shuffle(&mut rng::stream(cfg.seed, &[domain::EPOCH, epoch as u64]));
        // a budget below the pool draws negatives for a random subset of targets
        let drawn = cfg.sample_budget.filter(|&b| b < order.len()).map(|budget| {
            let mut picks = normal_pool.clone();
            picks.shuffle(&mut rng::stream(cfg.seed, &[domain::NEG_BUDGET, epoch as u64]));
            let mut flags = vec![false; graph.num_nodes()];
            picks[..budget].iter().for_each(|&t| flags[t] = true);
            flags
        });
        let batches = split_batches(order.len(), cfg.batch_size);
        let mut sum = LossBreakdown::default();
        for range in &batches {
            let mut state = training_batch(
                graph,
                &mixer,
                sampler,
                cfg,
                epoch,
                &order[range.clone()],
                drawn.as_deref(),
            )?;
            let projector = DirectProjector::new(graph, &params)?;
            let loss = state.forward_with(&projector, &params)?;
            let grads = backward(&state, graph, &params)?;
            opt.step(&mut params, &grads);
            if !params.w_shared.is_finite() {
                return Err(Error::Numeric(format!("weights after epoch {epoch}")));
            }
            add_loss(&mut sum, &loss, 1.0);
        }
        let mut mean = LossBreakdown::default();
        add_loss(&mut mean, &sum, 1.0 / batches.len() as f64);
        log::debug!("epoch {epoch}: l_joint {:.6}", mean.l_joint);
        history.push(EpochLoss { epoch, loss: mean });
    }
    Ok(TrainOutcome { params, history })
}

fn add_loss(acc: &mut LossBreakdown, l: &LossBreakdown, w: f64) {
    acc.l_nd_norm += w * l.l_nd_norm;
    acc.l_sb_norm += w * l.l_sb_norm;
    acc.l_nd_ab += w * l.l_nd_ab;
    acc.l_sb_ab += w * l.l_sb_ab;
    acc.l_norm += w * l.l_norm;
    acc.l_ab += w * l.l_ab;
    acc.l_joint += w * l.l_joint;
}

/// CSV `epoch,l_joint,l_norm,l_ab`.
pub fn write_loss_history(history: &[EpochLoss], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |s: String| w.write_all(s.as_bytes()).map_err(|e| Error::io(path, e));
    put("epoch,l_joint,l_norm,l_ab\n".into())?;
    for e in history {
        put(format!(
            "{},{},{},{}\n",
            e.epoch, e.loss.l_joint, e.loss.l_norm, e.loss.l_ab
        ))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
