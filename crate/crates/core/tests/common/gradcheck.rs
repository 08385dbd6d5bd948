//! Independent dense implementation of the joint loss, used to check the
//! analytic gradients by central differences.
#![allow(dead_code, clippy::needless_range_loop)]

use anomix::encoder::{Activation, ModelParams};
use anomix::graph::AttributedGraph;
use anomix::linalg::Matrix;
use anomix::sampler::{mask_target, Branch, EgoNet, Level, RowSource};
use anomix::trainer::{backward_paths, BatchState, ContrastGroup, GradientPaths, EPS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;

pub struct Instance {
    pub graph: AttributedGraph,
    pub groups: Vec<ContrastGroup>,
    pub alpha: f64,
    pub beta: f64,
    pub act: Activation,
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(5..=9);
    let d = rng.random_range(2..=6);
    let mut data = vec![0.0; n * d];
    for v in &mut data {
        // sparse-ish attributes exercise the zero-skip paths
        if rng.random::<f64>() < 0.7 {
            *v = rng.random_range(-1.0..1.0);
        }
    }
    let attrs = Matrix::from_vec(n, d, data).unwrap();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < 0.4 {
                edges.push((u, v));
            }
        }
    }
    let graph = AttributedGraph::from_edges(attrs, &edges).unwrap();
    let mut groups = Vec::new();
    for branch in [Branch::Normal, Branch::Abnormal] {
        for level in Level::BOTH {
            let width = rng.random_range(2..=3);
            let rounds = rng.random_range(1..=2);
            let egos = (0..width * rounds)
                .map(|_| {
                    let k = rng.random_range(1..=4.min(n));
                    let mut members: Vec<usize> = Vec::new();
                    while members.len() < k {
                        let m = rng.random_range(0..n);
                        if !members.contains(&m) {
                            members.push(m);
                        }
                    }
                    let mut ego = EgoNet::from_members(&graph, members, branch, level).unwrap();
                    for r in 1..k {
                        if rng.random::<f64>() < 0.4 {
                            ego.rows[r] = RowSource::Blend {
                                base: ego.members[r],
                                donor: rng.random_range(0..n),
                                tau: rng.random_range(0.0..1.0),
                            };
                        }
                    }
                    mask_target(ego)
                })
                .collect();
            let group = ContrastGroup::new(branch, level, egos, width).unwrap();
            // half the groups draw negatives for a random subset only
            let group = if rng.random::<bool>() {
                let flags = (0..width * rounds).map(|_| rng.random::<bool>()).collect();
                group.with_drawn(flags).unwrap()
            } else {
                group
            };
            groups.push(group);
        }
    }
    let act = if rng.random::<bool>() {
        Activation::Relu
    } else {
        Activation::Prelu {
            slope: rng.random_range(0.05..0.5),
        }
    };
    Instance {
        graph,
        groups,
        alpha: rng.random_range(0.0..1.0),
        beta: rng.random_range(0.0..1.0),
        act,
    }
}

pub fn random_params(rng: &mut ChaCha8Rng, d: usize, f: usize, act: Activation) -> ModelParams {
    let mut m =
        |r: usize, c: usize| Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    ModelParams {
        w_shared: m(d, f),
        w_bilinear_nd: m(f, f),
        w_bilinear_sb: m(f, f),
        activation: act,
    }
}

// ---- dense oracle -------------------------------------------------------

pub fn act_fn(act: Activation, x: f64) -> f64 {
    match act {
        Activation::Relu => x.max(0.0),
        Activation::Prelu { slope } => {
            if x > 0.0 {
                x
            } else {
                slope * x
            }
        }
    }
}

pub fn dense_row(graph: &AttributedGraph, src: &RowSource) -> Vec<f64> {
    let d = graph.num_attrs();
    match *src {
        RowSource::Zero => vec![0.0; d],
        RowSource::Node(j) => graph.attribute_row(j).to_vec(),
        RowSource::Blend { base, donor, tau } => (0..d)
            .map(|c| tau * graph.attribute_row(donor)[c] + (1.0 - tau) * graph.attribute_row(base)[c])
            .collect(),
    }
}

/// D^-1/2 (A + I) D^-1/2 from edge queries.
pub fn dense_adjacency(graph: &AttributedGraph, members: &[usize]) -> Vec<Vec<f64>> {
    let k = members.len();
    let a: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j || graph.has_edge(members[i], members[j]) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    (0..k)
        .map(|i| (0..k).map(|j| a[i][j] / (deg[i] * deg[j]).sqrt()).collect())
        .collect()
}

pub fn project(x: &[f64], w: &[Vec<f64>]) -> Vec<f64> {
    let f = w[0].len();
    (0..f)
        .map(|c| x.iter().zip(w).map(|(xv, row)| xv * row[c]).sum())
        .collect()
}

pub fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

pub struct Weights {
    pub gcn: Vec<Vec<f64>>,
    pub mlp: Vec<Vec<f64>>,
    pub nd: Vec<Vec<f64>>,
    pub sb: Vec<Vec<f64>>,
}

impl Weights {
    pub fn from_params(p: &ModelParams) -> Self {
        Self {
            gcn: to_rows(&p.w_shared),
            mlp: to_rows(&p.w_shared),
            nd: to_rows(&p.w_bilinear_nd),
            sb: to_rows(&p.w_bilinear_sb),
        }
    }
}

pub fn oracle_loss(inst: &Instance, w: &Weights) -> f64 {
    let g = &inst.graph;
    let mut total = 0.0;
    for group in &inst.groups {
        let wb = match group.level {
            Level::Node => &w.nd,
            Level::Subgraph => &w.sb,
        };
        let mut hs = Vec::new();
        let mut zs = Vec::new();
        for ego in &group.egos {
            let adj = dense_adjacency(g, &ego.members);
            let xw: Vec<Vec<f64>> = ego.rows.iter().map(|r| project(&dense_row(g, r), &w.gcn)).collect();
            let k = ego.members.len();
            let f = w.gcn[0].len();
            let emb: Vec<Vec<f64>> = (0..k)
                .map(|i| {
                    (0..f)
                        .map(|c| act_fn(inst.act, (0..k).map(|j| adj[i][j] * xw[j][c]).sum()))
                        .collect()
                })
                .collect();
            let h = match group.level {
                Level::Node => emb[0].clone(),
                Level::Subgraph => (0..f)
                    .map(|c| emb.iter().map(|r| r[c]).sum::<f64>() / k as f64)
                    .collect(),
            };
            let z: Vec<f64> = project(g.attribute_row(ego.target), &w.mlp)
                .into_iter()
                .map(|v| act_fn(inst.act, v))
                .collect();
            hs.push(h);
            zs.push(z);
        }
        let score = |h: &[f64], z: &[f64]| {
            let u: f64 = (0..h.len())
                .map(|a| (0..z.len()).map(|b| h[a] * wb[a][b] * z[b]).sum::<f64>())
                .sum();
            sigmoid(u).clamp(EPS, 1.0 - EPS)
        };
        let n = group.egos.len();
        let width = group.width;
        let drawn = |i: usize| group.drawn.as_ref().is_none_or(|d| d[i]);
        let (mut pos, mut neg, mut m) = (0.0, 0.0, 0usize);
        for i in 0..n {
            let j = (i / width) * width + (i % width + 1) % width;
            pos += score(&hs[i], &zs[i]).ln();
            if drawn(i) {
                neg += (1.0 - score(&hs[j], &zs[i])).ln();
                m += 1;
            }
        }
        let l = -(pos / n as f64 + if m == 0 { 0.0 } else { neg / m as f64 }) / 2.0;
        let lw = match group.level {
            Level::Subgraph => inst.alpha,
            Level::Node => 1.0 - inst.alpha,
        };
        let bw = match group.branch {
            Branch::Normal => inst.beta,
            Branch::Abnormal => 1.0 - inst.beta,
        };
        total += lw * bw * l;
    }
    total
}

/// Smallest |pre-activation| over the instance; kinks closer than the step
/// would make central differences meaningless.
pub fn min_preactivation(inst: &Instance, w: &Weights) -> f64 {
    let g = &inst.graph;
    let mut m = f64::INFINITY;
    for group in &inst.groups {
        for ego in &group.egos {
            let adj = dense_adjacency(g, &ego.members);
            let xw: Vec<Vec<f64>> = ego.rows.iter().map(|r| project(&dense_row(g, r), &w.gcn)).collect();
            let k = ego.members.len();
            for i in 0..k {
                for c in 0..w.gcn[0].len() {
                    let v: f64 = (0..k).map(|j| adj[i][j] * xw[j][c]).sum();
                    m = m.min(v.abs());
                }
            }
            for v in project(g.attribute_row(ego.target), &w.mlp) {
                m = m.min(v.abs());
            }
        }
    }
    m
}

pub fn central_difference(
    inst: &Instance,
    w: &Weights,
    pick: impl Fn(&mut Weights) -> &mut Vec<Vec<f64>>,
) -> Vec<Vec<f64>> {
    let mut probe = Weights {
        gcn: w.gcn.clone(),
        mlp: w.mlp.clone(),
        nd: w.nd.clone(),
        sb: w.sb.clone(),
    };
    let (rows, cols) = {
        let m = pick(&mut probe);
        (m.len(), m[0].len())
    };
    let mut out = vec![vec![0.0; cols]; rows];
    for r in 0..rows {
        for c in 0..cols {
            let orig = pick(&mut probe)[r][c];
            pick(&mut probe)[r][c] = orig + STEP;
            let up = oracle_loss(inst, &probe);
            pick(&mut probe)[r][c] = orig - STEP;
            let down = oracle_loss(inst, &probe);
            pick(&mut probe)[r][c] = orig;
            out[r][c] = (up - down) / (2.0 * STEP);
        }
    }
    out
}

pub fn instances(count: usize, seed: u64) -> Vec<(Instance, ModelParams)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let inst = random_instance(&mut rng);
        let f = rng.random_range(1..=5);
        let params = random_params(&mut rng, inst.graph.num_attrs(), f, inst.act);
        if min_preactivation(&inst, &Weights::from_params(&params)) > 1e-3 {
            out.push((inst, params));
        }
    }
    out
}

/// `|a - n| / max(|a|, |n|, 1e-6)` maximized over the entries.
pub fn worst_relative_error(analytic: &Matrix, numeric: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (r, row) in numeric.iter().enumerate() {
        for (c, &n) in row.iter().enumerate() {
            let a = analytic.row(r)[c];
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-6));
        }
    }
    worst
}

/// Central differences of the shared matrix with both of its routes perturbed.
pub fn shared_difference(inst: &Instance, w: &Weights) -> Vec<Vec<f64>> {
    let shared = |r: usize, c: usize, delta: f64| {
        let mut p = Weights {
            gcn: w.gcn.clone(),
            mlp: w.mlp.clone(),
            nd: w.nd.clone(),
            sb: w.sb.clone(),
        };
        p.gcn[r][c] += delta;
        p.mlp[r][c] += delta;
        oracle_loss(inst, &p)
    };
    (0..w.gcn.len())
        .map(|r| {
            (0..w.gcn[0].len())
                .map(|c| (shared(r, c, STEP) - shared(r, c, -STEP)) / (2.0 * STEP))
                .collect()
        })
        .collect()
}

/// Largest relative error over every gradient entry of `count` instances,
/// with the number of entries checked.
pub fn gradient_survey(count: usize, seed: u64) -> (f64, usize) {
    let mut worst: f64 = 0.0;
    let mut entries = 0;
    for (inst, params) in instances(count, seed) {
        let mut state = BatchState::new(inst.groups.clone(), inst.alpha, inst.beta).unwrap();
        state.forward(&inst.graph, &params).unwrap();
        let grads = backward_paths(&state, &inst.graph, &params, GradientPaths::BOTH).unwrap();
        let w = Weights::from_params(&params);
        for (analytic, numeric) in [
            (&grads.w_shared, shared_difference(&inst, &w)),
            (&grads.w_bilinear_nd, central_difference(&inst, &w, |p| &mut p.nd)),
            (&grads.w_bilinear_sb, central_difference(&inst, &w, |p| &mut p.sb)),
        ] {
            worst = worst.max(worst_relative_error(analytic, &numeric));
            entries += numeric.len() * numeric[0].len();
        }
    }
    (worst, entries)
}
