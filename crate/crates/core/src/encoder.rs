//! Single-layer GCN over ego-nets, the weight-shared target projection,
//! average-pool readout and the bilinear discriminator.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::linalg::{axpy, dot, Matrix};
use crate::rng::{self, domain};
use crate::sampler::{EgoNet, Level, RowSource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Prelu { slope: f64 },
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
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

    /// Derivative at `x`; the kink at 0 takes the left branch.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Prelu { slope } => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "prelu" => Ok(Activation::Prelu { slope: 0.25 }),
            other => match other.strip_prefix("prelu:").map(str::parse::<f64>) {
                Some(Ok(slope)) => Ok(Activation::Prelu { slope }),
                _ => Err(Error::Argument(format!(
                    "unknown activation {other:?} (expected relu, prelu or prelu:<slope>)"
                ))),
            },
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Activation::Relu => f.write_str("relu"),
            Activation::Prelu { slope } => write!(f, "prelu:{slope}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// d×F, shared by the GCN layer and the target projection.
    pub w_shared: Matrix,
    pub w_bilinear_nd: Matrix,
    pub w_bilinear_sb: Matrix,
    pub activation: Activation,
}

impl ModelParams {
    /// Uniform init in `±1/sqrt(fan_in)`.
    pub fn init(num_attrs: usize, hidden: usize, activation: Activation, seed: u64) -> Self {
        let mut rng = rng::stream(seed, &[domain::INIT]);
        let mut uniform = |rows: usize, cols: usize| {
            let bound = 1.0 / (rows.max(1) as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
            Matrix::from_vec(rows, cols, data).expect("sizes match")
        };
        let w_shared = uniform(num_attrs, hidden);
        let w_bilinear_nd = uniform(hidden, hidden);
        let w_bilinear_sb = uniform(hidden, hidden);
        Self {
            w_shared,
            w_bilinear_nd,
            w_bilinear_sb,
            activation,
        }
    }

    pub fn num_attrs(&self) -> usize {
        self.w_shared.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w_shared.cols()
    }

    pub fn bilinear(&self, level: Level) -> &Matrix {
        match level {
            Level::Node => &self.w_bilinear_nd,
            Level::Subgraph => &self.w_bilinear_sb,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.hidden();
        for (name, m) in [
            ("w_bilinear_nd", &self.w_bilinear_nd),
            ("w_bilinear_sb", &self.w_bilinear_sb),
        ] {
            if m.rows() != f || m.cols() != f {
                return Err(Error::Shape(format!(
                    "{name} is {}x{}, expected {f}x{f}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        for (name, m) in [
            ("w_shared", &self.w_shared),
            ("w_bilinear_nd", &self.w_bilinear_nd),
            ("w_bilinear_sb", &self.w_bilinear_sb),
        ] {
            if !m.is_finite() {
                return Err(Error::Numeric(name.into()));
            }
        }
        Ok(())
    }

    fn check_graph(&self, graph: &AttributedGraph) -> Result<()> {
        if graph.num_attrs() != self.num_attrs() {
            return Err(Error::Shape(format!(
                "graph has {} attributes, weights expect {}",
                graph.num_attrs(),
                self.num_attrs()
            )));
        }
        Ok(())
    }
}

/// Maps ego-net rows to `x · W_shared`.
pub trait Projector: Sync {
    fn hidden(&self) -> usize;
    fn project_node(&self, node: usize, out: &mut [f64]);

    fn project(&self, src: &RowSource, out: &mut [f64]) {
        match *src {
            RowSource::Zero => out.fill(0.0),
            RowSource::Node(j) => self.project_node(j, out),
            RowSource::Blend { base, donor, tau } => {
                let mut pd = vec![0.0; out.len()];
                self.project_node(donor, &mut pd);
                self.project_node(base, out);
                for (o, d) in out.iter_mut().zip(&pd) {
                    *o = tau * d + (1.0 - tau) * *o;
                }
            }
        }
    }
}

/// Projects on the fly from the sparse attribute rows.
pub struct DirectProjector<'a> {
    graph: &'a AttributedGraph,
    weight: &'a Matrix,
}

impl<'a> DirectProjector<'a> {
    pub fn new(graph: &'a AttributedGraph, params: &'a ModelParams) -> Result<Self> {
        params.check_graph(graph)?;
        Ok(Self {
            graph,
            weight: &params.w_shared,
        })
    }
}

impl Projector for DirectProjector<'_> {
    fn hidden(&self) -> usize {
        self.weight.cols()
    }

    fn project_node(&self, node: usize, out: &mut [f64]) {
        out.fill(0.0);
        let (cols, vals) = self.graph.attribute_nonzeros(node);
        for (&k, &v) in cols.iter().zip(vals) {
            axpy(v, self.weight.row(k), out);
        }
    }
}

/// All node projections computed once; valid while the weights are fixed.
pub struct CachedProjector {
    table: Matrix,
}

impl CachedProjector {
    pub fn new(graph: &AttributedGraph, params: &ModelParams) -> Result<Self> {
        let direct = DirectProjector::new(graph, params)?;
        let mut table = Matrix::zeros(graph.num_nodes(), params.hidden());
        for i in 0..graph.num_nodes() {
            direct.project_node(i, table.row_mut(i));
        }
        Ok(Self { table })
    }
}

impl Projector for CachedProjector {
    fn hidden(&self) -> usize {
        self.table.cols()
    }

    fn project_node(&self, node: usize, out: &mut [f64]) {
        out.copy_from_slice(self.table.row(node));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EgoEmbedding {
    /// `Â · X · W` before the activation.
    pub pre: Matrix,
    pub node_embs: Matrix,
    /// Row 0 of `node_embs`.
    pub target_emb: Vec<f64>,
    /// Column mean of `node_embs`, filled for subgraph-level ego-nets.
    pub pooled: Option<Vec<f64>>,
}

impl EgoEmbedding {
    /// The vector contrasted at `level`.
    pub fn summary(&self, level: Level) -> Vec<f64> {
        match level {
            Level::Node => self.target_emb.clone(),
            Level::Subgraph => self
                .pooled
                .clone()
                .unwrap_or_else(|| readout(&self.node_embs).expect("ego-nets are non-empty")),
        }
    }
}

pub fn gcn_forward_with(ego: &EgoNet, projector: &dyn Projector, activation: Activation) -> Result<EgoEmbedding> {
    let k = ego.size();
    let f = projector.hidden();
    if ego.adjacency().size() != k || ego.rows.len() != k {
        return Err(Error::Shape(format!(
            "ego-net with {k} members has {} rows and a {}x{0} adjacency",
            ego.rows.len(),
            ego.adjacency().size()
        )));
    }
    let mut xw = Matrix::zeros(k, f);
    for (r, src) in ego.rows.iter().enumerate() {
        projector.project(src, xw.row_mut(r));
    }
    let pre = ego.adjacency().matrix().matmul(&xw)?;
    let mut node_embs = pre.clone();
    node_embs
        .as_mut_slice()
        .iter_mut()
        .for_each(|v| *v = activation.apply(*v));
    if !node_embs.is_finite() {
        return Err(Error::Numeric("GCN output".into()));
    }
    let target_emb = node_embs.row(0).to_vec();
    let pooled = match ego.level {
        Level::Subgraph => Some(readout(&node_embs)?),
        Level::Node => None,
    };
    Ok(EgoEmbedding {
        pre,
        node_embs,
        target_emb,
        pooled,
    })
}

/// `act(Â · X · W)` for one ego-net.
pub fn gcn_forward(ego: &EgoNet, graph: &AttributedGraph, params: &ModelParams) -> Result<EgoEmbedding> {
    let projector = DirectProjector::new(graph, params)?;
    gcn_forward_with(ego, &projector, params.activation)
}

/// `act(x · W)` with the GCN weight.
pub fn mlp_forward(x: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    if x.len() != params.num_attrs() {
        return Err(Error::Shape(format!(
            "attribute vector has length {}, weights expect {}",
            x.len(),
            params.num_attrs()
        )));
    }
    let mut z = vec![0.0; params.hidden()];
    for (k, &v) in x.iter().enumerate() {
        if v != 0.0 {
            axpy(v, params.w_shared.row(k), &mut z);
        }
    }
    z.iter_mut().for_each(|v| *v = params.activation.apply(*v));
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("MLP output".into()));
    }
    Ok(z)
}

/// Average pooling over rows.
pub fn readout(embs: &Matrix) -> Result<Vec<f64>> {
    let k = embs.rows();
    if k == 0 {
        return Err(Error::Shape("readout of an empty embedding matrix".into()));
    }
    let mut out = vec![0.0; embs.cols()];
    for r in 0..k {
        axpy(1.0, embs.row(r), &mut out);
    }
    let inv = k as f64;
    out.iter_mut().for_each(|v| *v /= inv);
    Ok(out)
}

#[inline]
pub fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `hᵀ · W · z`
pub fn bilinear_logit(h: &[f64], z: &[f64], w_b: &Matrix) -> f64 {
    dot(h, &w_b.mul_vec(z))
}

pub fn bilinear_score(h: &[f64], z: &[f64], w_b: &Matrix) -> f64 {
    logistic(bilinear_logit(h, z, w_b))
}

const CHECKPOINT_FORMAT: &str = "anomix-params";

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    version: u32,
    num_attrs: usize,
    hidden: usize,
    activation: Activation,
    matrices: Vec<String>,
}

/// One JSON header line, then `w_shared`, `w_bilinear_nd`, `w_bilinear_sb`
/// as row-major little-endian f64.
pub fn save_params(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.into(),
        version: 1,
        num_attrs: params.num_attrs(),
        hidden: params.hidden(),
        activation: params.activation,
        matrices: vec!["w_shared".into(), "w_bilinear_nd".into(), "w_bilinear_sb".into()],
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &header)?;
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    write(b"\n")?;
    for m in [&params.w_shared, &params.w_bilinear_nd, &params.w_bilinear_sb] {
        for v in m.as_slice() {
            write(&v.to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut line = String::new();
    r.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    let header: CheckpointHeader = serde_json::from_str(line.trim_end())?;
    if header.format != CHECKPOINT_FORMAT || header.version != 1 {
        return Err(Error::State(format!(
            "{}: unsupported checkpoint {} v{}",
            path.display(),
            header.format,
            header.version
        )));
    }
    let mut read = |rows: usize, cols: usize| -> Result<Matrix> {
        let mut buf = vec![0u8; rows * cols * 8];
        r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
        let data = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Matrix::from_vec(rows, cols, data)
    };
    let (d, f) = (header.num_attrs, header.hidden);
    let params = ModelParams {
        w_shared: read(d, f)?,
        w_bilinear_nd: read(f, f)?,
        w_bilinear_sb: read(f, f)?,
        activation: header.activation,
    };
    params.validate()?;
    Ok(params)
}
