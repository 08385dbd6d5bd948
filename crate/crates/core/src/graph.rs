//! Attributed graph storage: CSR adjacency, dense attributes, anomaly labels.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{self, domain};

/// Undirected simple graph with one attribute row per node.
///
/// Adjacency is stored in compressed row form with both directions of every
/// edge present, sorted column indices, no self-loops and no duplicates.
/// A sparse copy of the attribute rows is kept alongside the dense matrix;
/// projections and gradients iterate the non-zeros only.
#[derive(Debug, Clone)]
pub struct AttributedGraph {
    num_edges: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    attributes: Matrix,
    attr_offsets: Vec<usize>,
    attr_cols: Vec<usize>,
    attr_vals: Vec<f64>,
    labels: Option<Vec<bool>>,
    revealed: Option<Vec<bool>>,
}

/// What the edge-list cleanup removed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeStats {
    pub input_edges: usize,
    pub self_loops: usize,
    pub duplicates: usize,
}

impl AttributedGraph {
    /// Builds a graph from an arbitrary edge list: edges are symmetrized,
    /// deduplicated and self-loops dropped.
    pub fn from_edges(attributes: Matrix, edges: &[(usize, usize)]) -> Result<Self> {
        Self::from_edges_with_stats(attributes, edges).map(|(g, _)| g)
    }

    pub fn from_edges_with_stats(attributes: Matrix, edges: &[(usize, usize)]) -> Result<(Self, EdgeStats)> {
        let n = attributes.rows();
        let mut stats = EdgeStats {
            input_edges: edges.len(),
            ..EdgeStats::default()
        };
        let mut pairs = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            for id in [u, v] {
                if id >= n {
                    return Err(Error::Index { index: id, len: n });
                }
            }
            if u == v {
                stats.self_loops += 1;
                continue;
            }
            pairs.push((u.min(v), u.max(v)));
        }
        pairs.sort_unstable();
        let before = pairs.len();
        pairs.dedup();
        stats.duplicates = before - pairs.len();

        let mut degree = vec![0usize; n];
        for &(u, v) in &pairs {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0);
        for d in &degree {
            row_offsets.push(row_offsets.last().unwrap() + d);
        }
        let mut fill = row_offsets[..n].to_vec();
        let mut col_indices = vec![0usize; 2 * pairs.len()];
        for &(u, v) in &pairs {
            col_indices[fill[u]] = v;
            fill[u] += 1;
            col_indices[fill[v]] = u;
            fill[v] += 1;
        }
        for u in 0..n {
            col_indices[row_offsets[u]..row_offsets[u + 1]].sort_unstable();
        }

        let mut graph = Self {
            num_edges: pairs.len(),
            row_offsets,
            col_indices,
            attributes: Matrix::zeros(0, 0),
            attr_offsets: Vec::new(),
            attr_cols: Vec::new(),
            attr_vals: Vec::new(),
            labels: None,
            revealed: None,
        };
        graph.set_attributes(attributes);
        Ok((graph, stats))
    }

    fn set_attributes(&mut self, attributes: Matrix) {
        self.attr_offsets = Vec::with_capacity(attributes.rows() + 1);
        self.attr_offsets.push(0);
        self.attr_cols.clear();
        self.attr_vals.clear();
        for i in 0..attributes.rows() {
            for (k, &v) in attributes.row(i).iter().enumerate() {
                if v != 0.0 {
                    self.attr_cols.push(k);
                    self.attr_vals.push(v);
                }
            }
            self.attr_offsets.push(self.attr_cols.len());
        }
        self.attributes = attributes;
    }

    /// Same structure and labels, new attribute matrix.
    pub fn with_attributes(&self, attributes: Matrix) -> Result<Self> {
        if attributes.rows() != self.num_nodes() {
            return Err(Error::Shape(format!(
                "attribute matrix has {} rows, graph has {} nodes",
                attributes.rows(),
                self.num_nodes()
            )));
        }
        let mut g = self.clone();
        g.set_attributes(attributes);
        Ok(g)
    }

    /// Replaces the edge set, keeping attributes and labels.
    pub fn with_edges(&self, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::from_edges(self.attributes.clone(), edges)?;
        g.labels = self.labels.clone();
        g.revealed = self.revealed.clone();
        Ok(g)
    }

    pub fn with_labels(mut self, labels: Vec<bool>) -> Result<Self> {
        if labels.len() != self.num_nodes() {
            return Err(Error::Shape(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.num_nodes()
            )));
        }
        self.labels = Some(labels);
        self.revealed = None;
        Ok(self)
    }

    /// Rescales every attribute row to unit norm (zero rows stay zero).
    pub fn row_normalized(&self, norm: RowNorm) -> Self {
        if norm == RowNorm::Raw {
            return self.clone();
        }
        let mut attrs = self.attributes.clone();
        for i in 0..attrs.rows() {
            let row = attrs.row_mut(i);
            let total = match norm {
                RowNorm::L1 => row.iter().map(|v| v.abs()).sum::<f64>(),
                _ => row.iter().map(|v| v * v).sum::<f64>().sqrt(),
            };
            if total > 0.0 {
                row.iter_mut().for_each(|v| *v /= total);
            }
        }
        let mut g = self.clone();
        g.set_attributes(attrs);
        g
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.row_offsets.len() - 1
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    #[inline]
    pub fn num_attrs(&self) -> usize {
        self.attributes.cols()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    #[inline]
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[u]..self.row_offsets[u + 1]]
    }

    #[inline]
    pub fn degree(&self, u: usize) -> usize {
        self.row_offsets[u + 1] - self.row_offsets[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in sorted order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.num_nodes())
            .flat_map(|u| self.neighbors(u).iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
            .collect()
    }

    pub fn attributes(&self) -> &Matrix {
        &self.attributes
    }

    #[inline]
    pub fn attribute_row(&self, i: usize) -> &[f64] {
        self.attributes.row(i)
    }

    /// Non-zero attribute entries of node `i` as `(columns, values)`.
    #[inline]
    pub fn attribute_nonzeros(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.attr_offsets[i]..self.attr_offsets[i + 1];
        (&self.attr_cols[r.clone()], &self.attr_vals[r])
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn revealed(&self) -> Option<&[bool]> {
        self.revealed.as_deref()
    }

    #[inline]
    pub fn is_anomaly(&self, i: usize) -> bool {
        self.labels.as_ref().is_some_and(|l| l[i])
    }

    #[inline]
    pub fn is_revealed(&self, i: usize) -> bool {
        self.revealed.as_ref().is_some_and(|r| r[i])
    }

    pub fn anomalies(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&i| self.is_anomaly(i)).collect()
    }

    pub fn revealed_anomalies(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&i| self.is_revealed(i)).collect()
    }

    pub fn check_node(&self, id: usize) -> Result<()> {
        if id >= self.num_nodes() {
            Err(Error::Index {
                index: id,
                len: self.num_nodes(),
            })
        } else {
            Ok(())
        }
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` of a sampled subgraph, dense K×K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedAdjacency(Matrix);

impl NormalizedAdjacency {
    pub fn size(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

/// Normalized adjacency of the subgraph induced by `node_ids` (in order).
///
/// Only the first occurrence of a repeated id takes part in edges; later
/// copies carry just their self-loop.
pub fn normalize_subgraph(graph: &AttributedGraph, node_ids: &[usize]) -> Result<NormalizedAdjacency> {
    if node_ids.is_empty() {
        return Err(Error::Argument("subgraph needs at least one node".into()));
    }
    for &id in node_ids {
        graph.check_node(id)?;
    }
    let k = node_ids.len();
    let first: Vec<bool> = (0..k).map(|p| !node_ids[..p].contains(&node_ids[p])).collect();
    let mut linked = vec![false; k * k];
    let mut deg = vec![1usize; k];
    for p in 0..k {
        if !first[p] {
            continue;
        }
        for q in (p + 1)..k {
            if first[q] && graph.has_edge(node_ids[p], node_ids[q]) {
                linked[p * k + q] = true;
                linked[q * k + p] = true;
                deg[p] += 1;
                deg[q] += 1;
            }
        }
    }
    let mut m = Matrix::zeros(k, k);
    for p in 0..k {
        m[(p, p)] = 1.0 / deg[p] as f64;
        for q in 0..k {
            if linked[p * k + q] {
                // integer product keeps (p, q) and (q, p) bit-identical
                m[(p, q)] = 1.0 / ((deg[p] * deg[q]) as f64).sqrt();
            }
        }
    }
    Ok(NormalizedAdjacency(m))
}

/// Marks `⌈ratio · #anomalies⌉` uniformly chosen anomalies as revealed.
pub fn reveal_labels(graph: &AttributedGraph, ratio: f64, seed: u64) -> Result<AttributedGraph> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::Argument(format!("reveal ratio {ratio} outside [0, 1]")));
    }
    let labels = graph
        .labels()
        .ok_or_else(|| Error::State("graph has no anomaly labels to reveal".into()))?;
    let mut anomalies: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    if anomalies.is_empty() {
        return Err(Error::State("graph has no labelled anomalies".into()));
    }
    // tolerance absorbs ratios such as 0.1 that are not exact in binary
    let count = ((ratio * anomalies.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    let count = count.min(anomalies.len());
    let mut rng = rng::stream(seed, &[domain::REVEAL]);
    anomalies.shuffle(&mut rng);
    let mut revealed = vec![false; labels.len()];
    for &i in &anomalies[..count] {
        revealed[i] = true;
    }
    let mut g = graph.clone();
    g.revealed = Some(revealed);
    Ok(g)
}

/// Attribute row scaling applied before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowNorm {
    Raw,
    L1,
    L2,
}

impl std::str::FromStr for RowNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" | "none" => Ok(RowNorm::Raw),
            "l1" => Ok(RowNorm::L1),
            "l2" => Ok(RowNorm::L2),
            other => Err(Error::Argument(format!("unknown row normalization {other:?}"))),
        }
    }
}

impl std::fmt::Display for RowNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RowNorm::Raw => "raw",
            RowNorm::L1 => "l1",
            RowNorm::L2 => "l2",
        })
    }
}

/// Counts gathered while reading an edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub edge_lines: usize,
    pub stats: EdgeStats,
}

pub fn load_graph(
    edge_path: impl AsRef<Path>,
    attr_path: impl AsRef<Path>,
    label_path: Option<&Path>,
) -> Result<AttributedGraph> {
    load_graph_with_report(edge_path, attr_path, label_path).map(|(g, _)| g)
}

pub fn load_graph_with_report(
    edge_path: impl AsRef<Path>,
    attr_path: impl AsRef<Path>,
    label_path: Option<&Path>,
) -> Result<(AttributedGraph, LoadReport)> {
    let attributes = read_attributes(attr_path.as_ref())?;
    let edges = read_edges(edge_path.as_ref())?;
    let n = attributes.rows();
    for &(u, v, line) in &edges {
        if u >= n || v >= n {
            return Err(Error::Parse {
                path: edge_path.as_ref().to_path_buf(),
                line,
                message: format!("node id {} out of range: attribute file defines {n} nodes", u.max(v)),
            });
        }
    }
    let pairs: Vec<(usize, usize)> = edges.iter().map(|&(u, v, _)| (u, v)).collect();
    let (mut graph, stats) = AttributedGraph::from_edges_with_stats(attributes, &pairs)?;
    if stats.self_loops > 0 {
        log::warn!(
            "{}: dropped {} self-loop(s)",
            edge_path.as_ref().display(),
            stats.self_loops
        );
    }
    if let Some(path) = label_path {
        let labels = read_labels(path, n)?;
        graph = graph.with_labels(labels)?;
    }
    Ok((
        graph,
        LoadReport {
            edge_lines: edges.len(),
            stats,
        },
    ))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_edges(path: &Path) -> Result<Vec<(usize, usize, usize)>> {
    let mut edges = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(path, lineno, format!("expected \"u v\", got {line:?}")));
        };
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| parse_err(path, lineno, format!("bad node id {s:?}")))
        };
        edges.push((parse(a)?, parse(b)?, lineno));
    }
    Ok(edges)
}

fn read_attributes(path: &Path) -> Result<Matrix> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (idx, line) in open(path)?.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad attribute value {field:?}")))?;
            data.push(v);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::Shape(format!(
                    "{}:{lineno}: attribute row has {width} values, expected {c}",
                    path.display()
                )))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| parse_err(path, 0, "attribute file is empty"))?;
    Matrix::from_vec(rows, cols, data)
}

fn read_labels(path: &Path, n: usize) -> Result<Vec<bool>> {
    let mut labels = vec![false; n];
    for (idx, line) in open(path)?.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || (lineno == 1 && line.starts_with("node_id")) {
            continue;
        }
        let Some((id, flag)) = line.split_once(',') else {
            return Err(parse_err(
                path,
                lineno,
                format!("expected \"node_id,flag\", got {line:?}"),
            ));
        };
        let id: usize = id
            .trim()
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad node id {id:?}")))?;
        if id >= n {
            return Err(parse_err(
                path,
                lineno,
                format!("node id {id} out of range ({n} nodes)"),
            ));
        }
        labels[id] = match flag.trim() {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(path, lineno, format!("flag must be 0 or 1, got {other:?}"))),
        };
    }
    Ok(labels)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn save_edges(graph: &AttributedGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for (u, v) in graph.edges() {
        writeln!(w, "{u} {v}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn save_attributes(graph: &AttributedGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut line = String::new();
    for i in 0..graph.num_nodes() {
        line.clear();
        for (k, v) in graph.attribute_row(i).iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            // `{}` on f64 is the shortest repr that parses back exactly
            line.push_str(&format!("{v}"));
        }
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn save_labels(graph: &AttributedGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let labels = graph
        .labels()
        .ok_or_else(|| Error::State("graph has no labels to save".into()))?;
    let mut w = create(path)?;
    writeln!(w, "node_id,flag").map_err(|e| Error::io(path, e))?;
    for (i, &l) in labels.iter().enumerate() {
        writeln!(w, "{i},{}", u8::from(l)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
