//! Graph data model, on-disk dataset format, splits and degree statistics.
//!
//! A dataset directory holds three files:
//!
//! * `manifest.json`: `{"name", "num_nodes", "num_classes", "num_features"}`
//! * `nodes.tsv`: `<node_id>\t<label>[\t<idx>:<val>,<idx>:<val>,...]`
//! * `edges.tsv`: `<src>\t<dst>`, undirected, either orientation
//!
//! When no node line carries a feature column the graph gets identity
//! one-hot features (`feature_dim == num_nodes`).

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::Structure;
use crate::rng;
use crate::sparse::CsrMatrix;

/// Unordered node pair stored as `(lo, hi)` with `lo < hi`.
pub type Edge = (usize, usize);

/// Sorts, orients and deduplicates an edge list. Self-loops and out-of-range
/// endpoints are errors.
pub fn canonical_edges(
    num_nodes: usize,
    edges: impl IntoIterator<Item = (usize, usize)>,
) -> Result<Vec<Edge>> {
    let mut out = Vec::new();
    for (a, b) in edges {
        for index in [a, b] {
            if index >= num_nodes {
                return Err(Error::NodeOutOfRange { index, num_nodes });
            }
        }
        if a == b {
            return Err(Error::invalid(format!("self-loop on node {a}")));
        }
        out.push((a.min(b), a.max(b)));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Sorted adjacency lists for a canonical edge list.
pub fn adjacency_lists(num_nodes: usize, edges: &[Edge]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); num_nodes];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    adj
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    name: String,
    num_nodes: usize,
    edges: Vec<Edge>,
    neighbors: Vec<Vec<usize>>,
    features: CsrMatrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Graph {
    pub fn new(
        name: impl Into<String>,
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: CsrMatrix,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        let edges = canonical_edges(num_nodes, edges)?;
        if features.rows() != num_nodes {
            return Err(Error::DimensionMismatch {
                context: "feature rows",
                expected: num_nodes,
                actual: features.rows(),
            });
        }
        if labels.len() != num_nodes {
            return Err(Error::DimensionMismatch {
                context: "label count",
                expected: num_nodes,
                actual: labels.len(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange { label, num_classes });
        }
        let neighbors = adjacency_lists(num_nodes, &edges);
        Ok(Self {
            name: name.into(),
            num_nodes,
            edges,
            neighbors,
            features,
            labels,
            num_classes,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Sorted neighbor list of node `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn features(&self) -> &CsrMatrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn structure(&self) -> Structure<'_> {
        Structure::Edges {
            num_nodes: self.num_nodes,
            edges: &self.edges,
        }
    }

    /// Same nodes, features and labels over a different edge set.
    pub fn with_edges(&self, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let edges = canonical_edges(self.num_nodes, edges)?;
        let neighbors = adjacency_lists(self.num_nodes, &edges);
        Ok(Self {
            edges,
            neighbors,
            ..self.clone()
        })
    }
}

/// Per-node degree `m_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeVector(pub Vec<usize>);

impl DegreeVector {
    pub fn from_edges(num_nodes: usize, edges: &[Edge]) -> Self {
        let mut degrees = vec![0; num_nodes];
        for &(a, b) in edges {
            degrees[a] += 1;
            degrees[b] += 1;
        }
        DegreeVector(degrees)
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

pub fn degree_vector(graph: &Graph) -> DegreeVector {
    DegreeVector::from_edges(graph.num_nodes(), graph.edges())
}

/// Disjoint train/validation/test node sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMask {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

pub const TRAIN_FRACTION: f64 = 0.1;
pub const VAL_FRACTION: f64 = 0.2;

/// Uniform random 10% / 20% / 70% split (sizes rounded down, remainder to test).
pub fn make_splits(graph: &Graph, seed: u64) -> SplitMask {
    split_nodes(graph.num_nodes(), seed)
}

pub fn split_nodes(num_nodes: usize, seed: u64) -> SplitMask {
    let mut order: Vec<usize> = (0..num_nodes).collect();
    order.shuffle(&mut rng::stream(seed, "splits"));
    let n_train = (TRAIN_FRACTION * num_nodes as f64).floor() as usize;
    let n_val = (VAL_FRACTION * num_nodes as f64).floor() as usize;
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    SplitMask {
        train,
        val,
        test,
        seed,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    name: String,
    num_nodes: usize,
    num_classes: usize,
    num_features: usize,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    field: &str,
    what: &str,
) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("invalid {what} {field:?}"),
    })
}

fn parse_features(
    path: &Path,
    line: usize,
    column: &str,
    feature_dim: usize,
) -> Result<Vec<(usize, f64)>> {
    let column = column.trim();
    if column.is_empty() {
        return Ok(Vec::new());
    }
    column
        .split(',')
        .map(|token| {
            let malformed = || Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("malformed sparse feature token {token:?}"),
            };
            let (idx, val) = token.split_once(':').ok_or_else(malformed)?;
            let idx: usize = idx.trim().parse().map_err(|_| malformed())?;
            let val: f64 = val.trim().parse().map_err(|_| malformed())?;
            if idx >= feature_dim {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("feature index {idx} >= num_features {feature_dim}"),
                });
            }
            Ok((idx, val))
        })
        .collect()
}

/// Reads a dataset directory.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Graph> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest =
        serde_json::from_str(&read(&manifest_path)?).map_err(|source| Error::Json {
            path: manifest_path.clone(),
            source,
        })?;
    let n = manifest.num_nodes;

    let nodes_path = dir.join("nodes.tsv");
    let nodes_text = read(&nodes_path)?;
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut rows: Vec<Option<Vec<(usize, f64)>>> = vec![None; n];
    let mut with_features = 0usize;
    let mut without_features = 0usize;
    for (lineno, line) in nodes_text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let id: usize = parse_field(&nodes_path, lineno, fields.next().unwrap_or(""), "node id")?;
        let label: usize = parse_field(
            &nodes_path,
            lineno,
            fields.next().unwrap_or(""),
            "label",
        )?;
        if id >= n {
            return Err(Error::NodeOutOfRange {
                index: id,
                num_nodes: n,
            });
        }
        if label >= manifest.num_classes {
            return Err(Error::LabelOutOfRange {
                label,
                num_classes: manifest.num_classes,
            });
        }
        if labels[id].is_some() {
            return Err(Error::Parse {
                path: nodes_path.clone(),
                line: lineno,
                message: format!("duplicate node id {id}"),
            });
        }
        labels[id] = Some(label);
        match fields.next() {
            Some(column) => {
                with_features += 1;
                rows[id] = Some(parse_features(
                    &nodes_path,
                    lineno,
                    column,
                    manifest.num_features,
                )?);
            }
            None => without_features += 1,
        }
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            l.ok_or_else(|| Error::Parse {
                path: nodes_path.clone(),
                line: 0,
                message: format!("node {i} missing from nodes.tsv"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let features = if with_features == 0 {
        CsrMatrix::identity(n)
    } else if without_features > 0 {
        return Err(Error::Parse {
            path: nodes_path,
            line: 0,
            message: "feature column present on some node lines but not others".into(),
        });
    } else {
        CsrMatrix::from_rows(
            manifest.num_features,
            rows.into_iter().map(Option::unwrap_or_default).collect(),
        )?
    };

    let edges_path = dir.join("edges.tsv");
    let edges_text = read(&edges_path)?;
    let mut edges = Vec::new();
    for (lineno, line) in edges_text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: edges_path.clone(),
            line: lineno,
            message: "expected <src>\\t<dst>".into(),
        })?;
        let a: usize = parse_field(&edges_path, lineno, a, "source node")?;
        let b: usize = parse_field(&edges_path, lineno, b, "target node")?;
        if a == b {
            return Err(Error::SelfLoop {
                path: edges_path.clone(),
                line: lineno,
                node: a,
            });
        }
        edges.push((a, b));
    }

    Graph::new(
        manifest.name,
        n,
        edges,
        features,
        labels,
        manifest.num_classes,
    )
}

/// Writes `graph` in the dataset directory format. Features are always
/// written explicitly, so a reload yields an identical graph.
pub fn save_dataset(graph: &Graph, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        name: graph.name.clone(),
        num_nodes: graph.num_nodes,
        num_classes: graph.num_classes,
        num_features: graph.feature_dim(),
    };
    let manifest_path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).map_err(|source| Error::Json {
        path: manifest_path.clone(),
        source,
    })?;
    fs::write(&manifest_path, json + "\n").map_err(|e| Error::io(&manifest_path, e))?;

    let mut nodes = String::new();
    for i in 0..graph.num_nodes {
        write!(nodes, "{i}\t{}\t", graph.labels[i]).unwrap();
        for (k, (c, v)) in graph.features.row(i).enumerate() {
            if k > 0 {
                nodes.push(',');
            }
            write!(nodes, "{c}:{v}").unwrap();
        }
        nodes.push('\n');
    }
    let nodes_path = dir.join("nodes.tsv");
    fs::write(&nodes_path, nodes).map_err(|e| Error::io(&nodes_path, e))?;

    let edges_path = dir.join("edges.tsv");
    fs::write(&edges_path, edges_tsv(&graph.edges)).map_err(|e| Error::io(&edges_path, e))?;
    Ok(dir.to_path_buf())
}

pub(crate) fn edges_tsv(edges: &[Edge]) -> String {
    let mut out = String::with_capacity(edges.len() * 10);
    for &(a, b) in edges {
        writeln!(out, "{a}\t{b}").unwrap();
    }
    out
}

/// Parses an `edges.tsv` file into a canonical edge list.
pub fn read_edges(path: impl AsRef<Path>, num_nodes: usize) -> Result<Vec<Edge>> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: "expected <src>\\t<dst>".into(),
        })?;
        let a: usize = parse_field(path, lineno, a, "source node")?;
        let b: usize = parse_field(path, lineno, b, "target node")?;
        if a == b {
            return Err(Error::SelfLoop {
                path: path.to_path_buf(),
                line: lineno,
                node: a,
            });
        }
        if seen.insert((a.min(b), a.max(b))) {
            edges.push((a, b));
        }
    }
    canonical_edges(num_nodes, edges)
}
