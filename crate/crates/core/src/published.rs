//! Published graphs and their on-disk directory format:
//! `edges.tsv` (one canonical `lo\thi` pair per line, sorted) and `meta.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, canonical_edges, DegreeVector, Edge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "graphpub")]
    GraphPub,
    #[serde(rename = "rr")]
    Rr,
    #[serde(rename = "dprr")]
    Dprr,
    #[serde(rename = "lapgraph")]
    LapGraph,
    #[serde(rename = "ablation-rm")]
    AblationRandomMatrix,
    #[serde(rename = "ablation-nopgd")]
    AblationNoPgd,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::GraphPub,
        Method::Rr,
        Method::Dprr,
        Method::LapGraph,
        Method::AblationRandomMatrix,
        Method::AblationNoPgd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::GraphPub => "graphpub",
            Method::Rr => "rr",
            Method::Dprr => "dprr",
            Method::LapGraph => "lapgraph",
            Method::AblationRandomMatrix => "ablation-rm",
            Method::AblationNoPgd => "ablation-nopgd",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishMeta {
    pub method: String,
    pub epsilon: f64,
    pub degree_share: f64,
    pub seed: u64,
    pub num_edges: usize,
    pub elapsed_ms: u64,
    #[serde(default)]
    pub num_nodes: usize,
    /// Wall-clock duration of each pipeline stage.
    #[serde(default)]
    pub stage_ms: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PublishedGraph {
    num_nodes: usize,
    edges: Vec<Edge>,
    pub meta: PublishMeta,
}

impl PublishedGraph {
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        method: Method,
        epsilon: f64,
        degree_share: f64,
        seed: u64,
    ) -> Result<Self> {
        let edges = canonical_edges(num_nodes, edges)?;
        Ok(Self {
            num_nodes,
            meta: PublishMeta {
                method: method.as_str().into(),
                epsilon,
                degree_share,
                seed,
                num_edges: edges.len(),
                elapsed_ms: 0,
                num_nodes,
                stage_ms: BTreeMap::new(),
            },
            edges,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> DegreeVector {
        DegreeVector::from_edges(self.num_nodes, &self.edges)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let edges_path = dir.join("edges.tsv");
        fs::write(&edges_path, graph::edges_tsv(&self.edges)).map_err(|e| Error::io(&edges_path, e))?;
        let meta_path = dir.join("meta.json");
        let json = serde_json::to_string_pretty(&self.meta).map_err(|source| Error::Json {
            path: meta_path.clone(),
            source,
        })?;
        fs::write(&meta_path, json + "\n").map_err(|e| Error::io(&meta_path, e))
    }

    /// Loads a published-graph directory. `num_nodes` comes from the
    /// accompanying dataset, since older metadata may omit it.
    pub fn load(dir: impl AsRef<Path>, num_nodes: usize) -> Result<Self> {
        let dir = dir.as_ref();
        let meta_path = dir.join("meta.json");
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let mut meta: PublishMeta = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: meta_path.clone(),
            source,
        })?;
        if meta.num_nodes != 0 && meta.num_nodes != num_nodes {
            return Err(Error::DimensionMismatch {
                context: "published graph node count",
                expected: num_nodes,
                actual: meta.num_nodes,
            });
        }
        meta.num_nodes = num_nodes;
        let edges = graph::read_edges(dir.join("edges.tsv"), num_nodes)?;
        if edges.len() != meta.num_edges {
            return Err(Error::invalid(format!(
                "meta.json declares {} edges but edges.tsv has {}",
                meta.num_edges,
                edges.len()
            )));
        }
        Ok(Self {
            num_nodes,
            edges,
            meta,
        })
    }
}
