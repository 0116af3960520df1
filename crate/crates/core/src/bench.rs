//! Seeded experiment sweeps and report files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{cosine, degree_cosine_similarity, retrain_accuracy};
use crate::dp::{dprr_publish, lapgraph_publish, rr_publish, PrivacyBudget};
use crate::error::{Error, Result};
use crate::gnn::{Arch, TrainConfig};
use crate::graph::{degree_vector, load_dataset, Graph};
use crate::published::{Method, PublishedGraph};
use crate::publisher::{prepare, publish_with, GraphPubConfig, Mode, Prepared};
use crate::synth::{generate, SyntheticConfig};

pub const DEFAULT_EPSILONS: [f64; 8] = [20.0, 17.0, 14.0, 11.0, 8.0, 5.0, 2.0, 1.0];

/// Resolves a dataset reference: a dataset directory, or `synth:cora` /
/// `synth:polblogs` with an optional `:SEED` suffix.
pub fn resolve_dataset(source: &str) -> Result<Graph> {
    if let Some(rest) = source.strip_prefix("synth:") {
        let (kind, seed) = match rest.split_once(':') {
            Some((k, s)) => (
                k,
                s.parse::<u64>()
                    .map_err(|_| Error::invalid(format!("bad synthetic seed in {source:?}")))?,
            ),
            None => (rest, 0),
        };
        let config = match kind {
            "cora" => SyntheticConfig::cora_like(seed),
            "polblogs" => SyntheticConfig::polblogs_like(seed),
            other => return Err(Error::invalid(format!("unknown synthetic dataset {other:?}"))),
        };
        return generate(&config);
    }
    load_dataset(source)
}

fn default_methods() -> Vec<Method> {
    vec![Method::GraphPub, Method::Rr, Method::Dprr, Method::LapGraph]
}

fn default_epsilons() -> Vec<f64> {
    DEFAULT_EPSILONS.to_vec()
}

fn default_models() -> Vec<Arch> {
    vec![Arch::Gcn]
}

fn default_repeats() -> usize {
    5
}

fn default_dprr_share() -> f64 {
    0.1
}

fn default_lapgraph_share() -> f64 {
    0.01
}

/// JSON sweep description. Only `datasets` is required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPlan {
    pub datasets: Vec<String>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_models")]
    pub models: Vec<Arch>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Degree share for GraphPub and its ablations.
    #[serde(default)]
    pub degree_share: f64,
    #[serde(default = "default_dprr_share")]
    pub dprr_share: f64,
    #[serde(default = "default_lapgraph_share")]
    pub lapgraph_share: f64,
    #[serde(default)]
    pub graphpub: GraphPubConfig,
    /// Training setup of the evaluation models.
    #[serde(default)]
    pub eval: TrainConfig,
    /// Fill the `elapsed_ms` column of `results.csv`. Off by default so
    /// repeated sweeps produce identical files.
    #[serde(default)]
    pub record_timings: bool,
}

impl BenchmarkPlan {
    pub fn new(datasets: Vec<String>) -> Self {
        Self {
            datasets,
            methods: default_methods(),
            epsilons: default_epsilons(),
            models: default_models(),
            repeats: default_repeats(),
            base_seed: 0,
            degree_share: 0.0,
            dprr_share: default_dprr_share(),
            lapgraph_share: default_lapgraph_share(),
            graphpub: GraphPubConfig::default(),
            eval: TrainConfig::default(),
            record_timings: false,
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let plan: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() || self.methods.is_empty() || self.epsilons.is_empty() || self.models.is_empty() {
            return Err(Error::invalid("datasets, methods, epsilons and models must be non-empty"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be at least 1"));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
            return Err(Error::invalid(format!("epsilon {e} must be positive and finite")));
        }
        PrivacyBudget::new(1.0, self.degree_share)?;
        self.eval.validate()?;
        self.graphpub.train.validate()?;
        self.graphpub.reverse.validate()
    }

    /// Seed of repeat `r`.
    pub fn seed(&self, repeat: usize) -> u64 {
        self.base_seed + repeat as u64
    }

    pub fn num_cells(&self) -> usize {
        self.datasets.len() * self.methods.len() * self.epsilons.len() * self.models.len() * self.repeats
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub method: Method,
    pub epsilon: f64,
    pub model: Arch,
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub elapsed_ms: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct BenchmarkReport {
    pub rows: Vec<ResultRow>,
}

impl BenchmarkReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// Mean accuracy per (dataset, model, ε, method) over successful repeats.
    pub fn means(&self) -> BTreeMap<(String, Arch, u64, Method), f64> {
        let mut acc: BTreeMap<(String, Arch, u64, Method), (f64, usize)> = BTreeMap::new();
        for r in &self.rows {
            if let Some(a) = r.accuracy {
                let e = acc
                    .entry((r.dataset.clone(), r.model, r.epsilon.to_bits(), r.method))
                    .or_default();
                e.0 += a;
                e.1 += 1;
            }
        }
        acc.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect()
    }

    pub fn mean(&self, dataset: &str, model: Arch, epsilon: f64, method: Method) -> Option<f64> {
        self.means()
            .get(&(dataset.to_string(), model, epsilon.to_bits(), method))
            .copied()
    }
}

pub fn share_for(plan: &BenchmarkPlan, method: Method) -> f64 {
    match method {
        Method::Rr => 0.0,
        Method::Dprr => plan.dprr_share,
        Method::LapGraph => plan.lapgraph_share,
        _ => plan.degree_share,
    }
}

fn mode_for(method: Method) -> Option<Mode> {
    match method {
        Method::GraphPub => Some(Mode::Full),
        Method::AblationNoPgd => Some(Mode::NoPgd),
        Method::AblationRandomMatrix => Some(Mode::RandomMatrix),
        _ => None,
    }
}

/// Publishes with any method. GraphPub-family methods need `prepared`.
pub fn publish_method(
    graph: &Graph,
    method: Method,
    epsilon: f64,
    share: f64,
    prepared: Option<&Prepared>,
    seed: u64,
) -> Result<PublishedGraph> {
    let start = Instant::now();
    let mut published = match method {
        Method::Rr => rr_publish(graph, epsilon, seed)?,
        Method::Dprr => dprr_publish(graph, epsilon, share, seed)?,
        Method::LapGraph => lapgraph_publish(graph, epsilon, share, seed)?,
        _ => {
            let prepared = prepared.ok_or_else(|| Error::invalid("GraphPub methods need a prepared pipeline"))?;
            return Ok(publish_with(graph, prepared, &PrivacyBudget::new(epsilon, share)?, seed)?.published);
        }
    };
    published.meta.elapsed_ms = start.elapsed().as_millis() as u64;
    Ok(published)
}

struct Group {
    dataset: usize,
    method: Method,
    repeat: usize,
}

fn run_group(plan: &BenchmarkPlan, name: &str, graph: &Graph, g: &Group) -> Vec<ResultRow> {
    let seed = plan.seed(g.repeat);
    let share = share_for(plan, g.method);
    let prepared = match mode_for(g.method) {
        Some(mode) => {
            let config = GraphPubConfig {
                mode,
                ..plan.graphpub.clone()
            };
            Some(prepare(graph, &config, seed))
        }
        None => None,
    };
    let mut rows = Vec::new();
    for &epsilon in &plan.epsilons {
        let start = Instant::now();
        let published = match &prepared {
            Some(Err(e)) => Err(Error::invalid(e.to_string())),
            Some(Ok(p)) => publish_method(graph, g.method, epsilon, share, Some(p), seed),
            None => publish_method(graph, g.method, epsilon, share, None, seed),
        };
        let publish_ms = start.elapsed().as_millis() as u64;
        for &model in &plan.models {
            let t = Instant::now();
            let outcome = published
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|p| retrain_accuracy(graph, p.edges(), model, &plan.eval, seed).map_err(|e| e.to_string()));
            let (accuracy, error) = match outcome {
                Ok(a) => (Some(a), None),
                Err(e) => {
                    log::warn!("{name} {} eps={epsilon} {model} seed={seed}: {e}", g.method);
                    (None, Some(e))
                }
            };
            rows.push(ResultRow {
                dataset: name.to_string(),
                method: g.method,
                epsilon,
                model,
                seed,
                accuracy,
                elapsed_ms: publish_ms + t.elapsed().as_millis() as u64,
                error,
            });
        }
    }
    rows
}

/// Runs every cell of `plan` on up to `jobs` threads and writes
/// `results.csv` and `summary.csv` into `out`. Failed cells become rows
/// with an error message; the sweep carries on.
pub fn run_benchmark(plan: &BenchmarkPlan, out: impl AsRef<Path>, jobs: usize) -> Result<BenchmarkReport> {
    plan.validate()?;
    let out = out.as_ref();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let graphs = plan
        .datasets
        .iter()
        .map(|d| resolve_dataset(d))
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = plan
        .datasets
        .iter()
        .zip(&graphs)
        .map(|(_, g)| g.name().to_string())
        .collect();

    let mut groups = Vec::new();
    for dataset in 0..graphs.len() {
        for &method in &plan.methods {
            for repeat in 0..plan.repeats {
                groups.push(Group {
                    dataset,
                    method,
                    repeat,
                });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let per_group: Vec<Vec<ResultRow>> = pool.install(|| {
        groups
            .par_iter()
            .map(|g| run_group(plan, &names[g.dataset], &graphs[g.dataset], g))
            .collect()
    });

    // Plan order: dataset, method, epsilon, model, repeat.
    let mut rows = Vec::with_capacity(plan.num_cells());
    let r = plan.repeats;
    for (d, _) in graphs.iter().enumerate() {
        for (mi, _) in plan.methods.iter().enumerate() {
            let base = (d * plan.methods.len() + mi) * r;
            for cell in 0..plan.epsilons.len() * plan.models.len() {
                for rep in 0..r {
                    rows.push(per_group[base + rep][cell].clone());
                }
            }
        }
    }
    let report = BenchmarkReport { rows };
    write_results(&report, plan.record_timings, out.join("results.csv"))?;
    write_summary(plan, &report, &names, out.join("summary.csv"))?;
    Ok(report)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

pub fn fmt_float(x: f64) -> String {
    format!("{x:.6}")
}

pub fn write_results(report: &BenchmarkReport, timings: bool, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let header = ["dataset", "method", "epsilon", "model", "seed", "accuracy", "elapsed_ms", "error"];
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in &report.rows {
        w.write_record([
            r.dataset.clone(),
            r.method.to_string(),
            r.epsilon.to_string(),
            r.model.to_string(),
            r.seed.to_string(),
            r.accuracy.map(fmt_float).unwrap_or_default(),
            if timings { r.elapsed_ms.to_string() } else { String::new() },
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per (dataset, model, ε) and one column per method, like a
/// results table with ε down the side.
pub fn write_summary(plan: &BenchmarkPlan, report: &BenchmarkReport, names: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let means = report.means();
    let mut w = csv_writer(path)?;
    let mut header = vec!["dataset".to_string(), "model".into(), "epsilon".into()];
    header.extend(plan.methods.iter().map(|m| m.to_string()));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let mut seen = std::collections::HashSet::new();
    for name in names {
        if !seen.insert(name) {
            continue;
        }
        for &model in &plan.models {
            for &eps in &plan.epsilons {
                let mut rec = vec![name.clone(), model.to_string(), eps.to_string()];
                for &m in &plan.methods {
                    rec.push(
                        means
                            .get(&(name.clone(), model, eps.to_bits(), m))
                            .map(|&v| fmt_float(v))
                            .unwrap_or_default(),
                    );
                }
                w.write_record(&rec).map_err(|e| csv_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeRow {
    pub epsilon: f64,
    pub share: f64,
    pub seed: u64,
    /// Cosine similarity against the symmetrized published degrees.
    pub similarity: f64,
    /// Same, against the per-node selection counts before symmetrization.
    pub directed_similarity: f64,
    pub original_degree_sum: usize,
    pub published_degree_sum: usize,
    pub histogram: BTreeMap<usize, usize>,
}

fn histogram(degrees: &[usize]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for &d in degrees {
        *h.entry(d).or_insert(0) += 1;
    }
    h
}

/// Degree similarity of GraphPub output for every (ε, share, prepared seed).
pub fn degree_rows(graph: &Graph, prepared: &[Prepared], epsilons: &[f64], shares: &[f64]) -> Result<Vec<DegreeRow>> {
    if let Some(s) = shares.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
        return Err(Error::invalid(format!("degree share {s} must lie in (0, 1)")));
    }
    let original = degree_vector(graph);
    let original_sum = original.total();
    let as_f64 = |v: &[usize]| v.iter().map(|&d| d as f64).collect::<Vec<_>>();
    let original_f64 = as_f64(original.as_slice());
    let mut rows = Vec::new();
    for &epsilon in epsilons {
        for &share in shares {
            for p in prepared {
                let budget = PrivacyBudget::new(epsilon, share)?;
                let publication = publish_with(graph, p, &budget, p.seed)?;
                let published = publication.published;
                let degrees = published.degrees();
                rows.push(DegreeRow {
                    epsilon,
                    share,
                    seed: p.seed,
                    similarity: degree_cosine_similarity(graph, &published)?,
                    directed_similarity: cosine(&original_f64, &as_f64(&publication.directed_degrees)),
                    original_degree_sum: original_sum,
                    published_degree_sum: degrees.total(),
                    histogram: histogram(degrees.as_slice()),
                });
            }
        }
    }
    Ok(rows)
}

fn mean_of(rows: &[DegreeRow], epsilon: f64, share: f64, field: fn(&DegreeRow) -> f64) -> Option<f64> {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.epsilon == epsilon && r.share == share)
        .map(field)
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Mean similarity of the symmetrized output per (ε, share).
pub fn mean_similarity(rows: &[DegreeRow], epsilon: f64, share: f64) -> Option<f64> {
    mean_of(rows, epsilon, share, |r| r.similarity)
}

/// Mean similarity of the pre-symmetrization selection counts.
pub fn mean_directed_similarity(rows: &[DegreeRow], epsilon: f64, share: f64) -> Option<f64> {
    mean_of(rows, epsilon, share, |r| r.directed_similarity)
}

/// Writes `degree_similarity.csv` and `degree_histogram.csv` into `out`.
pub fn write_degree_report(graph: &Graph, rows: &[DegreeRow], out: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out = out.as_ref();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let sim_path = out.join("degree_similarity.csv");
    let mut w = csv_writer(&sim_path)?;
    w.write_record([
        "epsilon",
        "share",
        "seed",
        "similarity",
        "directed_similarity",
        "original_degree_sum",
        "published_degree_sum",
    ])
        .map_err(|e| csv_err(&sim_path, e))?;
    for r in rows {
        w.write_record([
            r.epsilon.to_string(),
            r.share.to_string(),
            r.seed.to_string(),
            fmt_float(r.similarity),
            fmt_float(r.directed_similarity),
            r.original_degree_sum.to_string(),
            r.published_degree_sum.to_string(),
        ])
        .map_err(|e| csv_err(&sim_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&sim_path, e))?;

    let hist_path = out.join("degree_histogram.csv");
    let mut w = csv_writer(&hist_path)?;
    w.write_record(["source", "epsilon", "share", "seed", "degree", "count"])
        .map_err(|e| csv_err(&hist_path, e))?;
    for (d, c) in histogram(degree_vector(graph).as_slice()) {
        w.write_record(["original", "", "", "", &d.to_string(), &c.to_string()])
            .map_err(|e| csv_err(&hist_path, e))?;
    }
    for r in rows {
        for (d, c) in &r.histogram {
            w.write_record([
                "published".to_string(),
                r.epsilon.to_string(),
                r.share.to_string(),
                r.seed.to_string(),
                d.to_string(),
                c.to_string(),
            ])
            .map_err(|e| csv_err(&hist_path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&hist_path, e))?;
    Ok(vec![sim_path, hist_path])
}

/// Prepares GraphPub once per seed (`base_seed..base_seed + repeats`), then
/// reports degree similarity for every (ε, share).
pub fn degree_report(
    graph: &Graph,
    config: &GraphPubConfig,
    epsilons: &[f64],
    shares: &[f64],
    base_seed: u64,
    repeats: usize,
    out: impl AsRef<Path>,
) -> Result<Vec<DegreeRow>> {
    let prepared = (0..repeats as u64)
        .map(|r| prepare(graph, config, base_seed + r))
        .collect::<Result<Vec<_>>>()?;
    let rows = degree_rows(graph, &prepared, epsilons, shares)?;
    write_degree_report(graph, &rows, out)?;
    Ok(rows)
}
