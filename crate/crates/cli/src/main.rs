use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use graphpub::attack::{embedding_similarity_attack, retrain_accuracy, AttackReport};
use graphpub::bench::{self, resolve_dataset, BenchmarkPlan};
use graphpub::publisher::{prepare, publish_with, GraphPubConfig, Mode};
use graphpub::{reverse, save_dataset, synth, Arch, Graph, Method, PrivacyBudget, PublishedGraph};

#[derive(Parser)]
#[command(name = "graphpub", version, about = "Edge-level differentially private graph publishing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Publish a protected copy of a graph.
    Publish(PublishArgs),
    /// Retrain a classifier on a graph and print its test accuracy.
    Eval(EvalArgs),
    /// Run the embedding-similarity attack against a published graph.
    Attack(AttackArgs),
    /// Run a benchmark sweep described by a JSON plan.
    Bench(BenchArgs),
    /// Degree similarity of GraphPub output across budgets and shares.
    Degrees(DegreesArgs),
    /// Write a synthetic dataset directory.
    Synth(SynthArgs),
}

#[derive(clap::Args)]
struct PublishArgs {
    /// Dataset directory, or synth:cora / synth:polblogs.
    #[arg(long)]
    dataset: String,
    #[arg(long, default_value = "graphpub")]
    method: Method,
    #[arg(long)]
    epsilon: f64,
    /// Share of ε spent on degrees; defaults to 0 for GraphPub, 0.1 for DPRR
    /// and 0.01 for LapGraph.
    #[arg(long)]
    degree_share: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Encoder architecture used to score pairs.
    #[arg(long, default_value = "gcn")]
    builder: Arch,
    /// Train the encoder on the original graph instead of the learned one.
    #[arg(long)]
    no_pgd: bool,
    /// Score pairs with uniform noise instead of the encoder.
    #[arg(long)]
    random_matrix: bool,
    /// JSON file overriding training and reverse-learning settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the learned dense adjacency to this file.
    #[arg(long)]
    dump_adjacency: Option<PathBuf>,
}

#[derive(clap::Args)]
struct EvalArgs {
    /// Published graph directory; the original graph is used when omitted.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    dataset: String,
    #[arg(long, default_value = "gcn")]
    model: Arch,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct AttackArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    dataset: String,
    /// Number of guessed edges; defaults to the original edge count.
    #[arg(long)]
    e_tilde: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(clap::Args)]
struct DegreesArgs {
    #[arg(long)]
    dataset: String,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    epsilons: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.5,0.8")]
    shares: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value = "gcn")]
    builder: Arch,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Cora,
    Polblogs,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "cora")]
    kind: SynthKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON generator settings; overrides --kind and --seed.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn load_graph(source: &str) -> Result<Graph> {
    resolve_dataset(source).with_context(|| format!("loading dataset {source}"))
}

fn publish(args: PublishArgs) -> Result<()> {
    let graph = load_graph(&args.dataset)?;
    let mut method = args.method;
    if args.no_pgd && args.random_matrix {
        bail!("--no-pgd and --random-matrix are mutually exclusive");
    }
    if args.no_pgd || args.random_matrix {
        if method != Method::GraphPub {
            bail!("ablation flags only apply to --method graphpub");
        }
        method = if args.no_pgd {
            Method::AblationNoPgd
        } else {
            Method::AblationRandomMatrix
        };
    }
    let share = args.degree_share.unwrap_or(match method {
        Method::Dprr => 0.1,
        Method::LapGraph => 0.01,
        _ => 0.0,
    });

    let published = match method {
        Method::Rr | Method::Dprr | Method::LapGraph => {
            bench::publish_method(&graph, method, args.epsilon, share, None, args.seed)?
        }
        _ => {
            let mut config: GraphPubConfig = match &args.config {
                Some(path) => serde_json::from_str(
                    &fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
                )
                .with_context(|| format!("parsing {}", path.display()))?,
                None => GraphPubConfig::default(),
            };
            config.builder = args.builder;
            config.mode = match method {
                Method::AblationNoPgd => Mode::NoPgd,
                Method::AblationRandomMatrix => Mode::RandomMatrix,
                _ => Mode::Full,
            };
            let budget = PrivacyBudget::new(args.epsilon, share)?;
            let prepared = prepare(&graph, &config, args.seed)?;
            if let (Some(path), Some(a_s)) = (&args.dump_adjacency, &prepared.adjacency) {
                reverse::write_matrix(a_s, path)?;
            }
            publish_with(&graph, &prepared, &budget, args.seed)?.published
        }
    };
    published.save(&args.out)?;
    log::info!(
        "published {} edges ({} original) to {}",
        published.num_edges(),
        graph.num_edges(),
        args.out.display()
    );
    println!("{}", serde_json::to_string(&published.meta)?);
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let graph = load_graph(&args.dataset)?;
    let edges = match &args.graph {
        Some(dir) => PublishedGraph::load(dir, graph.num_nodes())?.edges().to_vec(),
        None => graph.edges().to_vec(),
    };
    let accuracy = retrain_accuracy(&graph, &edges, args.model, &Default::default(), args.seed)?;
    let report = serde_json::json!({
        "accuracy": accuracy,
        "model": args.model,
        "seed": args.seed,
        "num_edges": edges.len(),
    });
    println!("{report}");
    Ok(())
}

fn attack(args: AttackArgs) -> Result<()> {
    let graph = load_graph(&args.dataset)?;
    let published = PublishedGraph::load(&args.graph, graph.num_nodes())?;
    let e_tilde = args.e_tilde.unwrap_or(graph.num_edges());
    let result = embedding_similarity_attack(&published, &graph, e_tilde, &Default::default(), args.seed)?;
    let report = AttackReport::new(&result, published.meta.epsilon, args.seed);
    let text = serde_json::to_string_pretty(&report)?;
    fs::write(&args.out, &text).with_context(|| format!("writing {}", args.out.display()))?;
    println!("{text}");
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<bool> {
    let plan = BenchmarkPlan::from_file(&args.config)?;
    let report = bench::run_benchmark(&plan, &args.out, args.jobs)?;
    let summary = fs::read_to_string(args.out.join("summary.csv"))?;
    print!("{summary}");
    let failures = report.failures();
    if failures > 0 {
        eprintln!("{failures} of {} cells failed", report.rows.len());
    }
    Ok(failures == 0)
}

fn degrees(args: DegreesArgs) -> Result<()> {
    let graph = load_graph(&args.dataset)?;
    let config = GraphPubConfig {
        builder: args.builder,
        ..Default::default()
    };
    let rows = bench::degree_report(
        &graph,
        &config,
        &args.epsilons,
        &args.shares,
        args.seed,
        args.repeats,
        &args.out,
    )?;
    println!("epsilon,share,mean_similarity,mean_directed_similarity");
    for &e in &args.epsilons {
        for &s in &args.shares {
            if let (Some(m), Some(d)) = (
                bench::mean_similarity(&rows, e, s),
                bench::mean_directed_similarity(&rows, e, s),
            ) {
                println!("{e},{s},{m:.6},{d:.6}");
            }
        }
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let config = match (&args.config, args.kind) {
        (Some(path), _) => serde_json::from_str(
            &fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        )
        .with_context(|| format!("parsing {}", path.display()))?,
        (None, SynthKind::Cora) => synth::SyntheticConfig::cora_like(args.seed),
        (None, SynthKind::Polblogs) => synth::SyntheticConfig::polblogs_like(args.seed),
    };
    let graph = synth::generate(&config)?;
    save_dataset(&graph, &args.out)?;
    println!(
        "{}: {} nodes, {} edges, {} classes, {} features",
        graph.name(),
        graph.num_nodes(),
        graph.num_edges(),
        graph.num_classes(),
        graph.feature_dim()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Publish(a) => publish(a).map(|_| true),
        Command::Eval(a) => eval(a).map(|_| true),
        Command::Attack(a) => attack(a).map(|_| true),
        Command::Bench(a) => run_bench(a),
        Command::Degrees(a) => degrees(a).map(|_| true),
        Command::Synth(a) => synth(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
