use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use lakelens::server::{serve, AppState};
use lakelens::resolve_config;
use lakelens_core::ekg::DocSpace;
use lakelens_core::eval::{generate_synthetic_lake, run_benchmark, BenchSystem, GroundTruth, SyntheticLakeSpec, Task};
use lakelens_core::pipeline::{self, open_engine, Workspace};
use lakelens_core::weaklabel::GoldLabels;
use lakelens_core::{LakeConfig, Parallelism};

#[derive(Parser)]
#[command(name = "lakelens", version, about = "Cross-modal discovery over CSV tables and text documents")]
struct Cli {
    /// Directory holding the built artifacts.
    #[arg(long, short = 'w', global = true, default_value = "workspace")]
    workspace: PathBuf,
    /// JSON config file; defaults to the workspace's saved config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Config override as dotted.key=value, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for data-parallel stages (0 = all cores, 1 = sequential).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum System {
    Joint,
    Solo,
}

#[derive(Subcommand)]
enum Command {
    /// Read a lake directory into the catalog.
    Ingest {
        #[arg(long)]
        lake: PathBuf,
    },
    /// Sketch and embed every DE.
    Profile,
    /// Build the text, containment and vector indexes.
    Index,
    /// Weakly label a sample of document/column pairs.
    Labels {
        /// CSV of doc_id,column_id,label gold pairs.
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Train the joint representation.
    Train,
    /// Materialize the relationship graph.
    Ekg,
    /// Every stage from ingest to ekg.
    Build {
        #[arg(long)]
        lake: PathBuf,
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Run one discovery operation and print the response as JSON.
    Query {
        op: String,
        /// JSON parameters.
        #[arg(long, default_value = "{}")]
        params: String,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// Benchmark one task against ground truth.
    Eval {
        /// Built workspace of the lake.
        #[arg(long)]
        lake: PathBuf,
        /// Ground truth as JSON lines or CSV pairs.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        task: String,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        k_list: Vec<usize>,
        #[arg(long, value_enum)]
        system: Option<System>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic lake with planted ground truth.
    GenLake {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn config(cli: &Cli, ws: &Workspace) -> anyhow::Result<LakeConfig> {
    let mut cfg = resolve_config(ws, cli.config.as_deref(), &cli.overrides)?;
    if let Some(t) = cli.threads {
        cfg.parallelism = Parallelism(t);
    }
    Ok(cfg)
}

/// Later stages persist a changed config so every artifact agrees on it.
fn stage_config(cli: &Cli, ws: &Workspace) -> anyhow::Result<LakeConfig> {
    let cfg = config(cli, ws)?;
    if cli.config.is_some() || !cli.overrides.is_empty() {
        ws.save_config(&cfg)?;
    }
    Ok(cfg)
}

fn load_gold(path: Option<&Path>) -> anyhow::Result<Option<GoldLabels>> {
    path.map(|p| GoldLabels::load_csv(p).with_context(|| format!("reading gold {}", p.display()))).transpose()
}

fn print_json(v: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let ws = Workspace::new(&cli.workspace);
    match &cli.command {
        Command::Ingest { lake } => {
            let cfg = config(&cli, &ws)?;
            let corpus = pipeline::ingest(&ws, lake, &cfg, cfg.parallelism)?;
            log::info!("{} tables, {} columns, {} documents", corpus.tables.len(), corpus.columns.len(), corpus.docs.len());
        }
        Command::Profile => {
            let cfg = stage_config(&cli, &ws)?;
            pipeline::profile(&ws, &cfg, cfg.parallelism)?;
        }
        Command::Index => {
            let cfg = stage_config(&cli, &ws)?;
            pipeline::index(&ws, &cfg)?;
        }
        Command::Labels { gold } => {
            let cfg = stage_config(&cli, &ws)?;
            let gold = load_gold(gold.as_deref())?;
            let pairs = pipeline::labels(&ws, &cfg, gold.as_ref(), cfg.parallelism)?;
            log::info!("{} training pairs", pairs.len());
        }
        Command::Train => {
            let cfg = stage_config(&cli, &ws)?;
            pipeline::train(&ws, &cfg, cfg.parallelism)?;
        }
        Command::Ekg => {
            let cfg = stage_config(&cli, &ws)?;
            let g = pipeline::ekg(&ws, &cfg, cfg.parallelism)?;
            log::info!("{} edges", g.edges.len());
        }
        Command::Build { lake, gold } => {
            let cfg = config(&cli, &ws)?;
            let gold = load_gold(gold.as_deref())?;
            pipeline::build_all(&ws, lake, &cfg, gold.as_ref(), cfg.parallelism)?;
        }
        Command::Query { op, params } => {
            let params: serde_json::Value = serde_json::from_str(params).context("--params is not JSON")?;
            let engine = open_engine(&ws)?;
            print_json(&engine.run(op, params)?)?;
        }
        Command::Serve { addr } => {
            let state = Arc::new(AppState::open(ws.clone()));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(state, addr))?;
        }
        Command::Eval { lake, truth, task, k_list, system, out } => {
            let task = Task::parse(task)?;
            let truth = GroundTruth::load(truth, task)?;
            let lake_ws = Workspace::new(lake);
            let engine = open_engine(&lake_ws)?;
            let doc_space = system.map(|s| match s {
                System::Joint => DocSpace::Joint,
                System::Solo => DocSpace::Solo,
            });
            let par = cli.threads.map(Parallelism).unwrap_or(engine.artifacts.config.parallelism);
            let report = run_benchmark(&engine, &truth, k_list, BenchSystem { doc_space }, par)?;
            report.write(out)?;
            print_json(&report.per_k)?;
        }
        Command::GenLake { spec, out } => {
            let spec: SyntheticLakeSpec = match spec {
                Some(p) => serde_json::from_slice(&std::fs::read(p).with_context(|| format!("reading {}", p.display()))?)?,
                None => SyntheticLakeSpec::default(),
            };
            let lake = generate_synthetic_lake(&spec)?;
            if out.exists() && std::fs::read_dir(out)?.next().is_some() {
                bail!("{} is not empty", out.display());
            }
            lake.write(out)?;
            log::info!("{} tables, {} documents written to {}", lake.tables.len(), lake.docs.len(), out.display());
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
