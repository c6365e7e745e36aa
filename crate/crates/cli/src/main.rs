//! `dirgraph` command-line interface.
//!
//! Every subcommand writes JSON to standard output. Failures exit non-zero
//! with `{"error": {"kind": ..., "message": ...}}` on standard error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dirgraph::homophily::effective_homophily_with;
use dirgraph::homophily::weighted_compatibility_matrix;
use dirgraph::io::{
    read_edge_list, read_features, read_labels, read_split, write_edge_list, write_features,
    write_labels,
};
use dirgraph::nn::{Jk, LayerKind, ModelConfig};
use dirgraph::synth::{direction_task, preferential_attachment, DirectionTaskConfig, PAConfig};
use dirgraph::train::{train_model, train_repeated, SplitSpec, TrainConfig};
use dirgraph::wl::{self, Variant};
use dirgraph::{DirectedGraph, Execution, LabeledNodes, OperatorKind};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "dirgraph",
    version,
    about = "Directed-graph homophily, Dir-GNN training and directed WL tests"
)]
struct Cli {
    /// Run every kernel on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Weighted node homophily of the 1- and 2-hop operators and effective homophily.
    Homophily(HomophilyArgs),
    /// Weighted compatibility matrix of one operator, as CSV.
    Compat(CompatArgs),
    /// Degree and reciprocity statistics.
    Stats(StatsArgs),
    /// Generate synthetic graphs.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Train a node classifier with early stopping.
    Train(Box<TrainArgs>),
    /// Weisfeiler-Lehman style color refinement.
    Wl(WlArgs),
}

#[derive(Args)]
struct LabelledGraph {
    /// Edge list, one `src dst` pair per line.
    #[arg(long)]
    graph: PathBuf,
    /// `node,label` CSV; its node count fixes the graph size.
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Args)]
struct HomophilyArgs {
    #[command(flatten)]
    input: LabelledGraph,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct CompatArgs {
    #[command(flatten)]
    input: LabelledGraph,
    /// Operator name, e.g. A, At, Au, A2, At2, AtA, AAt, Au2.
    #[arg(long, default_value = "A")]
    op: OperatorKind,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Node count; defaults to the file header or the largest id plus one.
    #[arg(long)]
    num_nodes: Option<usize>,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Preferential attachment with a class compatibility matrix.
    Pa {
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = 5)]
        classes: usize,
        /// Out-edges added by every new node.
        #[arg(long, default_value_t = 2)]
        edges_per_node: usize,
        /// Diagonal mass of the compatibility matrix.
        #[arg(long)]
        homophily: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Random digraph whose labels compare in- and out-neighbour feature means.
    Task {
        #[arg(long)]
        nodes: usize,
        /// Edge probability.
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    input: LabelledGraph,
    /// Dense feature CSV; a constant feature is used when absent.
    #[arg(long)]
    features: Option<PathBuf>,
    /// `node,split` CSV; otherwise a random split per seed.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value = "dir-sage")]
    model: LayerKind,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value = "max")]
    jk: Jk,
    /// Skip the row L2 normalization after each layer.
    #[arg(long)]
    no_normalize: bool,
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 10_000)]
    epochs: usize,
    #[arg(long, default_value_t = 200)]
    patience: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent runs with seeds `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    #[arg(long, num_args = 3, value_names = ["TRAIN", "VAL", "TEST"], default_values_t = [0.5, 0.25, 0.25])]
    fractions: Vec<f64>,
    /// Write the best parameters of a single run to this CSV.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Include wall-clock times in the output.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct WlArgs {
    #[command(subcommand)]
    action: Option<WlAction>,
    /// Refinement variant (1wl, uwl, dwl, outwl); all of them when omitted.
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    g1: Option<PathBuf>,
    #[arg(long)]
    g2: Option<PathBuf>,
}

#[derive(Subcommand)]
enum WlAction {
    /// Exhaustively look for pairs one variant separates and another does not.
    Search {
        #[arg(long, default_value_t = 4)]
        max_n: usize,
        #[arg(long, default_value = "uwl")]
        weak: Variant,
        #[arg(long, default_value = "dwl")]
        strong: Variant,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Write the built-in counterexample pairs as edge lists.
    Fixtures {
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            emit_error("usage", message.trim());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e
                .chain()
                .find_map(|c| c.downcast_ref::<dirgraph::Error>())
                .map_or("other", dirgraph::Error::kind);
            emit_error(kind, &format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}

fn emit_error(kind: &str, message: &str) {
    eprintln!(
        "{}",
        json!({ "error": { "kind": kind, "message": message } })
    );
}

fn print_json(v: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Ok(n) = std::env::var("DIRGRAPH_THREADS") {
        let n: usize = n
            .parse()
            .with_context(|| format!("DIRGRAPH_THREADS={n:?} is not a thread count"))?;
        dirgraph::par::set_num_threads(n)?;
    }
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match cli.command {
        Command::Homophily(a) => homophily(a, exec),
        Command::Compat(a) => compat(a, exec),
        Command::Stats(a) => {
            let g = read_edge_list(&a.graph, a.num_nodes)
                .with_context(|| format!("reading {}", a.graph.display()))?;
            print_json(&g.structural_stats())
        }
        Command::Synth(s) => synth(s),
        Command::Train(a) => train(*a, exec),
        Command::Wl(a) => wl_command(a, exec),
    }
}

fn load(input: &LabelledGraph) -> Result<(DirectedGraph, LabeledNodes)> {
    let nodes = read_labels(&input.labels, None, None)
        .with_context(|| format!("reading {}", input.labels.display()))?;
    let g = read_edge_list(&input.graph, Some(nodes.len()))
        .with_context(|| format!("reading {}", input.graph.display()))?;
    Ok((g, nodes))
}

fn homophily(a: HomophilyArgs, exec: Execution) -> Result<()> {
    let (g, nodes) = load(&a.input)?;
    let report = effective_homophily_with(&g, nodes.labels(), exec)?;
    match a.format {
        Format::Json => print_json(&report),
        Format::Table => {
            print!("{}", report.to_table());
            Ok(())
        }
    }
}

fn compat(a: CompatArgs, exec: Execution) -> Result<()> {
    let (g, nodes) = load(&a.input)?;
    let s = a.op.build(&g, exec);
    let m = weighted_compatibility_matrix(&s, nodes.labels(), nodes.num_classes())?;
    match a.out {
        Some(path) => m
            .write_csv(&path)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", m.to_csv_string()),
    }
    Ok(())
}

fn write_graph_files(dir: &Path, g: &DirectedGraph, nodes: &LabeledNodes) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = vec![dir.join("edges.txt"), dir.join("labels.csv")];
    write_edge_list(g, &files[0])?;
    write_labels(nodes.labels(), &files[1])?;
    if let Some(x) = nodes.features() {
        files.push(dir.join("features.csv"));
        write_features(x, &files[2])?;
    }
    Ok(files)
}

fn synth(cmd: SynthCommand) -> Result<()> {
    let (g, nodes, dir) = match cmd {
        SynthCommand::Pa {
            nodes,
            classes,
            edges_per_node,
            homophily,
            seed,
            out_dir,
        } => {
            let cfg =
                PAConfig::with_target_homophily(nodes, classes, edges_per_node, homophily, seed)?;
            let (g, y) = preferential_attachment(&cfg)?;
            (g, y, out_dir)
        }
        SynthCommand::Task {
            nodes,
            p,
            seed,
            out_dir,
        } => {
            let cfg = DirectionTaskConfig {
                num_nodes: nodes,
                edge_prob: p,
                seed,
            };
            let (g, y) = direction_task(&cfg)?;
            (g, y, out_dir)
        }
    };
    let files = write_graph_files(&dir, &g, &nodes)?;
    print_json(&json!({
        "num_nodes": g.num_nodes(),
        "num_edges": g.num_edges(),
        "num_classes": nodes.num_classes(),
        "files": files,
    }))
}

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("wall_time_secs");
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

fn train(a: TrainArgs, exec: Execution) -> Result<()> {
    let (g, mut nodes) = load(&a.input)?;
    if let Some(path) = &a.features {
        let x = read_features(path).with_context(|| format!("reading {}", path.display()))?;
        nodes = nodes.with_features(x)?;
    }
    let split = match &a.split {
        Some(path) => SplitSpec::Fixed(
            read_split(path, g.num_nodes())
                .with_context(|| format!("reading {}", path.display()))?,
        ),
        None => SplitSpec::Random {
            train: a.fractions[0],
            val: a.fractions[1],
            test: a.fractions[2],
        },
    };
    let model_cfg = ModelConfig {
        kind: a.model,
        num_layers: a.layers,
        hidden: a.hidden,
        alpha: a.alpha,
        jk: a.jk,
        l2_normalize: !a.no_normalize,
        dropout: a.dropout,
        ..ModelConfig::ablation(a.model, a.alpha)
    };
    let cfg = TrainConfig {
        lr: a.lr,
        max_epochs: a.epochs,
        patience: a.patience,
        seed: a.seed,
        split,
    };
    if a.repeat == 0 {
        bail!(dirgraph::Error::Config(
            "--repeat must be at least 1".into()
        ));
    }
    if a.checkpoint.is_some() && a.repeat > 1 {
        bail!(dirgraph::Error::Config(
            "--checkpoint needs a single run".into()
        ));
    }
    let mut out = if a.repeat == 1 {
        let trained = train_model(&model_cfg, &g, &nodes, &cfg, exec)?;
        if let Some(path) = &a.checkpoint {
            trained
                .model
                .params()
                .write_csv(path)
                .with_context(|| format!("writing {}", path.display()))?;
        }
        serde_json::to_value(&trained.result)?
    } else {
        let seeds: Vec<u64> = (0..a.repeat as u64).map(|k| a.seed + k).collect();
        serde_json::to_value(train_repeated(&model_cfg, &g, &nodes, &cfg, &seeds, exec)?)?
    };
    if !a.timing {
        strip_timing(&mut out);
    }
    print_json(&out)
}

fn read_graph(path: &Path) -> Result<DirectedGraph> {
    read_edge_list(path, None).with_context(|| format!("reading {}", path.display()))
}

fn wl_command(a: WlArgs, exec: Execution) -> Result<()> {
    match a.action {
        Some(WlAction::Search {
            max_n,
            weak,
            strong,
            limit,
        }) => print_json(&wl::search_counterexamples(
            max_n, weak, strong, limit, exec,
        )?),
        Some(WlAction::Fixtures { out_dir }) => {
            fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            let mut written = Vec::new();
            for fx in [wl::in_star_pair(), wl::triangle_pair()] {
                for (suffix, g) in [("g1", &fx.g1), ("g2", &fx.g2)] {
                    let path = out_dir.join(format!("{}-{suffix}.el", fx.name));
                    write_edge_list(g, &path)?;
                    written.push(path);
                }
            }
            print_json(&json!({ "files": written }))
        }
        None => {
            let (Some(p1), Some(p2)) = (&a.g1, &a.g2) else {
                bail!(dirgraph::Error::Config(
                    "wl needs --g1 and --g2, or a subcommand".into()
                ));
            };
            let (g1, g2) = (read_graph(p1)?, read_graph(p2)?);
            let variants = a.variant.map_or_else(|| Variant::ALL.to_vec(), |v| vec![v]);
            let results: Vec<Value> = variants
                .into_iter()
                .map(|v| {
                    let d = wl::distinguishes(&g1, &g2, v);
                    let c = &d.coloring;
                    let rounds: Vec<Value> = (0..c.coloring.num_rounds())
                        .map(|t| json!({ "g1": c.colors(0, t), "g2": c.colors(1, t) }))
                        .collect();
                    json!({
                        "variant": v,
                        "verdict": d.verdict,
                        "first_round": d.first_round,
                        "colors": rounds,
                    })
                })
                .collect();
            if results.len() == 1 {
                print_json(&results[0])
            } else {
                print_json(&results)
            }
        }
    }
}
