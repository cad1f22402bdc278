//! Command-line surface: corpus generation, graph construction, link
//! prediction training, the fusion ablation experiment, and SVG rendering.
//! Every run writes a manifest.json echoing its fully resolved config so
//! any output can be reproduced from the manifest plus the inputs.

use clap::{Parser, Subcommand, ValueEnum};
use docgraph::doc_model::{
    document_from_json, document_to_json, normalize_coords, parse_funsd, parse_generic,
    serialize_generic, validate_document, Document,
};
use docgraph::gnn::GnnConfig;
use docgraph::graph_builder::{build_graph, graph_from_json, graph_to_json, DocumentGraph};
use docgraph::pipeline::experiment::{run_experiment, Ablation, ExperimentConfig};
use docgraph::pipeline::ie::IeTrainConfig;
use docgraph::pipeline::synthetic::generate_synthetic_corpus;
use docgraph::pipeline::train::{train_link_prediction, TrainConfig, TrainError};
use docgraph::render::{render_svg, RenderOptions};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_USAGE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_INTEGRITY: u8 = 4;

fn default_seed() -> u64 {
    std::env::var("DOCGRAPH_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

#[derive(Parser)]
#[command(name = "docgraph", version, about = "Document graphs for form understanding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Funsd,
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AblationArg {
    Fused,
    TextOnly,
    Both,
}

impl From<AblationArg> for Ablation {
    fn from(a: AblationArg) -> Self {
        match a {
            AblationArg::Fused => Ablation::Fused,
            AblationArg::TextOnly => Ablation::TextOnly,
            AblationArg::Both => Ablation::Both,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus as one generic JSONL file per document.
    GenerateCorpus {
        #[arg(long, default_value_t = default_seed())]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        n_docs: usize,
        #[arg(long, default_value_t = 20)]
        nodes_lo: usize,
        #[arg(long, default_value_t = 40)]
        nodes_hi: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse annotation files and emit one graph JSON per document.
    BuildGraph {
        /// Input file or directory of files.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Generic)]
        format: Format,
        /// Page pixel size for coordinate normalization (funsd inputs).
        #[arg(long, default_value_t = 1000)]
        page_width: i64,
        #[arg(long, default_value_t = 1000)]
        page_height: i64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the link-prediction GNN on a directory of graph JSON files.
    TrainLink {
        #[arg(long)]
        graphs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 5e-3)]
        lr: f64,
        #[arg(long, default_value_t = 6)]
        batch_size: usize,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long, default_value_t = default_seed())]
        seed: u64,
        /// Random non-edge pairs added per document per epoch.
        #[arg(long, default_value_t = 0)]
        extra_pairs: usize,
        #[arg(long, default_value_t = 64)]
        text_dim: usize,
        #[arg(long, default_value_t = 8)]
        size_dim: usize,
        #[arg(long, default_value_t = 64)]
        hidden_dim: usize,
        #[arg(long, default_value_t = 2)]
        layers: usize,
    },
    /// Run the fused vs text-only ablation over several seeds.
    RunExperiment {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = AblationArg::Both)]
        ablation: AblationArg,
        #[arg(long, default_value_t = default_seed())]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        n_docs: usize,
        #[arg(long, default_value_t = 20)]
        nodes_lo: usize,
        #[arg(long, default_value_t = 40)]
        nodes_hi: usize,
        #[arg(long, default_value_t = 0.8)]
        train_frac: f64,
        #[arg(long, default_value_t = 20)]
        link_epochs: usize,
        #[arg(long, default_value_t = 5e-3)]
        link_lr: f64,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long, default_value_t = 30)]
        ie_epochs: usize,
        #[arg(long, default_value_t = 0.01)]
        ie_lr: f64,
        #[arg(long, default_value_t = 64)]
        text_dim: usize,
        #[arg(long, default_value_t = 8)]
        size_dim: usize,
        #[arg(long, default_value_t = 64)]
        hidden_dim: usize,
        #[arg(long, default_value_t = 2)]
        layers: usize,
    },
    /// Render a document and its graph as a standalone SVG.
    RenderSvg {
        /// Graph JSON produced by build-graph.
        #[arg(long)]
        graph: PathBuf,
        /// Canonical document JSON.
        #[arg(long)]
        doc: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Annotate each edge with d and e_dis.
        #[arg(long, default_value_t = false)]
        edge_labels: bool,
        /// Suppress segment text inside the boxes.
        #[arg(long, default_value_t = false)]
        no_node_text: bool,
    },
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }

    fn io(e: std::io::Error, context: &Path) -> Self {
        CliError::new(EXIT_USAGE, format!("{}: {e}", context.display()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes, anything else is a
            // usage error.
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::GenerateCorpus { seed, n_docs, nodes_lo, nodes_hi, out } => {
            cmd_generate_corpus(seed, n_docs, nodes_lo, nodes_hi, &out)
        }
        Command::BuildGraph { input, format, page_width, page_height, out } => {
            cmd_build_graph(&input, format, (page_width, page_height), &out)
        }
        Command::TrainLink {
            graphs, out, epochs, lr, batch_size, lambda, seed, extra_pairs,
            text_dim, size_dim, hidden_dim, layers,
        } => {
            let cfg = TrainConfig {
                epochs,
                lr,
                batch_size,
                lambda,
                seed,
                extra_pair_count: extra_pairs,
            };
            let gnn_cfg = GnnConfig { text_dim, size_dim, hidden_dim, layers, seed };
            cmd_train_link(&graphs, &out, cfg, gnn_cfg)
        }
        Command::RunExperiment {
            out, trials, ablation, seed, n_docs, nodes_lo, nodes_hi, train_frac,
            link_epochs, link_lr, lambda, ie_epochs, ie_lr,
            text_dim, size_dim, hidden_dim, layers,
        } => {
            let cfg = ExperimentConfig {
                trials,
                n_docs,
                nodes_lo,
                nodes_hi,
                seed,
                train_frac,
                link: TrainConfig {
                    epochs: link_epochs,
                    lr: link_lr,
                    lambda,
                    seed,
                    ..TrainConfig::default()
                },
                ie: IeTrainConfig { epochs: ie_epochs, lr: ie_lr, seed, ..IeTrainConfig::default() },
                gnn: GnnConfig { text_dim, size_dim, hidden_dim, layers, seed },
            };
            cmd_run_experiment(&out, &cfg, ablation.into())
        }
        Command::RenderSvg { graph, doc, out, edge_labels, no_node_text } => {
            cmd_render_svg(&graph, &doc, &out, edge_labels, no_node_text)
        }
    }
}

fn write_manifest<C: Serialize>(dir: &Path, command: &str, config: &C) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Manifest<'a, C> {
        command: &'a str,
        config: &'a C,
    }
    let manifest = Manifest { command, config };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    let path = dir.join("manifest.json");
    std::fs::write(&path, bytes).map_err(|e| CliError::io(e, &path))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(e, dir))
}

fn cmd_generate_corpus(
    seed: u64,
    n_docs: usize,
    nodes_lo: usize,
    nodes_hi: usize,
    out: &Path,
) -> Result<(), CliError> {
    if nodes_lo < 2 || nodes_hi < nodes_lo {
        return Err(CliError::new(EXIT_USAGE, "need 2 <= nodes-lo <= nodes-hi"));
    }
    ensure_dir(out)?;
    let docs = generate_synthetic_corpus(seed, n_docs, nodes_lo, nodes_hi);
    for doc in &docs {
        let path = out.join(format!("{}.jsonl", doc.doc_id));
        std::fs::write(&path, serialize_generic(doc)).map_err(|e| CliError::io(e, &path))?;
    }
    #[derive(Serialize)]
    struct Config {
        seed: u64,
        n_docs: usize,
        nodes_lo: usize,
        nodes_hi: usize,
    }
    write_manifest(out, "generate-corpus", &Config { seed, n_docs, nodes_lo, nodes_hi })?;
    println!("wrote {} documents to {}", docs.len(), out.display());
    Ok(())
}

fn input_files(input: &Path) -> Result<Vec<PathBuf>, CliError> {
    let meta = std::fs::metadata(input).map_err(|e| CliError::io(e, input))?;
    if meta.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(input)
        .map_err(|e| CliError::io(e, input))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("json" | "jsonl")
                )
                && p.file_name().and_then(|n| n.to_str()) != Some("manifest.json")
        })
        .collect();
    files.sort();
    Ok(files)
}

fn parse_one(
    path: &Path,
    format: Format,
    page_size: (i64, i64),
) -> Result<Document, String> {
    let raw = std::fs::read(path).map_err(|e| e.to_string())?;
    let doc_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("doc")
        .to_string();
    let doc = match format {
        Format::Funsd => parse_funsd(&raw, &doc_id, page_size),
        Format::Generic => parse_generic(&raw, &doc_id),
    }
    .map_err(|e| e.to_string())?;
    let doc = normalize_coords(&doc).map_err(|e| e.to_string())?;
    let report = validate_document(&doc);
    if !report.is_usable() {
        let msgs: Vec<String> = report
            .errors
            .iter()
            .map(|(code, msg)| format!("{code}: {msg}"))
            .collect();
        return Err(msgs.join("; "));
    }
    Ok(doc)
}

fn cmd_build_graph(
    input: &Path,
    format: Format,
    page_size: (i64, i64),
    out: &Path,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    let files = input_files(input)?;
    if files.is_empty() {
        return Err(CliError::new(EXIT_USAGE, format!("no input files in {}", input.display())));
    }
    let mut failures: Vec<(PathBuf, String)> = Vec::new();
    let mut emitted = 0usize;
    let (mut total_nodes, mut total_edges) = (0usize, 0usize);
    for path in &files {
        let doc = match parse_one(path, format, page_size) {
            Ok(doc) => doc,
            Err(msg) => {
                failures.push((path.clone(), msg));
                continue;
            }
        };
        let graph = match build_graph(&doc) {
            Ok(g) => g,
            Err(e) => {
                failures.push((path.clone(), e.to_string()));
                continue;
            }
        };
        total_nodes += graph.node_count();
        total_edges += graph.directed_edges.len();
        let graph_path = out.join(format!("{}.graph.json", graph.doc_id));
        std::fs::write(&graph_path, graph_to_json(&graph))
            .map_err(|e| CliError::io(e, &graph_path))?;
        let doc_path = out.join(format!("{}.doc.json", graph.doc_id));
        std::fs::write(&doc_path, document_to_json(&doc))
            .map_err(|e| CliError::io(e, &doc_path))?;
        emitted += 1;
    }
    #[derive(Serialize)]
    struct Config<'a> {
        input: &'a Path,
        format: &'a str,
        page_width: i64,
        page_height: i64,
        files: usize,
        emitted: usize,
        failed: usize,
    }
    write_manifest(
        out,
        "build-graph",
        &Config {
            input,
            format: match format {
                Format::Funsd => "funsd",
                Format::Generic => "generic",
            },
            page_width: page_size.0,
            page_height: page_size.1,
            files: files.len(),
            emitted,
            failed: failures.len(),
        },
    )?;
    println!(
        "built {emitted} graphs ({total_nodes} nodes, {total_edges} directed edges)"
    );
    if !failures.is_empty() {
        for (path, msg) in &failures {
            eprintln!("failed {}: {msg}", path.display());
        }
        return Err(CliError::new(
            EXIT_PARSE,
            format!("{} of {} input files failed to parse", failures.len(), files.len()),
        ));
    }
    Ok(())
}

fn load_graphs(dir: &Path) -> Result<Vec<DocumentGraph>, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(e, dir))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".graph.json"))
        })
        .collect();
    paths.sort();
    let mut graphs = Vec::with_capacity(paths.len());
    for path in &paths {
        let raw = std::fs::read(path).map_err(|e| CliError::io(e, path))?;
        let graph = graph_from_json(&raw)
            .map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {e}", path.display())))?;
        graphs.push(graph);
    }
    Ok(graphs)
}

fn cmd_train_link(
    graphs_dir: &Path,
    out: &Path,
    cfg: TrainConfig,
    gnn_cfg: GnnConfig,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    let graphs = load_graphs(graphs_dir)?;
    if graphs.is_empty() {
        return Err(CliError::new(
            EXIT_USAGE,
            format!("no *.graph.json files in {}", graphs_dir.display()),
        ));
    }
    let embedder = docgraph::encoder::TextEmbedder::new(gnn_cfg.text_dim, cfg.seed);
    let (model, history) = train_link_prediction(&graphs, &gnn_cfg, &cfg, &embedder)
        .map_err(|e| match e {
            TrainError::NonFiniteLoss { .. } => CliError::new(EXIT_NUMERIC, e.to_string()),
            TrainError::EmptyCorpus => CliError::new(EXIT_USAGE, e.to_string()),
        })?;
    let ckpt_path = out.join("checkpoint.bin");
    model
        .params
        .save_to_path(&ckpt_path)
        .map_err(|e| CliError::new(EXIT_USAGE, e.to_string()))?;
    let csv_path = out.join("loss_history.csv");
    std::fs::write(&csv_path, history.to_csv()).map_err(|e| CliError::io(e, &csv_path))?;
    #[derive(Serialize)]
    struct Config<'a> {
        graphs_dir: &'a Path,
        train: &'a TrainConfig,
        gnn: &'a GnnConfig,
        documents: usize,
    }
    write_manifest(
        out,
        "train-link",
        &Config { graphs_dir, train: &cfg, gnn: &gnn_cfg, documents: graphs.len() },
    )?;
    let last = history.epochs.last().expect("at least one epoch");
    println!(
        "trained {} epochs on {} graphs, final joint loss {:.6}, direction accuracy {:.4}",
        last.epoch,
        graphs.len(),
        last.joint_loss,
        last.direction_accuracy
    );
    Ok(())
}

fn cmd_run_experiment(
    out: &Path,
    cfg: &ExperimentConfig,
    ablation: Ablation,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    let report = run_experiment(cfg, ablation)
        .map_err(|e| CliError::new(EXIT_INTEGRITY, e.to_string()))?;
    let report_path = out.join("report.json");
    let mut bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
    bytes.push(b'\n');
    std::fs::write(&report_path, bytes).map_err(|e| CliError::io(e, &report_path))?;
    let csv_path = out.join("curves.csv");
    std::fs::write(&csv_path, report.curves_csv()).map_err(|e| CliError::io(e, &csv_path))?;
    #[derive(Serialize)]
    struct Config<'a> {
        ablation: Ablation,
        experiment: &'a ExperimentConfig,
    }
    write_manifest(out, "run-experiment", &Config { ablation, experiment: cfg })?;
    match (report.mean_f1_delta_points, report.sign_test_p) {
        (Some(delta), Some(p)) => println!(
            "{} trials: mean F1 delta {delta:+.2} points (fused - text-only), \
             wins {}/{}, sign test p = {p:.4}, convergence wins {}/{}",
            report.compared_trials,
            report.f1_wins,
            report.compared_trials,
            report.convergence_wins,
            report.compared_trials
        ),
        _ => println!("ran {} trials (single arm, no comparison)", report.trials.len()),
    }
    Ok(())
}

fn cmd_render_svg(
    graph_path: &Path,
    doc_path: &Path,
    out: &Path,
    edge_labels: bool,
    no_node_text: bool,
) -> Result<(), CliError> {
    let graph_raw = std::fs::read(graph_path).map_err(|e| CliError::io(e, graph_path))?;
    let graph = graph_from_json(&graph_raw)
        .map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {e}", graph_path.display())))?;
    let doc_raw = std::fs::read(doc_path).map_err(|e| CliError::io(e, doc_path))?;
    let doc = document_from_json(&doc_raw)
        .map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {e}", doc_path.display())))?;
    let opts = RenderOptions { edge_labels, node_text: !no_node_text };
    let svg = render_svg(&doc, &graph, &opts)
        .map_err(|e| CliError::new(EXIT_INTEGRITY, e.to_string()))?;
    std::fs::write(out, svg).map_err(|e| CliError::io(e, out))?;
    println!(
        "rendered {} nodes and {} edges to {}",
        graph.node_count(),
        graph.directed_edges.len(),
        out.display()
    );
    Ok(())
}
