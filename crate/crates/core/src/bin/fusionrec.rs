use std::error::Error;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fusionrec::embedding::{
    embed, embed_inductive_labeled, export_binary, export_text, import_binary, import_text,
    EmbedConfig, InductiveLinks, NodeEmbeddings,
};
use fusionrec::graph::{
    build_transition, parse_interactions, read_graph, write_graph, ExpansionMode, ParseConfig,
};
use fusionrec::iql::{compile, filter, load_catalog, CatalogSchema};
use fusionrec::pipeline::{
    evaluate, hold_out_last, read_sessions, report, serve::serve, session_examples, ExampleMode,
    Popularity, ProfileBuilder, ScorerRanker,
};
use fusionrec::scorer::{read_examples, read_model, train, write_examples, write_model, MlpConfig};
use fusionrec::sketch::{
    make_layout, read_item_codes, write_item_codes, write_user_sketches, ItemCodes, LayoutKey,
    Sketch, DEFAULT_BITS, DEFAULT_DEPTH,
};

type Result<T> = std::result::Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(
    name = "fusionrec",
    version,
    about = "Hypergraph embeddings, sketch scoring and filtered recommendations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a transition graph from a hyperedge file.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// Embed a graph, or embed new nodes inductively.
    Embed(EmbedArgs),
    /// Item codes, user sketches and training examples.
    Sketch {
        #[command(subcommand)]
        command: SketchCommand,
    },
    /// Train a scorer on a training example file.
    Train(TrainArgs),
    /// Print the ids of catalog items matching a query.
    Filter {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        query: String,
    },
    /// Evaluate a scorer on held-out last items of sessions.
    Eval {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        codes: PathBuf,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        recent: usize,
        /// Sessions to count item popularity from, for the cold-start
        /// fallback and a baseline line.
        #[arg(long)]
        popularity: Option<PathBuf>,
    },
    /// Serve the recommendation API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = Ipv4Addr::LOCALHOST.into())]
        host: std::net::IpAddr,
        #[arg(long)]
        campaigns: PathBuf,
    },
    /// Aggregate an impression/click log into per-campaign CSV.
    Report {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GraphCommand {
    Build {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Clique)]
        mode: Mode,
        /// Treat the last field of each line as the edge weight.
        #[arg(long)]
        weighted: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Clique,
    Star,
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct EmbedArgs {
    #[command(subcommand)]
    command: Option<EmbedCommand>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = fusionrec::embedding::DEFAULT_DIM)]
    dim: usize,
    #[arg(long, default_value_t = fusionrec::embedding::DEFAULT_ITERATIONS)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    /// `.tsv` or `.txt` writes text, anything else binary.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EmbedCommand {
    /// Embed nodes from `new TAB existing [TAB weight]` links.
    Inductive {
        #[arg(long)]
        links: PathBuf,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum SketchCommand {
    /// Encode every embedded node into item codes.
    Build {
        #[arg(long)]
        embeddings: PathBuf,
        /// `D=<depth>,b=<bits>,seed=<seed>`.
        #[arg(long, default_value = "D=8,b=7,seed=0")]
        layout: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// One count sketch per session of the history file.
    User {
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        codes: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Training examples (profile input, next-item target) from sessions.
    Examples {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        codes: PathBuf,
        #[arg(long, default_value_t = 1)]
        recent: usize,
        /// Only use the last item of each session as a target.
        #[arg(long)]
        last_only: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    examples: PathBuf,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 256)]
    hidden: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| format!("{}: {e}", path.display()).into())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| format!("{}: {e}", path.display()).into())
}

fn is_text(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("tsv" | "txt")
    )
}

fn load_embeddings(path: &Path) -> Result<NodeEmbeddings> {
    let mut r = open(path)?;
    let binary = r.fill_buf()?.starts_with(b"FRE1");
    Ok(if binary {
        import_binary(r)?
    } else {
        import_text(r)?
    })
}

fn save_embeddings(emb: &NodeEmbeddings, path: &Path) -> Result<()> {
    let w = create(path)?;
    if is_text(path) {
        export_text(emb, w)?;
    } else {
        export_binary(emb, w)?;
    }
    Ok(())
}

fn parse_layout(text: &str) -> Result<(usize, u32, u64)> {
    let (mut depth, mut bits, mut seed) = (DEFAULT_DEPTH, DEFAULT_BITS, 0);
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("bad layout part {part:?}"))?;
        match k.trim() {
            "D" | "depth" => depth = v.trim().parse()?,
            "b" | "bits" => bits = v.trim().parse()?,
            "seed" => seed = v.trim().parse()?,
            other => return Err(format!("unknown layout key {other:?}").into()),
        }
    }
    Ok((depth, bits, seed))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Graph {
            command:
                GraphCommand::Build {
                    input,
                    mode,
                    weighted,
                    out,
                },
        } => {
            let parsed = parse_interactions(
                open(&input)?,
                &ParseConfig {
                    weighted,
                    ..ParseConfig::default()
                },
            )?;
            let mode = match mode {
                Mode::Clique => ExpansionMode::Clique,
                Mode::Star => ExpansionMode::Star,
            };
            let graph = build_transition(&parsed.edges, &parsed.index, mode)?;
            write_graph(&graph, create(&out)?)?;
            eprintln!(
                "{} hyperedges, {} nodes, {} transitions, {} malformed lines",
                parsed.edges.len(),
                graph.index.len(),
                graph.matrix.nnz(),
                parsed.malformed
            );
        }
        Command::Embed(EmbedArgs {
            command: Some(EmbedCommand::Inductive { links, base, out }),
            ..
        }) => {
            let base = load_embeddings(&base)?;
            let links = InductiveLinks::parse(open(&links)?, &base.index)?;
            let emb = embed_inductive_labeled(&links, &base)?;
            save_embeddings(&emb, &out)?;
            eprintln!("embedded {} new nodes", emb.index.len());
        }
        Command::Embed(args) => {
            let graph = args.graph.ok_or("--graph is required")?;
            let out = args.out.ok_or("--out is required")?;
            let graph = read_graph(open(&graph)?)?;
            let config = EmbedConfig {
                dim: args.dim,
                iterations: args.iterations,
                seed: args.seed,
                workers: args.workers,
            };
            let t = Instant::now();
            let emb = embed(&graph, &config)?;
            save_embeddings(&emb, &out)?;
            eprintln!("embedded {} nodes in {:.2?}", emb.index.len(), t.elapsed());
        }
        Command::Sketch { command } => sketch(command)?,
        Command::Train(args) => {
            let examples = read_examples(open(&args.examples)?)?;
            let first = examples.first().ok_or("no training examples")?;
            let config = MlpConfig {
                n_layers: args.layers,
                hidden_size: args.hidden,
                learning_rate: args.lr,
                batch_size: args.batch,
                epochs: args.epochs,
                seed: args.seed,
                ..MlpConfig::new(first.input().len(), first.target().key())
            };
            let t = Instant::now();
            let report = train(&examples, &config)?;
            write_model(&config, &report.params, create(&args.out)?)?;
            eprintln!(
                "{} examples, loss {:.5} -> {:.5} in {:.2?}",
                examples.len(),
                report.initial_loss,
                report.final_loss,
                t.elapsed()
            );
        }
        Command::Filter {
            catalog,
            schema,
            query,
        } => {
            let schema = CatalogSchema::from_json(&std::fs::read_to_string(&schema)?)?;
            let (catalog, stats) = load_catalog(open(&catalog)?, &schema)?;
            let query = compile(&query, &schema)?;
            let t = Instant::now();
            let hits = filter(&catalog, &query)?;
            let elapsed = t.elapsed();
            let mut out = BufWriter::new(io::stdout().lock());
            for i in hits.iter() {
                writeln!(out, "{}", catalog.ids()[i])?;
            }
            out.flush()?;
            eprintln!(
                "{} of {} items match ({} malformed lines skipped) in {elapsed:.2?}",
                hits.count(),
                catalog.len(),
                stats.malformed
            );
        }
        Command::Eval {
            sessions,
            model,
            codes,
            k,
            recent,
            popularity,
        } => {
            let log = read_sessions(open(&sessions)?)?;
            let (_, params) = read_model(open(&model)?)?;
            let codes = read_item_codes(open(&codes)?)?;
            let popularity = match popularity {
                Some(p) => Some(Popularity::from_sessions(
                    &read_sessions(open(&p)?)?.sessions,
                )),
                None => None,
            };
            let mut ranker = ScorerRanker::new(&params, &codes, recent)?;
            if let Some(p) = &popularity {
                ranker = ranker.with_fallback(p);
            }
            let eval = hold_out_last(&log.sessions);
            let report = evaluate(&eval, k, |h, k| ranker.rank(h, k))?;
            println!("model      {report}");
            if let Some(p) = &popularity {
                let top = p.top(k);
                let baseline = evaluate(&eval, k, |_, _| Ok(top.clone()))?;
                println!("popularity {baseline}");
            }
        }
        Command::Serve {
            port,
            host,
            campaigns,
        } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(SocketAddr::new(host, port), campaigns))?;
        }
        Command::Report { events, out } => {
            let agg = report(open(&events)?)?;
            match out {
                Some(path) => agg.write_csv(create(&path)?)?,
                None => agg.write_csv(io::stdout().lock())?,
            }
            if agg.malformed > 0 {
                eprintln!("skipped {} malformed rows", agg.malformed);
            }
        }
    }
    Ok(())
}

fn sketch(command: SketchCommand) -> Result<()> {
    match command {
        SketchCommand::Build {
            embeddings,
            layout,
            out,
        } => {
            let emb = load_embeddings(&embeddings)?.without_virtual();
            let (depth, bits, seed) = parse_layout(&layout)?;
            let layout = make_layout(depth, bits, emb.matrix.dim(), seed)?;
            let codes = ItemCodes::encode_embeddings(&emb, &layout)?;
            write_item_codes(&codes, create(&out)?)?;
            eprintln!(
                "encoded {} items into {}x{} cells",
                codes.len(),
                layout.depth(),
                layout.width()
            );
        }
        SketchCommand::User {
            history,
            codes,
            out,
        } => {
            let log = read_sessions(open(&history)?)?;
            let codes = read_item_codes(open(&codes)?)?;
            let users = user_sketches(&log.sessions, &codes)?;
            write_user_sketches(&users, create(&out)?)?;
            eprintln!(
                "{} user sketches, {} malformed lines",
                users.len(),
                log.malformed
            );
        }
        SketchCommand::Examples {
            sessions,
            codes,
            recent,
            last_only,
            out,
        } => {
            let log = read_sessions(open(&sessions)?)?;
            let codes = read_item_codes(open(&codes)?)?;
            let mode = if last_only {
                ExampleMode::LastOnly
            } else {
                ExampleMode::AllPrefixes
            };
            let examples = session_examples(
                &log.sessions,
                &codes,
                &ProfileBuilder::new(codes.key(), recent),
                mode,
            )?;
            write_examples(&examples, create(&out)?)?;
            eprintln!(
                "{} examples from {} sessions",
                examples.len(),
                log.sessions.len()
            );
        }
    }
    Ok(())
}

fn user_sketches(
    sessions: &[fusionrec::synth::Session],
    codes: &ItemCodes,
) -> Result<Vec<(String, Sketch)>> {
    let key: LayoutKey = codes.key();
    sessions
        .iter()
        .map(|s| {
            let mut sketch = Sketch::zeros(key);
            for c in s.items.iter().filter_map(|i| codes.get(i)) {
                sketch.insert(c, 1.0)?;
            }
            Ok((s.id.clone(), sketch))
        })
        .collect()
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
