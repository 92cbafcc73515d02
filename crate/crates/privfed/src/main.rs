use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use privfed::config::{ExperimentConfig, FeatureMode, Tuning};
use privfed::experiment::{self, feature_subset, node_configs, prepare, ExperimentError, NODE_IDS};
use privfed::node::{run_central, run_edge, NodeError};
use privfed::report::{emit_report, render_text};
use privfed::transport::{accept_edges, connect, FramedChannel};
use privfed::wdbc::{load_wdbc, write_wdbc};
use privfed_core::dataset::Dataset;
use privfed_core::features::{cumulative_variance_curve, select_features};

#[derive(Parser)]
#[command(name = "privfed", version, about = "Federated GBDT breast-cancer classification on WDBC")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of consecutive seeds to average over.
    #[arg(long, global = true)]
    seeds: Option<usize>,
    /// full, top5 or least5.
    #[arg(long, global = true)]
    feature_mode: Option<String>,
    #[arg(long, global = true)]
    hpt: bool,
    #[arg(long, global = true)]
    leakage_safe: bool,
    #[arg(long, global = true)]
    rounds: Option<u32>,
    /// Run every feature mode under both tunings.
    #[arg(long, global = true)]
    matrix: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Full experiment; writes report.txt, summary.csv and runs.csv.
    Run {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Dump the dataset after SMOTE and outlier removal for the first seed.
    Preprocess {
        #[arg(long)]
        out: PathBuf,
    },
    /// Explained-variance curve and feature ranking.
    RankFeatures {
        /// Rank the loaded data instead of the preprocessed data.
        #[arg(long)]
        raw: bool,
    },
    /// Central node over TCP; waits for two edges.
    ServeCentral {
        #[arg(long)]
        listen: String,
    },
    /// Edge node over TCP.
    ServeEdge {
        #[arg(long)]
        connect: String,
        /// 1 or 2.
        #[arg(long)]
        node: u16,
    },
}

fn config_err(message: String) -> ExperimentError {
    ExperimentError::Config(privfed::ConfigError::Invalid(message))
}

fn build_config(common: &Common) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    if let Some(d) = &common.data {
        cfg.data_path = d.clone();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(n) = common.seeds {
        cfg.seed_count = n;
    }
    if let Some(m) = &common.feature_mode {
        cfg.feature_mode = m.parse::<FeatureMode>().map_err(config_err)?;
    }
    if common.hpt {
        cfg.tuning = Tuning::Hpt;
    }
    if common.leakage_safe {
        cfg.leakage_safe = true;
    }
    if let Some(r) = common.rounds {
        cfg.rounds = r;
    }
    if common.matrix {
        cfg.matrix = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load(cfg: &ExperimentConfig) -> Result<Dataset, ExperimentError> {
    load_wdbc(&cfg.data_path).map_err(|e| ExperimentError::Data { stage: "load", message: e.to_string() })
}

fn io_err(stage: &'static str) -> impl Fn(std::io::Error) -> ExperimentError {
    move |e| ExperimentError::Data { stage, message: e.to_string() }
}

fn node_err(e: NodeError) -> ExperimentError {
    e.into()
}

fn execute(command: Command, common: &Common) -> Result<(), ExperimentError> {
    let cfg = build_config(common)?;
    match command {
        Command::Run { out } => {
            let report = experiment::run_experiment(&cfg)?;
            emit_report(&report, &out).map_err(io_err("report"))?;
            print!("{}", render_text(&report));
        }
        Command::Preprocess { out } => {
            let data = load(&cfg)?;
            let cleaned = experiment::preprocess(&data, &cfg, cfg.seed)?;
            let file = std::fs::File::create(&out).map_err(io_err("preprocess"))?;
            write_wdbc(&cleaned, std::io::BufWriter::new(file)).map_err(io_err("preprocess"))?;
            let c = cleaned.class_counts();
            println!("wrote {} rows ({} B / {} M) to {}", cleaned.len(), c[0], c[1], out.display());
        }
        Command::RankFeatures { raw } => {
            let data = load(&cfg)?;
            let input = if raw { data } else { experiment::preprocess(&data, &cfg, cfg.seed)? };
            let (model, m, ranking) = select_features(&input, cfg.pca_threshold, cfg.top_k)
                .map_err(|e| ExperimentError::Data { stage: "feature ranking", message: e.to_string() })?;
            println!("component\tcumulative_ratio");
            for (i, c) in cumulative_variance_curve(&model.explained_variance_ratio) {
                println!("{i}\t{c:.6}");
            }
            println!("components for {}: {m}", cfg.pca_threshold);
            println!("top: {}", ranking.top.join(", "));
            println!("least: {}", ranking.bottom.join(", "));
        }
        Command::ServeCentral { listen } => {
            let data = load(&cfg)?;
            let (prep, nodes) = tcp_setup(&data, &cfg)?;
            let listener = TcpListener::bind(&listen).map_err(io_err("listen"))?;
            eprintln!("listening on {}", listener.local_addr().map_err(io_err("listen"))?);
            let streams = accept_edges(&listener, 2).map_err(io_err("listen"))?;
            let channels = streams.into_iter().map(FramedChannel::new).collect();
            let rounds = run_central(&prep.split.shards[2], &nodes[2], channels, cfg.rounds).map_err(node_err)?;
            for r in rounds {
                for e in &r.edges {
                    println!(
                        "round {} node {} local {:.4} global {:.4}",
                        r.round,
                        e.node_id,
                        e.local.accuracy(),
                        e.global.accuracy()
                    );
                }
                println!(
                    "round {} central local {:.4} ensemble {:.4} bytes {}",
                    r.round,
                    r.central.local.accuracy(),
                    r.ensemble().accuracy(),
                    r.bytes_transferred
                );
            }
        }
        Command::ServeEdge { connect: addr, node } => {
            let slot = NODE_IDS[..2]
                .iter()
                .position(|&id| id == node)
                .ok_or_else(|| config_err(format!("edge node must be 1 or 2, got {node}")))?;
            let data = load(&cfg)?;
            let (prep, nodes) = tcp_setup(&data, &cfg)?;
            let stream = connect(&addr).map_err(|e| ExperimentError::Protocol(e.to_string()))?;
            let mut channel = FramedChannel::new(stream);
            let outcome = run_edge(&prep.split.shards[slot], &nodes[slot], &mut channel).map_err(node_err)?;
            for r in outcome.rounds {
                println!("round {} local {:.4} global {:.4}", r.round, r.local.accuracy(), r.global.accuracy());
            }
        }
    }
    Ok(())
}

/// Every TCP node rebuilds the same deterministic split from the shared seed.
fn tcp_setup(
    data: &Dataset,
    cfg: &ExperimentConfig,
) -> Result<(experiment::Prepared, [privfed::node::NodeConfig; 3]), ExperimentError> {
    let rank = cfg.feature_mode != FeatureMode::Full;
    let prep = prepare(data, cfg, cfg.seed, rank)?;
    let subset = feature_subset(cfg.feature_mode, prep.ranking.as_ref().map(|(_, r)| r));
    let nodes = node_configs(cfg, cfg.tuning, subset, cfg.seed);
    Ok((prep, nodes))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command, &cli.common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
