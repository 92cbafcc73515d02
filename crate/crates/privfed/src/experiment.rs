//! End-to-end pipeline: preprocessing, partitioning and federated runs over
//! every configured seed and `(feature mode, tuning)` cell.

use std::io::{Read, Write};
use std::net::TcpListener;

use privfed_core::dataset::{partition, Dataset, FederatedSplit, Shard};
use privfed_core::features::{select_features, FeatureRanking};
use privfed_core::preprocess::{fit_isolation_forest, remove_outliers, smote_expand, SmoteConfig};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, FeatureMode, TransportKind, Tuning};
use crate::node::{run_central, run_edge, EdgeOutcome, NodeConfig, NodeError, RoundReport, Training, CENTRAL_ID};
use crate::transport::{accept_edges, connect, pipe, FrameLog, FramedChannel};
use crate::wdbc::load_wdbc;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{stage}: {message}")]
    Data { stage: &'static str, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 1,
            ExperimentError::Data { .. } => 2,
            ExperimentError::Protocol(_) => 3,
        }
    }
}

fn data_err(stage: &'static str) -> impl FnOnce(String) -> ExperimentError {
    move |message| ExperimentError::Data { stage, message }
}

fn stage<T, E: std::fmt::Display>(stage: &'static str, r: Result<T, E>) -> Result<T, ExperimentError> {
    r.map_err(|e| data_err(stage)(e.to_string()))
}

impl From<NodeError> for ExperimentError {
    fn from(e: NodeError) -> Self {
        match e {
            NodeError::Training(t) => ExperimentError::Data { stage: "training", message: t.to_string() },
            NodeError::Evaluation(m) => ExperimentError::Data { stage: "evaluation", message: m.to_string() },
            other => ExperimentError::Protocol(other.to_string()),
        }
    }
}

/// `[benign, malignant]` row counts after each stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StageCounts {
    pub loaded: [usize; 2],
    pub after_smote: [usize; 2],
    pub after_outliers: [usize; 2],
    /// `(train, test)` sizes of Edge-1, Edge-2 and Central.
    pub shards: [(usize, usize); 3],
    pub synthetic_in_test: usize,
}

fn total(c: [usize; 2]) -> usize {
    c[0] + c[1]
}

impl StageCounts {
    pub fn total_after_smote(&self) -> usize {
        total(self.after_smote)
    }

    pub fn total_after_outliers(&self) -> usize {
        total(self.after_outliers)
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub seed: u64,
    pub split: FederatedSplit,
    pub counts: StageCounts,
    /// Component count and ranking; absent when only Full mode runs.
    pub ranking: Option<(usize, FeatureRanking)>,
}

fn preprocess_block(
    data: &Dataset,
    cfg: &ExperimentConfig,
    target: usize,
    seed: u64,
) -> Result<(Dataset, Dataset), ExperimentError> {
    let smote_cfg = SmoteConfig { target_per_class: target, k_neighbors: cfg.smote_k, seed };
    let expanded = stage("smote", smote_expand(data, &smote_cfg))?;
    let forest =
        stage("isolation forest", fit_isolation_forest(&expanded, cfg.forest_trees, cfg.forest_subsample, seed))?;
    let cleaned = stage("isolation forest", remove_outliers(&expanded, &forest, cfg.contamination))?;
    Ok((expanded, cleaned))
}

/// SMOTE and outlier removal on the whole dataset, as a standalone stage.
pub fn preprocess(data: &Dataset, cfg: &ExperimentConfig, seed: u64) -> Result<Dataset, ExperimentError> {
    preprocess_block(data, cfg, cfg.smote_target, seed).map(|(_, cleaned)| cleaned)
}

fn add(a: [usize; 2], b: [usize; 2]) -> [usize; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

/// Runs every stage up to partitioning for one seed.
pub fn prepare(data: &Dataset, cfg: &ExperimentConfig, seed: u64, rank: bool) -> Result<Prepared, ExperimentError> {
    let mut counts = StageCounts { loaded: data.class_counts(), ..Default::default() };
    let (split, ranking_input) = if cfg.leakage_safe {
        let raw = stage("partition", partition(data, seed))?;
        let per_shard = cfg.smote_target.div_ceil(3);
        let mut shards = Vec::with_capacity(3);
        for shard in raw.shards {
            let (expanded, cleaned) = preprocess_block(&shard.train, cfg, per_shard, seed)?;
            counts.after_smote = add(counts.after_smote, expanded.class_counts());
            counts.after_outliers = add(counts.after_outliers, cleaned.class_counts());
            shards.push(Shard { train: cleaned, test: shard.test });
        }
        let shards: [Shard; 3] = shards.try_into().expect("three shards");
        let pooled = stage("feature ranking", shards[0].train.concat(&shards[1].train))?;
        let pooled = stage("feature ranking", pooled.concat(&shards[2].train))?;
        (FederatedSplit { shards, seed }, pooled)
    } else {
        let (expanded, cleaned) = preprocess_block(data, cfg, cfg.smote_target, seed)?;
        counts.after_smote = expanded.class_counts();
        counts.after_outliers = cleaned.class_counts();
        let split = stage("partition", partition(&cleaned, seed))?;
        (split, cleaned)
    };
    for (slot, shard) in counts.shards.iter_mut().zip(&split.shards) {
        *slot = (shard.train.len(), shard.test.len());
    }
    counts.synthetic_in_test = split.shards.iter().map(|s| s.test.synthetic_count()).sum();
    let ranking = if rank {
        let (_, m, ranking) = stage("feature ranking", select_features(&ranking_input, cfg.pca_threshold, cfg.top_k))?;
        Some((m, ranking))
    } else {
        None
    };
    Ok(Prepared { seed, split, counts, ranking })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationRun {
    pub rounds: Vec<RoundReport>,
    /// Edge-1 then Edge-2.
    pub edges: Vec<EdgeOutcome>,
}

/// Node ids of Edge-1, Edge-2 and Central, matching the shard order.
pub const NODE_IDS: [u16; 3] = [1, 2, CENTRAL_ID];

fn join_outcome(
    central: Result<Vec<RoundReport>, NodeError>,
    edges: Vec<Result<EdgeOutcome, NodeError>>,
) -> Result<FederationRun, ExperimentError> {
    let edges_ok: Result<Vec<_>, _> = edges.into_iter().collect();
    match (central, edges_ok) {
        (Ok(rounds), Ok(edges)) => Ok(FederationRun { rounds, edges }),
        // A failing edge closes its channel, so the central's error is the echo.
        (Err(NodeError::ChannelClosed), Err(e)) => Err(e.into()),
        (Err(e), _) | (Ok(_), Err(e)) => Err(e.into()),
    }
}

fn run_nodes<S, F>(
    split: &FederatedSplit,
    nodes: &[NodeConfig; 3],
    rounds: u32,
    log: Option<&FrameLog>,
    mut open: F,
) -> Result<FederationRun, ExperimentError>
where
    S: Read + Write + Send,
    F: FnMut() -> Result<(S, S), ExperimentError>,
{
    let wrap = |s: S| match log {
        Some(log) => FramedChannel::new(s).with_log(log.clone()),
        None => FramedChannel::new(s),
    };
    let mut central_side = Vec::new();
    let mut edge_side = Vec::new();
    for _ in 0..2 {
        let (c, e) = open()?;
        central_side.push(wrap(c));
        edge_side.push(wrap(e));
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = edge_side
            .into_iter()
            .enumerate()
            .map(|(i, mut ch)| {
                let shard = &split.shards[i];
                let cfg = &nodes[i];
                scope.spawn(move || run_edge(shard, cfg, &mut ch))
            })
            .collect();
        let central = run_central(&split.shards[2], &nodes[2], central_side, rounds);
        let edges = handles.into_iter().map(|h| h.join().expect("edge thread panicked")).collect();
        join_outcome(central, edges)
    })
}

/// Runs one federation over the configured transport.
pub fn federate(
    split: &FederatedSplit,
    nodes: &[NodeConfig; 3],
    cfg: &ExperimentConfig,
    log: Option<&FrameLog>,
) -> Result<FederationRun, ExperimentError> {
    match &cfg.transport {
        TransportKind::InProcess => run_nodes(split, nodes, cfg.rounds, log, || Ok(pipe())),
        TransportKind::Tcp { host, port } => {
            let io = |e: std::io::Error| ExperimentError::Protocol(e.to_string());
            let listener = TcpListener::bind((host.as_str(), *port)).map_err(io)?;
            let addr = listener.local_addr().map_err(io)?;
            run_nodes(split, nodes, cfg.rounds, log, || {
                let edge = connect(addr).map_err(io)?;
                let mut accepted = accept_edges(&listener, 1).map_err(io)?;
                Ok((accepted.pop().expect("one accepted"), edge))
            })
        }
    }
}

pub fn feature_subset(mode: FeatureMode, ranking: Option<&FeatureRanking>) -> Option<Vec<usize>> {
    let ranking = ranking?;
    match mode {
        FeatureMode::Full => None,
        FeatureMode::Top5 => Some(ranking.top_indices.clone()),
        FeatureMode::Least5 => Some(ranking.bottom_indices.clone()),
    }
}

pub fn node_configs(cfg: &ExperimentConfig, tuning: Tuning, subset: Option<Vec<usize>>, seed: u64) -> [NodeConfig; 3] {
    let training = match tuning {
        Tuning::Normal => Training::Fixed(cfg.params),
        Tuning::Hpt => Training::Tuned { grid: cfg.grid.clone(), folds: cfg.folds, seed },
    };
    NODE_IDS.map(|node_id| NodeConfig {
        node_id,
        training: training.clone(),
        feature_subset: subset.clone(),
        dissemination: cfg.dissemination,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub mode: FeatureMode,
    pub tuning: Tuning,
    pub seed: u64,
    pub run: FederationRun,
}

impl CellResult {
    pub fn last_round(&self) -> &RoundReport {
        self.run.rounds.last().expect("at least one round")
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub leakage_safe: bool,
    pub rounds: u32,
    pub prepared: Vec<Prepared>,
    /// Cells in `cfg.cells()` order, seeds innermost.
    pub cells: Vec<CellResult>,
}

/// Runs the configured experiment on already loaded data.
pub fn run_experiment_on(
    data: &Dataset,
    cfg: &ExperimentConfig,
    log: Option<&FrameLog>,
) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    let cells = cfg.cells();
    let rank = cells.iter().any(|(m, _)| *m != FeatureMode::Full);
    let mut prepared = Vec::new();
    for seed in cfg.seeds() {
        prepared.push(prepare(data, cfg, seed, rank)?);
    }
    let mut results = Vec::new();
    for &(mode, tuning) in &cells {
        for prep in &prepared {
            let subset = feature_subset(mode, prep.ranking.as_ref().map(|(_, r)| r));
            let nodes = node_configs(cfg, tuning, subset, prep.seed);
            let run = federate(&prep.split, &nodes, cfg, log)?;
            results.push(CellResult { mode, tuning, seed: prep.seed, run });
        }
    }
    Ok(ExperimentReport { leakage_safe: cfg.leakage_safe, rounds: cfg.rounds, prepared, cells: results })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    let data = stage("load", load_wdbc(&cfg.data_path))?;
    run_experiment_on(&data, cfg, None)
}
