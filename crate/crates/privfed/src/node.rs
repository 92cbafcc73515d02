//! Edge and central node state machines.
//!
//! Per round an edge trains on its private training split, uploads the
//! serialized model and its local test metrics, waits for the global
//! ensemble, scores it on its own test split and reports that too. The
//! central node trains its own model while collecting uploads, fuses
//! `[edges sorted by sender id..., central]` into an equal-weight soft vote,
//! broadcasts it and gathers the edges' global metrics. Only models and
//! confusion counts cross a channel.
//!
//! Handshake: each edge sends `Hello` (empty payload); the central replies
//! `Hello` carrying the round count as `u32` LE. After the last round the
//! central sends `Shutdown`.

use std::io::{Read, Write};

use privfed_core::dataset::{Dataset, Shard};
use privfed_core::federation::{
    deserialize_ensemble, deserialize_model, serialize_ensemble, serialize_model, CodecError, EnsembleModel,
    FederatedMessage, FrameError, MessageType, MetricsPhase, MetricsReport,
};
use privfed_core::gbdt::{self, GbdtError, GbdtModel, GbdtParams, TuneResult};
use privfed_core::metrics::{accuracy, Metrics, MetricsError};
use thiserror::Error;

use crate::transport::{FramedChannel, WireError};

pub const CENTRAL_ID: u16 = 0;

#[derive(Debug, Error)]
pub enum NodeError {
    #[error("channel closed")]
    ChannelClosed,
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("duplicate model upload from node {0}")]
    DuplicateUpload(u16),
    #[error("bad frame: {0}")]
    Frame(#[from] FrameError),
    #[error("bad payload: {0}")]
    Codec(#[from] CodecError),
    #[error("training failed: {0}")]
    Training(#[from] GbdtError),
    #[error("evaluation failed: {0}")]
    Evaluation(#[from] MetricsError),
    #[error("io error: {0}")]
    Io(std::io::Error),
}

impl From<WireError> for NodeError {
    fn from(e: WireError) -> Self {
        match e {
            WireError::Closed | WireError::Frame(FrameError::UnexpectedEof) => NodeError::ChannelClosed,
            WireError::Frame(f) => NodeError::Frame(f),
            WireError::Io(io) => NodeError::Io(io),
        }
    }
}

fn protocol(what: impl Into<String>) -> NodeError {
    NodeError::Protocol(what.into())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Training {
    Fixed(GbdtParams),
    /// Grid search with stratified k-fold CV before the final fit.
    Tuned {
        grid: Vec<GbdtParams>,
        folds: usize,
        seed: u64,
    },
}

/// What an edge keeps serving after receiving the global model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Dissemination {
    /// The global ensemble is only evaluated; the edge keeps its own model.
    #[default]
    EvaluateOnly,
    /// The edge replaces its model with the received ensemble.
    Adopt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeConfig {
    pub node_id: u16,
    pub training: Training,
    pub feature_subset: Option<Vec<usize>>,
    pub dissemination: Dissemination,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: GbdtModel,
    pub tuned: Option<TuneResult>,
}

/// Fits the node's model for `round`; tuning folds change with the round.
pub fn train_local(train: &Dataset, cfg: &NodeConfig, round: u32) -> Result<TrainedModel, GbdtError> {
    let (params, tuned) = match &cfg.training {
        Training::Fixed(p) => (*p, None),
        Training::Tuned { grid, folds, seed } => {
            let round_seed = seed ^ ((cfg.node_id as u64) << 32) ^ round as u64;
            let result = gbdt::tune(train, grid, *folds, round_seed, cfg.feature_subset.as_deref())?;
            (result.params, Some(result))
        }
    };
    let model = match &cfg.feature_subset {
        Some(subset) => gbdt::fit_on_features(train, &params, subset)?,
        None => gbdt::fit(train, &params)?,
    };
    Ok(TrainedModel { model, tuned })
}

fn score_model(model: &GbdtModel, test: &Dataset) -> Result<Metrics, NodeError> {
    let predictions = model.predict_dataset(test)?;
    let labels: Vec<_> = test.samples().iter().map(|s| s.label).collect();
    Ok(accuracy(&predictions, &labels)?)
}

fn score_ensemble(ensemble: &EnsembleModel, test: &Dataset) -> Result<Metrics, NodeError> {
    let predictions = ensemble.predict_dataset(test)?;
    let labels: Vec<_> = test.samples().iter().map(|s| s.label).collect();
    Ok(accuracy(&predictions, &labels)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRound {
    pub round: u32,
    pub local: Metrics,
    pub global: Metrics,
    pub tuned: Option<TuneResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Deployed {
    Local(GbdtModel),
    Global(EnsembleModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeOutcome {
    pub node_id: u16,
    pub rounds: Vec<EdgeRound>,
    /// `None` when the run had zero rounds.
    pub deployed: Option<Deployed>,
}

fn metrics_message(sender: u16, round: u32, phase: MetricsPhase, metrics: Metrics) -> FederatedMessage {
    FederatedMessage::new(MessageType::Metrics, sender, MetricsReport { round, phase, metrics }.encode())
}

pub fn run_edge<S: Read + Write>(
    shard: &Shard,
    cfg: &NodeConfig,
    channel: &mut FramedChannel<S>,
) -> Result<EdgeOutcome, NodeError> {
    let id = cfg.node_id;
    channel.send(&FederatedMessage::new(MessageType::Hello, id, Vec::new()))?;
    let hello = channel.recv()?;
    if hello.msg_type != MessageType::Hello || hello.payload.len() != 4 {
        return Err(protocol(format!("expected Hello with round count, got {:?}", hello.msg_type)));
    }
    let rounds = u32::from_le_bytes(hello.payload[..4].try_into().expect("length checked"));

    let mut history = Vec::new();
    let mut deployed = None;
    for round in 0..rounds {
        let trained = train_local(&shard.train, cfg, round)?;
        let local = score_model(&trained.model, &shard.test)?;
        channel.send(&FederatedMessage::new(MessageType::ModelUpload, id, serialize_model(&trained.model)))?;
        channel.send(&metrics_message(id, round, MetricsPhase::Local, local))?;

        let msg = channel.recv()?;
        if msg.msg_type != MessageType::GlobalModel {
            return Err(protocol(format!("expected GlobalModel, got {:?}", msg.msg_type)));
        }
        let ensemble = deserialize_ensemble(&msg.payload)?;
        let global = score_ensemble(&ensemble, &shard.test)?;
        channel.send(&metrics_message(id, round, MetricsPhase::Global, global))?;
        history.push(EdgeRound { round, local, global, tuned: trained.tuned });
        deployed = Some(match cfg.dissemination {
            Dissemination::EvaluateOnly => Deployed::Local(trained.model),
            Dissemination::Adopt => Deployed::Global(ensemble),
        });
    }
    let last = channel.recv()?;
    if last.msg_type != MessageType::Shutdown {
        return Err(protocol(format!("expected Shutdown, got {:?}", last.msg_type)));
    }
    Ok(EdgeOutcome { node_id: id, rounds: history, deployed })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeRound {
    pub node_id: u16,
    /// The node's own model on its own test split.
    pub local: Metrics,
    /// The round's global ensemble on the node's test split.
    pub global: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: u32,
    /// Edges in sender-id order.
    pub edges: Vec<NodeRound>,
    /// The central node's own model and the ensemble on the central test split.
    pub central: NodeRound,
    pub central_tuned: Option<TuneResult>,
    pub bytes_transferred: u64,
}

impl RoundReport {
    pub fn ensemble(&self) -> Metrics {
        self.central.global
    }
}

fn collect_upload<S: Read + Write>(
    channel: &mut FramedChannel<S>,
    expected_sender: u16,
    round: u32,
) -> Result<(GbdtModel, Metrics), NodeError> {
    let mut model = None;
    let mut local = None;
    while model.is_none() || local.is_none() {
        let msg = channel.recv()?;
        if msg.sender_id != expected_sender {
            return Err(protocol(format!("node {} spoke on node {expected_sender}'s channel", msg.sender_id)));
        }
        match msg.msg_type {
            MessageType::ModelUpload => {
                if model.is_some() {
                    return Err(NodeError::DuplicateUpload(msg.sender_id));
                }
                model = Some(deserialize_model(&msg.payload)?);
            }
            MessageType::Metrics => {
                let report = MetricsReport::decode(&msg.payload)?;
                if report.phase != MetricsPhase::Local || report.round != round || local.is_some() {
                    return Err(protocol(format!("unexpected metrics from node {}", msg.sender_id)));
                }
                local = Some(report.metrics);
            }
            other => return Err(protocol(format!("unexpected {other:?} from node {}", msg.sender_id))),
        }
    }
    Ok((model.unwrap(), local.unwrap()))
}

fn collect_global_metrics<S: Read + Write>(
    channel: &mut FramedChannel<S>,
    expected_sender: u16,
    round: u32,
) -> Result<Metrics, NodeError> {
    let msg = channel.recv()?;
    match msg.msg_type {
        MessageType::Metrics if msg.sender_id == expected_sender => {
            let report = MetricsReport::decode(&msg.payload)?;
            if report.phase != MetricsPhase::Global || report.round != round {
                return Err(protocol(format!("unexpected metrics from node {}", msg.sender_id)));
            }
            Ok(report.metrics)
        }
        MessageType::ModelUpload => Err(NodeError::DuplicateUpload(msg.sender_id)),
        other => Err(protocol(format!("unexpected {other:?} from node {}", msg.sender_id))),
    }
}

/// Runs `job` on every channel concurrently and returns results in order.
fn on_each<S, T, F>(channels: &mut [(u16, FramedChannel<S>)], job: F) -> Vec<Result<T, NodeError>>
where
    S: Read + Write + Send,
    T: Send,
    F: Fn(u16, &mut FramedChannel<S>) -> Result<T, NodeError> + Sync,
{
    std::thread::scope(|scope| {
        let job = &job;
        let handles: Vec<_> = channels.iter_mut().map(|(id, ch)| scope.spawn(move || job(*id, ch))).collect();
        handles.into_iter().map(|h| h.join().expect("channel worker panicked")).collect()
    })
}

pub fn run_central<S: Read + Write + Send>(
    shard: &Shard,
    cfg: &NodeConfig,
    channels: Vec<FramedChannel<S>>,
    rounds: u32,
) -> Result<Vec<RoundReport>, NodeError> {
    let mut channels: Vec<(u16, FramedChannel<S>)> = channels.into_iter().map(|c| (0, c)).collect();
    let hellos = on_each(&mut channels, |_, ch| {
        let msg = ch.recv()?;
        if msg.msg_type != MessageType::Hello {
            return Err(protocol(format!("expected Hello, got {:?}", msg.msg_type)));
        }
        Ok(msg.sender_id)
    });
    for ((id, _), hello) in channels.iter_mut().zip(hellos) {
        *id = hello?;
    }
    channels.sort_by_key(|(id, _)| *id);
    if channels.windows(2).any(|w| w[0].0 == w[1].0) || channels.iter().any(|(id, _)| *id == cfg.node_id) {
        return Err(protocol("duplicate node id"));
    }
    let hello = FederatedMessage::new(MessageType::Hello, cfg.node_id, rounds.to_le_bytes().to_vec());
    for (_, ch) in channels.iter_mut() {
        ch.send(&hello)?;
    }

    let mut reports = Vec::new();
    for round in 0..rounds {
        let before: u64 = channels.iter().map(|(_, c)| c.bytes_transferred()).sum();
        let (uploads, own) = std::thread::scope(|scope| {
            let collector = scope.spawn(|| on_each(&mut channels, |id, ch| collect_upload(ch, id, round)));
            let own = train_local(&shard.train, cfg, round);
            (collector.join().expect("collector panicked"), own)
        });
        let mut members = Vec::with_capacity(uploads.len() + 1);
        let mut edge_local = Vec::with_capacity(uploads.len());
        for upload in uploads {
            let (model, local) = upload?;
            members.push(model);
            edge_local.push(local);
        }
        let own = own?;
        let central_local = score_model(&own.model, &shard.test)?;
        members.push(own.model);
        let ensemble = EnsembleModel::new(members).expect("central model is always a member");
        let central_global = score_ensemble(&ensemble, &shard.test)?;

        let global = FederatedMessage::new(MessageType::GlobalModel, cfg.node_id, serialize_ensemble(&ensemble));
        for (_, ch) in channels.iter_mut() {
            ch.send(&global)?;
        }
        let globals = on_each(&mut channels, |id, ch| collect_global_metrics(ch, id, round));
        let mut edges = Vec::with_capacity(channels.len());
        for (((id, _), local), global) in channels.iter().zip(edge_local).zip(globals) {
            edges.push(NodeRound { node_id: *id, local, global: global? });
        }
        let after: u64 = channels.iter().map(|(_, c)| c.bytes_transferred()).sum();
        reports.push(RoundReport {
            round,
            edges,
            central: NodeRound { node_id: cfg.node_id, local: central_local, global: central_global },
            central_tuned: own.tuned,
            bytes_transferred: after - before,
        });
    }
    let shutdown = FederatedMessage::new(MessageType::Shutdown, cfg.node_id, Vec::new());
    for (_, ch) in channels.iter_mut() {
        ch.send(&shutdown)?;
    }
    Ok(reports)
}
