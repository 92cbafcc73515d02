use std::io::Write;

use privfed::experiment::{federate, node_configs};
use privfed::node::{run_central, run_edge, Deployed, Dissemination, NodeConfig, NodeError, Training};
use privfed::transport::{pipe, FrameLog, FramedChannel};
use privfed::{ExperimentConfig, TransportKind, Tuning};
use privfed_core::dataset::{partition, Dataset, FederatedSplit, Label, Sample, Shard};
use privfed_core::federation::{encode_frame, serialize_model, FederatedMessage, MessageType};
use privfed_core::gbdt::{fit, GbdtParams};
use privfed_core::SeededRng;

fn synthetic(rows: usize, seed: u64) -> Dataset {
    let mut rng = SeededRng::new(seed, 900);
    let samples = (0..rows)
        .map(|i| {
            let label = if i % 3 == 0 { Label::Malignant } else { Label::Benign };
            let shift = if label == Label::Malignant { 1.0 } else { 0.0 };
            let features = (0..30).map(|j| rng.uniform() + shift * (j % 4) as f64 * 0.3).collect();
            Sample::new(features, label)
        })
        .collect();
    Dataset::with_default_names(samples, 30).unwrap()
}

fn small_split() -> FederatedSplit {
    partition(&synthetic(240, 1), 5).unwrap()
}

fn fixed(node_id: u16) -> NodeConfig {
    NodeConfig {
        node_id,
        training: Training::Fixed(GbdtParams { n_trees: 10, max_depth: 3, ..Default::default() }),
        feature_subset: None,
        dissemination: Dissemination::EvaluateOnly,
    }
}

fn small_cfg() -> ExperimentConfig {
    ExperimentConfig { params: GbdtParams { n_trees: 10, max_depth: 3, ..Default::default() }, ..Default::default() }
}

#[test]
fn full_round_over_pipes() {
    let split = small_split();
    let cfg = ExperimentConfig { rounds: 2, ..small_cfg() };
    let nodes = node_configs(&cfg, Tuning::Normal, None, 0);
    let run = federate(&split, &nodes, &cfg, None).unwrap();
    assert_eq!(run.rounds.len(), 2);
    for (i, report) in run.rounds.iter().enumerate() {
        assert_eq!(report.round, i as u32);
        assert_eq!(report.edges.iter().map(|e| e.node_id).collect::<Vec<_>>(), vec![1, 2]);
        for (e, shard) in report.edges.iter().zip(&split.shards) {
            assert_eq!(e.local.total() as usize, shard.test.len());
            assert_eq!(e.global.total() as usize, shard.test.len());
        }
        assert!(report.ensemble().accuracy() > 0.8);
        assert!(report.bytes_transferred > 0);
    }
    for (edge, report_edge) in run.edges.iter().zip(&run.rounds[1].edges) {
        assert_eq!(edge.rounds[1].local, report_edge.local);
        assert!(matches!(edge.deployed, Some(Deployed::Local(_))));
    }
}

#[test]
fn tcp_matches_in_process() {
    let split = small_split();
    let cfg = small_cfg();
    let nodes = node_configs(&cfg, Tuning::Normal, None, 0);
    let local = federate(&split, &nodes, &cfg, None).unwrap();
    let tcp_cfg = ExperimentConfig { transport: TransportKind::Tcp { host: "127.0.0.1".into(), port: 0 }, ..cfg };
    let tcp = federate(&split, &nodes, &tcp_cfg, None).unwrap();
    assert_eq!(local.rounds, tcp.rounds);
}

#[test]
fn adopt_deploys_the_ensemble() {
    let split = small_split();
    let cfg = ExperimentConfig { dissemination: Dissemination::Adopt, ..small_cfg() };
    let nodes = node_configs(&cfg, Tuning::Normal, None, 0);
    let run = federate(&split, &nodes, &cfg, None).unwrap();
    for edge in &run.edges {
        let Some(Deployed::Global(ensemble)) = &edge.deployed else { panic!("edge kept its local model") };
        assert_eq!(ensemble.members().len(), 3);
    }
}

#[test]
fn test_equal_to_train_gives_training_accuracy() {
    let data = synthetic(90, 2);
    let shard = Shard { train: data.clone(), test: data.clone() };
    let split = FederatedSplit { shards: [shard.clone(), shard.clone(), shard], seed: 0 };
    let cfg = small_cfg();
    let nodes = node_configs(&cfg, Tuning::Normal, None, 0);
    let run = federate(&split, &nodes, &cfg, None).unwrap();
    let model = fit(&data, &cfg.params).unwrap();
    let predictions = model.predict_dataset(&data).unwrap();
    let correct = predictions.iter().zip(data.samples()).filter(|(p, s)| **p == s.label).count();
    assert_eq!(run.rounds[0].edges[0].local.correct() as usize, correct);
}

#[test]
fn severed_upload_surfaces_channel_closed() {
    let split = small_split();
    let (central_end, mut edge_end) = pipe();
    let fake_edge = std::thread::spawn(move || {
        let mut ch = FramedChannel::new(&mut edge_end);
        ch.send(&FederatedMessage::new(MessageType::Hello, 1, Vec::new())).unwrap();
        ch.recv().unwrap();
        let model = fit(&split_train(), &GbdtParams { n_trees: 2, ..Default::default() }).unwrap();
        let frame = encode_frame(&FederatedMessage::new(MessageType::ModelUpload, 1, serialize_model(&model))).unwrap();
        edge_end.write_all(&frame[..frame.len() / 2]).unwrap();
        drop(edge_end);
    });
    let result = run_central(&split.shards[2], &fixed(0), vec![FramedChannel::new(central_end)], 1);
    fake_edge.join().unwrap();
    assert!(matches!(result, Err(NodeError::ChannelClosed)), "{result:?}");
}

fn split_train() -> Dataset {
    small_split().shards[0].train.clone()
}

#[test]
fn edge_sees_central_vanish() {
    let split = small_split();
    let (mut central_end, edge_end) = pipe();
    let fake_central = std::thread::spawn(move || {
        let mut ch = FramedChannel::new(&mut central_end);
        ch.recv().unwrap();
        ch.send(&FederatedMessage::new(MessageType::Hello, 0, 1u32.to_le_bytes().to_vec())).unwrap();
    });
    let result = run_edge(&split.shards[0], &fixed(1), &mut FramedChannel::new(edge_end));
    fake_central.join().unwrap();
    assert!(matches!(result, Err(NodeError::ChannelClosed)), "{result:?}");
}

#[test]
fn duplicate_upload_rejected() {
    let split = small_split();
    let (central_end, edge_end) = pipe();
    let model = fit(&split.shards[0].train, &GbdtParams { n_trees: 2, ..Default::default() }).unwrap();
    let fake_edge = std::thread::spawn(move || {
        let mut ch = FramedChannel::new(edge_end);
        ch.send(&FederatedMessage::new(MessageType::Hello, 1, Vec::new())).unwrap();
        ch.recv().unwrap();
        let upload = FederatedMessage::new(MessageType::ModelUpload, 1, serialize_model(&model));
        ch.send(&upload).unwrap();
        let _ = ch.send(&upload);
        ch
    });
    let result = run_central(&split.shards[2], &fixed(0), vec![FramedChannel::new(central_end)], 1);
    drop(fake_edge.join().unwrap());
    assert!(matches!(result, Err(NodeError::DuplicateUpload(1))), "{result:?}");
}

#[test]
fn out_of_order_message_is_a_protocol_error() {
    let split = small_split();
    let (central_end, edge_end) = pipe();
    let fake_edge = std::thread::spawn(move || {
        let mut ch = FramedChannel::new(edge_end);
        ch.send(&FederatedMessage::new(MessageType::Shutdown, 1, Vec::new())).unwrap();
        ch
    });
    let result = run_central(&split.shards[2], &fixed(0), vec![FramedChannel::new(central_end)], 1);
    drop(fake_edge.join().unwrap());
    assert!(matches!(result, Err(NodeError::Protocol(_))), "{result:?}");
}

/// Every sample's features as contiguous little- and big-endian f64 bytes.
pub fn row_encodings(split: &FederatedSplit) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for shard in &split.shards {
        for s in shard.train.samples().iter().chain(shard.test.samples()) {
            out.push(s.features.iter().flat_map(|v| v.to_le_bytes()).collect());
            out.push(s.features.iter().flat_map(|v| v.to_be_bytes()).collect());
        }
    }
    out
}

#[test]
fn no_sample_bytes_cross_the_wire() {
    let split = small_split();
    let cfg = small_cfg();
    let nodes = node_configs(&cfg, Tuning::Normal, None, 0);
    let log = FrameLog::default();
    federate(&split, &nodes, &cfg, Some(&log)).unwrap();
    let frames = log.lock().unwrap();
    assert!(!frames.is_empty());
    let needles = row_encodings(&split);
    for frame in frames.iter() {
        for needle in &needles {
            assert!(!frame.windows(needle.len()).any(|w| w == needle.as_slice()));
        }
    }
}
