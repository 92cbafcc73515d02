use privfed_core::dataset::{Dataset, Label, Sample};
use privfed_core::federation::{
    decode_frame, deserialize_ensemble, deserialize_model, encode_frame, serialize_ensemble, serialize_model,
    CodecError, EnsembleModel, FederatedMessage, FrameError, MessageType, MAX_PAYLOAD,
};
use privfed_core::gbdt::{fit, fit_on_features, GbdtModel, GbdtParams, Node, RegressionTree};
use privfed_core::SeededRng;
use proptest::prelude::*;

fn trained(seed: u64) -> GbdtModel {
    let mut rng = SeededRng::new(seed, 500);
    let samples = (0..80)
        .map(|_| {
            let x: Vec<f64> = (0..4).map(|_| rng.uniform()).collect();
            let label = if x[0] + x[3] > 1.0 { Label::Malignant } else { Label::Benign };
            Sample::new(x, label)
        })
        .collect();
    let data = Dataset::with_default_names(samples, 4).unwrap();
    let params = GbdtParams { n_trees: 12, max_depth: 3, ..Default::default() };
    if seed.is_multiple_of(2) {
        fit(&data, &params).unwrap()
    } else {
        fit_on_features(&data, &params, &[3, 0, 1]).unwrap()
    }
}

#[test]
fn model_roundtrip_predicts_identically() {
    for seed in 0..4 {
        let model = trained(seed);
        let bytes = serialize_model(&model);
        let back = deserialize_model(&bytes).unwrap();
        assert_eq!(serialize_model(&back), bytes);
        let mut rng = SeededRng::new(seed, 501);
        for _ in 0..1_000 {
            let x: Vec<f64> = (0..4).map(|_| rng.uniform() * 3.0 - 1.0).collect();
            assert_eq!(model.predict_proba(&x).unwrap(), back.predict_proba(&x).unwrap());
        }
    }
}

#[test]
fn layout_details() {
    let constant = GbdtModel { base_score: 0.25, learning_rate: 0.1, trees: Vec::new(), feature_subset: None };
    let bytes = serialize_model(&constant);
    assert_eq!(bytes.len(), 28);
    assert_eq!(&bytes[..4], b"PFD1");
    assert_eq!(&bytes[4..6], &1u16.to_le_bytes());
    assert_eq!(&bytes[6..14], &0.25f64.to_le_bytes());

    let leaf = GbdtModel { trees: vec![RegressionTree { nodes: vec![Node::Leaf { value: 1.0 }] }], ..constant };
    let bytes = serialize_model(&leaf);
    assert_eq!(&bytes[bytes.len() - 9..], &[&[1u8][..], &1.0f64.to_le_bytes()].concat()[..]);

    let mut bad = bytes.clone();
    bad[..4].copy_from_slice(b"XXXX");
    assert_eq!(deserialize_model(&bad), Err(CodecError::BadMagic));
    assert_eq!(deserialize_model(&bytes[..bytes.len() - 1]), Err(CodecError::Truncated));
}

#[test]
fn cyclic_and_dangling_trees_rejected() {
    let cyclic = GbdtModel {
        base_score: 0.0,
        learning_rate: 0.1,
        trees: vec![RegressionTree {
            nodes: vec![
                Node::Internal { feature: 0, threshold: 0.5, left: 1, right: 2 },
                Node::Internal { feature: 0, threshold: 0.2, left: 0, right: 2 },
                Node::Leaf { value: 1.0 },
            ],
        }],
        feature_subset: None,
    };
    assert!(matches!(deserialize_model(&serialize_model(&cyclic)), Err(CodecError::CorruptTree(_))));
    let dangling = GbdtModel {
        trees: vec![RegressionTree {
            nodes: vec![Node::Internal { feature: 0, threshold: 0.5, left: 1, right: 9 }, Node::Leaf { value: 0.0 }],
        }],
        ..cyclic
    };
    assert!(matches!(deserialize_model(&serialize_model(&dangling)), Err(CodecError::CorruptTree(_))));
}

#[test]
fn ensemble_roundtrip_and_vote() {
    let members: Vec<GbdtModel> = (0..3).map(trained).collect();
    let ensemble = EnsembleModel::new(members.clone()).unwrap();
    let bytes = serialize_ensemble(&ensemble);
    assert_eq!(&bytes[..2], &3u16.to_le_bytes());
    let back = deserialize_ensemble(&bytes).unwrap();
    assert_eq!(serialize_ensemble(&back), bytes);
    let x = [0.2, 0.9, 0.4, 0.7];
    let mean = members.iter().map(|m| m.predict_proba(&x).unwrap()).sum::<f64>() / 3.0;
    assert!((ensemble.predict_proba(&x).unwrap() - mean).abs() < 1e-15);
    assert!(EnsembleModel::new(Vec::new()).is_none());
}

#[test]
fn frame_examples() {
    let hello = encode_frame(&FederatedMessage::new(MessageType::Hello, 1, Vec::new())).unwrap();
    assert_eq!(hello.len(), 7);
    let metrics = encode_frame(&FederatedMessage::new(MessageType::Metrics, 7, vec![1, 2, 3])).unwrap();
    assert_eq!(&metrics[..4], &[0, 0, 0, 6]);
    assert_eq!(&metrics[4..7], &[4, 0, 7]);
    let mut unknown = hello.clone();
    unknown[4] = 9;
    assert!(matches!(decode_frame(&unknown), Err(FrameError::UnknownType(9))));
    assert!(matches!(decode_frame(&hello[..5]), Err(FrameError::UnexpectedEof)));
    let mut huge = hello;
    huge[..4].copy_from_slice(&((MAX_PAYLOAD + 4) as u32).to_be_bytes());
    assert!(matches!(decode_frame(&huge), Err(FrameError::Oversize(_))));
}

fn message_strategy() -> impl Strategy<Value = FederatedMessage> {
    (1u8..=5, any::<u16>(), proptest::collection::vec(any::<u8>(), 0..512))
        .prop_map(|(t, s, p)| FederatedMessage::new(MessageType::from_byte(t).unwrap(), s, p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn concatenated_frames_parse_back(messages in proptest::collection::vec(message_strategy(), 1..8)) {
        let stream: Vec<u8> = messages.iter().flat_map(|m| encode_frame(m).unwrap()).collect();
        let mut offset = 0;
        for expected in &messages {
            let (msg, used) = decode_frame(&stream[offset..]).unwrap();
            prop_assert_eq!(&msg, expected);
            offset += used;
        }
        prop_assert_eq!(offset, stream.len());
    }

    #[test]
    fn corrupted_models_never_misparse(seed in 0u64..4, flips in proptest::collection::vec((any::<usize>(), 1u8..=255), 1..4)) {
        let mut bytes = serialize_model(&trained(seed));
        for (pos, mask) in flips {
            let i = pos % bytes.len();
            bytes[i] ^= mask;
        }
        if let Ok(model) = deserialize_model(&bytes) {
            prop_assert_eq!(serialize_model(&model), bytes);
        }
    }
}
