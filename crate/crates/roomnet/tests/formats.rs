use proptest::prelude::*;
use roomnet::format::{
    read_episode, read_frame, read_graph, read_model, to_bytes, write_episode, write_frame, write_graph, write_model,
    FormatError,
};
use roomnet_core::features::{Frame, Keypoint};
use roomnet_core::graph::GraphConfig;
use roomnet_core::sim::{default_tour, record_episode, RecordConfig};
use roomnet_core::{build_graph, ModelDims, RobotPose, RoomNetModel, World};

fn world_and_episode() -> (World, roomnet_core::Episode) {
    let world = World::default_world(8);
    let ep = record_episode(&world, &default_tour(&world, 1, 3).unwrap(), &RecordConfig::default(), 4).unwrap();
    (world, ep)
}

#[test]
fn episode_round_trip_is_exact() {
    let (world, ep) = world_and_episode();
    let bytes = to_bytes(&ep, write_episode).unwrap();
    let camera = RobotPose::new(&world, 0.0, 0.0, 0.0);
    let back = read_episode(&mut bytes.as_slice(), &camera).unwrap();
    assert_eq!(back, ep);
    assert_eq!(to_bytes(&back, write_episode).unwrap(), bytes);
}

#[test]
fn graph_round_trip_is_exact() {
    let (_, ep) = world_and_episode();
    let cfg = GraphConfig::default();
    let graph = build_graph(std::slice::from_ref(&ep), 4, &cfg).unwrap();
    let bytes = to_bytes(&graph, write_graph).unwrap();
    let back = read_graph(&mut bytes.as_slice(), &cfg).unwrap();
    assert_eq!(back, graph);
    assert_eq!(to_bytes(&back, write_graph).unwrap(), bytes);
}

#[test]
fn model_round_trip_is_bit_exact() {
    let dims = ModelDims { descriptor: 16, feature: 8, hidden: 4, attention: 3, classes: 5 };
    let model = RoomNetModel::new(dims, 10, 11).unwrap();
    let bytes = to_bytes(&model, write_model).unwrap();
    let back = read_model(&mut bytes.as_slice()).unwrap();
    assert_eq!(back, model);
    let bits = |m: &RoomNetModel| m.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&model));
}

#[test]
fn damaged_files_are_rejected() {
    let dims = ModelDims { descriptor: 4, feature: 3, hidden: 2, attention: 2, classes: 3 };
    let bytes = to_bytes(&RoomNetModel::new(dims, 1, 2).unwrap(), write_model).unwrap();

    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(read_model(&mut magic.as_slice()), Err(FormatError::BadMagic { .. })));

    let mut version = bytes.clone();
    version[4] = 9;
    assert!(matches!(read_model(&mut version.as_slice()), Err(FormatError::Version(9))));

    let mut long = bytes.clone();
    long.push(0);
    assert!(matches!(read_model(&mut long.as_slice()), Err(FormatError::Corrupt(_))));

    assert!(read_model(&mut &bytes[..bytes.len() - 1]).is_err());
}

fn arb_frame() -> impl Strategy<Value = Frame> {
    let dim = 6;
    let kp = (0u32..1000, any::<[f32; 2]>(), prop::collection::vec(-1.0f32..1.0, dim))
        .prop_map(|(id, position, descriptor)| Keypoint { id, position, descriptor });
    (any::<u32>(), -1e6f64..1e6, prop::collection::vec(kp, 1..12))
        .prop_filter_map("valid frame", |(id, t, kps)| Frame::new(id, t, kps).ok())
}

proptest! {
    #[test]
    fn frames_round_trip(frame in arb_frame()) {
        let bytes = to_bytes(&frame, write_frame).unwrap();
        let back = read_frame(&mut bytes.as_slice(), 6).unwrap();
        prop_assert_eq!(&back, &frame);
        prop_assert_eq!(to_bytes(&back, write_frame).unwrap(), bytes);
    }

    #[test]
    fn truncated_frames_fail(frame in arb_frame(), cut in any::<prop::sample::Index>()) {
        let bytes = to_bytes(&frame, write_frame).unwrap();
        let n = cut.index(bytes.len());
        prop_assert!(read_frame(&mut &bytes[..n], 6).is_err());
    }
}
