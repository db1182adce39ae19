#![allow(dead_code)]

use std::collections::BTreeMap;

use roomnet_core::features::{Frame, Keypoint, MatchConfig};
use roomnet_core::RoomGraph;

pub const DIM: usize = 16;

/// One keypoint per frame along axis `axis`; distinct axes never match.
pub fn axis_frame(frame_id: u32, axis: usize) -> Frame {
    let mut d = vec![0.0f32; DIM];
    d[axis % DIM] = 1.0;
    Frame::new(frame_id, 0.0, vec![Keypoint { id: axis as u32, position: [0.5, 0.5], descriptor: d }]).unwrap()
}

/// Graph over `n ≤ 8` rooms with the given undirected edges. Room `r`'s
/// keyframe lies on axis `r`, so `axis_frame(_, r)` is a goal image for `r`.
pub fn graph(n: usize, edges: &[(usize, usize)]) -> roomnet_core::Result<RoomGraph> {
    let mut adjacency = vec![false; n * n];
    let mut transitions = BTreeMap::new();
    for &(a, b) in edges {
        adjacency[a * n + b] = true;
        adjacency[b * n + a] = true;
        transitions.insert((a, b), vec![axis_frame(0, 8 + a), axis_frame(1, 8 + b)]);
        transitions.insert((b, a), vec![axis_frame(0, 8 + b), axis_frame(1, 8 + a)]);
    }
    let keyframes = (0..n).map(|r| vec![axis_frame(r as u32, r)]).collect();
    RoomGraph::from_parts(n, adjacency, transitions, keyframes, &MatchConfig::default())
}
