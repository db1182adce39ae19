//! Localization-free topological navigation.
//!
//! A robot localizes itself only up to a *room ID*: a recurrent classifier
//! ([`roomnet`]) reads short- and long-term queues of frame features, a sparse
//! room graph ([`graph`]) stores the doorway views between rooms and yields a
//! room-to-room hierarchy, and a local policy ([`policy`]) servoes toward
//! those doorway views using descriptor matching ([`features`]). The
//! [`sim`] module provides a deterministic multi-room world that stands in
//! for cameras and a mobile base.
//!
//! The crate is `no_std` and needs only `alloc`. Enable the `std` feature to
//! get `std::error::Error` plumbing through `core::error::Error`.

#![no_std]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod error;
pub mod features;
pub mod graph;
pub mod math;
pub mod policy;
pub mod rng;
pub mod roomnet;
pub mod sim;

pub use error::{Error, Result};
pub use features::{
    extract_feature, match_frames, BackboneParams, Frame, FrameFeature, Keypoint, MatchConfig,
    MatchResult,
};
pub use graph::{build_graph, plan, replan, GraphConfig, Plan, PlanConfig, RoomGraph};
pub use policy::{
    arrival_check, confidence, score_gradient, Command, NavState, Phase, PolicyConfig,
};
pub use roomnet::{
    infer, mask_with_graph, train, FrameHistory, Inference, MemoryQueues, ModelDims, QueueConfig,
    RoomNetModel, TrainConfig, TrainOutcome,
};
pub use sim::{Episode, EpisodeFrame, Label, RobotPose, World, WorldSpec};
