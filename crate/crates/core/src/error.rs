use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty frame")]
    EmptyFrame,
    #[error("empty short-term queue")]
    EmptyShortTermQueue,
    #[error("empty long-term queue")]
    EmptyLongTermQueue,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("class with no examples: {0}")]
    ClassWithoutExamples(usize),
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
    #[error("graph not connected")]
    GraphNotConnected,
    #[error("room {0} has no episode coverage")]
    UncoveredRoom(usize),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("unknown room {0}")]
    UnknownRoom(usize),
    #[error("goal not recognized")]
    GoalNotRecognized,
    #[error("goal room {goal} unreachable from room {source_room}")]
    Unreachable { source_room: usize, goal: usize },
    #[error("stale input: {0}")]
    StaleInput(String),
    #[error("invalid world: {0}")]
    InvalidWorld(String),
    #[error("waypoint ({0:.2}, {1:.2}) unreachable")]
    WaypointUnreachable(f64, f64),
}
