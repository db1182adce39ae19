//! Deterministic multi-room world standing in for a camera and a mobile
//! base.

mod episode;
mod motion;
mod render;
mod world;

pub use episode::{
    default_tour, goal_image, goal_pose, record_episode, Action, Episode, EpisodeFrame, Label, RecordConfig, Script,
};
pub use motion::{is_free, step_robot};
pub use render::{is_visible, render_frame, view_descriptor};
pub use world::{
    perturb, DescriptorModel, Door, DoorwaySpec, Landmark, RoomRect, Wall, World, WorldSpec, DEFAULT_ROOM_SIZE,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub fov: f64,
    pub range: f64,
}

impl RobotPose {
    /// Pose with the world's camera field of view and range.
    pub fn new(world: &World, x: f64, y: f64, theta: f64) -> Self {
        RobotPose { x, y, theta, fov: world.spec().fov, range: world.spec().range }
    }

    /// Same pose with position and heading rounded to `f32`.
    pub fn rounded(&self) -> Self {
        RobotPose { x: self.x as f32 as f64, y: self.y as f32 as f64, theta: self.theta as f32 as f64, ..*self }
    }
}
