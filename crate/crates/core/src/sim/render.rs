use alloc::vec::Vec;

use super::world::{Landmark, World};
use super::RobotPose;
use crate::features::{Frame, Keypoint};
use crate::{math, rng};

/// Camera height used for the vertical image coordinate.
const CAMERA_HEIGHT: f64 = 1.0;

/// Whether `lm` is in view from `pose`: inside the field of view and range,
/// and either in the robot's room or seen through a doorway of that room.
pub fn is_visible(world: &World, pose: &RobotPose, room: usize, lm: &Landmark) -> bool {
    let (dx, dy) = (lm.position.0 - pose.x, lm.position.1 - pose.y);
    let d = math::sqrt(dx * dx + dy * dy);
    if d > pose.range || d < 1e-6 {
        return false;
    }
    let bearing = math::wrap_angle(libm::atan2(dy, dx) - pose.theta);
    if bearing.abs() > 0.5 * pose.fov {
        return false;
    }
    lm.room == room
        || world
            .doors()
            .iter()
            .any(|door| door.connects(room, lm.room) && door.crossed_by((pose.x, pose.y), lm.position))
}

/// The descriptor a landmark shows from distance `d`, before noise.
pub fn view_descriptor(world: &World, lm: &Landmark, d: f64) -> Vec<f64> {
    let model = &world.spec().descriptor;
    let s = model.view_scale * math::ln(d.max(0.05));
    let (cs, sn) = (libm::cos(s), libm::sin(s));
    world
        .style(lm.room)
        .iter()
        .zip(lm.u.iter().zip(&lm.g))
        .map(|(c, (u, g))| model.style_weight * c + model.view_weight * (cs * u + sn * g))
        .collect()
}

/// Synthesizes the camera frame at `pose`. Keypoint ids are landmark ids,
/// ordered ascending; image coordinates lie in `[0, 1]` with `u` growing to
/// the right. Noise is drawn from a stream keyed by `(world seed, stream,
/// index)`, so the frame is a pure function of its arguments.
pub fn render_frame(world: &World, pose: &RobotPose, stream: u64, index: u32, timestamp: f64) -> Frame {
    let dim = world.descriptor_dim();
    let Some(room) = world.room_of(pose.x, pose.y) else {
        return Frame::featureless(index, timestamp, dim);
    };
    let mut noise = rng::rng_from(rng::derive_seed(rng::derive_seed(world.seed(), stream), index as u64));
    let sigma = world.spec().descriptor.noise_sigma;
    let mut keypoints = Vec::new();
    for lm in world.landmarks() {
        if !is_visible(world, pose, room, lm) {
            continue;
        }
        let (dx, dy) = (lm.position.0 - pose.x, lm.position.1 - pose.y);
        let d = math::sqrt(dx * dx + dy * dy);
        let bearing = math::wrap_angle(libm::atan2(dy, dx) - pose.theta);
        let elevation = libm::atan2(lm.height - CAMERA_HEIGHT, d);
        let mut desc = view_descriptor(world, lm, d);
        desc.iter_mut().zip(rng::gaussian_vec(&mut noise, dim, sigma)).for_each(|(x, n)| *x += n);
        let norm = math::norm(&desc).max(1e-12);
        keypoints.push(Keypoint {
            id: lm.id,
            position: [(0.5 - bearing / pose.fov) as f32, (0.5 - elevation / pose.fov) as f32],
            descriptor: desc.iter().map(|x| (x / norm) as f32).collect(),
        });
    }
    if keypoints.is_empty() {
        return Frame::featureless(index, timestamp, dim);
    }
    Frame { frame_id: index, timestamp, keypoints }
}
