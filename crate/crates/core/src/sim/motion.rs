use super::world::World;
use super::RobotPose;
use crate::math;
use crate::policy::Command;

/// Longest straight move checked at once; keeps the robot from tunnelling
/// through a wall corner.
const MAX_SUBSTEP: f64 = 0.02;

/// Whether the robot centre may occupy `(x, y)`: inside a room at least
/// `clearance` from its walls, or inside a doorway passage.
pub fn is_free(world: &World, x: f64, y: f64) -> bool {
    let c = world.spec().clearance;
    if world.rooms().iter().any(|r| r.contains_with_margin(x, y, c)) {
        return true;
    }
    world.doors().iter().any(|d| {
        let (across, along) = if d.wall.vertical { (x, y) } else { (y, x) };
        (across - d.wall.coord).abs() <= c + 1e-9 && along >= d.wall.lo + c && along <= d.wall.hi - c
    })
}

/// Unicycle step `x += v·cosθ·dt, y += v·sinθ·dt, θ += ω·dt`. Motion into
/// a wall slides along it when one axis is free and stops otherwise.
pub fn step_robot(world: &World, pose: &RobotPose, cmd: Command, dt: f64) -> RobotPose {
    let mut next = *pose;
    let dist = cmd.linear * dt;
    if dist != 0.0 {
        let (sin, cos) = (libm::sin(pose.theta), libm::cos(pose.theta));
        let n = libm::ceil(dist.abs() / MAX_SUBSTEP).max(1.0) as usize;
        let (dx, dy) = (dist * cos / n as f64, dist * sin / n as f64);
        for _ in 0..n {
            let (x, y) = (next.x, next.y);
            if is_free(world, x + dx, y + dy) {
                next.x += dx;
                next.y += dy;
            } else if dx != 0.0 && is_free(world, x + dx, y) {
                next.x += dx;
            } else if dy != 0.0 && is_free(world, x, y + dy) {
                next.y += dy;
            } else {
                break;
            }
        }
    }
    if cmd.angular != 0.0 {
        next.theta = math::wrap_angle(pose.theta + cmd.angular * dt);
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::world::DEFAULT_ROOM_SIZE;

    #[test]
    fn closed_form_motion() {
        let w = World::default_world(0);
        let (cx, cy) = w.rooms()[0].center();
        let pose = RobotPose::new(&w, cx, cy, 0.0);
        assert_eq!(step_robot(&w, &pose, Command::STOP, 0.1), pose);
        let moved = step_robot(&w, &pose, Command::new(1.0, 0.0), 0.1);
        assert!((moved.x - cx - 0.1).abs() < 1e-12 && moved.y == cy);
    }

    #[test]
    fn walls_block_and_doors_pass() {
        let w = World::default_world(0);
        let s = DEFAULT_ROOM_SIZE;
        // Heading east along y = 0.5: blocked by the wall shared with room 1.
        let mut pose = RobotPose::new(&w, s - 1.0, 0.5, 0.0);
        for _ in 0..50 {
            pose = step_robot(&w, &pose, Command::new(0.5, 0.0), 0.1);
        }
        assert!(pose.x <= s - w.spec().clearance + 1e-9);
        assert_eq!(w.room_of(pose.x, pose.y), Some(0));

        // Through the doorway centre the room changes exactly once.
        let mut pose = RobotPose::new(&w, s - 1.0, 0.5 * s, 0.0);
        let mut rooms = alloc::vec![w.room_of(pose.x, pose.y).unwrap()];
        for _ in 0..40 {
            pose = step_robot(&w, &pose, Command::new(0.5, 0.0), 0.1);
            let r = w.room_of(pose.x, pose.y).unwrap();
            if *rooms.last().unwrap() != r {
                rooms.push(r);
            }
        }
        assert_eq!(rooms, alloc::vec![0, 1]);
    }
}
