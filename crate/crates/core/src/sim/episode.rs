use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::motion::step_robot;
use super::render::render_frame;
use super::world::World;
use super::RobotPose;
use crate::error::{Error, Result};
use crate::features::Frame;
use crate::policy::Command;
use crate::{math, rng};

/// Ground-truth annotation of a recorded frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Room(usize),
    Transit,
}

impl Label {
    pub const TRANSIT_BYTE: u8 = 0xFF;

    pub fn to_u8(self) -> u8 {
        match self {
            Label::Room(r) => r as u8,
            Label::Transit => Self::TRANSIT_BYTE,
        }
    }

    pub fn from_u8(b: u8) -> Self {
        if b == Self::TRANSIT_BYTE {
            Label::Transit
        } else {
            Label::Room(b as usize)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeFrame {
    pub frame: Frame,
    pub label: Label,
    pub pose: RobotPose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub frames: Vec<EpisodeFrame>,
    pub seed: u64,
    pub world_hash: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    /// Turn toward the point, then drive to it.
    GoTo { x: f64, y: f64 },
    /// Rotate in place by a signed angle.
    Rotate { angle: f64 },
    Pause { secs: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    pub start: (f64, f64, f64),
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct RecordConfig {
    /// Frames per second.
    pub rate: f64,
    pub speed: f64,
    pub rot_speed: f64,
    /// Frames within this many seconds of a room change are labelled transit.
    pub transition_window: f64,
}

impl Default for RecordConfig {
    fn default() -> Self {
        RecordConfig { rate: 10.0, speed: 0.5, rot_speed: 0.6, transition_window: 1.0 }
    }
}

/// Steps without progress before a waypoint is declared unreachable.
const STALL_STEPS: usize = 30;
const MAX_STEPS_PER_ACTION: usize = 20_000;

/// Drives `script` through the world and records one labelled frame per
/// tick, starting with the initial pose at `t = 0`. `seed` keys the frame
/// noise.
pub fn record_episode(world: &World, script: &Script, cfg: &RecordConfig, seed: u64) -> Result<Episode> {
    if !(cfg.rate > 0.0 && cfg.speed > 0.0 && cfg.rot_speed > 0.0 && cfg.transition_window >= 0.0) {
        return Err(Error::InvalidConfig("recording rate and speeds must be positive".into()));
    }
    let dt = 1.0 / cfg.rate;
    let (x, y, theta) = script.start;
    let mut pose = RobotPose::new(world, x, y, theta);
    if world.room_of(x, y).is_none() || !super::is_free(world, x, y) {
        return Err(Error::WaypointUnreachable(x, y));
    }
    let mut poses = alloc::vec![pose];
    let push = |pose: RobotPose, poses: &mut Vec<RobotPose>| {
        poses.push(pose);
        if poses.len() > u32::MAX as usize {
            return Err(Error::InvalidConfig("episode too long".into()));
        }
        Ok(())
    };

    for action in &script.actions {
        match *action {
            Action::GoTo { x, y } => {
                let mut best = f64::INFINITY;
                let mut stalled = 0;
                for step in 0.. {
                    let (dx, dy) = (x - pose.x, y - pose.y);
                    let dist = math::sqrt(dx * dx + dy * dy);
                    if dist < 0.03 {
                        break;
                    }
                    if step >= MAX_STEPS_PER_ACTION {
                        return Err(Error::WaypointUnreachable(x, y));
                    }
                    let err = math::wrap_angle(libm::atan2(dy, dx) - pose.theta);
                    let angular = (2.0 * err).clamp(-cfg.rot_speed, cfg.rot_speed);
                    let linear = if err.abs() > 0.2 { 0.0 } else { cfg.speed.min(dist / dt) };
                    if dist < best - 1e-4 {
                        best = dist;
                        stalled = 0;
                    } else if linear > 0.0 {
                        stalled += 1;
                        if stalled > STALL_STEPS {
                            return Err(Error::WaypointUnreachable(x, y));
                        }
                    }
                    pose = step_robot(world, &pose, Command::new(linear, angular), dt);
                    push(pose, &mut poses)?;
                }
            }
            Action::Rotate { angle } => {
                let n = libm::ceil(angle.abs() / (cfg.rot_speed * dt)) as usize;
                for _ in 0..n {
                    pose = step_robot(world, &pose, Command::new(0.0, angle / (n as f64 * dt)), dt);
                    push(pose, &mut poses)?;
                }
            }
            Action::Pause { secs } => {
                for _ in 0..libm::round(secs * cfg.rate) as usize {
                    push(pose, &mut poses)?;
                }
            }
        }
    }

    let rooms: Vec<usize> = poses
        .iter()
        .map(|p| world.room_of(p.x, p.y).ok_or(Error::WaypointUnreachable(p.x, p.y)))
        .collect::<Result<_>>()?;
    let crossings: Vec<f64> = (1..rooms.len())
        .filter(|&k| rooms[k] != rooms[k - 1])
        .map(|k| (k as f64 - 0.5) * dt)
        .collect();
    let frames = poses
        .iter()
        .zip(&rooms)
        .enumerate()
        .map(|(k, (pose, &room))| {
            let t = k as f64 * dt;
            let label = if crossings.iter().any(|c| (t - c).abs() <= cfg.transition_window) {
                Label::Transit
            } else {
                Label::Room(room)
            };
            EpisodeFrame { frame: render_frame(world, pose, seed, k as u32, t), label, pose: pose.rounded() }
        })
        .collect();
    Ok(Episode { frames, seed, world_hash: world.hash() })
}

/// Room sequence crossing every doorway in both directions. Among several
/// unused doorways out of the current room one is picked at random.
fn room_route<R: Rng + ?Sized>(world: &World, start: usize, r: &mut R) -> Vec<usize> {
    let doors = world.doors();
    let mut unused: Vec<(usize, usize)> = doors.iter().flat_map(|d| [(d.rooms[0], d.rooms[1]), (d.rooms[1], d.rooms[0])]).collect();
    let mut route = alloc::vec![start];
    let mut here = start;
    while !unused.is_empty() {
        let out: Vec<usize> = (0..unused.len()).filter(|&i| unused[i].0 == here).collect();
        if !out.is_empty() {
            let (_, next) = unused.remove(out[r.random_range(0..out.len())]);
            route.push(next);
            here = next;
            continue;
        }
        // Walk to the nearest room that still has an unused exit.
        let m = world.room_count();
        let mut prev = alloc::vec![usize::MAX; m];
        prev[here] = here;
        let mut queue = VecDeque::from([here]);
        let mut target = None;
        while let Some(a) = queue.pop_front() {
            if unused.iter().any(|&(from, _)| from == a) {
                target = Some(a);
                break;
            }
            for b in (0..m).filter(|&b| world.is_adjacent(a, b)) {
                if prev[b] == usize::MAX {
                    prev[b] = a;
                    queue.push_back(b);
                }
            }
        }
        // Doors outside this component cannot be reached from here.
        let Some(target) = target else { break };
        let mut path = alloc::vec![target];
        while *path.last().unwrap() != here {
            path.push(prev[*path.last().unwrap()]);
        }
        for &next in path.iter().rev().skip(1) {
            unused.retain(|&e| e != (here, next));
            route.push(next);
            here = next;
        }
    }
    route
}

/// A mapping tour starting in `start_room`: rotate in every room visited,
/// and pass every doorway in both directions through a point just before
/// and just after the opening. `seed` jitters waypoints and rotations.
pub fn default_tour(world: &World, start_room: usize, seed: u64) -> Result<Script> {
    if start_room >= world.room_count() {
        return Err(Error::UnknownRoom(start_room));
    }
    let mut r = rng::rng_from(rng::derive_seed(seed, 0x746f_7572));
    let route = room_route(world, start_room, &mut r);
    let clearance = world.spec().clearance;
    let room_point = |room: usize, r: &mut ChaCha8Rng| {
        let rect = world.rooms()[room];
        let (cx, cy) = rect.center();
        let jx = 0.15 * (rect.x1 - rect.x0);
        let jy = 0.15 * (rect.y1 - rect.y0);
        (cx + r.random_range(-jx..=jx), cy + r.random_range(-jy..=jy))
    };
    let rotation = |r: &mut ChaCha8Rng| {
        let angle = r.random_range(PI..=TAU);
        Action::Rotate { angle: if r.random_bool(0.5) { angle } else { -angle } }
    };

    let (x, y) = room_point(start_room, &mut r);
    let start = (x, y, r.random_range(-PI..PI));
    let mut actions = alloc::vec![rotation(&mut r)];
    for w in route.windows(2) {
        let (a, b) = (w[0], w[1]);
        let door = world.doors().iter().find(|d| d.connects(a, b)).expect("route follows doorways");
        let half = 0.5 * door.width() - clearance - 0.05;
        let along = 0.5 * (door.wall.lo + door.wall.hi) + r.random_range(-half..=half) * 0.5;
        let into_a = if world.rooms()[a].center().0 < door.wall.coord && door.wall.vertical
            || !door.wall.vertical && world.rooms()[a].center().1 < door.wall.coord
        {
            -1.0
        } else {
            1.0
        };
        let depth = 0.7;
        let (px, py) = door.wall.point(along);
        let offset = |sign: f64| if door.wall.vertical { (px + sign * depth, py) } else { (px, py + sign * depth) };
        let before = offset(into_a);
        let after = offset(-into_a);
        actions.push(Action::GoTo { x: before.0, y: before.1 });
        actions.push(Action::GoTo { x: after.0, y: after.1 });
        let (x, y) = room_point(b, &mut r);
        actions.push(Action::GoTo { x, y });
        actions.push(rotation(&mut r));
    }
    Ok(Script { start, actions })
}

/// The canonical goal view of a room: its centre, facing the first wall
/// (east, north, west, south) without a doorway.
pub fn goal_pose(world: &World, room: usize) -> Result<RobotPose> {
    let rect = *world.rooms().get(room).ok_or(Error::UnknownRoom(room))?;
    let (cx, cy) = rect.center();
    let walls = [(true, rect.x1, 0.0), (false, rect.y1, 0.5 * PI), (true, rect.x0, PI), (false, rect.y0, -0.5 * PI)];
    let heading = walls
        .iter()
        .find(|(vertical, coord, _)| {
            !world
                .doors()
                .iter()
                .any(|d| d.rooms.contains(&room) && d.wall.vertical == *vertical && (d.wall.coord - coord).abs() < 1e-9)
        })
        .map_or(0.0, |w| w.2);
    Ok(RobotPose::new(world, cx, cy, heading))
}

/// The frame seen from [`goal_pose`].
pub fn goal_image(world: &World, room: usize, stream: u64) -> Result<Frame> {
    Ok(render_frame(world, &goal_pose(world, room)?, stream, 0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    #[test]
    fn label_bytes_round_trip() {
        for l in [Label::Room(0), Label::Room(3), Label::Transit] {
            assert_eq!(Label::from_u8(l.to_u8()), l);
        }
    }

    #[test]
    fn route_crosses_every_doorway_both_ways() {
        let w = World::default_world(0);
        for seed in 0..10 {
            let route = room_route(&w, 0, &mut rng::rng_from(seed));
            let used: BTreeSet<(usize, usize)> = route.windows(2).map(|p| (p[0], p[1])).collect();
            assert_eq!(used.len(), 8, "{route:?}");
            assert!(route.windows(2).all(|p| w.is_adjacent(p[0], p[1])));
        }
    }

    #[test]
    fn confined_script_is_single_room() {
        let w = World::default_world(0);
        let (cx, cy) = w.rooms()[2].center();
        let script = Script {
            start: (cx, cy, 0.0),
            actions: alloc::vec![Action::Rotate { angle: TAU }, Action::GoTo { x: cx + 0.5, y: cy + 0.5 }, Action::Pause { secs: 0.5 }],
        };
        let ep = record_episode(&w, &script, &RecordConfig::default(), 1).unwrap();
        assert!(ep.frames.iter().all(|f| f.label == Label::Room(2)));
        assert!(ep.frames.windows(2).all(|p| p[1].frame.timestamp > p[0].frame.timestamp));
    }

    #[test]
    fn goal_pose_faces_a_plain_wall() {
        let w = World::default_world(0);
        let p = goal_pose(&w, 3).unwrap();
        assert!((p.theta - 0.5 * PI).abs() < 1e-12);
        assert!(goal_pose(&w, 9).is_err());
    }
}
