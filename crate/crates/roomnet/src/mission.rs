//! Closed-loop navigation: render → feature → queues → classifier → graph
//! mask → policy → robot, one control period at a time.

use std::io::Write;

use anyhow::Result;
use roomnet_core::features::extract_feature;
use roomnet_core::policy::Phase;
use roomnet_core::sim::{render_frame, step_robot, RobotPose};
use roomnet_core::{
    infer, mask_with_graph, Frame, FrameHistory, NavState, PolicyConfig, QueueConfig, RoomGraph, RoomNetModel, World,
};
use serde::{Deserialize, Serialize};

/// One line of the trajectory log. The pose is simulator ground truth and
/// is never shown to the policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub true_room: Option<usize>,
    pub phase: Phase,
    /// Inferred room, `None` for transit.
    pub room: Option<usize>,
    pub p_m: f64,
    pub m_s: f64,
    pub v: Option<f64>,
    pub c_t: f64,
    pub target_index: usize,
    pub linear: f64,
    pub angular: f64,
}

/// Scripted override: once the policy has a plan, place the robot at
/// `pose` (used to force it into a room off its hierarchy).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Teleport {
    pub pose: RobotPose,
}

#[derive(Debug, Clone, Copy)]
pub struct MissionSetup<'a> {
    pub world: &'a World,
    pub model: &'a RoomNetModel,
    pub graph: &'a RoomGraph,
    pub policy: &'a PolicyConfig,
    pub queues: &'a QueueConfig,
    pub dt: f64,
    pub max_steps: usize,
    /// Keys the frame noise of this run.
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionSummary {
    pub success: bool,
    pub steps: usize,
    pub replans: usize,
    /// Plan made at the end of the initial rotation.
    pub planned: Vec<usize>,
    /// Ground-truth rooms in order of visit, consecutive repeats removed.
    pub visited: Vec<usize>,
    pub final_phase: Phase,
    /// Steps from the teleport to the first REPLANNING phase.
    pub steps_to_replan: Option<usize>,
    /// Length of the run of confident off-plan inferences (unbroken by a
    /// confident on-plan one) that ended in the first replan.
    pub confident_off_plan_before_replan: Option<usize>,
    pub error: Option<String>,
}

impl MissionSummary {
    pub fn follows_plan(&self) -> bool {
        self.visited == self.planned
    }
}

/// Runs one mission. Log records are written to `log` when given. Errors
/// from the policy (for example an unrecognized goal) end the mission and
/// are reported in the summary.
pub fn run_mission(
    setup: &MissionSetup<'_>,
    start: RobotPose,
    goal_image: &Frame,
    teleport: Option<Teleport>,
    mut log: Option<&mut dyn Write>,
) -> Result<MissionSummary> {
    let world = setup.world;
    let mut history = FrameHistory::new(*setup.queues)?;
    let mut state = NavState::new(goal_image.clone());
    let mut pose = start;
    let mut visited: Vec<usize> = world.room_of(pose.x, pose.y).into_iter().collect();
    let mut planned = Vec::new();
    let mut teleport = teleport;
    let mut teleported_at = None;
    let mut off_plan_confident = 0usize;
    let mut steps_to_replan = None;
    let mut confident_before = None;
    let mut error = None;
    let mut steps = 0;

    for k in 0..setup.max_steps {
        steps = k + 1;
        let t = k as f64 * setup.dt;
        let frame = render_frame(world, &pose, setup.stream, k as u32, t);
        let feature = extract_feature(&frame, &setup.model.backbone)?;
        history.push(t, feature)?;
        let raw = infer(setup.model, &history.queues()?)?;
        let inference = match state.confident_room {
            Some(prev) => mask_with_graph(&raw, setup.graph, prev)?,
            None => raw,
        };
        let before = state.plan.as_ref().map(|p| p.hierarchy.clone());
        let cmd = match state.update(&frame, &inference, setup.graph, setup.policy) {
            Ok(cmd) => cmd,
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        };
        if planned.is_empty() {
            if let Some(plan) = &state.plan {
                planned = plan.hierarchy.clone();
            }
        }
        if let (Some(at), None) = (teleported_at, steps_to_replan) {
            if let (Some(r), Some(plan)) = (inference.room(), &before) {
                if state.last.c_t >= setup.policy.c_o {
                    if plan.contains(&r) {
                        off_plan_confident = 0;
                    } else {
                        off_plan_confident += 1;
                    }
                }
            }
            if state.phase == Phase::Replanning {
                steps_to_replan = Some(k - at);
                confident_before = Some(off_plan_confident);
            }
        }
        if let Some(log) = log.as_deref_mut() {
            let rec = LogRecord {
                step: k,
                t,
                x: pose.x,
                y: pose.y,
                theta: pose.theta,
                true_room: world.room_of(pose.x, pose.y),
                phase: state.phase,
                room: inference.room(),
                p_m: inference.p_m,
                m_s: state.last.m_s,
                v: state.last.v,
                c_t: state.last.c_t,
                target_index: state.target_index,
                linear: cmd.linear,
                angular: cmd.angular,
            };
            serde_json::to_writer(&mut *log, &rec)?;
            log.write_all(b"\n")?;
        }
        if state.phase == Phase::GoalReached {
            break;
        }
        pose = step_robot(world, &pose, cmd, setup.dt);
        if state.plan.is_some() {
            if let Some(tp) = teleport.take() {
                pose = tp.pose;
                teleported_at = Some(k);
            }
        }
        if let Some(r) = world.room_of(pose.x, pose.y) {
            if visited.last() != Some(&r) {
                visited.push(r);
            }
        }
    }

    Ok(MissionSummary {
        success: state.phase == Phase::GoalReached,
        steps,
        replans: state.replans,
        planned,
        visited,
        final_phase: state.phase,
        steps_to_replan,
        confident_off_plan_before_replan: confident_before,
        error,
    })
}
