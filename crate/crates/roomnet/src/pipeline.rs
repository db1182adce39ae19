//! The four stages as library functions: record and map, train, navigate,
//! evaluate. The CLI is a thin layer over these.

use anyhow::{bail, Context, Result};
use rand::Rng;
use rayon::prelude::*;
use roomnet_core::features::extract_feature;
use roomnet_core::graph::{resolve_goal_room, RoomGraph};
use roomnet_core::roomnet::{FrameHistory, ModelDims};
use roomnet_core::rng::{derive_seed, rng_from};
use roomnet_core::sim::{default_tour, goal_image, is_free, perturb, record_episode, Episode, Label, RobotPose};
use roomnet_core::{build_graph, infer, Frame, RoomNetModel, TrainOutcome, World};
use serde::{Deserialize, Serialize};

use crate::config::{stream, RunConfig};
use crate::mission::{run_mission, MissionSetup, MissionSummary, Teleport};

/// Records episode `index` of the mapping/training set.
pub fn record_one(cfg: &RunConfig, world: &World, index: usize) -> Result<Episode> {
    let start_room = index % world.room_count();
    let tour = default_tour(world, start_room, derive_seed(cfg.derive(stream::TOUR), index as u64))?;
    let seed = derive_seed(cfg.derive(stream::EPISODE), index as u64);
    Ok(record_episode(world, &tour, &cfg.record, seed)?)
}

pub fn record_episodes(cfg: &RunConfig, world: &World) -> Result<Vec<Episode>> {
    (0..cfg.episodes).into_par_iter().map(|i| record_one(cfg, world, i)).collect()
}

/// An episode outside the training set.
pub fn held_out_episode(cfg: &RunConfig, world: &World) -> Result<Episode> {
    record_one(cfg, world, cfg.episodes + 1001)
}

pub fn build_map(cfg: &RunConfig, world: &World, episodes: &[Episode]) -> Result<RoomGraph> {
    let n = cfg.mapping_episodes.min(episodes.len());
    Ok(build_graph(&episodes[..n], world.room_count(), &cfg.graph)?)
}

pub fn initial_model(cfg: &RunConfig, room_count: usize, descriptor_dim: usize) -> Result<RoomNetModel> {
    let dims = ModelDims {
        descriptor: descriptor_dim,
        feature: cfg.train.feature,
        hidden: cfg.train.hidden,
        attention: cfg.train.attention,
        classes: room_count + 1,
    };
    Ok(RoomNetModel::new(dims, cfg.derive(stream::BACKBONE), cfg.derive(stream::MODEL))?)
}

pub fn train_model(cfg: &RunConfig, room_count: usize, episodes: &[Episode]) -> Result<TrainOutcome> {
    let Some(dim) = episodes.iter().flat_map(|e| &e.frames).find_map(|f| f.frame.descriptor_dim()) else {
        bail!("no episodes to train on");
    };
    let model = initial_model(cfg, room_count, dim)?;
    Ok(roomnet_core::train(&model, episodes, &cfg.train_config())?)
}

/// Frame-level accuracy (rooms and transit) of the unmasked classifier.
pub fn accuracy(cfg: &RunConfig, model: &RoomNetModel, episode: &Episode) -> Result<f64> {
    let m = model.dims.room_count();
    let mut history = FrameHistory::new(cfg.queues)?;
    let mut correct = 0usize;
    for ef in &episode.frames {
        history.push(ef.frame.timestamp, extract_feature(&ef.frame, &model.backbone)?)?;
        let inf = infer(model, &history.queues()?)?;
        let want = match ef.label {
            Label::Room(r) => r,
            Label::Transit => m,
        };
        correct += usize::from(inf.room_id == want);
    }
    Ok(correct as f64 / episode.frames.len().max(1) as f64)
}

/// Start pose of a trial: near the room centre with a random heading.
pub fn start_pose(cfg: &RunConfig, world: &World, room: usize, trial: u64) -> Result<RobotPose> {
    let rect = *world.rooms().get(room).with_context(|| format!("unknown room {room}"))?;
    let mut r = rng_from(derive_seed(cfg.derive(stream::TRIAL), trial));
    let (cx, cy) = rect.center();
    let j = cfg.navigate.start_jitter;
    for _ in 0..100 {
        let (x, y) = (cx + r.random_range(-j..=j), cy + r.random_range(-j..=j));
        let theta = r.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        if is_free(world, x, y) && world.room_of(x, y) == Some(room) {
            return Ok(RobotPose::new(world, x, y, theta));
        }
    }
    Ok(RobotPose::new(world, cx, cy, 0.0))
}

/// The goal image for a room, rendered in the mapped (unperturbed) world.
pub fn goal_frame(cfg: &RunConfig, world: &World, room: usize) -> Result<Frame> {
    Ok(goal_image(world, room, cfg.derive(stream::GOAL))?)
}

/// Everything a trial needs, shared read-only across trials.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub world: World,
    pub graph: RoomGraph,
    pub model: RoomNetModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSpec {
    pub trial: u64,
    pub start_room: usize,
    pub goal_room: usize,
    /// `p = q = perturbation`, applied after mapping and training.
    pub perturbation: f64,
    /// Teleport into this room once a plan exists.
    pub teleport_to: Option<usize>,
}

pub fn run_trial(cfg: &RunConfig, art: &Artifacts, spec: &TrialSpec) -> Result<MissionSummary> {
    let goal = goal_frame(cfg, &art.world, spec.goal_room)?;
    let world = if spec.perturbation > 0.0 {
        let seed = derive_seed(cfg.derive(stream::PERTURB), spec.trial);
        perturb(&art.world, spec.perturbation, spec.perturbation, seed)?
    } else {
        art.world.clone()
    };
    let start = start_pose(cfg, &world, spec.start_room, spec.trial)?;
    let teleport = match spec.teleport_to {
        Some(room) => Some(Teleport { pose: start_pose(cfg, &world, room, spec.trial ^ 0x7e1e)? }),
        None => None,
    };
    let setup = MissionSetup {
        world: &world,
        model: &art.model,
        graph: &art.graph,
        policy: &cfg.policy,
        queues: &cfg.queues,
        dt: cfg.navigate.dt,
        max_steps: cfg.navigate.max_steps,
        stream: derive_seed(cfg.derive(stream::TRIAL), spec.trial),
    };
    run_mission(&setup, start, &goal, teleport, None)
}

/// Checks that the goal image is recognized before a run starts.
pub fn check_goal(cfg: &RunConfig, graph: &RoomGraph, goal: &Frame) -> Result<usize> {
    Ok(resolve_goal_room(graph, goal, &cfg.policy.plan_config())?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub perturbation: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Successes whose visited rooms equal the initial plan.
    pub followed_plan: usize,
    pub mean_steps: f64,
    pub total_replans: usize,
    pub failures: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub start_room: usize,
    pub goal_room: usize,
    pub levels: Vec<LevelReport>,
}

pub fn summarize(perturbation: f64, results: &[(u64, MissionSummary)]) -> LevelReport {
    let successes: Vec<&MissionSummary> = results.iter().map(|(_, s)| s).filter(|s| s.success).collect();
    let mean_steps = if successes.is_empty() {
        0.0
    } else {
        successes.iter().map(|s| s.steps as f64).sum::<f64>() / successes.len() as f64
    };
    LevelReport {
        perturbation,
        trials: results.len(),
        successes: successes.len(),
        success_rate: successes.len() as f64 / results.len().max(1) as f64,
        followed_plan: successes.iter().filter(|s| s.follows_plan()).count(),
        mean_steps,
        total_replans: results.iter().map(|(_, s)| s.replans).sum(),
        failures: results.iter().filter(|(_, s)| !s.success).map(|(t, _)| *t).collect(),
    }
}

/// Runs `trials` independent trials per perturbation level in parallel.
/// Results are sorted by trial index before aggregation.
pub fn evaluate(cfg: &RunConfig, art: &Artifacts, trials: usize, levels: &[f64]) -> Result<EvalReport> {
    if trials == 0 {
        bail!("trials must be positive");
    }
    let mut out = Vec::new();
    for &level in levels {
        let mut results: Vec<(u64, MissionSummary)> = (0..trials as u64)
            .into_par_iter()
            .map(|trial| {
                let spec = TrialSpec {
                    trial,
                    start_room: cfg.navigate.start_room,
                    goal_room: cfg.navigate.goal_room,
                    perturbation: level,
                    teleport_to: None,
                };
                run_trial(cfg, art, &spec).map(|s| (trial, s))
            })
            .collect::<Result<_>>()?;
        results.sort_by_key(|(t, _)| *t);
        out.push(summarize(level, &results));
    }
    Ok(EvalReport { start_room: cfg.navigate.start_room, goal_room: cfg.navigate.goal_room, levels: out })
}
