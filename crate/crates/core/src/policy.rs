//! Local navigation policy: rotate in place until the classifier is
//! confident, plan, then seek and approach each doorway view in turn until
//! the goal view is passed.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_4, TAU};

use crate::error::{Error, Result};
use crate::features::{match_frames, Frame, MatchConfig, MatchResult};
use crate::graph::{plan, replan, Plan, PlanConfig, RoomGraph};
use crate::math;
use crate::roomnet::Inference;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct PolicyConfig {
    /// Match score above which a target counts as identified.
    pub m_s0: f64,
    /// Arrival threshold on `m_s · C_t`.
    pub c_o: f64,
    /// Confidence window: the last `l + 1` inferences are kept.
    pub l: usize,
    pub eta: f64,
    pub smooth_w: usize,
    /// Confident off-plan inferences before replanning. Only confident
    /// steps count; an unconfident step neither adds nor resets.
    pub replan_k: usize,
    pub rot_speed: f64,
    pub lin_speed: f64,
    /// Angular command per unit of horizontal image offset.
    pub steer_gain: f64,
    /// Forward drive after an unsuccessful full scan.
    pub drift_secs: f64,
    /// Forward drive after passing an intermediate target.
    pub advance_secs: f64,
    /// Driving forward with an unchanged view for this long counts as
    /// blocked; the robot then backs off and tries from one side.
    pub stall_secs: f64,
    pub backoff_secs: f64,
    pub matching: MatchConfig,
    pub goal_top_k: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            m_s0: 0.35,
            c_o: 1.5,
            l: 5,
            eta: 1.0,
            smooth_w: 3,
            replan_k: 5,
            rot_speed: 0.6,
            lin_speed: 0.5,
            steer_gain: 2.0,
            drift_secs: 2.0,
            advance_secs: 1.0,
            stall_secs: 1.0,
            backoff_secs: 1.0,
            matching: MatchConfig::default(),
            goal_top_k: 3,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("policy: {what}")));
        if !(self.m_s0 > 0.0 && self.m_s0 < 1.0) {
            return bad("m_s0 must lie in (0, 1)");
        }
        if !(self.c_o > 0.0) {
            return bad("C_o must be positive");
        }
        if self.l < 1 || self.smooth_w < 1 || self.replan_k < 1 || self.goal_top_k < 1 {
            return bad("window lengths must be at least 1");
        }
        if !(self.eta > 0.0) {
            return bad("eta must be positive");
        }
        if !(self.rot_speed > 0.0 && self.lin_speed > 0.0 && self.steer_gain >= 0.0) {
            return bad("speeds must be positive");
        }
        if !(self.drift_secs >= 0.0 && self.advance_secs >= 0.0 && self.backoff_secs >= 0.0 && self.stall_secs > 0.0) {
            return bad("durations must be non-negative");
        }
        if !(self.matching.ratio > 0.0 && self.matching.ratio <= 1.0 && self.matching.max_distance > 0.0) {
            return bad("matching ratio must lie in (0, 1] and the distance cap must be positive");
        }
        Ok(())
    }

    pub fn plan_config(&self) -> PlanConfig {
        PlanConfig { matching: self.matching, recognition_threshold: self.m_s0, top_k: self.goal_top_k }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum Phase {
    InitRotate,
    Seek,
    Approach,
    Advance,
    GoalReached,
    Replanning,
}

impl Phase {
    pub const ALL: [Phase; 6] =
        [Phase::InitRotate, Phase::Seek, Phase::Approach, Phase::Advance, Phase::GoalReached, Phase::Replanning];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::InitRotate => "INIT_ROTATE",
            Phase::Seek => "SEEK",
            Phase::Approach => "APPROACH",
            Phase::Advance => "ADVANCE",
            Phase::GoalReached => "GOAL_REACHED",
            Phase::Replanning => "REPLANNING",
        }
    }
}

impl core::fmt::Display for Phase {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Velocity command: linear m/s, angular rad/s (counter-clockwise positive).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Command {
    pub linear: f64,
    pub angular: f64,
}

impl Command {
    pub const STOP: Command = Command { linear: 0.0, angular: 0.0 };

    pub fn new(linear: f64, angular: f64) -> Self {
        Command { linear, angular }
    }

    pub fn within(&self, cfg: &PolicyConfig) -> bool {
        self.linear.abs() <= cfg.lin_speed && self.angular.abs() <= cfg.rot_speed
    }
}

/// `C_t = Σ exp(−|r − r_i|)` over the window. Zero for an empty window.
pub fn confidence(room_window: &[usize], r: usize) -> f64 {
    room_window.iter().map(|&ri| math::exp(-(r.abs_diff(ri) as f64))).sum()
}

/// `η ×` (mean of the newest `smooth_w` scores − mean of the `smooth_w`
/// before them). `None` until `2·smooth_w` scores exist.
pub fn score_gradient(score_history: &[f64], eta: f64, smooth_w: usize) -> Option<f64> {
    let n = score_history.len();
    if smooth_w == 0 || n < 2 * smooth_w {
        return None;
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let newer = mean(&score_history[n - smooth_w..]);
    let older = mean(&score_history[n - 2 * smooth_w..n - smooth_w]);
    Some(eta * (newer - older))
}

/// Mean of the newest `smooth_w` scores (all of them if fewer exist).
pub fn smoothed_score(score_history: &[f64], smooth_w: usize) -> f64 {
    let tail = &score_history[score_history.len().saturating_sub(smooth_w.max(1))..];
    if tail.is_empty() {
        0.0
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

/// Falling score and a low confidence-weighted score. The caller is
/// responsible for only asking once the target has been identified.
pub fn arrival_check(v: f64, m_s: f64, c_t: f64, cfg: &PolicyConfig) -> bool {
    v < 0.0 && m_s * c_t < cfg.c_o
}

/// Largest image displacement, per coordinate, still read as standing still.
const STALL_TOLERANCE: f32 = 0.03;

/// Whether two views (sorted by id) show the same scene from the same place:
/// most landmarks appear in both, and none of the shared ones moved. Edge
/// landmarks may blink in and out of view without the robot moving.
fn view_unmoved(a: &[(u32, [f32; 2])], b: &[(u32, [f32; 2])]) -> bool {
    let (mut i, mut j, mut shared) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                let (p, q) = (a[i].1, b[j].1);
                if (p[0] - q[0]).abs() > STALL_TOLERANCE || (p[1] - q[1]).abs() > STALL_TOLERANCE {
                    return false;
                }
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    shared > 0 && 4 * shared >= 3 * a.len().max(b.len())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Seek {
    /// Full rotation, remembering the most promising heading.
    Scan { fresh: bool, swept: f64, best_at: f64, best_score: f64, best_keypoints: usize },
    /// Rotate by `remaining` radians in direction `sign`.
    Turn { remaining: f64, sign: f64 },
    /// Reverse away from an obstacle.
    Backoff { remaining: f64 },
    /// Drive straight before scanning again.
    Drift { remaining: f64 },
}

impl Seek {
    const START: Seek =
        Seek::Scan { fresh: true, swept: 0.0, best_at: 0.0, best_score: -1.0, best_keypoints: 0 };
}

/// Per-step diagnostics for logging.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    /// Raw match score against the current target (0 without a plan).
    pub m_s: f64,
    pub smoothed_m_s: f64,
    pub v: Option<f64>,
    pub c_t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavState {
    pub phase: Phase,
    pub goal_image: Frame,
    pub plan: Option<Plan>,
    /// Index into the plan's transition targets; equal to their count while
    /// seeking the goal image.
    pub target_index: usize,
    pub score_history: VecDeque<f64>,
    pub room_window: VecDeque<usize>,
    pub off_plan_count: usize,
    /// Consecutive confident inferences, while seeking, of an on-plan room
    /// that the current target does not start from.
    pub resync_count: usize,
    /// The current target's score has crossed `m_s0`.
    pub identified: bool,
    /// Last room inferred with `C_t ≥ C_o`.
    pub confident_room: Option<usize>,
    pub replans: usize,
    pub last: StepReport,
    seek: Seek,
    advance_left: f64,
    last_timestamp: Option<f64>,
    last_dt: f64,
    last_command: Command,
    /// View (keypoint ids and image positions) when the stall timer started.
    stall_anchor: Vec<(u32, [f32; 2])>,
    stalled_for: f64,
    bump_side: f64,
    /// Backing off from an obstacle; targets are ignored until the next scan.
    recovering: bool,
}

impl NavState {
    pub fn new(goal_image: Frame) -> Self {
        NavState {
            phase: Phase::InitRotate,
            goal_image,
            plan: None,
            target_index: 0,
            score_history: VecDeque::new(),
            room_window: VecDeque::new(),
            off_plan_count: 0,
            resync_count: 0,
            identified: false,
            confident_room: None,
            replans: 0,
            last: StepReport::default(),
            seek: Seek::START,
            advance_left: 0.0,
            last_timestamp: None,
            last_dt: 0.1,
            last_command: Command::STOP,
            stall_anchor: Vec::new(),
            stalled_for: 0.0,
            bump_side: 1.0,
            recovering: false,
        }
    }

    /// The frame currently sought: a doorway view or the goal image.
    pub fn current_target(&self) -> Option<&Frame> {
        let plan = self.plan.as_ref()?;
        Some(plan.transition_targets.get(self.target_index).unwrap_or(&plan.goal_image))
    }

    pub fn seeking_goal(&self) -> bool {
        self.plan.as_ref().is_some_and(|p| self.target_index >= p.transition_targets.len())
    }

    fn reset_target(&mut self) {
        self.score_history.clear();
        self.identified = false;
        self.seek = Seek::START;
        self.recovering = false;
    }

    fn steer(&self, frame: &Frame, matched: &MatchResult, cfg: &PolicyConfig) -> Command {
        let us: Vec<f64> = matched
            .pairs
            .iter()
            .filter_map(|&(q, _)| frame.keypoints.iter().find(|k| k.id == q))
            .map(|k| k.position[0] as f64)
            .collect();
        let angular = if us.is_empty() {
            0.0
        } else {
            let mean_u = us.iter().sum::<f64>() / us.len() as f64;
            (cfg.steer_gain * (0.5 - mean_u)).clamp(-cfg.rot_speed, cfg.rot_speed)
        };
        Command::new(cfg.lin_speed, angular)
    }

    fn seek_command(&mut self, frame: &Frame, m_s: f64, dt: f64, cfg: &PolicyConfig) -> Command {
        let step = cfg.rot_speed * self.last_dt;
        match &mut self.seek {
            Seek::Scan { fresh, swept, best_at, best_score, best_keypoints } => {
                if *fresh {
                    *fresh = false;
                } else {
                    *swept += cfg.rot_speed * dt;
                }
                let keypoints = frame.keypoints.iter().filter(|k| !k.is_null()).count();
                if m_s > *best_score || (m_s == *best_score && keypoints > *best_keypoints) {
                    *best_score = m_s;
                    *best_keypoints = keypoints;
                    *best_at = *swept;
                }
                if *swept + 1e-9 >= TAU {
                    let remaining = math::wrap_positive(*best_at - *swept);
                    self.seek = Seek::Turn { remaining, sign: 1.0 };
                    return self.seek_command(frame, m_s, 0.0, cfg);
                }
                Command::new(0.0, cfg.rot_speed)
            }
            Seek::Turn { remaining, sign } => {
                *remaining -= cfg.rot_speed * dt;
                if *remaining <= 0.5 * step {
                    self.seek = Seek::Drift { remaining: cfg.drift_secs };
                    return self.seek_command(frame, m_s, 0.0, cfg);
                }
                Command::new(0.0, *sign * (*remaining / self.last_dt).min(cfg.rot_speed))
            }
            Seek::Backoff { remaining } => {
                *remaining -= dt;
                if *remaining <= 0.0 {
                    self.bump_side = -self.bump_side;
                    self.seek = Seek::Turn { remaining: FRAC_PI_4, sign: self.bump_side };
                    return self.seek_command(frame, m_s, 0.0, cfg);
                }
                Command::new(-cfg.lin_speed, 0.0)
            }
            Seek::Drift { remaining } => {
                *remaining -= dt;
                if *remaining <= 0.0 {
                    self.recovering = false;
                    self.seek = Seek::START;
                    return self.seek_command(frame, m_s, 0.0, cfg);
                }
                Command::new(cfg.lin_speed, 0.0)
            }
        }
    }

    /// Advances the state machine by one perception step.
    pub fn update(
        &mut self,
        frame: &Frame,
        inference: &Inference,
        graph: &RoomGraph,
        cfg: &PolicyConfig,
    ) -> Result<Command> {
        let command = self.decide(frame, inference, graph, cfg)?;
        self.last_command = command;
        Ok(command)
    }

    fn decide(
        &mut self,
        frame: &Frame,
        inference: &Inference,
        graph: &RoomGraph,
        cfg: &PolicyConfig,
    ) -> Result<Command> {
        if frame.timestamp != inference.timestamp {
            return Err(Error::StaleInput(format!(
                "frame at t = {} but inference at t = {}",
                frame.timestamp, inference.timestamp
            )));
        }
        if inference.probs.len() != graph.room_count() + 1 {
            return Err(Error::Dimension(format!(
                "inference has {} classes, graph has {} rooms",
                inference.probs.len(),
                graph.room_count()
            )));
        }
        let dt = match self.last_timestamp {
            Some(prev) if frame.timestamp <= prev => {
                return Err(Error::StaleInput(format!(
                    "frame at t = {} is not newer than t = {prev}",
                    frame.timestamp
                )))
            }
            Some(prev) => frame.timestamp - prev,
            None => 0.0,
        };
        self.last_timestamp = Some(frame.timestamp);
        if dt > 0.0 {
            self.last_dt = dt;
        }
        if self.phase == Phase::GoalReached {
            return Ok(Command::STOP);
        }

        self.room_window.push_back(inference.room_id);
        while self.room_window.len() > cfg.l + 1 {
            self.room_window.pop_front();
        }
        let c_t = confidence(self.room_window.make_contiguous(), inference.room_id);
        let confident_room = inference.room().filter(|_| c_t >= cfg.c_o);
        if confident_room.is_some() {
            self.confident_room = confident_room;
        }

        let matched = match self.current_target() {
            Some(target) => match_frames(frame, target, &cfg.matching)?,
            None => MatchResult { pairs: Vec::new(), score: 0.0 },
        };
        let m_s = matched.score;
        self.last = StepReport { m_s, smoothed_m_s: m_s, v: None, c_t };

        if let (Some(plan), Some(r)) = (&self.plan, confident_room) {
            if plan.hierarchy.contains(&r) {
                self.off_plan_count = 0;
            } else {
                self.off_plan_count += 1;
            }
            if self.off_plan_count >= cfg.replan_k {
                let new_plan = replan(graph, r, plan)?;
                self.plan = Some(new_plan);
                self.target_index = 0;
                self.off_plan_count = 0;
                self.replans += 1;
                self.reset_target();
                self.phase = Phase::Replanning;
                return Ok(Command::STOP);
            }
        }

        // Passing a doorway is judged from the score alone, so the robot can
        // be left short of it (or carried past the next one). Seeking from
        // the wrong room never succeeds; re-align the target with the room
        // the classifier is sure of.
        let expected = match (&self.plan, confident_room) {
            (Some(plan), Some(r)) if matches!(self.phase, Phase::Seek | Phase::Replanning) => {
                plan.hierarchy.iter().position(|&h| h == r).filter(|&j| j != self.target_index)
            }
            _ => None,
        };
        match expected {
            Some(j) => {
                self.resync_count += 1;
                if self.resync_count >= cfg.replan_k {
                    self.resync_count = 0;
                    self.target_index = j;
                    self.reset_target();
                }
            }
            None => self.resync_count = 0,
        }

        // Keypoint positions depend only on the pose, so a view that stays
        // put under a forward command means the robot is blocked.
        let view: Vec<(u32, [f32; 2])> =
            frame.keypoints.iter().filter(|k| !k.is_null()).map(|k| (k.id, k.position)).collect();
        let near_anchor = view_unmoved(&self.stall_anchor, &view);
        if self.last_command.linear > 0.0 && near_anchor {
            self.stalled_for += dt;
        } else {
            self.stalled_for = 0.0;
            self.stall_anchor = view;
        }
        if self.stalled_for >= cfg.stall_secs && matches!(self.phase, Phase::Seek | Phase::Approach | Phase::Advance) {
            self.stalled_for = 0.0;
            self.reset_target();
            self.phase = Phase::Seek;
            self.seek = Seek::Backoff { remaining: cfg.backoff_secs };
            self.recovering = true;
            return Ok(self.seek_command(frame, m_s, 0.0, cfg));
        }

        match self.phase {
            Phase::GoalReached => Ok(Command::STOP),
            Phase::InitRotate => {
                if let Some(r) = inference.room() {
                    if self.room_window.len() == cfg.l + 1 && c_t >= 2.0 * cfg.c_o {
                        self.plan = Some(plan(graph, r, &self.goal_image, &cfg.plan_config())?);
                        self.target_index = 0;
                        self.reset_target();
                        self.phase = Phase::Seek;
                    }
                }
                Ok(Command::new(0.0, cfg.rot_speed))
            }
            Phase::Replanning | Phase::Seek => {
                self.phase = Phase::Seek;
                if m_s > cfg.m_s0 && !self.recovering {
                    self.phase = Phase::Approach;
                    self.identified = true;
                    self.score_history.clear();
                    self.score_history.push_back(m_s);
                    return Ok(self.steer(frame, &matched, cfg));
                }
                Ok(self.seek_command(frame, m_s, dt, cfg))
            }
            Phase::Approach => {
                self.score_history.push_back(m_s);
                while self.score_history.len() > 2 * cfg.smooth_w {
                    self.score_history.pop_front();
                }
                let history = self.score_history.make_contiguous();
                let v = score_gradient(history, cfg.eta, cfg.smooth_w);
                let smoothed = smoothed_score(history, cfg.smooth_w);
                self.last.smoothed_m_s = smoothed;
                self.last.v = v;
                let arrived = self.identified && v.is_some_and(|v| arrival_check(v, smoothed, c_t, cfg));
                if !arrived {
                    return Ok(self.steer(frame, &matched, cfg));
                }
                if self.seeking_goal() {
                    self.phase = Phase::GoalReached;
                    return Ok(Command::STOP);
                }
                self.target_index += 1;
                self.reset_target();
                self.phase = Phase::Advance;
                self.advance_left = cfg.advance_secs;
                Ok(Command::new(cfg.lin_speed, 0.0))
            }
            Phase::Advance => {
                self.advance_left -= dt;
                if self.advance_left > 0.0 {
                    return Ok(Command::new(cfg.lin_speed, 0.0));
                }
                self.phase = Phase::Seek;
                if m_s > cfg.m_s0 {
                    self.phase = Phase::Approach;
                    self.identified = true;
                    self.score_history.push_back(m_s);
                    return Ok(self.steer(frame, &matched, cfg));
                }
                Ok(self.seek_command(frame, m_s, 0.0, cfg))
            }
        }
    }
}

/// Functional form of [`NavState::update`].
pub fn step(
    mut state: NavState,
    frame: &Frame,
    inference: &Inference,
    graph: &RoomGraph,
    cfg: &PolicyConfig,
) -> Result<(NavState, Command)> {
    let cmd = state.update(frame, inference, graph, cfg)?;
    Ok((state, cmd))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confidence_closed_forms() {
        assert_eq!(confidence(&[2; 6], 2), 6.0);
        let want = 2.0 + (-1.0f64).exp();
        assert!((confidence(&[3, 3, 2], 3) - want).abs() < 1e-12);
        let want = 1.0 + 2.0 * (-4.0f64).exp();
        assert!((confidence(&[0, 4, 4], 0) - want).abs() < 1e-12);
        assert_eq!(confidence(&[], 1), 0.0);
    }

    #[test]
    fn gradient_closed_forms() {
        assert_eq!(score_gradient(&[0.1, 0.2], 1.0, 2), None);
        assert!(score_gradient(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6], 1.0, 3).unwrap() > 0.0);
        assert_eq!(score_gradient(&[0.4; 6], 1.0, 3), Some(0.0));
        let v = score_gradient(&[0.9, 0.6, 0.5], 2.0, 1).unwrap();
        assert!((v + 0.2).abs() < 1e-12);
    }

    #[test]
    fn arrival_examples() {
        let cfg = PolicyConfig::default();
        assert!(!arrival_check(0.1, 0.0, 0.0, &cfg));
        assert!(!arrival_check(-0.05, 0.9, 6.0, &cfg));
        assert!(arrival_check(-0.05, 0.3, 3.0, &cfg));
    }

    #[test]
    fn config_validation() {
        assert!(PolicyConfig::default().validate().is_ok());
        assert!(PolicyConfig { m_s0: 1.0, ..Default::default() }.validate().is_err());
        assert!(PolicyConfig { c_o: 0.0, ..Default::default() }.validate().is_err());
        assert!(PolicyConfig { l: 0, ..Default::default() }.validate().is_err());
        assert!(PolicyConfig { smooth_w: 0, ..Default::default() }.validate().is_err());
    }
}
