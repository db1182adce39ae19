//! The sparse room graph: rooms are vertices, doorways are edges, and each
//! directed edge stores the frames seen while crossing it. Plans are
//! shortest room sequences (Dijkstra on hop count) plus one doorway view to
//! seek per traversal.

use alloc::collections::{BTreeMap, BinaryHeap, VecDeque};
use alloc::format;
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::error::{Error, Result};
use crate::features::{match_frames, Frame, MatchConfig};
use crate::sim::{Episode, Label};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct GraphConfig {
    /// Frames within this many seconds of a room change become transit frames.
    pub transition_window: f64,
    /// Minimum spacing of the per-room keyframes used for goal recognition.
    pub keyframe_interval: f64,
    pub matching: MatchConfig,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { transition_window: 1.0, keyframe_interval: 2.0, matching: MatchConfig::default() }
    }
}

/// Caps the reference set used to rank transit frames.
const MAX_REFERENCE_FRAMES: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct RoomGraph {
    room_count: usize,
    adjacency: Vec<bool>,
    transitions: BTreeMap<(usize, usize), Vec<Frame>>,
    keyframes: Vec<Vec<Frame>>,
    /// Index of the most representative frame of each directed edge.
    representatives: BTreeMap<(usize, usize), usize>,
}

impl RoomGraph {
    /// Assembles a graph from stored parts and checks its invariants:
    /// symmetric adjacency, empty diagonal, transit frames in both
    /// directions of every edge, and connectivity.
    pub fn from_parts(
        room_count: usize,
        adjacency: Vec<bool>,
        transitions: BTreeMap<(usize, usize), Vec<Frame>>,
        keyframes: Vec<Vec<Frame>>,
        matching: &MatchConfig,
    ) -> Result<Self> {
        if room_count == 0 {
            return Err(Error::InvalidGraph("graph has no rooms".into()));
        }
        if adjacency.len() != room_count * room_count || keyframes.len() != room_count {
            return Err(Error::InvalidGraph("part sizes do not match room count".into()));
        }
        for a in 0..room_count {
            if adjacency[a * room_count + a] {
                return Err(Error::InvalidGraph(format!("self loop on room {a}")));
            }
            for b in 0..room_count {
                let ab = adjacency[a * room_count + b];
                if ab != adjacency[b * room_count + a] {
                    return Err(Error::InvalidGraph(format!("asymmetric edge ({a}, {b})")));
                }
                let frames = transitions.get(&(a, b)).map_or(0, Vec::len);
                if ab && frames == 0 {
                    return Err(Error::InvalidGraph(format!("edge {a}→{b} has no transit frames")));
                }
                if !ab && frames > 0 {
                    return Err(Error::InvalidGraph(format!("transit frames on non-edge {a}→{b}")));
                }
            }
        }
        if transitions.keys().any(|&(a, b)| a >= room_count || b >= room_count) {
            return Err(Error::InvalidGraph("transition references unknown room".into()));
        }
        let mut graph = RoomGraph {
            room_count,
            adjacency,
            transitions,
            keyframes,
            representatives: BTreeMap::new(),
        };
        if !graph.is_connected() {
            return Err(Error::GraphNotConnected);
        }
        graph.representatives = graph
            .transitions
            .iter()
            .map(|(&edge, frames)| Ok((edge, most_representative(frames, matching)?)))
            .collect::<Result<_>>()?;
        Ok(graph)
    }

    pub fn room_count(&self) -> usize {
        self.room_count
    }

    pub fn contains(&self, room: usize) -> bool {
        room < self.room_count
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        a < self.room_count && b < self.room_count && self.adjacency[a * self.room_count + b]
    }

    pub fn adjacency(&self) -> &[bool] {
        &self.adjacency
    }

    pub fn neighbors(&self, room: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.room_count).filter(move |&b| self.is_adjacent(room, b))
    }

    pub fn degree(&self, room: usize) -> usize {
        self.neighbors(room).count()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&e| e).count() / 2
    }

    /// Directed edges with their transit frames, in `(from, to)` order.
    pub fn transitions(&self) -> &BTreeMap<(usize, usize), Vec<Frame>> {
        &self.transitions
    }

    pub fn transition_frames(&self, from: usize, to: usize) -> &[Frame] {
        self.transitions.get(&(from, to)).map_or(&[], Vec::as_slice)
    }

    pub fn keyframes(&self, room: usize) -> &[Frame] {
        self.keyframes.get(room).map_or(&[], Vec::as_slice)
    }

    pub fn all_keyframes(&self) -> &[Vec<Frame>] {
        &self.keyframes
    }

    /// The stored transit frame that best matches the rest of its set; this
    /// is the view the policy seeks when crossing `from → to`.
    pub fn transition_target(&self, from: usize, to: usize) -> Option<&Frame> {
        let idx = *self.representatives.get(&(from, to))?;
        self.transitions.get(&(from, to)).map(|f| &f[idx])
    }

    fn is_connected(&self) -> bool {
        let mut seen = alloc::vec![false; self.room_count];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(r) = queue.pop_front() {
            for n in self.neighbors(r) {
                if !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Dijkstra with unit edge weights. At equal distance the lower room id
    /// is settled first, and a vertex keeps the first predecessor that
    /// reached it, which makes the returned path unique.
    pub fn shortest_path(&self, source: usize, goal: usize) -> Option<Vec<usize>> {
        if !self.contains(source) || !self.contains(goal) {
            return None;
        }
        let mut dist = alloc::vec![u64::MAX; self.room_count];
        let mut prev = alloc::vec![usize::MAX; self.room_count];
        let mut heap = BinaryHeap::new();
        dist[source] = 0;
        heap.push(Reverse((0u64, source)));
        while let Some(Reverse((d, r))) = heap.pop() {
            if d > dist[r] {
                continue;
            }
            if r == goal {
                break;
            }
            for n in self.neighbors(r) {
                let nd = d + 1;
                if nd < dist[n] {
                    dist[n] = nd;
                    prev[n] = r;
                    heap.push(Reverse((nd, n)));
                }
            }
        }
        if dist[goal] == u64::MAX {
            return None;
        }
        let mut path = alloc::vec![goal];
        while *path.last().unwrap() != source {
            path.push(prev[*path.last().unwrap()]);
        }
        path.reverse();
        Some(path)
    }
}

/// Index of the frame with the highest mean match score against (a spaced
/// subsample of) the other frames. Ties keep the earliest frame.
fn most_representative(frames: &[Frame], matching: &MatchConfig) -> Result<usize> {
    if frames.len() <= 2 {
        return Ok(0);
    }
    let step = frames.len().div_ceil(MAX_REFERENCE_FRAMES);
    let reference: Vec<usize> = (0..frames.len()).step_by(step).collect();
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, candidate) in frames.iter().enumerate() {
        let mut total = 0.0;
        let mut n = 0usize;
        for &j in reference.iter().filter(|&&j| j != i) {
            total += match_frames(candidate, &frames[j], matching)?.score;
            n += 1;
        }
        let mean = total / n as f64;
        if mean > best.1 {
            best = (i, mean);
        }
    }
    Ok(best.0)
}

/// Builds the room graph from labelled mapping episodes.
///
/// Every change of room label (ignoring transit labels in between) adds an
/// edge; the frames within `transition_window` seconds of the change instant
/// are appended to that directed edge. Room-labelled frames spaced at least
/// `keyframe_interval` apart become the room's keyframes.
pub fn build_graph(episodes: &[Episode], room_count: usize, cfg: &GraphConfig) -> Result<RoomGraph> {
    if room_count == 0 {
        return Err(Error::InvalidGraph("graph has no rooms".into()));
    }
    let mut adjacency = alloc::vec![false; room_count * room_count];
    let mut transitions: BTreeMap<(usize, usize), Vec<Frame>> = BTreeMap::new();
    let mut keyframes: Vec<Vec<Frame>> = alloc::vec![Vec::new(); room_count];

    for episode in episodes {
        let frames = &episode.frames;
        let mut last_room: Option<(usize, f64)> = None;
        let mut last_keyframe = f64::NEG_INFINITY;
        for ef in frames {
            let t = ef.frame.timestamp;
            let room = match ef.label {
                Label::Transit => continue,
                Label::Room(r) if r >= room_count => return Err(Error::UnknownRoom(r)),
                Label::Room(r) => r,
            };
            if t - last_keyframe >= cfg.keyframe_interval {
                keyframes[room].push(ef.frame.clone());
                last_keyframe = t;
            }
            if let Some((prev, t_prev)) = last_room {
                if prev != room {
                    let change = 0.5 * (t_prev + t);
                    adjacency[prev * room_count + room] = true;
                    adjacency[room * room_count + prev] = true;
                    transitions.entry((prev, room)).or_default().extend(
                        frames
                            .iter()
                            .filter(|f| (f.frame.timestamp - change).abs() <= cfg.transition_window)
                            .map(|f| f.frame.clone()),
                    );
                }
            }
            last_room = Some((room, t));
        }
    }

    if let Some(r) = keyframes.iter().position(Vec::is_empty) {
        return Err(Error::UncoveredRoom(r));
    }
    for a in 0..room_count {
        for b in 0..room_count {
            if adjacency[a * room_count + b] && !transitions.contains_key(&(a, b)) {
                return Err(Error::InvalidGraph(format!(
                    "doorway {b}→{a} seen but never crossed {a}→{b}"
                )));
            }
        }
    }
    RoomGraph::from_parts(room_count, adjacency, transitions, keyframes, &cfg.matching)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanConfig {
    pub matching: MatchConfig,
    /// Minimum goal-recognition score (the same threshold that marks an
    /// intermediate view as identified).
    pub recognition_threshold: f64,
    /// Goal room = best mean of the top `top_k` keyframe scores.
    pub top_k: usize,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig { matching: MatchConfig::default(), recognition_threshold: 0.35, top_k: 3 }
    }
}

/// Rooms to visit (source first, goal room last) and the doorway view to
/// seek for each traversal.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub hierarchy: Vec<usize>,
    pub transition_targets: Vec<Frame>,
    pub goal_image: Frame,
    pub goal_room: usize,
}

impl Plan {
    pub fn source(&self) -> usize {
        self.hierarchy[0]
    }

    pub fn hops(&self) -> usize {
        self.hierarchy.len() - 1
    }

    /// Structural check: consecutive rooms adjacent, one target per hop,
    /// hierarchy ends in the goal room.
    pub fn validate(&self, graph: &RoomGraph) -> Result<()> {
        if self.hierarchy.is_empty() {
            return Err(Error::InvalidGraph("empty hierarchy".into()));
        }
        if self.transition_targets.len() + 1 != self.hierarchy.len() {
            return Err(Error::InvalidGraph("one transition target per hop required".into()));
        }
        if self.hierarchy.last() != Some(&self.goal_room) {
            return Err(Error::InvalidGraph("hierarchy does not end in goal room".into()));
        }
        if let Some(w) = self.hierarchy.windows(2).find(|w| !graph.is_adjacent(w[0], w[1])) {
            return Err(Error::InvalidGraph(format!("rooms {} and {} not adjacent", w[0], w[1])));
        }
        Ok(())
    }
}

/// Scores the goal image against every room's keyframes and returns the best
/// room with its score.
pub fn resolve_goal_room(graph: &RoomGraph, goal_image: &Frame, cfg: &PlanConfig) -> Result<(usize, f64)> {
    let mut best = (0usize, f64::NEG_INFINITY);
    for room in 0..graph.room_count() {
        let mut scores = graph
            .keyframes(room)
            .iter()
            .map(|k| match_frames(goal_image, k, &cfg.matching).map(|r| r.score))
            .collect::<Result<Vec<f64>>>()?;
        scores.sort_by(|a, b| b.total_cmp(a));
        let top = &scores[..scores.len().min(cfg.top_k.max(1))];
        let mean = if top.is_empty() { 0.0 } else { top.iter().sum::<f64>() / top.len() as f64 };
        if mean > best.1 {
            best = (room, mean);
        }
    }
    if best.1 < cfg.recognition_threshold {
        return Err(Error::GoalNotRecognized);
    }
    Ok(best)
}

fn plan_to_room(graph: &RoomGraph, source: usize, goal_room: usize, goal_image: Frame) -> Result<Plan> {
    if !graph.contains(source) {
        return Err(Error::UnknownRoom(source));
    }
    let hierarchy = graph
        .shortest_path(source, goal_room)
        .ok_or(Error::Unreachable { source_room: source, goal: goal_room })?;
    let transition_targets = hierarchy
        .windows(2)
        .map(|w| {
            graph
                .transition_target(w[0], w[1])
                .cloned()
                .ok_or_else(|| Error::InvalidGraph(format!("edge {}→{} has no target", w[0], w[1])))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Plan { hierarchy, transition_targets, goal_image, goal_room })
}

pub fn plan(graph: &RoomGraph, source: usize, goal_image: &Frame, cfg: &PlanConfig) -> Result<Plan> {
    if !graph.contains(source) {
        return Err(Error::UnknownRoom(source));
    }
    let (goal_room, _) = resolve_goal_room(graph, goal_image, cfg)?;
    plan_to_room(graph, source, goal_room, goal_image.clone())
}

/// Plans again from `current_room` toward the goal of `existing`.
pub fn replan(graph: &RoomGraph, current_room: usize, existing: &Plan) -> Result<Plan> {
    plan_to_room(graph, current_room, existing.goal_room, existing.goal_image.clone())
}
