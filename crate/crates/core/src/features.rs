//! Frames, keypoints, the frozen feature backbone and descriptor matching.
//!
//! The backbone maps a frame to a fixed-length unit vector: mean-pool the
//! keypoint descriptors, apply a frozen seeded projection, squash with
//! `tanh`, renormalize. Matching is mutual nearest neighbour in descriptor
//! space gated by a ratio test and an absolute distance cap; the matching
//! score is the fraction of query keypoints that found a partner.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::rng;

pub const DEFAULT_DESCRIPTOR_DIM: usize = 64;
pub const DEFAULT_FEATURE_DIM: usize = 32;

/// A detected image feature. Positions live in normalized image coordinates
/// `[0, 1]²`, descriptors have unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    pub id: u32,
    pub position: [f32; 2],
    pub descriptor: Vec<f32>,
}

impl Keypoint {
    /// Id reserved for the placeholder keypoint of a featureless frame.
    pub const NULL_ID: u32 = u32::MAX;

    pub fn is_null(&self) -> bool {
        self.id == Self::NULL_ID
    }

    /// The reserved descriptor carried by featureless frames.
    pub fn null_descriptor(dim: usize) -> Vec<f32> {
        let v = 1.0 / math::sqrt(dim as f64);
        alloc::vec![v as f32; dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub frame_id: u32,
    pub timestamp: f64,
    pub keypoints: Vec<Keypoint>,
}

impl Frame {
    /// Builds a frame, rejecting duplicate keypoint ids and ragged descriptors.
    pub fn new(frame_id: u32, timestamp: f64, keypoints: Vec<Keypoint>) -> Result<Self> {
        let frame = Frame { frame_id, timestamp, keypoints };
        frame.validate()?;
        Ok(frame)
    }

    /// A frame with nothing in view: one keypoint carrying the null descriptor.
    pub fn featureless(frame_id: u32, timestamp: f64, descriptor_dim: usize) -> Self {
        Frame {
            frame_id,
            timestamp,
            keypoints: alloc::vec![Keypoint {
                id: Keypoint::NULL_ID,
                position: [0.5, 0.5],
                descriptor: Keypoint::null_descriptor(descriptor_dim),
            }],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn is_featureless(&self) -> bool {
        self.keypoints.iter().all(Keypoint::is_null)
    }

    pub fn descriptor_dim(&self) -> Option<usize> {
        self.keypoints.first().map(|k| k.descriptor.len())
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids: Vec<u32> = self.keypoints.iter().map(|k| k.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig(format!(
                "frame {} has duplicate keypoint ids",
                self.frame_id
            )));
        }
        if let Some(dim) = self.descriptor_dim() {
            if self.keypoints.iter().any(|k| k.descriptor.len() != dim) {
                return Err(Error::Dimension(format!(
                    "frame {} mixes descriptor lengths",
                    self.frame_id
                )));
            }
        }
        Ok(())
    }
}

/// Backbone output for one frame; unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeature(pub Vec<f64>);

impl FrameFeature {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Frozen projection `D → F`. Entries are drawn uniformly from `(-1, 1)` in
/// row-major order from `ChaCha8Rng::seed_from_u64(seed)` and rounded to
/// `f32` so the backbone survives a round trip through the model file.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneParams {
    pub descriptor_dim: usize,
    pub feature_dim: usize,
    pub seed: u64,
    /// Row-major `feature_dim × descriptor_dim`.
    pub projection: Vec<f64>,
}

impl BackboneParams {
    pub fn from_seed(seed: u64, descriptor_dim: usize, feature_dim: usize) -> Self {
        let mut rng = rng::rng_from(seed);
        let projection = (0..descriptor_dim * feature_dim)
            .map(|_| rng.random_range(-1.0f64..1.0) as f32 as f64)
            .collect();
        BackboneParams { descriptor_dim, feature_dim, seed, projection }
    }
}

pub fn extract_feature(frame: &Frame, backbone: &BackboneParams) -> Result<FrameFeature> {
    if frame.is_empty() {
        return Err(Error::EmptyFrame);
    }
    let d = backbone.descriptor_dim;
    let mut mean = alloc::vec![0.0f64; d];
    for kp in &frame.keypoints {
        if kp.descriptor.len() != d {
            return Err(Error::Dimension(format!(
                "descriptor length {} but backbone expects {d}",
                kp.descriptor.len()
            )));
        }
        for (m, &x) in mean.iter_mut().zip(&kp.descriptor) {
            *m += x as f64;
        }
    }
    let n = frame.keypoints.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);

    let mut out = alloc::vec![0.0f64; backbone.feature_dim];
    math::matvec_acc(&backbone.projection, &mean, &mut out);
    out.iter_mut().for_each(|v| *v = math::tanh(*v));
    let norm = math::norm(&out);
    if norm < 1e-12 {
        // Degenerate mean (descriptors cancel out): fall back to e₀.
        out.iter_mut().for_each(|v| *v = 0.0);
        out[0] = 1.0;
    } else {
        out.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(FrameFeature(out))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct MatchConfig {
    /// Lowe ratio: the best distance must be below `ratio ×` the second best.
    pub ratio: f64,
    /// Absolute cap on the descriptor distance of an accepted pair.
    pub max_distance: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig { ratio: 0.8, max_distance: 0.6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// `(query keypoint id, target keypoint id)`, ordered by query id.
    pub pairs: Vec<(u32, u32)>,
    /// Matched pairs divided by the number of query keypoints.
    pub score: f64,
}

fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// Mutual-nearest-neighbour matching with ratio test and distance cap.
///
/// Nearest-neighbour ties go to the lowest keypoint id. Null keypoints never
/// match but still count in the score denominator.
pub fn match_frames(query: &Frame, target: &Frame, cfg: &MatchConfig) -> Result<MatchResult> {
    if query.is_empty() || target.is_empty() {
        return Err(Error::EmptyFrame);
    }
    if query.descriptor_dim() != target.descriptor_dim() {
        return Err(Error::Dimension(format!(
            "query descriptors {:?} vs target {:?}",
            query.descriptor_dim(),
            target.descriptor_dim()
        )));
    }

    let mut q: Vec<&Keypoint> = query.keypoints.iter().filter(|k| !k.is_null()).collect();
    let mut t: Vec<&Keypoint> = target.keypoints.iter().filter(|k| !k.is_null()).collect();
    q.sort_by_key(|k| k.id);
    t.sort_by_key(|k| k.id);

    let nt = t.len();
    let mut dist = alloc::vec![0.0f64; q.len() * nt];
    for (i, qk) in q.iter().enumerate() {
        for (j, tk) in t.iter().enumerate() {
            dist[i * nt + j] = squared_distance(&qk.descriptor, &tk.descriptor);
        }
    }

    // Best target per query (strict `<` keeps the lowest id on ties).
    let mut best_for_query = alloc::vec![None::<(usize, f64, f64)>; q.len()];
    for (i, slot) in best_for_query.iter_mut().enumerate() {
        let mut best = f64::INFINITY;
        let mut second = f64::INFINITY;
        let mut best_j = None;
        for j in 0..nt {
            let d = dist[i * nt + j];
            if d < best {
                second = best;
                best = d;
                best_j = Some(j);
            } else if d < second {
                second = d;
            }
        }
        *slot = best_j.map(|j| (j, best, second));
    }

    let mut best_for_target = alloc::vec![usize::MAX; nt];
    for (j, slot) in best_for_target.iter_mut().enumerate() {
        let mut best = f64::INFINITY;
        for i in 0..q.len() {
            let d = dist[i * nt + j];
            if d < best {
                best = d;
                *slot = i;
            }
        }
    }

    let cap2 = cfg.max_distance * cfg.max_distance;
    let ratio2 = cfg.ratio * cfg.ratio;
    let pairs: Vec<(u32, u32)> = best_for_query
        .iter()
        .enumerate()
        .filter_map(|(i, best)| {
            let (j, d1, d2) = (*best)?;
            let mutual = best_for_target[j] == i;
            let passes_ratio = d2.is_infinite() || d1 < ratio2 * d2;
            (mutual && d1 <= cap2 && passes_ratio).then(|| (q[i].id, t[j].id))
        })
        .collect();

    let score = pairs.len() as f64 / query.keypoints.len() as f64;
    Ok(MatchResult { pairs, score })
}
