//! Little-endian binary artifacts: frames (`RNFR`), models (`RNMD`), room
//! graphs (`RNGR`) and recorded episodes (`RNEP`).
//!
//! Frames do not carry their descriptor length; containers store it once in
//! their header. Readers reject trailing bytes.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use roomnet_core::features::{BackboneParams, Keypoint};
use roomnet_core::graph::GraphConfig;
use roomnet_core::sim::{Episode, EpisodeFrame, Label, RobotPose};
use roomnet_core::{Frame, ModelDims, RoomGraph, RoomNetModel};
use thiserror::Error;

pub const FRAME_MAGIC: &[u8; 4] = b"RNFR";
pub const MODEL_MAGIC: &[u8; 4] = b"RNMD";
pub const GRAPH_MAGIC: &[u8; 4] = b"RNGR";
pub const EPISODE_MAGIC: &[u8; 4] = b"RNEP";
pub const MODEL_VERSION: u32 = 1;

/// Refuse absurd sizes before allocating.
const MAX_COUNT: u32 = 1 << 24;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Core(#[from] roomnet_core::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

fn expect_magic(r: &mut impl Read, magic: &[u8; 4]) -> Result<()> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found)?;
    if &found != magic {
        return Err(FormatError::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(&found).into_owned(),
        });
    }
    Ok(())
}

fn read_count(r: &mut impl Read, what: &str) -> Result<usize> {
    let n = r.read_u32::<LE>()?;
    if n > MAX_COUNT {
        return Err(FormatError::Corrupt(format!("{what} count {n} too large")));
    }
    Ok(n as usize)
}

fn expect_end(r: &mut impl Read) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(FormatError::Corrupt("trailing bytes".into())),
    }
}

fn write_len(w: &mut impl Write, n: usize) -> Result<()> {
    let n = u32::try_from(n).map_err(|_| FormatError::Corrupt("count exceeds u32".into()))?;
    w.write_u32::<LE>(n)?;
    Ok(())
}

pub fn write_frame(w: &mut impl Write, frame: &Frame) -> Result<()> {
    w.write_all(FRAME_MAGIC)?;
    w.write_u32::<LE>(frame.frame_id)?;
    w.write_f64::<LE>(frame.timestamp)?;
    write_len(w, frame.keypoints.len())?;
    for kp in &frame.keypoints {
        w.write_u32::<LE>(kp.id)?;
        w.write_f32::<LE>(kp.position[0])?;
        w.write_f32::<LE>(kp.position[1])?;
        for &d in &kp.descriptor {
            w.write_f32::<LE>(d)?;
        }
    }
    Ok(())
}

/// Reads one frame whose descriptors have length `dim`.
pub fn read_frame(r: &mut impl Read, dim: usize) -> Result<Frame> {
    expect_magic(r, FRAME_MAGIC)?;
    let frame_id = r.read_u32::<LE>()?;
    let timestamp = r.read_f64::<LE>()?;
    let n = read_count(r, "keypoint")?;
    let mut keypoints = Vec::with_capacity(n);
    for _ in 0..n {
        let id = r.read_u32::<LE>()?;
        let position = [r.read_f32::<LE>()?, r.read_f32::<LE>()?];
        let mut descriptor = vec![0f32; dim];
        r.read_f32_into::<LE>(&mut descriptor)?;
        keypoints.push(Keypoint { id, position, descriptor });
    }
    Ok(Frame::new(frame_id, timestamp, keypoints)?)
}

fn frame_dim(frames: &[&Frame]) -> Result<usize> {
    let mut dim = None;
    for f in frames {
        match (dim, f.descriptor_dim()) {
            (_, None) => {}
            (None, d) => dim = d,
            (Some(a), Some(b)) if a != b => return Err(FormatError::Corrupt("mixed descriptor lengths".into())),
            _ => {}
        }
    }
    Ok(dim.unwrap_or(0))
}

/// `RNMD`, version, dims `(D, F, H, A, m+1)`, the backbone projection and
/// every trainable tensor row-major as `f32`, the initialization seed, then
/// the backbone seed.
pub fn write_model(w: &mut impl Write, model: &RoomNetModel) -> Result<()> {
    let d = model.dims;
    w.write_all(MODEL_MAGIC)?;
    w.write_u32::<LE>(MODEL_VERSION)?;
    for v in [d.descriptor, d.feature, d.hidden, d.attention, d.classes] {
        write_len(w, v)?;
    }
    for &p in model.backbone.projection.iter().chain(model.params()) {
        if p as f32 as f64 != p {
            return Err(FormatError::Corrupt("model parameter is not representable as f32".into()));
        }
        w.write_f32::<LE>(p as f32)?;
    }
    w.write_u64::<LE>(model.seed)?;
    w.write_u64::<LE>(model.backbone.seed)?;
    Ok(())
}

pub fn read_model(r: &mut impl Read) -> Result<RoomNetModel> {
    expect_magic(r, MODEL_MAGIC)?;
    let version = r.read_u32::<LE>()?;
    if version != MODEL_VERSION {
        return Err(FormatError::Version(version));
    }
    let mut dims = [0usize; 5];
    for v in &mut dims {
        *v = read_count(r, "dimension")?;
    }
    let dims = ModelDims { descriptor: dims[0], feature: dims[1], hidden: dims[2], attention: dims[3], classes: dims[4] };
    dims.validate()?;
    let read_tensor = |r: &mut dyn Read, n: usize| -> Result<Vec<f64>> {
        let mut buf = vec![0f32; n];
        r.read_f32_into::<LE>(&mut buf)?;
        Ok(buf.into_iter().map(f64::from).collect())
    };
    let projection = read_tensor(r, dims.descriptor * dims.feature)?;
    let params = read_tensor(r, roomnet_core::roomnet::Layout { dims }.len())?;
    let seed = r.read_u64::<LE>()?;
    let backbone_seed = r.read_u64::<LE>()?;
    expect_end(r)?;
    let backbone = BackboneParams { descriptor_dim: dims.descriptor, feature_dim: dims.feature, seed: backbone_seed, projection };
    Ok(RoomNetModel::from_parts(dims, backbone, params, seed)?)
}

/// `RNGR`, `m`, the `m×m` adjacency as bytes, the descriptor length, then
/// each directed edge in `(from, to)` order with its transit frames, then
/// each room's keyframes.
pub fn write_graph(w: &mut impl Write, graph: &RoomGraph) -> Result<()> {
    let m = graph.room_count();
    w.write_all(GRAPH_MAGIC)?;
    write_len(w, m)?;
    for &a in graph.adjacency() {
        w.write_u8(a as u8)?;
    }
    let all: Vec<&Frame> =
        graph.transitions().values().flatten().chain(graph.all_keyframes().iter().flatten()).collect();
    write_len(w, frame_dim(&all)?)?;
    for (&(from, to), frames) in graph.transitions() {
        write_len(w, from)?;
        write_len(w, to)?;
        write_len(w, frames.len())?;
        for f in frames {
            write_frame(w, f)?;
        }
    }
    for room in 0..m {
        let frames = graph.keyframes(room);
        write_len(w, frames.len())?;
        for f in frames {
            write_frame(w, f)?;
        }
    }
    Ok(())
}

pub fn read_graph(r: &mut impl Read, cfg: &GraphConfig) -> Result<RoomGraph> {
    expect_magic(r, GRAPH_MAGIC)?;
    let m = read_count(r, "room")?;
    if m == 0 || m > 4096 {
        return Err(FormatError::Corrupt(format!("room count {m}")));
    }
    let mut adjacency = Vec::with_capacity(m * m);
    for _ in 0..m * m {
        adjacency.push(match r.read_u8()? {
            0 => false,
            1 => true,
            b => return Err(FormatError::Corrupt(format!("adjacency byte {b}"))),
        });
    }
    let dim = read_count(r, "descriptor")?;
    let edges = adjacency.iter().filter(|&&a| a).count();
    let mut transitions = BTreeMap::new();
    for _ in 0..edges {
        let from = read_count(r, "room")?;
        let to = read_count(r, "room")?;
        let n = read_count(r, "frame")?;
        let frames = (0..n).map(|_| read_frame(r, dim)).collect::<Result<Vec<_>>>()?;
        if transitions.insert((from, to), frames).is_some() {
            return Err(FormatError::Corrupt(format!("duplicate edge {from}→{to}")));
        }
    }
    let mut keyframes = Vec::with_capacity(m);
    for _ in 0..m {
        let n = read_count(r, "frame")?;
        keyframes.push((0..n).map(|_| read_frame(r, dim)).collect::<Result<Vec<_>>>()?);
    }
    expect_end(r)?;
    Ok(RoomGraph::from_parts(m, adjacency, transitions, keyframes, &cfg.matching)?)
}

/// `RNEP`, world hash, episode seed, descriptor length, record count, then
/// per record a frame, the label byte and the pose as three `f32`.
pub fn write_episode(w: &mut impl Write, episode: &Episode) -> Result<()> {
    w.write_all(EPISODE_MAGIC)?;
    w.write_u64::<LE>(episode.world_hash)?;
    w.write_u64::<LE>(episode.seed)?;
    let frames: Vec<&Frame> = episode.frames.iter().map(|f| &f.frame).collect();
    write_len(w, frame_dim(&frames)?)?;
    write_len(w, episode.frames.len())?;
    for ef in &episode.frames {
        write_frame(w, &ef.frame)?;
        w.write_u8(ef.label.to_u8())?;
        for v in [ef.pose.x, ef.pose.y, ef.pose.theta] {
            w.write_f32::<LE>(v as f32)?;
        }
    }
    Ok(())
}

/// `fov` and `range` are not stored; they are taken from `camera`.
pub fn read_episode(r: &mut impl Read, camera: &RobotPose) -> Result<Episode> {
    expect_magic(r, EPISODE_MAGIC)?;
    let world_hash = r.read_u64::<LE>()?;
    let seed = r.read_u64::<LE>()?;
    let dim = read_count(r, "descriptor")?;
    let n = read_count(r, "record")?;
    let mut frames = Vec::with_capacity(n);
    for _ in 0..n {
        let frame = read_frame(r, dim)?;
        let label = Label::from_u8(r.read_u8()?);
        let x = r.read_f32::<LE>()? as f64;
        let y = r.read_f32::<LE>()? as f64;
        let theta = r.read_f32::<LE>()? as f64;
        frames.push(EpisodeFrame { frame, label, pose: RobotPose { x, y, theta, ..*camera } });
    }
    expect_end(r)?;
    if frames.windows(2).any(|p| p[1].frame.timestamp <= p[0].frame.timestamp) {
        return Err(FormatError::Corrupt("timestamps not increasing".into()));
    }
    Ok(Episode { frames, seed, world_hash })
}

pub fn to_bytes<T: ?Sized>(value: &T, write: impl Fn(&mut Vec<u8>, &T) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf, value)?;
    Ok(buf)
}
