use alloc::vec::Vec;

use super::Inference;
use crate::error::{Error, Result};
use crate::graph::RoomGraph;

/// Restricts an inference to rooms reachable in one step from `prev_room`
/// (the room itself, its graph neighbours, and the always-allowed transit
/// class) and renormalizes. The input is returned unchanged when nothing is
/// masked or when the allowed classes carry no mass.
pub fn mask_with_graph(inf: &Inference, graph: &RoomGraph, prev_room: usize) -> Result<Inference> {
    let m = graph.room_count();
    if prev_room >= m {
        return Err(Error::UnknownRoom(prev_room));
    }
    if inf.probs.len() != m + 1 {
        return Err(Error::Dimension(alloc::format!(
            "inference has {} classes, graph has {m} rooms",
            inf.probs.len()
        )));
    }
    let masked: Vec<f64> = inf
        .probs
        .iter()
        .enumerate()
        .map(|(c, &p)| {
            let allowed = c == m || c == prev_room || graph.is_adjacent(prev_room, c);
            if allowed { p } else { 0.0 }
        })
        .collect();
    if masked.iter().zip(&inf.probs).all(|(a, b)| a == b) {
        return Ok(inf.clone());
    }
    let total: f64 = masked.iter().sum();
    if !(total > 0.0) {
        return Ok(inf.clone());
    }
    let probs = masked.into_iter().map(|p| p / total).collect();
    Ok(Inference::from_probs(probs, inf.timestamp))
}
