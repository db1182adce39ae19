//! Long-term memory path: scaled dot-product attention of the current frame
//! over the long-term queue, `softmax(q·kᵀ/√A)·v`.

use alloc::vec::Vec;

use super::model::Layout;
use crate::error::{Error, Result};
use crate::features::FrameFeature;
use crate::math;

#[derive(Debug, Clone)]
pub struct AttentionTrace {
    pub query: Vec<f64>,
    pub keys: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub output: Vec<f64>,
}

fn project(layout: &Layout, w: &[f64], x: &[f64]) -> Vec<f64> {
    let mut out = alloc::vec![0.0; layout.dims.attention];
    math::matvec_acc(w, x, &mut out);
    out
}

pub fn attention_forward(
    layout: &Layout,
    params: &[f64],
    context: &[FrameFeature],
    current: &FrameFeature,
) -> Result<AttentionTrace> {
    if context.is_empty() {
        return Err(Error::EmptyLongTermQueue);
    }
    let f = layout.dims.feature;
    if current.dim() != f || context.iter().any(|c| c.dim() != f) {
        return Err(Error::Dimension(alloc::format!("attention inputs must have length {f}")));
    }
    let scale = 1.0 / math::sqrt(layout.dims.attention as f64);
    let query = project(layout, &params[layout.query()], current.as_slice());
    let keys: Vec<Vec<f64>> = context
        .iter()
        .map(|c| project(layout, &params[layout.key()], c.as_slice()))
        .collect();
    let values: Vec<Vec<f64>> = context
        .iter()
        .map(|c| project(layout, &params[layout.value()], c.as_slice()))
        .collect();
    let scores: Vec<f64> = keys.iter().map(|k| math::dot(&query, k) * scale).collect();
    let weights = math::softmax(&scores);
    let mut output = alloc::vec![0.0; layout.dims.attention];
    for (w, v) in weights.iter().zip(&values) {
        output.iter_mut().zip(v).for_each(|(o, x)| *o += w * x);
    }
    Ok(AttentionTrace { query, keys, values, weights, output })
}

pub fn attention_backward(
    layout: &Layout,
    trace: &AttentionTrace,
    context: &[FrameFeature],
    current: &FrameFeature,
    d_output: &[f64],
    grad: &mut [f64],
) {
    let scale = 1.0 / math::sqrt(layout.dims.attention as f64);
    let d_weights: Vec<f64> = trace.values.iter().map(|v| math::dot(d_output, v)).collect();
    let mean: f64 = trace.weights.iter().zip(&d_weights).map(|(a, d)| a * d).sum();
    let mut d_query = alloc::vec![0.0; layout.dims.attention];
    for (j, ctx) in context.iter().enumerate() {
        let alpha = trace.weights[j];
        let d_score = alpha * (d_weights[j] - mean);
        let d_value: Vec<f64> = d_output.iter().map(|d| alpha * d).collect();
        let d_key: Vec<f64> = trace.query.iter().map(|q| d_score * q * scale).collect();
        d_query.iter_mut().zip(&trace.keys[j]).for_each(|(dq, k)| *dq += d_score * k * scale);
        math::outer_acc(&mut grad[layout.value()], &d_value, ctx.as_slice());
        math::outer_acc(&mut grad[layout.key()], &d_key, ctx.as_slice());
    }
    math::outer_acc(&mut grad[layout.query()], &d_query, current.as_slice());
}
