//! The room classifier: an LSTM over the short-term queue and attention
//! over the long-term queue, concatenated into a softmax over `m` rooms plus
//! one transit class.

pub mod attention;
pub mod lstm;
mod mask;
pub mod model;
mod queues;
mod train;

use alloc::vec::Vec;

pub use mask::mask_with_graph;
pub use model::{Gate, Layout, ModelDims, RoomNetModel};
pub use queues::{FrameHistory, MemoryQueues, QueueConfig};
pub use train::{build_examples, train, train_on_examples, Example, TrainConfig, TrainOutcome};

use crate::error::{Error, Result};
use crate::math;

/// Classifier output: a distribution over `m + 1` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub probs: Vec<f64>,
    /// Argmax class; equals `probs.len() - 1` when the transit class wins.
    pub room_id: usize,
    /// `probs[room_id]`.
    pub p_m: f64,
    /// Timestamp of the frame the inference was computed for.
    pub timestamp: f64,
}

impl Inference {
    pub fn from_probs(probs: Vec<f64>, timestamp: f64) -> Self {
        let room_id = math::argmax(&probs);
        let p_m = probs[room_id];
        Inference { probs, room_id, p_m, timestamp }
    }

    pub fn transit_class(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn is_transit(&self) -> bool {
        self.room_id == self.transit_class()
    }

    /// The argmax as a room id, or `None` for transit.
    pub fn room(&self) -> Option<usize> {
        (!self.is_transit()).then_some(self.room_id)
    }
}

pub(crate) struct ForwardTrace {
    pub lstm: lstm::LstmTrace,
    pub attention: attention::AttentionTrace,
    pub joint: Vec<f64>,
    pub probs: Vec<f64>,
}

pub(crate) fn forward(model: &RoomNetModel, queues: &MemoryQueues) -> Result<ForwardTrace> {
    forward_with(&model.layout(), model.params(), queues)
}

fn forward_with(layout: &Layout, params: &[f64], queues: &MemoryQueues) -> Result<ForwardTrace> {
    let lstm = lstm::lstm_forward(layout, params, &queues.short)?;
    let attention = attention::attention_forward(layout, params, &queues.long, &queues.current)?;
    let mut joint = Vec::with_capacity(layout.dims.hidden + layout.dims.attention);
    joint.extend_from_slice(lstm.hidden());
    joint.extend_from_slice(&attention.output);
    let mut logits = params[layout.head_bias()].to_vec();
    math::matvec_acc(&params[layout.head_weights()], &joint, &mut logits);
    let probs = math::softmax(&logits);
    Ok(ForwardTrace { lstm, attention, joint, probs })
}

pub fn infer(model: &RoomNetModel, queues: &MemoryQueues) -> Result<Inference> {
    let trace = forward(model, queues)?;
    Ok(Inference::from_probs(trace.probs, queues.timestamp))
}

/// Cross-entropy loss of one labelled example and its gradient with respect
/// to every trainable parameter (backbone excluded).
pub fn loss_and_grad(model: &RoomNetModel, queues: &MemoryQueues, label: usize) -> Result<(f64, Vec<f64>)> {
    let mut grad = alloc::vec![0.0; model.params().len()];
    let loss = accumulate_grad(&model.layout(), model.params(), queues, label, &mut grad)?;
    Ok((loss, grad))
}

pub(crate) fn accumulate_grad(
    layout: &Layout,
    params: &[f64],
    queues: &MemoryQueues,
    label: usize,
    grad: &mut [f64],
) -> Result<f64> {
    if label >= layout.dims.classes {
        return Err(Error::InvalidConfig(alloc::format!("label {label} out of range")));
    }
    let trace = forward_with(layout, params, queues)?;
    let loss = -math::ln(trace.probs[label].max(f64::MIN_POSITIVE));

    let mut d_logits = trace.probs.clone();
    d_logits[label] -= 1.0;
    math::outer_acc(&mut grad[layout.head_weights()], &d_logits, &trace.joint);
    grad[layout.head_bias()].iter_mut().zip(&d_logits).for_each(|(g, d)| *g += d);
    let mut d_joint = alloc::vec![0.0; trace.joint.len()];
    math::matvec_t_acc(&params[layout.head_weights()], &d_logits, &mut d_joint);
    let (d_hidden, d_context) = d_joint.split_at(layout.dims.hidden);

    lstm::lstm_backward(layout, params, &trace.lstm, d_hidden, grad);
    attention::attention_backward(layout, &trace.attention, &queues.long, &queues.current, d_context, grad);
    Ok(loss)
}

/// Loss only; used by finite-difference checks.
pub fn loss(model: &RoomNetModel, queues: &MemoryQueues, label: usize) -> Result<f64> {
    let trace = forward(model, queues)?;
    Ok(-math::ln(trace.probs[label].max(f64::MIN_POSITIVE)))
}
