//! Short-term memory path: a single-layer LSTM over the short-term queue.
//!
//! ```text
//! i = σ(Wᵢx + Uᵢh + bᵢ)   f = σ(W_f x + U_f h + b_f)   o = σ(W_o x + U_o h + b_o)
//! g = tanh(W_g x + U_g h + b_g)
//! c' = f ⊙ c + i ⊙ g      h' = o ⊙ tanh(c')
//! ```

use alloc::vec::Vec;

use super::model::{Gate, Layout};
use crate::error::{Error, Result};
use crate::features::FrameFeature;
use crate::math;

/// Activations of one time step, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct LstmStep {
    pub input: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Post-activation gate values, indexed by [`Gate`].
    pub gates: [Vec<f64>; 4],
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmTrace {
    pub steps: Vec<LstmStep>,
}

impl LstmTrace {
    /// Final hidden state.
    pub fn hidden(&self) -> &[f64] {
        &self.steps.last().expect("trace is never empty").h
    }
}

pub fn lstm_forward(layout: &Layout, params: &[f64], seq: &[FrameFeature]) -> Result<LstmTrace> {
    if seq.is_empty() {
        return Err(Error::EmptyShortTermQueue);
    }
    let hdim = layout.dims.hidden;
    let mut h = alloc::vec![0.0; hdim];
    let mut c = alloc::vec![0.0; hdim];
    let mut steps = Vec::with_capacity(seq.len());
    for x in seq {
        if x.dim() != layout.dims.feature {
            return Err(Error::Dimension(alloc::format!(
                "feature length {} but model expects {}",
                x.dim(),
                layout.dims.feature
            )));
        }
        let gates = Gate::ALL.map(|g| {
            let mut pre = params[layout.bias(g)].to_vec();
            math::matvec_acc(&params[layout.input_weights(g)], x.as_slice(), &mut pre);
            math::matvec_acc(&params[layout.recurrent_weights(g)], &h, &mut pre);
            match g {
                Gate::Candidate => pre.iter_mut().for_each(|v| *v = math::tanh(*v)),
                _ => pre.iter_mut().for_each(|v| *v = math::sigmoid(*v)),
            }
            pre
        });
        let [i, f, o, g] = &gates;
        let c_new: Vec<f64> = (0..hdim).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
        let h_new: Vec<f64> = (0..hdim).map(|k| o[k] * math::tanh(c_new[k])).collect();
        steps.push(LstmStep {
            input: x.0.clone(),
            h_prev: core::mem::replace(&mut h, h_new.clone()),
            c_prev: core::mem::replace(&mut c, c_new.clone()),
            gates,
            c: c_new,
            h: h_new,
        });
    }
    Ok(LstmTrace { steps })
}

/// Backpropagation through time. `d_hidden` is the loss gradient w.r.t. the
/// final hidden state; parameter gradients accumulate into `grad`.
pub fn lstm_backward(layout: &Layout, params: &[f64], trace: &LstmTrace, d_hidden: &[f64], grad: &mut [f64]) {
    let hdim = layout.dims.hidden;
    let mut dh = d_hidden.to_vec();
    let mut dc = alloc::vec![0.0; hdim];
    for step in trace.steps.iter().rev() {
        let [i, f, o, g] = &step.gates;
        let mut d_pre: [Vec<f64>; 4] = core::array::from_fn(|_| alloc::vec![0.0; hdim]);
        for k in 0..hdim {
            let tc = math::tanh(step.c[k]);
            let d_o = dh[k] * tc;
            dc[k] += dh[k] * o[k] * (1.0 - tc * tc);
            let d_i = dc[k] * g[k];
            let d_g = dc[k] * i[k];
            let d_f = dc[k] * step.c_prev[k];
            d_pre[Gate::Input as usize][k] = d_i * i[k] * (1.0 - i[k]);
            d_pre[Gate::Forget as usize][k] = d_f * f[k] * (1.0 - f[k]);
            d_pre[Gate::Output as usize][k] = d_o * o[k] * (1.0 - o[k]);
            d_pre[Gate::Candidate as usize][k] = d_g * (1.0 - g[k] * g[k]);
            dc[k] *= f[k];
        }
        let mut dh_prev = alloc::vec![0.0; hdim];
        for gate in Gate::ALL {
            let da = &d_pre[gate as usize];
            math::outer_acc(&mut grad[layout.input_weights(gate)], da, &step.input);
            math::outer_acc(&mut grad[layout.recurrent_weights(gate)], da, &step.h_prev);
            grad[layout.bias(gate)].iter_mut().zip(da).for_each(|(gb, d)| *gb += d);
            math::matvec_t_acc(&params[layout.recurrent_weights(gate)], da, &mut dh_prev);
        }
        dh = dh_prev;
    }
}
