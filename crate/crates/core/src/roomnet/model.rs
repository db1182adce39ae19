use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use crate::error::{Error, Result};
use crate::features::{BackboneParams, DEFAULT_DESCRIPTOR_DIM, DEFAULT_FEATURE_DIM};
use crate::rng;

pub const DEFAULT_HIDDEN_DIM: usize = 32;
pub const DEFAULT_ATTENTION_DIM: usize = 32;

/// Network dimensions. `classes = m + 1`: rooms `0..m` plus the transit class
/// at index `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub descriptor: usize,
    pub feature: usize,
    pub hidden: usize,
    pub attention: usize,
    pub classes: usize,
}

impl ModelDims {
    pub fn for_rooms(room_count: usize) -> Self {
        ModelDims {
            descriptor: DEFAULT_DESCRIPTOR_DIM,
            feature: DEFAULT_FEATURE_DIM,
            hidden: DEFAULT_HIDDEN_DIM,
            attention: DEFAULT_ATTENTION_DIM,
            classes: room_count + 1,
        }
    }

    pub fn room_count(&self) -> usize {
        self.classes - 1
    }

    pub fn transit_class(&self) -> usize {
        self.classes - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.descriptor == 0 || self.feature == 0 || self.hidden == 0 || self.attention == 0 {
            return Err(Error::Dimension(format!("zero-sized dimension in {self:?}")));
        }
        if self.classes < 2 {
            return Err(Error::Dimension(format!("need at least one room, got {self:?}")));
        }
        Ok(())
    }
}

/// LSTM gate order used throughout the parameter layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Candidate];
}

/// Offsets of every trainable tensor inside the flat parameter vector.
///
/// Order: LSTM input weights (4 gates, `H×F`), recurrent weights (4, `H×H`),
/// biases (4, `H`), attention query/key/value (`A×F` each), head weights
/// (`C×(H+A)`), head bias (`C`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub dims: ModelDims,
}

impl Layout {
    fn hf(&self) -> usize {
        self.dims.hidden * self.dims.feature
    }
    fn hh(&self) -> usize {
        self.dims.hidden * self.dims.hidden
    }
    fn af(&self) -> usize {
        self.dims.attention * self.dims.feature
    }

    pub fn input_weights(&self, g: Gate) -> Range<usize> {
        let s = g as usize * self.hf();
        s..s + self.hf()
    }

    pub fn recurrent_weights(&self, g: Gate) -> Range<usize> {
        let s = 4 * self.hf() + g as usize * self.hh();
        s..s + self.hh()
    }

    pub fn bias(&self, g: Gate) -> Range<usize> {
        let s = 4 * (self.hf() + self.hh()) + g as usize * self.dims.hidden;
        s..s + self.dims.hidden
    }

    fn attention_base(&self) -> usize {
        4 * (self.hf() + self.hh() + self.dims.hidden)
    }

    pub fn query(&self) -> Range<usize> {
        let s = self.attention_base();
        s..s + self.af()
    }

    pub fn key(&self) -> Range<usize> {
        let s = self.attention_base() + self.af();
        s..s + self.af()
    }

    pub fn value(&self) -> Range<usize> {
        let s = self.attention_base() + 2 * self.af();
        s..s + self.af()
    }

    pub fn head_weights(&self) -> Range<usize> {
        let s = self.attention_base() + 3 * self.af();
        s..s + self.dims.classes * (self.dims.hidden + self.dims.attention)
    }

    pub fn head_bias(&self) -> Range<usize> {
        let s = self.head_weights().end;
        s..s + self.dims.classes
    }

    pub fn len(&self) -> usize {
        self.head_bias().end
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every tensor in storage order, for serialization.
    pub fn tensors(&self) -> Vec<Range<usize>> {
        let mut out = Vec::with_capacity(17);
        out.extend(Gate::ALL.iter().map(|&g| self.input_weights(g)));
        out.extend(Gate::ALL.iter().map(|&g| self.recurrent_weights(g)));
        out.extend(Gate::ALL.iter().map(|&g| self.bias(g)));
        out.extend([self.query(), self.key(), self.value(), self.head_weights(), self.head_bias()]);
        out
    }
}

/// Frozen backbone plus the trainable LSTM, attention and softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomNetModel {
    pub dims: ModelDims,
    pub backbone: BackboneParams,
    params: Vec<f64>,
    /// Seed the trainable parameters were initialized from.
    pub seed: u64,
}

impl RoomNetModel {
    /// Weights uniform in `(-0.1, 0.1)`, biases zero except the forget gate
    /// bias at `+1`.
    pub fn new(dims: ModelDims, backbone_seed: u64, seed: u64) -> Result<Self> {
        dims.validate()?;
        let backbone = BackboneParams::from_seed(backbone_seed, dims.descriptor, dims.feature);
        Self::with_backbone(dims, backbone, seed)
    }

    pub fn with_backbone(dims: ModelDims, backbone: BackboneParams, seed: u64) -> Result<Self> {
        dims.validate()?;
        if backbone.descriptor_dim != dims.descriptor || backbone.feature_dim != dims.feature {
            return Err(Error::Dimension(format!(
                "backbone {}→{} does not fit model dims {dims:?}",
                backbone.descriptor_dim, backbone.feature_dim
            )));
        }
        let layout = Layout { dims };
        let mut r = rng::rng_from(seed);
        let mut params = alloc::vec![0.0; layout.len()];
        let bias_ranges = [
            layout.bias(Gate::Input),
            layout.bias(Gate::Forget),
            layout.bias(Gate::Output),
            layout.bias(Gate::Candidate),
            layout.head_bias(),
        ];
        for range in layout.tensors() {
            if bias_ranges.contains(&range) {
                continue;
            }
            for p in &mut params[range] {
                *p = r.random_range(-0.1..0.1);
            }
        }
        params[layout.bias(Gate::Forget)].iter_mut().for_each(|b| *b = 1.0);
        let mut model = RoomNetModel { dims, backbone, params, seed };
        model.round_to_f32();
        Ok(model)
    }

    /// Rebuild from stored tensors (e.g. a model file).
    pub fn from_parts(
        dims: ModelDims,
        backbone: BackboneParams,
        params: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        dims.validate()?;
        let layout = Layout { dims };
        if params.len() != layout.len() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                layout.len(),
                params.len()
            )));
        }
        if backbone.projection.len() != dims.descriptor * dims.feature {
            return Err(Error::Dimension("backbone projection size".into()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("non-finite model parameter".into()));
        }
        Ok(RoomNetModel { dims, backbone, params, seed })
    }

    pub fn layout(&self) -> Layout {
        Layout { dims: self.dims }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Snap every trainable parameter to the nearest `f32`, the precision of
    /// the model file.
    pub fn round_to_f32(&mut self) {
        self.params.iter_mut().for_each(|p| *p = *p as f32 as f64);
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}
