use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{accumulate_grad, forward, FrameHistory, MemoryQueues, QueueConfig, RoomNetModel};
use crate::error::{Error, Result};
use crate::features::extract_feature;
use crate::math;
use crate::rng;
use crate::sim::{Episode, Label};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
    /// Take one training example every `sample_stride` recorded frames.
    pub sample_stride: usize,
    pub queues: QueueConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            learning_rate: 0.05,
            seed: 0,
            sample_stride: 10,
            queues: QueueConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!("bad learning rate {}", self.learning_rate)));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidConfig("sample_stride must be positive".into()));
        }
        self.queues.validate()
    }
}

/// One labelled classifier input.
#[derive(Debug, Clone)]
pub struct Example {
    pub queues: MemoryQueues,
    pub label: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: RoomNetModel,
    /// Mean training loss before training (index 0) and after each epoch.
    pub loss_curve: Vec<f64>,
}

pub(crate) fn label_class(label: Label, room_count: usize) -> Result<usize> {
    match label {
        Label::Room(r) if r < room_count => Ok(r),
        Label::Room(r) => Err(Error::UnknownRoom(r)),
        Label::Transit => Ok(room_count),
    }
}

/// Replays each episode through a [`FrameHistory`] and snapshots the queues
/// every `sample_stride` frames.
pub fn build_examples(
    model: &RoomNetModel,
    episodes: &[Episode],
    queues: QueueConfig,
    sample_stride: usize,
) -> Result<Vec<Example>> {
    let room_count = model.dims.room_count();
    let mut out = Vec::new();
    for episode in episodes {
        let mut history = FrameHistory::new(queues)?;
        for (k, ef) in episode.frames.iter().enumerate() {
            let feature = extract_feature(&ef.frame, &model.backbone)?;
            history.push(ef.frame.timestamp, feature)?;
            if k % sample_stride == 0 {
                out.push(Example {
                    queues: history.queues()?,
                    label: label_class(ef.label, room_count)?,
                });
            }
        }
    }
    Ok(out)
}

fn mean_loss(model: &RoomNetModel, examples: &[Example]) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        let trace = forward(model, &ex.queues)?;
        total -= math::ln(trace.probs[ex.label].max(f64::MIN_POSITIVE));
    }
    Ok(total / examples.len() as f64)
}

/// Plain per-example SGD on cross-entropy. The backbone is never touched.
/// Parameters are snapped to `f32` at the end so the returned model is
/// exactly what a saved model file reloads to.
pub fn train(model: &RoomNetModel, episodes: &[Episode], hp: &TrainConfig) -> Result<TrainOutcome> {
    hp.validate()?;
    let examples = build_examples(model, episodes, hp.queues, hp.sample_stride)?;
    train_on_examples(model, &examples, hp)
}

pub fn train_on_examples(model: &RoomNetModel, examples: &[Example], hp: &TrainConfig) -> Result<TrainOutcome> {
    hp.validate()?;
    let classes = model.dims.classes;
    let mut counts = alloc::vec![0usize; classes];
    for ex in examples {
        if ex.label >= classes {
            return Err(Error::InvalidConfig(format!("label {} out of range", ex.label)));
        }
        counts[ex.label] += 1;
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::ClassWithoutExamples(missing));
    }

    let mut model = model.clone();
    let layout = model.layout();
    let mut shuffle = rng::rng_from(rng::derive_seed(hp.seed, 0x5348_5546));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut grad = alloc::vec![0.0; layout.len()];
    let mut loss_curve = Vec::with_capacity(hp.epochs + 1);
    loss_curve.push(mean_loss(&model, examples)?);

    for epoch in 1..=hp.epochs {
        order.shuffle(&mut shuffle);
        for &i in &order {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let ex = &examples[i];
            accumulate_grad(&layout, model.params(), &ex.queues, ex.label, &mut grad)?;
            model
                .params_mut()
                .iter_mut()
                .zip(&grad)
                .for_each(|(p, g)| *p -= hp.learning_rate * g);
        }
        let loss = mean_loss(&model, examples)?;
        if !loss.is_finite() || !model.is_finite() {
            return Err(Error::Diverged(epoch));
        }
        loss_curve.push(loss);
    }
    model.round_to_f32();
    Ok(TrainOutcome { model, loss_curve })
}
