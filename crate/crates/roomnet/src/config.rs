//! Run configuration, read from TOML. Every field has a default, so an
//! empty file (or none at all) describes the default experiment.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use roomnet_core::graph::GraphConfig;
use roomnet_core::rng::derive_seed;
use roomnet_core::sim::{RecordConfig, WorldSpec};
use roomnet_core::{PolicyConfig, QueueConfig, TrainConfig, World};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every other seed is derived from it.
    pub seed: u64,
    /// World spec file (TOML). The default 4-room world when absent.
    pub world: Option<PathBuf>,
    /// Episodes recorded by `map`; the first `mapping_episodes` build the graph.
    pub episodes: usize,
    pub mapping_episodes: usize,
    pub record: RecordConfig,
    pub graph: GraphConfig,
    pub queues: QueueConfig,
    pub train: TrainSection,
    pub policy: PolicyConfig,
    pub navigate: NavigateSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub learning_rate: f64,
    pub sample_stride: usize,
    pub hidden: usize,
    pub attention: usize,
    pub feature: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection { epochs: t.epochs, learning_rate: t.learning_rate, sample_stride: t.sample_stride, hidden: 32, attention: 32, feature: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavigateSection {
    pub start_room: usize,
    pub goal_room: usize,
    /// Control period in seconds.
    pub dt: f64,
    pub max_steps: usize,
    /// Random offset of the start pose from the room centre, in metres.
    pub start_jitter: f64,
}

impl Default for NavigateSection {
    fn default() -> Self {
        NavigateSection { start_room: 0, goal_room: 3, dt: 0.1, max_steps: 2500, start_jitter: 0.4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub trials: usize,
    /// Perturbation levels; each applies `p = q = level` after mapping.
    pub perturb: Vec<f64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { trials: 100, perturb: vec![0.0, 0.1, 0.3] }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            world: None,
            episodes: 20,
            mapping_episodes: 4,
            record: RecordConfig::default(),
            graph: GraphConfig::default(),
            queues: QueueConfig::default(),
            train: TrainSection::default(),
            policy: PolicyConfig::default(),
            navigate: NavigateSection::default(),
            eval: EvalSection::default(),
        }
    }
}

/// Named sub-seeds.
pub mod stream {
    pub const WORLD: u64 = 1;
    pub const BACKBONE: u64 = 2;
    pub const MODEL: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const EPISODE: u64 = 5;
    pub const TOUR: u64 = 6;
    pub const TRIAL: u64 = 7;
    pub const PERTURB: u64 = 8;
    pub const GOAL: u64 = 9;
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(world) = &cfg.world {
            if world.is_relative() {
                cfg.world = Some(path.parent().unwrap_or(Path::new(".")).join(world));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.mapping_episodes == 0 || self.mapping_episodes > self.episodes {
            bail!("need 1 ≤ mapping_episodes ≤ episodes");
        }
        self.queues.validate()?;
        self.policy.validate()?;
        self.train_config().validate()?;
        if !(self.navigate.dt > 0.0) || self.navigate.max_steps == 0 {
            bail!("navigate: dt and max_steps must be positive");
        }
        if self.eval.perturb.iter().any(|p| !(0.0..=1.0).contains(p)) {
            bail!("eval: perturbation levels must lie in [0, 1]");
        }
        if !(self.graph.transition_window >= 0.0 && self.graph.keyframe_interval >= 0.0) {
            bail!("graph: windows must be non-negative");
        }
        Ok(())
    }

    pub fn derive(&self, stream: u64) -> u64 {
        derive_seed(self.seed, stream)
    }

    pub fn world_spec(&self) -> Result<WorldSpec> {
        match &self.world {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
            }
            None => Ok(WorldSpec::default_world(self.derive(stream::WORLD))),
        }
    }

    pub fn build_world(&self) -> Result<World> {
        Ok(World::new(self.world_spec()?)?)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            learning_rate: self.train.learning_rate,
            seed: self.derive(stream::SHUFFLE),
            sample_stride: self.train.sample_stride,
            queues: self.queues,
        }
    }
}
