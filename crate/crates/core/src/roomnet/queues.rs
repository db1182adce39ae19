use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::features::FrameFeature;

/// Sampling of the short-term (`n1` every `t1`) and long-term (`n2` every
/// `t2`) queues.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct QueueConfig {
    pub short_len: usize,
    pub short_interval: f64,
    pub long_len: usize,
    pub long_interval: f64,
}

impl Default for QueueConfig {
    fn default() -> Self {
        QueueConfig { short_len: 8, short_interval: 0.5, long_len: 6, long_interval: 5.0 }
    }
}

impl QueueConfig {
    pub fn validate(&self) -> Result<()> {
        if self.short_len == 0 || self.long_len == 0 {
            return Err(Error::InvalidConfig("queue lengths must be positive".into()));
        }
        if !(self.short_interval > 0.0) || !(self.long_interval > self.short_interval) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < t1 < t2, got t1 = {}, t2 = {}",
                self.short_interval, self.long_interval
            )));
        }
        Ok(())
    }

    /// How far back the long-term queue reaches.
    pub fn horizon(&self) -> f64 {
        self.long_len as f64 * self.long_interval
    }
}

/// Classifier input. Both queues are ordered oldest → newest; the newest
/// short-term entry is the current frame, the long-term queue holds strictly
/// older frames.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryQueues {
    pub short: Vec<FrameFeature>,
    pub long: Vec<FrameFeature>,
    pub current: FrameFeature,
    /// Timestamp of the current frame.
    pub timestamp: f64,
}

/// Rolling store of recent frame features from which the queues are sampled.
#[derive(Debug, Clone)]
pub struct FrameHistory {
    cfg: QueueConfig,
    entries: VecDeque<(f64, FrameFeature)>,
}

impl FrameHistory {
    pub fn new(cfg: QueueConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(FrameHistory { cfg, entries: VecDeque::new() })
    }

    pub fn config(&self) -> &QueueConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn push(&mut self, timestamp: f64, feature: FrameFeature) -> Result<()> {
        if let Some(&(last, _)) = self.entries.back() {
            if !(timestamp > last) {
                return Err(Error::StaleInput(format!(
                    "frame at t = {timestamp} is not newer than t = {last}"
                )));
            }
        }
        self.entries.push_back((timestamp, feature));
        // Keep one entry at or before the oldest sampling instant.
        let oldest_needed = timestamp - self.cfg.horizon();
        while self.entries.len() > 1 && self.entries[1].0 <= oldest_needed {
            self.entries.pop_front();
        }
        Ok(())
    }

    /// Newest entry not after `t`; before the history starts this is the
    /// oldest entry, which pads the queues during warm-up.
    fn sample(&self, t: f64) -> &FrameFeature {
        let idx = self.entries.partition_point(|(ts, _)| *ts <= t + 1e-9);
        &self.entries[idx.saturating_sub(1)].1
    }

    pub fn queues(&self) -> Result<MemoryQueues> {
        let &(now, ref current) = self.entries.back().ok_or(Error::EmptyShortTermQueue)?;
        let short = (0..self.cfg.short_len)
            .rev()
            .map(|k| self.sample(now - k as f64 * self.cfg.short_interval).clone())
            .collect();
        let long = (1..=self.cfg.long_len)
            .rev()
            .map(|k| self.sample(now - k as f64 * self.cfg.long_interval).clone())
            .collect();
        Ok(MemoryQueues { short, long, current: current.clone(), timestamp: now })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(v: f64) -> FrameFeature {
        FrameFeature(alloc::vec![v])
    }

    #[test]
    fn warm_up_pads_with_oldest() {
        let mut h = FrameHistory::new(QueueConfig::default()).unwrap();
        h.push(0.0, f(1.0)).unwrap();
        h.push(0.1, f(2.0)).unwrap();
        let q = h.queues().unwrap();
        assert_eq!(q.short.len(), 8);
        assert_eq!(q.long.len(), 6);
        assert_eq!(q.short.last().unwrap(), &f(2.0));
        assert!(q.short[..7].iter().all(|x| x == &f(1.0)));
        assert!(q.long.iter().all(|x| x == &f(1.0)));
    }

    #[test]
    fn samples_at_intervals() {
        let cfg = QueueConfig { short_len: 3, short_interval: 0.5, long_len: 2, long_interval: 2.0 };
        let mut h = FrameHistory::new(cfg).unwrap();
        for k in 0..100 {
            let t = k as f64 * 0.1;
            h.push(t, f(t)).unwrap();
        }
        let q = h.queues().unwrap();
        let got: Vec<f64> = q.short.iter().map(|x| x.0[0]).collect();
        assert!((got[0] - 8.9).abs() < 1e-9 && (got[1] - 9.4).abs() < 1e-9 && (got[2] - 9.9).abs() < 1e-9);
        let got: Vec<f64> = q.long.iter().map(|x| x.0[0]).collect();
        assert!((got[0] - 5.9).abs() < 1e-9 && (got[1] - 7.9).abs() < 1e-9);
        assert!(h.len() < 60);
    }

    #[test]
    fn rejects_non_increasing_time_and_bad_config() {
        let mut h = FrameHistory::new(QueueConfig::default()).unwrap();
        h.push(1.0, f(0.0)).unwrap();
        assert!(h.push(1.0, f(0.0)).is_err());
        let bad = QueueConfig { long_interval: 0.5, ..QueueConfig::default() };
        assert!(FrameHistory::new(bad).is_err());
    }
}
