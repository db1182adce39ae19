//! File formats, configuration, the closed-loop mission runner and the
//! map/train/navigate/eval pipeline on top of `roomnet-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod format;
pub mod mission;
pub mod pipeline;
