//! Motion-type classification core.
//!
//! Everything algorithmic lives here: a small dense tensor with explicit
//! forward/backward ops, the temporal-shift segment classifier, the
//! flow-statistics baseline, synthetic clip generation, feature retrieval
//! and the playback-style recommender. No IO; the companion `mtc` crate
//! carries file formats and the CLI.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod baseline;
pub mod clip;
pub mod error;
pub mod gradcheck;
pub mod label_map;
pub mod model;
pub mod ops;
pub mod recommend;
pub mod retrieval;
pub mod rng;
pub mod sgd;
pub mod synth;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use synth::MotionType;
pub use tensor::Tensor;
