//! Playback style recommendation from a predicted motion type, plus
//! applying a style to a clip's frame sequence.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clip::{Clip, PreprocessConfig};
use crate::error::{Error, Result};
use crate::model::{predict, ModelConfig, ModelParams};
use crate::rng::Rng;
use crate::synth::MotionType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaybackStyle {
    Reverse,
    Loop,
    Boomerang,
}

pub const ALL_STYLES: [PlaybackStyle; 3] =
    [PlaybackStyle::Reverse, PlaybackStyle::Loop, PlaybackStyle::Boomerang];

impl PlaybackStyle {
    pub fn name(self) -> &'static str {
        match self {
            PlaybackStyle::Reverse => "reverse",
            PlaybackStyle::Loop => "loop",
            PlaybackStyle::Boomerang => "boomerang",
        }
    }

    pub fn from_name(name: &str) -> Option<PlaybackStyle> {
        match name {
            "reverse" => Some(PlaybackStyle::Reverse),
            "loop" => Some(PlaybackStyle::Loop),
            "boomerang" => Some(PlaybackStyle::Boomerang),
            _ => None,
        }
    }
}

impl core::fmt::Display for PlaybackStyle {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Style for a motion type. Random motion picks uniformly among the
/// three styles using only `seed`, so the choice is reproducible.
pub fn recommend(motion: MotionType, seed: u64) -> PlaybackStyle {
    match motion {
        MotionType::Linear => PlaybackStyle::Reverse,
        MotionType::Projectile => PlaybackStyle::Boomerang,
        MotionType::Local | MotionType::Oscillatory => PlaybackStyle::Loop,
        MotionType::Random => ALL_STYLES[Rng::new(seed).below(3) as usize],
    }
}

/// Materialize a styled frame sequence.
///
/// Reverse keeps length L; Loop repeats the clip `loop_count` times
/// (must be at least 2); Boomerang plays forward then backward without
/// repeating the last frame, length 2L-1.
pub fn apply_style(clip: &Clip, style: PlaybackStyle, loop_count: usize) -> Result<Clip> {
    let frame_len = clip.height() * clip.width() * clip.channels();
    let t = clip.t_total();
    let (frames, t_out) = match style {
        PlaybackStyle::Reverse => return Ok(clip.reversed()),
        PlaybackStyle::Loop => {
            if loop_count < 2 {
                return Err(Error::Config(format!(
                    "loop_count must be at least 2, got {loop_count}"
                )));
            }
            let mut frames = Vec::with_capacity(clip.frames().len() * loop_count);
            for _ in 0..loop_count {
                frames.extend_from_slice(clip.frames());
            }
            (frames, t * loop_count)
        }
        PlaybackStyle::Boomerang => {
            let mut frames = Vec::with_capacity(frame_len * (2 * t).saturating_sub(1));
            frames.extend_from_slice(clip.frames());
            for ti in (0..t.saturating_sub(1)).rev() {
                frames.extend_from_slice(&clip.frames()[ti * frame_len..(ti + 1) * frame_len]);
            }
            (frames, 2 * t - 1)
        }
    };
    clip.with_frames(frames, t_out)
}

pub const DEFAULT_LOOP_COUNT: usize = 2;

/// Classify the clip, recommend a style for the predicted type, and
/// return the styled clip. The seed feeds the Random-motion style draw;
/// Loop repeats the clip DEFAULT_LOOP_COUNT times.
pub fn recommend_for_clip(
    clip: &Clip,
    params: &ModelParams<f32>,
    cfg: &ModelConfig,
    pre_cfg: &PreprocessConfig,
    seed: u64,
) -> Result<(MotionType, PlaybackStyle, Clip)> {
    let (motion, _) = predict(clip, params, cfg, pre_cfg)?;
    let style = recommend(motion, seed);
    let styled = apply_style(clip, style, DEFAULT_LOOP_COUNT)?;
    Ok((motion, style, styled))
}
