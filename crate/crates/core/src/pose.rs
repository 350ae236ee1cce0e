//! Significant-activity detection and joint-angle statistics.
//!
//! A frame is significantly active when its moving-pixel count exceeds T2.
//! Over the active frames ten joint angles are tracked and summarised by
//! eight statistics each, giving an 80-dimensional vector.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Joint, PoseFrame};
use crate::error::{Error, Result};
use crate::util::{mean, population_std, sorted_quantile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseConfig {
    pub t1_pixel_threshold: u32,
    pub activity_proportion: f64,
    /// Target-side T2 per participant stream; otherwise the training corpus T2.
    pub per_interaction_t2: bool,
}

impl Default for PoseConfig {
    fn default() -> Self {
        PoseConfig {
            t1_pixel_threshold: 30,
            activity_proportion: 0.081,
            per_interaction_t2: true,
        }
    }
}

impl PoseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.activity_proportion > 0.0 && self.activity_proportion < 1.0) {
            return Err(Error::Config(format!(
                "activity_proportion must lie in (0, 1), got {}",
                self.activity_proportion
            )));
        }
        Ok(())
    }
}

/// 8-bit greyscale image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayFrame {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

/// Reads a binary PGM (P5) frame.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayFrame> {
    let path = path.as_ref();
    let img = image::ImageReader::open(path)
        .map_err(|source| Error::Load {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| Error::Load {
            path: path.to_path_buf(),
            source,
        })?
        .decode()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?
        .into_luma8();
    Ok(GrayFrame {
        width: img.width(),
        height: img.height(),
        pixels: img.into_raw(),
    })
}

/// `count[0] = 0`; `count[f]` is the number of pixels with
/// `|frame[f] - frame[f-1]| > t1`.
pub fn moving_pixel_counts(frames: &[GrayFrame], t1: u32) -> Result<Vec<u32>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Argument("no frames".into()))?;
    if frames
        .iter()
        .any(|f| f.width != first.width || f.height != first.height || f.pixels.len() != first.pixels.len())
    {
        return Err(Error::Argument("frames differ in shape".into()));
    }
    let mut counts = Vec::with_capacity(frames.len());
    counts.push(0);
    for pair in frames.windows(2) {
        let moving = pair[0]
            .pixels
            .iter()
            .zip(&pair[1].pixels)
            .filter(|(a, b)| u32::from(a.abs_diff(**b)) > t1)
            .count();
        counts.push(moving as u32);
    }
    Ok(counts)
}

/// Smallest T2 whose flagged proportion (`count > T2`) does not exceed
/// `proportion`.
pub fn activity_threshold(counts: &[u32], proportion: f64) -> u32 {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    // Tolerate representation error in proportion * n (0.081 * 1000 etc.).
    let allowed = (proportion * sorted.len() as f64 + 1e-9).floor() as usize;
    if allowed >= sorted.len() {
        return 0;
    }
    sorted[allowed]
}

pub fn significant_activity_mask(
    counts: &[u32],
    config: &PoseConfig,
    t2_override: Option<u32>,
) -> Result<(Vec<bool>, u32)> {
    if counts.is_empty() {
        return Err(Error::Argument("empty motion stream".into()));
    }
    config.validate()?;
    let t2 = t2_override.unwrap_or_else(|| activity_threshold(counts, config.activity_proportion));
    Ok((counts.iter().map(|&c| c > t2).collect(), t2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngleChannel {
    HeadTilt,
    ShoulderTilt,
    RightShoulderElbow,
    RightElbowWrist,
    LeftShoulderElbow,
    LeftElbowWrist,
    RightUpperArmVertical,
    LeftUpperArmVertical,
    RightForearmVertical,
    LeftForearmVertical,
}

const UP: (f64, f64) = (0.0, -1.0);
const DOWN: (f64, f64) = (0.0, 1.0);
const HORIZONTAL: (f64, f64) = (1.0, 0.0);

/// How a channel is measured: either a segment against a fixed image
/// direction, or two chained segments `a->b` and `b->c`.
enum ChannelGeometry {
    Fixed { from: Joint, to: Joint, reference: (f64, f64) },
    Chain(Joint, Joint, Joint),
}

impl AngleChannel {
    pub const ALL: [AngleChannel; 10] = [
        AngleChannel::HeadTilt,
        AngleChannel::ShoulderTilt,
        AngleChannel::RightShoulderElbow,
        AngleChannel::RightElbowWrist,
        AngleChannel::LeftShoulderElbow,
        AngleChannel::LeftElbowWrist,
        AngleChannel::RightUpperArmVertical,
        AngleChannel::LeftUpperArmVertical,
        AngleChannel::RightForearmVertical,
        AngleChannel::LeftForearmVertical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AngleChannel::HeadTilt => "head_vertical",
            AngleChannel::ShoulderTilt => "shoulders_horizontal",
            AngleChannel::RightShoulderElbow => "r_neck_shoulder_elbow",
            AngleChannel::RightElbowWrist => "r_shoulder_elbow_wrist",
            AngleChannel::LeftShoulderElbow => "l_neck_shoulder_elbow",
            AngleChannel::LeftElbowWrist => "l_shoulder_elbow_wrist",
            AngleChannel::RightUpperArmVertical => "r_upper_arm_vertical",
            AngleChannel::LeftUpperArmVertical => "l_upper_arm_vertical",
            AngleChannel::RightForearmVertical => "r_forearm_vertical",
            AngleChannel::LeftForearmVertical => "l_forearm_vertical",
        }
    }

    fn geometry(self) -> ChannelGeometry {
        use ChannelGeometry::*;
        use Joint::*;
        match self {
            // Upright head is 0; a hanging arm is 0.
            AngleChannel::HeadTilt => Fixed { from: Neck, to: Nose, reference: UP },
            AngleChannel::ShoulderTilt => Fixed { from: RightShoulder, to: LeftShoulder, reference: HORIZONTAL },
            AngleChannel::RightShoulderElbow => Chain(Neck, RightShoulder, RightElbow),
            AngleChannel::RightElbowWrist => Chain(RightShoulder, RightElbow, RightWrist),
            AngleChannel::LeftShoulderElbow => Chain(Neck, LeftShoulder, LeftElbow),
            AngleChannel::LeftElbowWrist => Chain(LeftShoulder, LeftElbow, LeftWrist),
            AngleChannel::RightUpperArmVertical => Fixed { from: RightShoulder, to: RightElbow, reference: DOWN },
            AngleChannel::LeftUpperArmVertical => Fixed { from: LeftShoulder, to: LeftElbow, reference: DOWN },
            AngleChannel::RightForearmVertical => Fixed { from: RightElbow, to: RightWrist, reference: DOWN },
            AngleChannel::LeftForearmVertical => Fixed { from: LeftElbow, to: LeftWrist, reference: DOWN },
        }
    }

    /// Unit direction the channel's fixed-reference angle is measured from,
    /// `None` for inter-segment channels.
    pub fn reference(self) -> Option<(f64, f64)> {
        match self.geometry() {
            ChannelGeometry::Fixed { reference, .. } => Some(reference),
            ChannelGeometry::Chain(..) => None,
        }
    }
}

pub const POSE_STATS: [&str; 8] = [
    "mean",
    "std",
    "min",
    "max",
    "median",
    "iqr",
    "delta_abs_mean",
    "delta_std",
];

pub const POSE_DIM: usize = 80;

/// Feature names in vector order: channel-major, statistic-minor.
pub fn pose_feature_names() -> Vec<String> {
    AngleChannel::ALL
        .iter()
        .flat_map(|c| POSE_STATS.iter().map(move |s| format!("{}_{}", c.name(), s)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseVector(pub Vec<f64>);

/// Unsigned angle between two vectors in `[0, pi]`; `None` if either is zero.
pub fn unsigned_angle(u: (f64, f64), v: (f64, f64)) -> Option<f64> {
    if (u.0 == 0.0 && u.1 == 0.0) || (v.0 == 0.0 && v.1 == 0.0) {
        return None;
    }
    let dot = u.0 * v.0 + u.1 * v.1;
    let cross = u.0 * v.1 - u.1 * v.0;
    Some(cross.abs().atan2(dot))
}

fn joint_xy(frame: &PoseFrame, joint: Joint) -> Option<(f64, f64)> {
    frame[joint.index()]
        .filter(|kp| kp.confidence > 0.0)
        .map(|kp| (kp.x, kp.y))
}

fn segment(frame: &PoseFrame, from: Joint, to: Joint) -> Option<(f64, f64)> {
    let a = joint_xy(frame, from)?;
    let b = joint_xy(frame, to)?;
    Some((b.0 - a.0, b.1 - a.1))
}

pub fn channel_angle(frame: &PoseFrame, channel: AngleChannel) -> Option<f64> {
    match channel.geometry() {
        ChannelGeometry::Fixed { from, to, reference } => unsigned_angle(segment(frame, from, to)?, reference),
        ChannelGeometry::Chain(a, b, c) => unsigned_angle(segment(frame, a, b)?, segment(frame, b, c)?),
    }
}

fn channel_statistics(values: &[f64]) -> [f64; 8] {
    if values.is_empty() {
        return [0.0; 8];
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let deltas: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let abs_deltas: Vec<f64> = deltas.iter().map(|d| d.abs()).collect();
    [
        mean(values),
        population_std(values),
        sorted[0],
        sorted[sorted.len() - 1],
        sorted_quantile(&sorted, 0.5),
        sorted_quantile(&sorted, 0.75) - sorted_quantile(&sorted, 0.25),
        mean(&abs_deltas),
        population_std(&deltas),
    ]
}

/// Angle statistics over the frames selected by `mask`.
pub fn compute_pose_features(frames: &[PoseFrame], mask: &[bool]) -> Result<PoseVector> {
    if frames.len() != mask.len() {
        return Err(Error::Argument(format!(
            "mask has {} frames, pose stream has {}",
            mask.len(),
            frames.len()
        )));
    }
    let mut out = Vec::with_capacity(POSE_DIM);
    for channel in AngleChannel::ALL {
        let values: Vec<f64> = frames
            .iter()
            .zip(mask)
            .filter(|(_, &active)| active)
            .filter_map(|(frame, _)| channel_angle(frame, channel))
            .collect();
        out.extend(channel_statistics(&values));
    }
    Ok(PoseVector(out))
}
