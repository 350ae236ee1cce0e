//! Synthetic corpora with a planted emergent leader.
//!
//! The leader is watched more, speaks in longer and more frequent turns,
//! gestures more widely and more often, and smiles more. All of these
//! tendencies scale with `effect_size`; at 0 the leader is indistinguishable
//! from the others.

mod oracle;

pub use oracle::brute_force_feature_oracle;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    AuSample, AuStream, GazeStream, InteractionMeta, InteractionRecord, Interval, Joint, Keypoint, MotionStream,
    PoseFrame, PoseStream, Segment, SpeechSegments, JOINT_COUNT,
};
use crate::error::{Error, Result};
use crate::face::default_au_set;
use crate::util::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub triads: usize,
    pub tetrads: usize,
    pub fps: f64,
    pub duration_minutes: f64,
    /// 0 = no leader signal, 1 = strong.
    pub effect_size: f64,
    pub seed: u64,
    /// Per-frame probability of replacing a gaze label with a wrong one.
    pub gaze_noise: f64,
    /// Gaussian keypoint noise in pixels.
    pub pose_noise: f64,
    /// Uniform AU intensity noise amplitude.
    pub au_noise: f64,
    /// When set, interactions are cut into annotated segments of this length.
    pub segment_minutes: Option<f64>,
    pub id_prefix: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            triads: 0,
            tetrads: 10,
            fps: 1.0,
            duration_minutes: 20.0,
            effect_size: 1.0,
            seed: 0,
            gaze_noise: 0.3,
            pose_noise: 0.0,
            au_noise: 0.0,
            segment_minutes: None,
            id_prefix: "syn".into(),
        }
    }
}

impl SynthConfig {
    pub fn n_interactions(&self) -> usize {
        self.triads + self.tetrads
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Argument(m));
        if self.n_interactions() == 0 {
            return bad("at least one interaction is required".into());
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        if !(self.duration_minutes.is_finite() && self.duration_minutes > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration_minutes));
        }
        if (self.duration_minutes * 60.0 * self.fps).round() < 1.0 {
            return bad("duration is shorter than one frame".into());
        }
        for (name, p) in [("effect size", self.effect_size), ("gaze noise", self.gaze_noise)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        for (name, v) in [("pose noise", self.pose_noise), ("AU noise", self.au_noise)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if let Some(m) = self.segment_minutes {
            if !(m.is_finite() && m > 0.0) {
                return bad(format!("segment length must be positive, got {m}"));
            }
        }
        Ok(())
    }
}

const GAZE_STAY: f64 = 0.8;
const GAZE_NONE_WEIGHT: f64 = 0.6;
const LEADER_GAZE_BOOST: f64 = 2.0;
const TURN_MEAN_S: f64 = 4.0;
const SHOULDER_HALF_WIDTH: f64 = 30.0;
const ARM_LENGTH: f64 = 50.0;

/// Generates the corpus: triads first, then tetrads.
pub fn generate_corpus(config: &SynthConfig) -> Result<Vec<InteractionRecord>> {
    config.validate()?;
    (0..config.n_interactions())
        .map(|i| {
            let size = if i < config.triads { 3 } else { 4 };
            let record = generate_interaction(config, i, size);
            record.validate()?;
            Ok(record)
        })
        .collect()
}

fn generate_interaction(config: &SynthConfig, index: usize, size: usize) -> InteractionRecord {
    let seed = derive_seed(config.seed, index as u64 + 1);
    let frames = ((config.duration_minutes * 60.0 * config.fps).round() as usize).max(1);
    let leader = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0)).random_range(0..size);
    let participants: Vec<String> = (1..=size).map(|k| format!("P{k}")).collect();
    let segments = match config.segment_minutes {
        Some(m) => {
            let len = ((m * 60.0 * config.fps).round() as usize).max(1);
            (0..frames)
                .step_by(len)
                .map(|start| Segment {
                    start_frame: start,
                    end_frame: (start + len).min(frames),
                    leader: None,
                })
                .collect()
        }
        None => Vec::new(),
    };
    let ctx = Ctx {
        size,
        frames,
        leader,
        fps: config.fps,
        effect: config.effect_size,
    };
    let (pose, motion) = ctx.body(config.pose_noise, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 3)));
    InteractionRecord {
        meta: InteractionMeta {
            id: format!("{}{index:03}", config.id_prefix),
            leader: Some(participants[leader].clone()),
            participants,
            fps: config.fps,
            duration_frames: frames,
            segments,
        },
        gaze: Some(ctx.gaze(config.gaze_noise, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 1)))),
        speech: Some(ctx.speech(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 2)))),
        pose: Some(pose),
        motion: Some(motion),
        aus: Some(ctx.aus(config.au_noise, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 4)))),
    }
}

struct Ctx {
    size: usize,
    frames: usize,
    leader: usize,
    fps: f64,
    effect: f64,
}

impl Ctx {
    fn seconds_to_frames(&self, s: f64) -> usize {
        ((s * self.fps).round() as usize).max(1)
    }

    fn gaze(&self, noise: f64, rng: &mut ChaCha8Rng) -> GazeStream {
        let n = self.size;
        let targets = (0..n)
            .map(|p| {
                // Candidate labels: other participants, then NONE.
                let labels: Vec<Option<usize>> = (0..n).filter(|&q| q != p).map(Some).chain([None]).collect();
                let weights: Vec<f64> = labels
                    .iter()
                    .map(|l| match l {
                        Some(q) if *q == self.leader => 1.0 + self.effect * LEADER_GAZE_BOOST,
                        Some(_) => 1.0,
                        None => GAZE_NONE_WEIGHT,
                    })
                    .collect();
                let choice = WeightedIndex::new(&weights).expect("positive weights");
                let draw = |rng: &mut ChaCha8Rng| labels[choice.sample(rng)];
                let mut current = draw(rng);
                let mut seq = Vec::with_capacity(self.frames);
                for _ in 0..self.frames {
                    if rng.random::<f64>() >= GAZE_STAY {
                        current = draw(rng);
                    }
                    let mut observed = current;
                    if rng.random::<f64>() < noise {
                        let wrong: Vec<Option<usize>> = labels.iter().copied().filter(|l| *l != current).collect();
                        observed = wrong[rng.random_range(0..wrong.len())];
                    }
                    seq.push(observed);
                }
                seq
            })
            .collect();
        GazeStream { targets }
    }

    /// Turn-taking with occasional overlaps; times are whole frames.
    fn speech(&self, rng: &mut ChaCha8Rng) -> SpeechSegments {
        let n = self.size;
        let weights: Vec<f64> = (0..n)
            .map(|p| if p == self.leader { 1.0 + 2.0 * self.effect } else { 1.0 })
            .collect();
        let choice = WeightedIndex::new(&weights).expect("positive weights");
        let mut intervals: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        let mut last_end = vec![0usize; n];
        let mut cursor = 0usize;
        let mut previous: Option<usize> = None;
        while cursor < self.frames {
            let mut speaker = choice.sample(rng);
            while Some(speaker) == previous {
                speaker = choice.sample(rng);
            }
            let mean_s = if speaker == self.leader {
                TURN_MEAN_S * (1.0 + self.effect)
            } else {
                TURN_MEAN_S
            };
            let len = self.seconds_to_frames(mean_s * rng.random_range(0.5..1.5));
            let start = if rng.random::<f64>() < 0.15 {
                cursor.saturating_sub(self.seconds_to_frames(rng.random_range(0.5..2.0)))
            } else {
                cursor + self.seconds_to_frames(rng.random_range(0.0..1.5)) - 1
            };
            let start = start.max(last_end[speaker]).min(self.frames);
            let end = (start + len).min(self.frames);
            if end > start {
                intervals[speaker].push((start, end));
                last_end[speaker] = end;
            }
            cursor = cursor.max(end).max(start + 1);
            previous = Some(speaker);
        }
        SpeechSegments {
            intervals: intervals
                .into_iter()
                .map(|v| {
                    v.into_iter()
                        .map(|(a, b)| Interval::new(a as f64 / self.fps, b as f64 / self.fps))
                        .collect()
                })
                .collect(),
        }
    }

    /// Upper-body keypoints and moving-pixel counts. Gestures raise the
    /// arms and produce large motion counts.
    fn body(&self, noise: f64, rng: &mut ChaCha8Rng) -> (PoseStream, MotionStream) {
        let mut frames = Vec::with_capacity(self.size);
        let mut counts = Vec::with_capacity(self.size);
        let noise_dist = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).expect("valid sigma");
        for p in 0..self.size {
            let is_leader = p == self.leader;
            let boost = if is_leader { self.effect } else { 0.0 };
            let jitter = Normal::new(0.0, 1.0 + 2.0 * boost).expect("valid sigma");
            let gesture_rate = 0.03 * (1.0 + 3.0 * boost) / self.fps;
            let amplitude = 0.6 * (1.0 + boost);
            let origin = (150.0 + 200.0 * p as f64, 120.0);
            let mut gesture_left = 0usize;
            let mut angle = (0.0, 0.0);
            let mut seq = Vec::with_capacity(self.frames);
            let mut motion = Vec::with_capacity(self.frames);
            for _ in 0..self.frames {
                if gesture_left == 0 && rng.random::<f64>() < gesture_rate {
                    gesture_left = self.seconds_to_frames(rng.random_range(2.0..6.0));
                }
                let gesturing = gesture_left > 0;
                if gesturing {
                    gesture_left -= 1;
                    angle = (rng.random_range(0.0..amplitude), rng.random_range(0.0..amplitude));
                    motion.push(rng.random_range(800..2000u32));
                } else {
                    angle = (angle.0 * 0.5, angle.1 * 0.5);
                    motion.push(rng.random_range(0..400u32));
                }
                let mut frame = skeleton(origin, angle);
                for kp in frame.iter_mut().flatten() {
                    kp.x += jitter.sample(rng);
                    kp.y += jitter.sample(rng);
                    if noise > 0.0 {
                        kp.x += noise_dist.sample(rng);
                        kp.y += noise_dist.sample(rng);
                    }
                    kp.confidence = rng.random_range(0.5..1.0);
                }
                for slot in frame.iter_mut() {
                    if rng.random::<f64>() < 0.01 {
                        *slot = None;
                    }
                }
                seq.push(frame);
            }
            frames.push(seq);
            counts.push(motion);
        }
        (PoseStream { frames }, MotionStream { counts })
    }

    fn aus(&self, noise: f64, rng: &mut ChaCha8Rng) -> AuStream {
        let names = default_au_set();
        let values = (0..self.size)
            .map(|p| {
                let boost = if p == self.leader { self.effect } else { 0.0 };
                let mut row = Vec::with_capacity(self.frames * names.len());
                for _ in 0..self.frames {
                    for name in &names {
                        let smile = name == "AU6" || name == "AU12";
                        let presence_p = if smile { 0.2 + 0.4 * boost } else { 0.2 };
                        if rng.random::<f64>() < presence_p {
                            let mut intensity = rng.random_range(0.5..2.5) + if smile { 1.5 * boost } else { 0.0 };
                            if noise > 0.0 {
                                intensity += rng.random_range(-noise..noise);
                            }
                            row.push(AuSample {
                                presence: 1,
                                intensity: intensity.clamp(0.0, 5.0),
                            });
                        } else {
                            row.push(AuSample {
                                presence: 0,
                                intensity: 0.0,
                            });
                        }
                    }
                }
                row
            })
            .collect();
        AuStream { names, values }
    }
}

/// Upright skeleton with both arms hanging, arms then lifted outward by
/// `(upper, fore)` radians.
fn skeleton(origin: (f64, f64), (upper, fore): (f64, f64)) -> PoseFrame {
    let (nx, ny) = origin;
    let kp = |x: f64, y: f64| {
        Some(Keypoint {
            x,
            y,
            confidence: 1.0,
        })
    };
    let mut f: PoseFrame = [None; JOINT_COUNT];
    f[Joint::Nose.index()] = kp(nx, ny - 40.0);
    f[Joint::Neck.index()] = kp(nx, ny);
    for (side, shoulder, elbow, wrist) in [
        (-1.0, Joint::RightShoulder, Joint::RightElbow, Joint::RightWrist),
        (1.0, Joint::LeftShoulder, Joint::LeftElbow, Joint::LeftWrist),
    ] {
        let s = (nx + side * SHOULDER_HALF_WIDTH, ny);
        let e = (s.0 + side * ARM_LENGTH * upper.sin(), s.1 + ARM_LENGTH * upper.cos());
        let a = upper + fore;
        let w = (e.0 + side * ARM_LENGTH * a.sin(), e.1 + ARM_LENGTH * a.cos());
        f[shoulder.index()] = kp(s.0, s.1);
        f[elbow.index()] = kp(e.0, e.1);
        f[wrist.index()] = kp(w.0, w.1);
    }
    f
}
