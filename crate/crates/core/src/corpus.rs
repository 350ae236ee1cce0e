//! Interaction data model, on-disk corpus format and analysis windows.
//!
//! A corpus is a JSON manifest listing interactions; each interaction points
//! at up to five CSV stream files resolved relative to the manifest directory.
//! Participants are addressed by their position in `participants` everywhere
//! inside the crate; ids only appear at the file boundary.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NONE_TARGET: &str = "NONE";

/// Upper-body joints tracked per participant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Joint {
    Nose,
    Neck,
    RightShoulder,
    RightElbow,
    RightWrist,
    LeftShoulder,
    LeftElbow,
    LeftWrist,
}

pub const JOINT_COUNT: usize = 8;

impl Joint {
    pub const ALL: [Joint; JOINT_COUNT] = [
        Joint::Nose,
        Joint::Neck,
        Joint::RightShoulder,
        Joint::RightElbow,
        Joint::RightWrist,
        Joint::LeftShoulder,
        Joint::LeftElbow,
        Joint::LeftWrist,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Joint::Nose => "nose",
            Joint::Neck => "neck",
            Joint::RightShoulder => "right_shoulder",
            Joint::RightElbow => "right_elbow",
            Joint::RightWrist => "right_wrist",
            Joint::LeftShoulder => "left_shoulder",
            Joint::LeftElbow => "left_elbow",
            Joint::LeftWrist => "left_wrist",
        }
    }

    pub fn from_name(name: &str) -> Option<Joint> {
        Joint::ALL.into_iter().find(|j| j.name() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

/// Joint positions of one participant in one frame, indexed by [`Joint::index`].
pub type PoseFrame = [Option<Keypoint>; JOINT_COUNT];

/// Half-open frame interval `[start_frame, end_frame)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Window {
    pub start_frame: usize,
    pub end_frame: usize,
}

impl Window {
    pub fn new(start_frame: usize, end_frame: usize) -> Result<Self> {
        if start_frame >= end_frame {
            return Err(Error::Range(format!(
                "window [{start_frame}, {end_frame}) is empty"
            )));
        }
        Ok(Window {
            start_frame,
            end_frame,
        })
    }

    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame
    }

    pub fn is_empty(&self) -> bool {
        self.end_frame <= self.start_frame
    }
}

/// Pre-annotated sub-window of an interaction with an optional own leader.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_frame: usize,
    pub end_frame: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader: Option<String>,
}

impl Segment {
    pub fn window(&self) -> Result<Window> {
        Window::new(self.start_frame, self.end_frame)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InteractionMeta {
    pub id: String,
    pub participants: Vec<String>,
    pub fps: f64,
    pub duration_frames: usize,
    pub leader: Option<String>,
    pub segments: Vec<Segment>,
}

impl InteractionMeta {
    pub fn participant_index(&self, id: &str) -> Option<usize> {
        self.participants.iter().position(|p| p == id)
    }

    pub fn leader_index(&self) -> Option<usize> {
        self.leader.as_deref().and_then(|l| self.participant_index(l))
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_frames as f64 / self.fps
    }
}

/// Per participant, per frame gaze target (participant index) or `None`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GazeStream {
    pub targets: Vec<Vec<Option<usize>>>,
}

impl GazeStream {
    pub fn participants(&self) -> usize {
        self.targets.len()
    }

    pub fn frames(&self) -> usize {
        self.targets.first().map_or(0, Vec::len)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub start_s: f64,
    pub end_s: f64,
}

impl Interval {
    pub fn new(start_s: f64, end_s: f64) -> Self {
        Interval { start_s, end_s }
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Per participant, sorted non-overlapping speaking intervals in seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeechSegments {
    pub intervals: Vec<Vec<Interval>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoseStream {
    pub frames: Vec<Vec<PoseFrame>>,
}

/// Per participant, per frame count of pixels whose inter-frame difference
/// exceeds the pixel threshold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MotionStream {
    pub counts: Vec<Vec<u32>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuSample {
    pub presence: u8,
    pub intensity: f64,
}

/// Facial action units. `values[p]` is frame-major: the sample of AU `a` in
/// frame `f` sits at `f * names.len() + a`.
#[derive(Clone, Debug, PartialEq)]
pub struct AuStream {
    pub names: Vec<String>,
    pub values: Vec<Vec<AuSample>>,
}

impl AuStream {
    pub fn frames(&self) -> usize {
        if self.names.is_empty() {
            return 0;
        }
        self.values.first().map_or(0, |v| v.len() / self.names.len())
    }

    pub fn au_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn frame(&self, participant: usize, frame: usize) -> &[AuSample] {
        let k = self.names.len();
        &self.values[participant][frame * k..(frame + 1) * k]
    }
}

/// One group meeting with all of its (optional) behaviour streams.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionRecord {
    pub meta: InteractionMeta,
    pub gaze: Option<GazeStream>,
    pub speech: Option<SpeechSegments>,
    pub pose: Option<PoseStream>,
    pub motion: Option<MotionStream>,
    pub aus: Option<AuStream>,
}

impl InteractionRecord {
    pub fn id(&self) -> &str {
        &self.meta.id
    }

    pub fn full_window(&self) -> Result<Window> {
        Window::new(0, self.meta.duration_frames)
    }

    /// Checks every type invariant, naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        let meta = &self.meta;
        let id = meta.id.as_str();
        let fail = |field: &str, msg: String| Err(Error::validation(id, field, msg));

        let n = meta.participants.len();
        if !(3..=4).contains(&n) {
            return fail("participants", format!("expected 3 or 4 participants, got {n}"));
        }
        let unique: HashSet<&String> = meta.participants.iter().collect();
        if unique.len() != n {
            return fail("participants", "participant ids are not unique".into());
        }
        if meta.participants.iter().any(|p| p == NONE_TARGET) {
            return fail("participants", format!("'{NONE_TARGET}' is reserved"));
        }
        if !(meta.fps.is_finite() && meta.fps > 0.0) {
            return fail("fps", format!("fps must be positive, got {}", meta.fps));
        }
        if let Some(leader) = &meta.leader {
            if meta.participant_index(leader).is_none() {
                return fail("leader", format!("leader '{leader}' is not a participant"));
            }
        }
        for seg in &meta.segments {
            if seg.start_frame >= seg.end_frame || seg.end_frame > meta.duration_frames {
                return fail(
                    "segments",
                    format!(
                        "segment [{}, {}) outside [0, {})",
                        seg.start_frame, seg.end_frame, meta.duration_frames
                    ),
                );
            }
            if let Some(leader) = &seg.leader {
                if meta.participant_index(leader).is_none() {
                    return fail("segments", format!("leader '{leader}' is not a participant"));
                }
            }
        }

        let frames = meta.duration_frames;
        if let Some(gaze) = &self.gaze {
            if gaze.targets.len() != n {
                return fail("gaze", "participant count mismatch".into());
            }
            for (p, seq) in gaze.targets.iter().enumerate() {
                if seq.len() != frames {
                    return fail(
                        "gaze",
                        format!("participant {} has {} frames, expected {frames}", meta.participants[p], seq.len()),
                    );
                }
                for (f, t) in seq.iter().enumerate() {
                    match t {
                        Some(t) if *t == p => {
                            return fail(
                                "gaze",
                                format!("self-gaze of {} at frame {f}", meta.participants[p]),
                            )
                        }
                        Some(t) if *t >= n => {
                            return fail("gaze", format!("unknown target index {t} at frame {f}"))
                        }
                        _ => {}
                    }
                }
            }
        }
        if let Some(speech) = &self.speech {
            if speech.intervals.len() != n {
                return fail("speech", "participant count mismatch".into());
            }
            let limit = meta.duration_s();
            for (p, ivs) in speech.intervals.iter().enumerate() {
                let who = &meta.participants[p];
                for (k, iv) in ivs.iter().enumerate() {
                    if !(iv.start_s.is_finite() && iv.end_s.is_finite()) || iv.end_s <= iv.start_s {
                        return fail("speech", format!("{who}: interval ({}, {}) is empty", iv.start_s, iv.end_s));
                    }
                    if iv.start_s < 0.0 || iv.end_s > limit {
                        return fail(
                            "speech",
                            format!("{who}: interval ({}, {}) outside [0, {limit}]", iv.start_s, iv.end_s),
                        );
                    }
                    if k > 0 && ivs[k - 1].end_s > iv.start_s {
                        return fail("speech", format!("{who}: intervals overlap or are unsorted"));
                    }
                }
            }
        }
        if let Some(pose) = &self.pose {
            if pose.frames.len() != n {
                return fail("pose", "participant count mismatch".into());
            }
            for seq in &pose.frames {
                if seq.len() != frames {
                    return fail("pose", format!("expected {frames} frames, got {}", seq.len()));
                }
                for kp in seq.iter().flatten().flatten() {
                    if !(0.0..=1.0).contains(&kp.confidence) {
                        return fail("pose", format!("confidence {} outside [0, 1]", kp.confidence));
                    }
                    if !(kp.x.is_finite() && kp.y.is_finite()) {
                        return fail("pose", "non-finite joint coordinate".into());
                    }
                }
            }
        }
        if let Some(motion) = &self.motion {
            if motion.counts.len() != n {
                return fail("motion", "participant count mismatch".into());
            }
            if motion.counts.iter().any(|c| c.len() != frames) {
                return fail("motion", format!("expected {frames} frames per participant"));
            }
        }
        if let Some(aus) = &self.aus {
            if aus.values.len() != n {
                return fail("au", "participant count mismatch".into());
            }
            let k = aus.names.len();
            if aus.values.iter().any(|v| v.len() != frames * k) {
                return fail("au", format!("expected {frames} frames of {k} action units"));
            }
            for s in aus.values.iter().flatten() {
                if s.presence > 1 {
                    return fail("au", format!("presence {} is not binary", s.presence));
                }
                if !(0.0..=5.0).contains(&s.intensity) {
                    return fail("au", format!("intensity {} outside [0, 5]", s.intensity));
                }
            }
        }
        Ok(())
    }
}

/// Returns `[0, min(round(minutes * 60 * fps), duration_frames))`.
pub fn first_minutes_window(record: &InteractionRecord, minutes: f64) -> Result<Window> {
    if !(minutes.is_finite() && minutes > 0.0) {
        return Err(Error::Argument(format!("minutes must be positive, got {minutes}")));
    }
    let frames = (minutes * 60.0 * record.meta.fps).round() as usize;
    Window::new(0, frames.min(record.meta.duration_frames))
}

/// Restricts every stream to `window`. Frame streams are re-indexed from the
/// window start; speech intervals and segments are clipped and shifted so
/// that time 0 is the window start.
pub fn slice_window(record: &InteractionRecord, window: Window) -> Result<InteractionRecord> {
    let meta = &record.meta;
    if window.is_empty() || window.end_frame > meta.duration_frames {
        return Err(Error::Range(format!(
            "window [{}, {}) outside interaction {} of {} frames",
            window.start_frame, window.end_frame, meta.id, meta.duration_frames
        )));
    }
    let (s, e) = (window.start_frame, window.end_frame);
    let offset_s = s as f64 / meta.fps;
    let end_s = e as f64 / meta.fps;

    let segments = meta
        .segments
        .iter()
        .filter_map(|seg| {
            let start = seg.start_frame.max(s);
            let end = seg.end_frame.min(e);
            (start < end).then(|| Segment {
                start_frame: start - s,
                end_frame: end - s,
                leader: seg.leader.clone(),
            })
        })
        .collect();

    let speech = record.speech.as_ref().map(|sp| SpeechSegments {
        intervals: sp
            .intervals
            .iter()
            .map(|ivs| {
                ivs.iter()
                    .filter_map(|iv| {
                        let a = iv.start_s.max(offset_s);
                        let b = iv.end_s.min(end_s);
                        (b > a).then(|| Interval::new(a - offset_s, b - offset_s))
                    })
                    .collect()
            })
            .collect(),
    });

    let aus = record.aus.as_ref().map(|a| {
        let k = a.names.len();
        AuStream {
            names: a.names.clone(),
            values: a.values.iter().map(|v| v[s * k..e * k].to_vec()).collect(),
        }
    });

    Ok(InteractionRecord {
        meta: InteractionMeta {
            duration_frames: e - s,
            segments,
            ..meta.clone()
        },
        gaze: record.gaze.as_ref().map(|g| GazeStream {
            targets: g.targets.iter().map(|t| t[s..e].to_vec()).collect(),
        }),
        speech,
        pose: record.pose.as_ref().map(|p| PoseStream {
            frames: p.frames.iter().map(|f| f[s..e].to_vec()).collect(),
        }),
        motion: record.motion.as_ref().map(|m| MotionStream {
            counts: m.counts.iter().map(|c| c[s..e].to_vec()).collect(),
        }),
        aus,
    })
}

// ---------------------------------------------------------------------------
// Manifest and CSV persistence
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub interactions: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub participants: Vec<String>,
    pub fps: f64,
    pub duration_frames: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<Segment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaze_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speech_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub au_csv: Option<String>,
}

/// Loads and validates every interaction of a manifest, in manifest order.
pub fn load_corpus(manifest_path: impl AsRef<Path>) -> Result<Vec<InteractionRecord>> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(|source| Error::Load {
        path: manifest_path.to_path_buf(),
        source,
    })?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: manifest_path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut ids = HashSet::new();
    let mut records = Vec::with_capacity(manifest.interactions.len());
    for entry in manifest.interactions {
        if !ids.insert(entry.id.clone()) {
            return Err(Error::validation(&entry.id, "id", "duplicate interaction id"));
        }
        records.push(load_entry(base, entry)?);
    }
    Ok(records)
}

fn load_entry(base: &Path, entry: ManifestEntry) -> Result<InteractionRecord> {
    let meta = InteractionMeta {
        id: entry.id,
        participants: entry.participants,
        fps: entry.fps,
        duration_frames: entry.duration_frames,
        leader: entry.leader,
        segments: entry.segments,
    };
    // Metadata first so stream parsing can rely on participant ids.
    InteractionRecord {
        meta: meta.clone(),
        gaze: None,
        speech: None,
        pose: None,
        motion: None,
        aus: None,
    }
    .validate()?;

    let resolve = |p: &Option<String>| p.as_ref().map(|p| base.join(p));
    let record = InteractionRecord {
        gaze: resolve(&entry.gaze_csv).map(|p| read_gaze(&p, &meta)).transpose()?,
        speech: resolve(&entry.speech_csv).map(|p| read_speech(&p, &meta)).transpose()?,
        pose: resolve(&entry.pose_csv).map(|p| read_pose(&p, &meta)).transpose()?,
        motion: resolve(&entry.motion_csv).map(|p| read_motion(&p, &meta)).transpose()?,
        aus: resolve(&entry.au_csv).map(|p| read_aus(&p, &meta)).transpose()?,
        meta,
    };
    record.validate()?;
    Ok(record)
}

/// Writes `manifest.json` plus one CSV per present stream into `dir`.
/// Returns the manifest path.
pub fn save_corpus(dir: impl AsRef<Path>, records: &[InteractionRecord]) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| Error::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut entries = Vec::with_capacity(records.len());
    for record in records {
        let meta = &record.meta;
        if meta.id.is_empty() || meta.id.contains(['/', '\\']) || meta.id.starts_with('.') {
            return Err(Error::validation(&meta.id, "id", "not usable as a file name"));
        }
        let mut entry = ManifestEntry {
            id: meta.id.clone(),
            participants: meta.participants.clone(),
            fps: meta.fps,
            duration_frames: meta.duration_frames,
            leader: meta.leader.clone(),
            segments: meta.segments.clone(),
            gaze_csv: None,
            speech_csv: None,
            pose_csv: None,
            motion_csv: None,
            au_csv: None,
        };
        let name = |kind: &str| format!("{}_{kind}.csv", meta.id);
        if let Some(g) = &record.gaze {
            let file = name("gaze");
            write_gaze(&dir.join(&file), meta, g)?;
            entry.gaze_csv = Some(file);
        }
        if let Some(s) = &record.speech {
            let file = name("speech");
            write_speech(&dir.join(&file), meta, s)?;
            entry.speech_csv = Some(file);
        }
        if let Some(p) = &record.pose {
            let file = name("pose");
            write_pose(&dir.join(&file), meta, p)?;
            entry.pose_csv = Some(file);
        }
        if let Some(m) = &record.motion {
            let file = name("motion");
            write_motion(&dir.join(&file), meta, m)?;
            entry.motion_csv = Some(file);
        }
        if let Some(a) = &record.aus {
            let file = name("au");
            write_aus(&dir.join(&file), meta, a)?;
            entry.au_csv = Some(file);
        }
        entries.push(entry);
    }
    let manifest = Manifest {
        interactions: entries,
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|source| Error::Write {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

struct CsvRows {
    path: PathBuf,
    reader: csv::Reader<fs::File>,
}

impl CsvRows {
    fn open(path: &Path, expected: &[&str]) -> Result<Self> {
        let file = fs::File::open(path).map_err(|source| Error::Load {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers = reader.headers().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?;
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected header {}, got {}", expected.join(","), got.join(",")),
            });
        }
        Ok(CsvRows {
            path: path.to_path_buf(),
            reader,
        })
    }

    /// Visits every data row with its 1-based line number.
    fn for_each(mut self, mut f: impl FnMut(&csv::StringRecord, u64) -> std::result::Result<(), String>) -> Result<()> {
        let mut record = csv::StringRecord::new();
        loop {
            let more = self.reader.read_record(&mut record).map_err(|e| Error::Parse {
                path: self.path.clone(),
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            if !more {
                return Ok(());
            }
            let line = record.position().map_or(0, |p| p.line());
            f(&record, line).map_err(|message| Error::Parse {
                path: self.path.clone(),
                line,
                message,
            })?;
        }
    }
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, name: &str) -> std::result::Result<T, String> {
    let raw = record.get(i).ok_or_else(|| format!("missing column {name}"))?;
    raw.parse::<T>().map_err(|_| format!("cannot parse {name} from '{raw}'"))
}

fn participant(meta: &InteractionMeta, record: &csv::StringRecord, i: usize) -> std::result::Result<usize, String> {
    let raw = record.get(i).ok_or("missing column participant")?;
    meta.participant_index(raw).ok_or_else(|| format!("unknown participant '{raw}'"))
}

fn frame_index(meta: &InteractionMeta, record: &csv::StringRecord) -> std::result::Result<usize, String> {
    let f: usize = field(record, 0, "frame")?;
    if f >= meta.duration_frames {
        return Err(format!("frame {f} beyond duration {}", meta.duration_frames));
    }
    Ok(f)
}

fn read_gaze(path: &Path, meta: &InteractionMeta) -> Result<GazeStream> {
    let n = meta.participants.len();
    let frames = meta.duration_frames;
    let mut cells: Vec<Vec<Option<Option<usize>>>> = vec![vec![None; frames]; n];
    CsvRows::open(path, &["frame", "participant", "target"])?.for_each(|r, _| {
        let f = frame_index(meta, r)?;
        let p = participant(meta, r, 1)?;
        let raw = r.get(2).ok_or("missing column target")?;
        let target = if raw == NONE_TARGET {
            None
        } else {
            Some(meta.participant_index(raw).ok_or_else(|| format!("unknown gaze target '{raw}'"))?)
        };
        if cells[p][f].is_some() {
            return Err(format!("duplicate gaze row for frame {f}"));
        }
        cells[p][f] = Some(target);
        Ok(())
    })?;
    let mut targets = Vec::with_capacity(n);
    for (p, seq) in cells.into_iter().enumerate() {
        let mut out = Vec::with_capacity(frames);
        for (f, cell) in seq.into_iter().enumerate() {
            match cell {
                Some(t) => out.push(t),
                None => {
                    return Err(Error::validation(
                        &meta.id,
                        "gaze",
                        format!("no gaze row for {} at frame {f}", meta.participants[p]),
                    ))
                }
            }
        }
        targets.push(out);
    }
    Ok(GazeStream { targets })
}

fn read_speech(path: &Path, meta: &InteractionMeta) -> Result<SpeechSegments> {
    let mut intervals = vec![Vec::new(); meta.participants.len()];
    CsvRows::open(path, &["participant", "start_s", "end_s"])?.for_each(|r, _| {
        let p = participant(meta, r, 0)?;
        let start: f64 = field(r, 1, "start_s")?;
        let end: f64 = field(r, 2, "end_s")?;
        intervals[p].push(Interval::new(start, end));
        Ok(())
    })?;
    Ok(SpeechSegments { intervals })
}

fn read_pose(path: &Path, meta: &InteractionMeta) -> Result<PoseStream> {
    let n = meta.participants.len();
    let mut frames = vec![vec![[None; JOINT_COUNT]; meta.duration_frames]; n];
    CsvRows::open(path, &["frame", "participant", "joint", "x", "y", "confidence"])?.for_each(|r, _| {
        let f = frame_index(meta, r)?;
        let p = participant(meta, r, 1)?;
        let raw = r.get(2).ok_or("missing column joint")?;
        let joint = Joint::from_name(raw).ok_or_else(|| format!("unknown joint '{raw}'"))?;
        let kp = Keypoint {
            x: field(r, 3, "x")?,
            y: field(r, 4, "y")?,
            confidence: field(r, 5, "confidence")?,
        };
        let slot = &mut frames[p][f][joint.index()];
        if slot.is_some() {
            return Err(format!("duplicate {raw} at frame {f}"));
        }
        *slot = Some(kp);
        Ok(())
    })?;
    Ok(PoseStream { frames })
}

fn read_motion(path: &Path, meta: &InteractionMeta) -> Result<MotionStream> {
    let n = meta.participants.len();
    let mut cells = vec![vec![None; meta.duration_frames]; n];
    CsvRows::open(path, &["frame", "participant", "moving_pixel_count"])?.for_each(|r, _| {
        let f = frame_index(meta, r)?;
        let p = participant(meta, r, 1)?;
        let count: u32 = field(r, 2, "moving_pixel_count")?;
        if cells[p][f].replace(count).is_some() {
            return Err(format!("duplicate motion row for frame {f}"));
        }
        Ok(())
    })?;
    let mut counts = Vec::with_capacity(n);
    for (p, seq) in cells.into_iter().enumerate() {
        let seq: Option<Vec<u32>> = seq.into_iter().collect();
        counts.push(seq.ok_or_else(|| {
            Error::validation(&meta.id, "motion", format!("missing frames for {}", meta.participants[p]))
        })?);
    }
    Ok(MotionStream { counts })
}

fn read_aus(path: &Path, meta: &InteractionMeta) -> Result<AuStream> {
    let n = meta.participants.len();
    let mut rows: Vec<(usize, usize, String, AuSample)> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    CsvRows::open(path, &["frame", "participant", "au", "presence", "intensity"])?.for_each(|r, _| {
        let f = frame_index(meta, r)?;
        let p = participant(meta, r, 1)?;
        let au = r.get(2).ok_or("missing column au")?.to_string();
        let sample = AuSample {
            presence: field(r, 3, "presence")?,
            intensity: field(r, 4, "intensity")?,
        };
        if !names.contains(&au) {
            names.push(au.clone());
        }
        rows.push((p, f, au, sample));
        Ok(())
    })?;
    let k = names.len();
    let mut cells: Vec<Vec<Option<AuSample>>> = vec![vec![None; meta.duration_frames * k]; n];
    for (p, f, au, sample) in rows {
        let a = names.iter().position(|x| *x == au).expect("name registered");
        if cells[p][f * k + a].replace(sample).is_some() {
            return Err(Error::validation(&meta.id, "au", format!("duplicate {au} at frame {f}")));
        }
    }
    let mut values = Vec::with_capacity(n);
    for (p, seq) in cells.into_iter().enumerate() {
        let seq: Option<Vec<AuSample>> = seq.into_iter().collect();
        values.push(seq.ok_or_else(|| {
            Error::validation(
                &meta.id,
                "au",
                format!("{} lacks some action units in some frames", meta.participants[p]),
            )
        })?);
    }
    Ok(AuStream { names, values })
}

fn csv_writer(path: &Path, header: &[&str]) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(|e| csv_write_error(path, e))?;
    Ok(w)
}

fn csv_write_error(path: &Path, e: csv::Error) -> Error {
    Error::Write {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn finish(path: &Path, mut w: csv::Writer<fs::File>) -> Result<()> {
    w.flush().map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn write_gaze(path: &Path, meta: &InteractionMeta, gaze: &GazeStream) -> Result<()> {
    let mut w = csv_writer(path, &["frame", "participant", "target"])?;
    for f in 0..gaze.frames() {
        for (p, seq) in gaze.targets.iter().enumerate() {
            let target = seq[f].map_or(NONE_TARGET, |t| meta.participants[t].as_str());
            w.write_record([f.to_string().as_str(), &meta.participants[p], target])
                .map_err(|e| csv_write_error(path, e))?;
        }
    }
    finish(path, w)
}

fn write_speech(path: &Path, meta: &InteractionMeta, speech: &SpeechSegments) -> Result<()> {
    let mut w = csv_writer(path, &["participant", "start_s", "end_s"])?;
    for (p, ivs) in speech.intervals.iter().enumerate() {
        for iv in ivs {
            w.write_record([meta.participants[p].clone(), iv.start_s.to_string(), iv.end_s.to_string()])
                .map_err(|e| csv_write_error(path, e))?;
        }
    }
    finish(path, w)
}

fn write_pose(path: &Path, meta: &InteractionMeta, pose: &PoseStream) -> Result<()> {
    let mut w = csv_writer(path, &["frame", "participant", "joint", "x", "y", "confidence"])?;
    let frames = pose.frames.first().map_or(0, Vec::len);
    for f in 0..frames {
        for (p, seq) in pose.frames.iter().enumerate() {
            for joint in Joint::ALL {
                if let Some(kp) = seq[f][joint.index()] {
                    w.write_record([
                        f.to_string(),
                        meta.participants[p].clone(),
                        joint.name().to_string(),
                        kp.x.to_string(),
                        kp.y.to_string(),
                        kp.confidence.to_string(),
                    ])
                    .map_err(|e| csv_write_error(path, e))?;
                }
            }
        }
    }
    finish(path, w)
}

fn write_motion(path: &Path, meta: &InteractionMeta, motion: &MotionStream) -> Result<()> {
    let mut w = csv_writer(path, &["frame", "participant", "moving_pixel_count"])?;
    let frames = motion.counts.first().map_or(0, Vec::len);
    for f in 0..frames {
        for (p, seq) in motion.counts.iter().enumerate() {
            w.write_record([f.to_string(), meta.participants[p].clone(), seq[f].to_string()])
                .map_err(|e| csv_write_error(path, e))?;
        }
    }
    finish(path, w)
}

fn write_aus(path: &Path, meta: &InteractionMeta, aus: &AuStream) -> Result<()> {
    let mut w = csv_writer(path, &["frame", "participant", "au", "presence", "intensity"])?;
    for f in 0..aus.frames() {
        for p in 0..aus.values.len() {
            for (name, s) in aus.names.iter().zip(aus.frame(p, f)) {
                w.write_record([
                    f.to_string(),
                    meta.participants[p].clone(),
                    name.clone(),
                    s.presence.to_string(),
                    s.intensity.to_string(),
                ])
                .map_err(|e| csv_write_error(path, e))?;
            }
        }
    }
    finish(path, w)
}
