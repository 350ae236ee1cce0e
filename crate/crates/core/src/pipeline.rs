//! From corpora to per-interaction leader predictions.
//!
//! Training data is z-scored with corpus-wide statistics. Every test
//! interaction is z-scored on its own, independently of the training data and
//! of other test interactions. Each featureset gets its own SVM, Platt
//! sigmoid and statistics; calibrated probabilities are averaged across
//! featuresets (late fusion) and the participant with the highest fused score
//! is the predicted leader.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{first_minutes_window, slice_window, InteractionRecord, Window};
use crate::error::{Error, Result};
use crate::face::{compute_face_features, default_au_set, face_feature_names, validate_au_set};
use crate::pose::{
    activity_threshold, compute_pose_features, pose_feature_names, significant_activity_mask, PoseConfig,
};
use crate::speech::{compute_speech_features, SpeechConfig, SPEECH_FEATURES};
use crate::svm::{
    group_folds, platt_fit, predict_probability, select_c_by_group_cv, svm_decision, svm_train, CvOutcome, Gamma,
    GroupedSamples, PlattParams, SvmConfig, SvmModel,
};
use crate::util::derive_seed;
use crate::vfoa::{compute_vfoa_features, median_filter_gaze, DEFAULT_MEDIAN_WIDTH, VFOA_FEATURES};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_WINDOW_MINUTES: f64 = 19.0;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Resolution of per-interaction z-scores (2^-20). Rounding to a fixed grid
/// makes predictions independent of how a test interaction's raw features
/// were scaled or offset.
const TEST_Z_QUANTUM: f64 = 1.0 / 1_048_576.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSetId {
    Vfoa,
    Pose,
    Face,
    Speech,
}

impl FeatureSetId {
    pub const ALL: [FeatureSetId; 4] = [FeatureSetId::Vfoa, FeatureSetId::Pose, FeatureSetId::Face, FeatureSetId::Speech];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSetId::Vfoa => "vfoa",
            FeatureSetId::Pose => "pose",
            FeatureSetId::Face => "face",
            FeatureSetId::Speech => "speech",
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 101
    }
}

impl fmt::Display for FeatureSetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureSetId::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Argument(format!("unknown featureset '{s}' (expected vfoa, pose, face or speech)")))
    }
}

/// Parses a comma-separated featureset list, rejecting duplicates.
pub fn parse_featuresets(list: &str) -> Result<Vec<FeatureSetId>> {
    let mut out: Vec<FeatureSetId> = Vec::new();
    for part in list.split(',').filter(|p| !p.trim().is_empty()) {
        let id: FeatureSetId = part.parse()?;
        if out.contains(&id) {
            return Err(Error::Argument(format!("featureset {id} listed twice")));
        }
        out.push(id);
    }
    if out.is_empty() {
        return Err(Error::Argument("no featureset given".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub median_width: usize,
    pub pose: PoseConfig,
    pub speech: SpeechConfig,
    pub au_set: Vec<String>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            median_width: DEFAULT_MEDIAN_WIDTH,
            pose: PoseConfig::default(),
            speech: SpeechConfig::default(),
            au_set: default_au_set(),
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.median_width == 0 || self.median_width % 2 == 0 {
            return Err(Error::Config(format!("median width must be odd, got {}", self.median_width)));
        }
        if !(self.speech.turn_merge_gap_s >= 0.0) {
            return Err(Error::Config("turn merge gap must be nonnegative".into()));
        }
        self.pose.validate()?;
        validate_au_set(&self.au_set)
    }

    /// Registry of feature names in vector order.
    pub fn feature_names(&self, fs: FeatureSetId) -> Vec<String> {
        match fs {
            FeatureSetId::Vfoa => VFOA_FEATURES.iter().map(|s| s.to_string()).collect(),
            FeatureSetId::Pose => pose_feature_names(),
            FeatureSetId::Face => face_feature_names(&self.au_set),
            FeatureSetId::Speech => SPEECH_FEATURES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn registry_hash(&self, fs: FeatureSetId) -> String {
        let mut h = Sha256::new();
        h.update(fs.as_str().as_bytes());
        for name in self.feature_names(fs) {
            h.update(b"\n");
            h.update(name.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WindowPolicy {
    /// The first `minutes` of every interaction.
    Full { minutes: f64 },
    /// The annotated segments of every interaction.
    Segments,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        WindowPolicy::Full {
            minutes: DEFAULT_WINDOW_MINUTES,
        }
    }
}

/// How T2 is chosen when masking motion streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum T2Mode {
    /// Each participant stream of each analysed window gets its own T2.
    PerStream,
    Fixed(u32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub interaction_id: String,
    pub participant_id: String,
    pub participant_index: usize,
    pub window: Window,
    pub featureset: FeatureSetId,
    pub values: Vec<f64>,
    pub label: Option<bool>,
}

/// Windows analysed under `policy`, each with its leader index if known.
pub fn analysis_windows(record: &InteractionRecord, policy: &WindowPolicy) -> Result<Vec<(Window, Option<usize>)>> {
    let meta = &record.meta;
    match policy {
        WindowPolicy::Full { minutes } => Ok(vec![(first_minutes_window(record, *minutes)?, meta.leader_index())]),
        WindowPolicy::Segments => {
            if meta.segments.is_empty() {
                return Err(Error::Argument(format!("interaction {} has no segments", meta.id)));
            }
            meta.segments
                .iter()
                .map(|s| {
                    let leader = match &s.leader {
                        Some(l) => meta.participant_index(l),
                        None => meta.leader_index(),
                    };
                    Ok((s.window()?, leader))
                })
                .collect()
        }
    }
}

fn missing(record: &InteractionRecord, stream: &str) -> Error {
    Error::Featurization {
        interaction: record.meta.id.clone(),
        stream: stream.into(),
    }
}

/// Feature vectors of every participant of an already windowed record.
pub fn featurize_record(
    record: &InteractionRecord,
    fs: FeatureSetId,
    config: &FeatureConfig,
    t2: T2Mode,
) -> Result<Vec<Vec<f64>>> {
    let n = record.meta.participants.len();
    match fs {
        FeatureSetId::Vfoa => {
            let gaze = record.gaze.as_ref().ok_or_else(|| missing(record, "gaze"))?;
            let filtered = median_filter_gaze(gaze, config.median_width)?;
            (0..n)
                .map(|p| compute_vfoa_features(&filtered, p, record.meta.fps).map(|v| v.0.to_vec()))
                .collect()
        }
        FeatureSetId::Pose => {
            let pose = record.pose.as_ref().ok_or_else(|| missing(record, "pose"))?;
            let motion = record.motion.as_ref().ok_or_else(|| missing(record, "motion"))?;
            let fixed = match t2 {
                T2Mode::PerStream => None,
                T2Mode::Fixed(t) => Some(t),
            };
            (0..n)
                .map(|p| {
                    let (mask, _) = significant_activity_mask(&motion.counts[p], &config.pose, fixed)?;
                    compute_pose_features(&pose.frames[p], &mask).map(|v| v.0)
                })
                .collect()
        }
        FeatureSetId::Face => {
            let aus = record.aus.as_ref().ok_or_else(|| missing(record, "au"))?;
            (0..n)
                .map(|p| compute_face_features(aus, p, &config.au_set).map(|v| v.0))
                .collect()
        }
        FeatureSetId::Speech => {
            let speech = record.speech.as_ref().ok_or_else(|| missing(record, "speech"))?;
            let window_s = record.meta.duration_s();
            (0..n)
                .map(|p| compute_speech_features(speech, p, window_s, &config.speech).map(|v| v.to_vec()))
                .collect()
        }
    }
}

/// One sample per interaction, window, featureset and participant, in that
/// nesting order.
pub fn featurize(
    corpus: &[InteractionRecord],
    featuresets: &[FeatureSetId],
    policy: &WindowPolicy,
    config: &FeatureConfig,
    t2: T2Mode,
) -> Result<Vec<Sample>> {
    config.validate()?;
    let mut samples = Vec::new();
    for record in corpus {
        for (window, leader) in analysis_windows(record, policy)? {
            let sliced = slice_window(record, window)?;
            for &fs in featuresets {
                for (p, values) in featurize_record(&sliced, fs, config, t2)?.into_iter().enumerate() {
                    samples.push(Sample {
                        interaction_id: record.meta.id.clone(),
                        participant_id: record.meta.participants[p].clone(),
                        participant_index: p,
                        window,
                        featureset: fs,
                        values,
                        label: leader.map(|l| l == p),
                    });
                }
            }
        }
    }
    Ok(samples)
}

/// Corpus-level T2 pooled over every participant stream of every analysed
/// window.
pub fn corpus_t2(corpus: &[InteractionRecord], policy: &WindowPolicy, config: &PoseConfig) -> Result<u32> {
    config.validate()?;
    let mut pooled = Vec::new();
    for record in corpus {
        let motion = record.motion.as_ref().ok_or_else(|| missing(record, "motion"))?;
        for (w, _) in analysis_windows(record, policy)? {
            for counts in &motion.counts {
                pooled.extend_from_slice(&counts[w.start_frame..w.end_frame]);
            }
        }
    }
    if pooled.is_empty() {
        return Err(Error::Argument("no motion frames to threshold".into()));
    }
    Ok(activity_threshold(&pooled, config.activity_proportion))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub epsilon: f64,
}

fn column_stats(rows: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let dim = rows[0].len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for r in rows {
        for d in 0..dim {
            let c = r[d] - mean[d];
            var[d] += c * c;
        }
    }
    (mean, var.into_iter().map(|v| (v / n).sqrt()).collect())
}

fn zscore(value: f64, mean: f64, std: f64, epsilon: f64) -> f64 {
    if std < epsilon {
        0.0
    } else {
        (value - mean) / std
    }
}

fn check_uniform(samples: &[Sample]) -> Result<(FeatureSetId, usize)> {
    let first = samples.first().ok_or_else(|| Error::Argument("no samples".into()))?;
    let dim = first.values.len();
    if samples.iter().any(|s| s.featureset != first.featureset) {
        return Err(Error::Argument("samples mix featuresets".into()));
    }
    if samples.iter().any(|s| s.values.len() != dim) {
        return Err(Error::Argument("samples differ in dimension".into()));
    }
    Ok((first.featureset, dim))
}

/// Corpus-wide z-scores of one featureset.
pub fn normalize_train(samples: &[Sample]) -> Result<(Vec<Sample>, NormStats)> {
    check_uniform(samples)?;
    let rows: Vec<&[f64]> = samples.iter().map(|s| s.values.as_slice()).collect();
    let (mean, std) = column_stats(&rows);
    let stats = NormStats {
        mean,
        std,
        epsilon: DEFAULT_EPSILON,
    };
    let out = samples
        .iter()
        .map(|s| Sample {
            values: s
                .values
                .iter()
                .enumerate()
                .map(|(d, &v)| zscore(v, stats.mean[d], stats.std[d], stats.epsilon))
                .collect(),
            ..s.clone()
        })
        .collect();
    Ok((out, stats))
}

/// z-scores of one test interaction using only its own samples.
pub fn normalize_test_interaction(samples: &[Sample]) -> Result<Vec<Sample>> {
    check_uniform(samples)?;
    if samples.len() < 2 {
        return Err(Error::Argument("need at least two samples to normalize".into()));
    }
    let id = &samples[0].interaction_id;
    if samples.iter().any(|s| &s.interaction_id != id) {
        return Err(Error::Argument("samples from more than one interaction".into()));
    }
    let rows: Vec<&[f64]> = samples.iter().map(|s| s.values.as_slice()).collect();
    let (mean, std) = column_stats(&rows);
    Ok(samples
        .iter()
        .map(|s| Sample {
            values: s
                .values
                .iter()
                .enumerate()
                .map(|(d, &v)| (zscore(v, mean[d], std[d], DEFAULT_EPSILON) / TEST_Z_QUANTUM).round() * TEST_Z_QUANTUM)
                .collect(),
            ..s.clone()
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmPolicy {
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub platt_folds: usize,
    pub smo_tolerance: f64,
    pub gamma: Gamma,
}

impl Default for SvmPolicy {
    fn default() -> Self {
        SvmPolicy {
            c_grid: vec![0.03125, 0.125, 0.5, 2.0, 8.0, 32.0],
            folds: 5,
            platt_folds: 5,
            smo_tolerance: 1e-3,
            gamma: Gamma::Auto,
        }
    }
}

impl SvmPolicy {
    fn base_config(&self) -> SvmConfig {
        SvmConfig {
            c: 1.0,
            gamma: self.gamma,
            smo_tolerance: self.smo_tolerance,
            max_iter: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub features: FeatureConfig,
    pub svm: SvmPolicy,
    /// Length of the analysed prefix of test interactions.
    pub window_minutes: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            features: FeatureConfig::default(),
            svm: SvmPolicy::default(),
            window_minutes: DEFAULT_WINDOW_MINUTES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureModel {
    pub featureset: FeatureSetId,
    pub registry_hash: String,
    pub dim: usize,
    pub norm: NormStats,
    pub c_selection: CvOutcome,
    pub svm: SvmModel,
    pub platt: PlattParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub seed: u64,
    pub config: PipelineConfig,
    /// Window policy used on the source corpus, when trained from a corpus.
    pub source_policy: Option<WindowPolicy>,
    /// Corpus-level T2 of the source corpus, when pose was trained.
    pub pose_t2: Option<u32>,
    pub models: Vec<FeatureModel>,
}

impl TrainedModel {
    pub fn featuresets(&self) -> Vec<FeatureSetId> {
        self.models.iter().map(|m| m.featureset).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes") + "\n"
    }

    /// Parses a model and rejects it if its feature registry differs from
    /// the one this build would produce.
    pub fn from_json(text: &str) -> Result<Self> {
        let model: TrainedModel = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported model format {} (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            )));
        }
        for m in &model.models {
            let expected = model.config.features.registry_hash(m.featureset);
            if m.registry_hash != expected {
                return Err(Error::Model(format!("feature registry hash mismatch for {}", m.featureset)));
            }
        }
        Ok(model)
    }

    /// T2 handling for test interactions.
    pub fn test_t2_mode(&self) -> T2Mode {
        match (self.config.features.pose.per_interaction_t2, self.pose_t2) {
            (false, Some(t)) => T2Mode::Fixed(t),
            _ => T2Mode::PerStream,
        }
    }
}

fn check_labels(samples: &[Sample]) -> Result<()> {
    let mut leaders: BTreeMap<(&str, Window, FeatureSetId), usize> = BTreeMap::new();
    for s in samples {
        let label = s.label.ok_or_else(|| Error::Label {
            interaction: s.interaction_id.clone(),
            message: "unlabeled training sample".into(),
        })?;
        *leaders.entry((&s.interaction_id, s.window, s.featureset)).or_default() += usize::from(label);
    }
    for ((id, w, _), count) in leaders {
        if count != 1 {
            return Err(Error::Label {
                interaction: id.to_string(),
                message: format!(
                    "window [{}, {}) has {count} leaders, expected exactly one",
                    w.start_frame, w.end_frame
                ),
            });
        }
    }
    Ok(())
}

fn train_featureset(samples: &[Sample], fs: FeatureSetId, config: &PipelineConfig, seed: u64) -> Result<FeatureModel> {
    let own: Vec<Sample> = samples.iter().filter(|s| s.featureset == fs).cloned().collect();
    if own.is_empty() {
        return Err(Error::Argument(format!("no {fs} samples to train on")));
    }
    let (normalized, norm) = normalize_train(&own)?;
    let dim = norm.mean.len();
    let expected = config.features.feature_names(fs).len();
    if dim != expected {
        return Err(Error::Argument(format!("{fs} samples have {dim} features, registry has {expected}")));
    }

    let mut interaction_keys: BTreeMap<&str, usize> = BTreeMap::new();
    let mut unit_keys: BTreeMap<(&str, Window), usize> = BTreeMap::new();
    let mut interaction = Vec::with_capacity(own.len());
    let mut unit = Vec::with_capacity(own.len());
    for s in &own {
        let next = interaction_keys.len();
        interaction.push(*interaction_keys.entry(&s.interaction_id).or_insert(next));
        let next = unit_keys.len();
        unit.push(*unit_keys.entry((&s.interaction_id, s.window)).or_insert(next));
    }
    let x: Vec<Vec<f64>> = normalized.iter().map(|s| s.values.clone()).collect();
    let y: Vec<f64> = normalized.iter().map(|s| if s.label == Some(true) { 1.0 } else { -1.0 }).collect();
    let data = GroupedSamples {
        x: &x,
        y: &y,
        interaction: &interaction,
        unit: &unit,
    };

    let fs_seed = derive_seed(seed, fs.tag());
    let base = config.svm.base_config();
    let c_selection = select_c_by_group_cv(&data, &config.svm.c_grid, config.svm.folds, &base, derive_seed(fs_seed, 1))?;
    let chosen = SvmConfig {
        c: c_selection.c,
        ..base
    };
    let svm = svm_train(&x, &y, &chosen, derive_seed(fs_seed, 2))?;

    // Out-of-fold decision values for the sigmoid.
    let platt_seed = derive_seed(fs_seed, 3);
    let folds = group_folds(&interaction, config.svm.platt_folds, platt_seed)?;
    let mut decisions = vec![0.0; x.len()];
    for fold in 0..config.svm.platt_folds {
        let train: Vec<usize> = (0..x.len()).filter(|&i| folds[i] != fold).collect();
        let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let fold_model = svm_train(&tx, &ty, &chosen, derive_seed(platt_seed, fold as u64 + 1))?;
        for i in (0..x.len()).filter(|&i| folds[i] == fold) {
            decisions[i] = svm_decision(&fold_model, &x[i])?;
        }
    }
    let platt = platt_fit(&decisions, &y)?;

    Ok(FeatureModel {
        featureset: fs,
        registry_hash: config.features.registry_hash(fs),
        dim,
        norm,
        c_selection,
        svm,
        platt,
    })
}

/// Trains one independent classifier per featureset on labelled samples.
pub fn train_pipeline(
    samples: &[Sample],
    featuresets: &[FeatureSetId],
    config: &PipelineConfig,
    seed: u64,
) -> Result<TrainedModel> {
    config.features.validate()?;
    if featuresets.is_empty() {
        return Err(Error::Argument("no featureset requested".into()));
    }
    check_labels(samples)?;
    let models = featuresets
        .iter()
        .map(|&fs| train_featureset(samples, fs, config, seed))
        .collect::<Result<_>>()?;
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        seed,
        config: config.clone(),
        source_policy: None,
        pose_t2: None,
        models,
    })
}

/// Segments when every source interaction is segment-annotated, otherwise
/// the configured prefix window.
pub fn source_policy(corpus: &[InteractionRecord], config: &PipelineConfig) -> WindowPolicy {
    if !corpus.is_empty() && corpus.iter().all(|r| !r.meta.segments.is_empty()) {
        WindowPolicy::Segments
    } else {
        WindowPolicy::Full {
            minutes: config.window_minutes,
        }
    }
}

/// Featurizes a labelled source corpus and trains on it. Pose masks use one
/// T2 for the whole corpus.
pub fn train_on_corpus(
    corpus: &[InteractionRecord],
    featuresets: &[FeatureSetId],
    config: &PipelineConfig,
    seed: u64,
) -> Result<TrainedModel> {
    let policy = source_policy(corpus, config);
    let pose_t2 = if featuresets.contains(&FeatureSetId::Pose) {
        Some(corpus_t2(corpus, &policy, &config.features.pose)?)
    } else {
        None
    };
    let t2 = pose_t2.map_or(T2Mode::PerStream, T2Mode::Fixed);
    let samples = featurize(corpus, featuresets, &policy, &config.features, t2)?;
    let mut model = train_pipeline(&samples, featuresets, config, seed)?;
    model.source_policy = Some(policy);
    model.pose_t2 = pose_t2;
    Ok(model)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantScore {
    pub participant: String,
    /// Calibrated probability per featureset, in model order.
    pub probabilities: Vec<f64>,
    pub fused: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub interaction_id: String,
    pub featuresets: Vec<FeatureSetId>,
    pub scores: Vec<ParticipantScore>,
    pub leader: String,
}

/// Late-fused leader prediction for the samples of one interaction.
pub fn predict_interaction(model: &TrainedModel, samples: &[Sample]) -> Result<PredictionReport> {
    let first = samples.first().ok_or_else(|| Error::Prediction("no samples".into()))?;
    let id = first.interaction_id.clone();
    if samples.iter().any(|s| s.interaction_id != id) {
        return Err(Error::Prediction("samples from more than one interaction".into()));
    }
    let mut participants: BTreeMap<usize, &str> = BTreeMap::new();
    for s in samples {
        participants.entry(s.participant_index).or_insert(&s.participant_id);
        if !model.models.iter().any(|m| m.featureset == s.featureset) {
            return Err(Error::Prediction(format!("model has no {} classifier", s.featureset)));
        }
    }
    let order: Vec<usize> = participants.keys().copied().collect();

    let mut per_fs: Vec<Vec<f64>> = Vec::with_capacity(model.models.len());
    for m in &model.models {
        let own: Vec<Sample> = samples.iter().filter(|s| s.featureset == m.featureset).cloned().collect();
        if own.iter().any(|s| s.values.len() != m.dim) {
            return Err(Error::Prediction(format!("{} samples do not have {} features", m.featureset, m.dim)));
        }
        if own.is_empty() {
            return Err(Error::Prediction(format!("interaction {id} has no {} samples", m.featureset)));
        }
        let normalized = normalize_test_interaction(&own)?;
        let mut sums = vec![(0.0, 0usize); order.len()];
        for s in &normalized {
            let p = predict_probability(&m.svm, &m.platt, &s.values)?;
            let slot = order.iter().position(|&o| o == s.participant_index).expect("indexed above");
            sums[slot].0 += p;
            sums[slot].1 += 1;
        }
        if let Some(k) = sums.iter().position(|(_, n)| *n == 0) {
            return Err(Error::Prediction(format!(
                "participant {} of {id} has no {} samples",
                participants[&order[k]], m.featureset
            )));
        }
        per_fs.push(sums.into_iter().map(|(s, n)| s / n as f64).collect());
    }

    let mut scores = Vec::with_capacity(order.len());
    for (k, p) in order.iter().enumerate() {
        let probabilities: Vec<f64> = per_fs.iter().map(|v| v[k]).collect();
        let fused = probabilities.iter().sum::<f64>() / probabilities.len() as f64;
        scores.push(ParticipantScore {
            participant: participants[p].to_string(),
            probabilities,
            fused,
        });
    }
    let mut best = 0;
    for k in 1..scores.len() {
        if scores[k].fused > scores[best].fused {
            best = k;
        }
    }
    Ok(PredictionReport {
        interaction_id: id,
        featuresets: model.featuresets(),
        leader: scores[best].participant.clone(),
        scores,
    })
}

/// Groups samples by interaction, preserving first-appearance order.
pub fn group_by_interaction(samples: &[Sample]) -> Vec<Vec<Sample>> {
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut groups: Vec<Vec<Sample>> = Vec::new();
    for s in samples {
        let next = groups.len();
        let k = *index.entry(&s.interaction_id).or_insert(next);
        if k == groups.len() {
            groups.push(Vec::new());
        }
        groups[k].push(s.clone());
    }
    groups
}

/// Predicts every interaction of a target corpus from its first
/// `minutes`.
pub fn predict_corpus(model: &TrainedModel, corpus: &[InteractionRecord], minutes: f64) -> Result<Vec<PredictionReport>> {
    let featuresets = model.featuresets();
    let policy = WindowPolicy::Full { minutes };
    let t2 = model.test_t2_mode();
    corpus
        .iter()
        .map(|record| {
            let samples = featurize(std::slice::from_ref(record), &featuresets, &policy, &model.config.features, t2)?;
            predict_interaction(model, &samples)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::CvOutcome;

    fn sample(id: &str, p: usize, fs: FeatureSetId, values: Vec<f64>) -> Sample {
        Sample {
            interaction_id: id.into(),
            participant_id: format!("P{p}"),
            participant_index: p,
            window: Window::new(0, 10).unwrap(),
            featureset: fs,
            values,
            label: None,
        }
    }

    /// Model whose single-feature decision is the identity, so the calibrated
    /// probabilities are easy to set.
    fn fixed_model(fs: &[(FeatureSetId, PlattParams)]) -> TrainedModel {
        let models = fs
            .iter()
            .map(|&(f, platt)| FeatureModel {
                featureset: f,
                registry_hash: String::new(),
                dim: 1,
                norm: NormStats { mean: vec![0.0], std: vec![1.0], epsilon: DEFAULT_EPSILON },
                c_selection: CvOutcome { c: 1.0, scores: vec![] },
                svm: SvmModel {
                    support_vectors: vec![],
                    dual_coef: vec![],
                    bias: 0.0,
                    gamma: 1.0,
                    c: 1.0,
                    dim: 1,
                    n_train: 0,
                },
                platt,
            })
            .collect();
        TrainedModel {
            format_version: MODEL_FORMAT_VERSION,
            seed: 0,
            config: PipelineConfig::default(),
            source_policy: None,
            pose_t2: None,
            models,
        }
    }

    #[test]
    fn z_scores_of_small_column() {
        let s: Vec<Sample> = [1.0, 2.0, 3.0]
            .iter()
            .enumerate()
            .map(|(p, &v)| sample("a", p, FeatureSetId::Speech, vec![v, 7.0]))
            .collect();
        let (out, stats) = normalize_train(&s).unwrap();
        let col: Vec<f64> = out.iter().map(|s| s.values[0]).collect();
        assert!((col[0] + 1.2247).abs() < 1e-4 && col[1].abs() < 1e-12 && (col[2] - 1.2247).abs() < 1e-4);
        assert!(out.iter().all(|s| s.values[1] == 0.0));
        assert_eq!(stats.mean, vec![2.0, 7.0]);

        let t: Vec<Sample> = [2.0, 4.0, 6.0]
            .iter()
            .enumerate()
            .map(|(p, &v)| sample("a", p, FeatureSetId::Speech, vec![v]))
            .collect();
        let out = normalize_test_interaction(&t).unwrap();
        assert!((out[0].values[0] + 1.2247).abs() < 1e-4 && (out[2].values[0] - 1.2247).abs() < 1e-4);
    }

    #[test]
    fn test_normalization_rejects_mixed_interactions() {
        let t = vec![
            sample("a", 0, FeatureSetId::Vfoa, vec![1.0]),
            sample("b", 1, FeatureSetId::Vfoa, vec![2.0]),
        ];
        assert!(normalize_test_interaction(&t).is_err());
        assert!(normalize_train(&[]).is_err());
    }

    /// Decision increasing in the single normalized feature.
    fn monotone(model: &mut TrainedModel) {
        for m in model.models.iter_mut() {
            m.svm.support_vectors = vec![vec![10.0]];
            m.svm.dual_coef = vec![1.0];
            m.svm.gamma = 0.01;
        }
    }

    #[test]
    fn highest_probability_wins() {
        let mut model = fixed_model(&[(FeatureSetId::Vfoa, PlattParams { a: -5.0, b: 0.0 })]);
        monotone(&mut model);
        let s: Vec<Sample> = [-2.0, 3.0, 0.5]
            .iter()
            .enumerate()
            .map(|(p, &v)| sample("i", p, FeatureSetId::Vfoa, vec![v]))
            .collect();
        let report = predict_interaction(&model, &s).unwrap();
        assert_eq!(report.leader, "P1");
        let p: Vec<f64> = report.scores.iter().map(|s| s.fused).collect();
        assert!(p[1] > p[2] && p[2] > p[0]);
    }

    #[test]
    fn fusion_averages_and_ties_go_first() {
        let mut model = fixed_model(&[
            (FeatureSetId::Vfoa, PlattParams { a: -5.0, b: 0.0 }),
            (FeatureSetId::Speech, PlattParams { a: 5.0, b: 0.0 }),
        ]);
        monotone(&mut model);
        let s = vec![
            sample("i", 0, FeatureSetId::Vfoa, vec![1.0]),
            sample("i", 1, FeatureSetId::Vfoa, vec![2.0]),
            sample("i", 0, FeatureSetId::Speech, vec![1.0]),
            sample("i", 1, FeatureSetId::Speech, vec![3.0]),
        ];
        let report = predict_interaction(&model, &s).unwrap();
        for score in &report.scores {
            assert_eq!(score.probabilities.len(), 2);
            assert_eq!(score.fused, (score.probabilities[0] + score.probabilities[1]) / 2.0);
        }
        // Mirror-image sigmoids over identical z-scores cancel exactly.
        assert_eq!(report.scores[0].fused, report.scores[1].fused);
        assert_eq!(report.leader, "P0");

        let flat = fixed_model(&[(FeatureSetId::Vfoa, PlattParams { a: 0.0, b: 0.0 })]);
        let s = vec![
            sample("j", 0, FeatureSetId::Vfoa, vec![1.0]),
            sample("j", 1, FeatureSetId::Vfoa, vec![2.0]),
            sample("j", 2, FeatureSetId::Vfoa, vec![0.0]),
        ];
        let report = predict_interaction(&flat, &s).unwrap();
        assert!(report.scores.iter().all(|s| s.fused == 0.5));
        assert_eq!(report.leader, "P0");
    }

    #[test]
    fn missing_coverage_is_reported() {
        let model = fixed_model(&[
            (FeatureSetId::Vfoa, PlattParams { a: -1.0, b: 0.0 }),
            (FeatureSetId::Speech, PlattParams { a: -1.0, b: 0.0 }),
        ]);
        let s = vec![
            sample("i", 0, FeatureSetId::Vfoa, vec![1.0]),
            sample("i", 1, FeatureSetId::Vfoa, vec![2.0]),
            sample("i", 0, FeatureSetId::Speech, vec![1.0]),
            sample("i", 2, FeatureSetId::Speech, vec![2.0]),
        ];
        assert!(matches!(predict_interaction(&model, &s), Err(Error::Prediction(_))));
    }

    #[test]
    fn label_check_requires_one_leader() {
        let mut s = vec![
            sample("i", 0, FeatureSetId::Vfoa, vec![1.0]),
            sample("i", 1, FeatureSetId::Vfoa, vec![2.0]),
        ];
        s[0].label = Some(true);
        s[1].label = Some(true);
        assert!(matches!(check_labels(&s), Err(Error::Label { .. })));
        s[1].label = Some(false);
        assert!(check_labels(&s).is_ok());
        s[0].label = Some(false);
        assert!(check_labels(&s).is_err());
    }

    #[test]
    fn featureset_parsing() {
        assert_eq!(
            parse_featuresets("vfoa, POSE").unwrap(),
            vec![FeatureSetId::Vfoa, FeatureSetId::Pose]
        );
        assert!(parse_featuresets("vfoa,vfoa").is_err());
        assert!(parse_featuresets("gaze").is_err());
        assert!(parse_featuresets("").is_err());
    }

    #[test]
    fn registry_sizes() {
        let cfg = FeatureConfig::default();
        assert_eq!(cfg.feature_names(FeatureSetId::Vfoa).len(), 15);
        assert_eq!(cfg.feature_names(FeatureSetId::Pose).len(), 80);
        assert_eq!(cfg.feature_names(FeatureSetId::Face).len(), 36);
        assert_eq!(cfg.feature_names(FeatureSetId::Speech).len(), 4);
        assert_ne!(cfg.registry_hash(FeatureSetId::Vfoa), cfg.registry_hash(FeatureSetId::Speech));
    }
}
