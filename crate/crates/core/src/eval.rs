//! Evaluation protocols: per-interaction accuracy, cross- and within-corpus
//! experiments, growing-window curves and single-feature orientation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::InteractionRecord;
use crate::error::{Error, Result};
use crate::pipeline::{
    featurize, predict_corpus, train_on_corpus, FeatureSetId, PipelineConfig, PredictionReport, T2Mode, TrainedModel,
    WindowPolicy,
};
use crate::svm::group_folds;
use crate::util::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionOutcome {
    pub interaction_id: String,
    pub predicted: String,
    pub truth: String,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub protocol: String,
    pub outcomes: Vec<InteractionOutcome>,
    pub accuracy: f64,
    pub config: serde_json::Value,
}

impl ExperimentResult {
    pub fn new(protocol: &str, outcomes: Vec<InteractionOutcome>, config: serde_json::Value) -> Self {
        let accuracy = flag_accuracy(&outcomes);
        ExperimentResult {
            protocol: protocol.into(),
            outcomes,
            accuracy,
            config,
        }
    }
}

fn flag_accuracy(outcomes: &[InteractionOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().filter(|o| o.correct).count() as f64 / outcomes.len() as f64
}

/// Fraction of `(interaction, predicted leader)` pairs matching `truth`.
pub fn accuracy(predictions: &[(String, String)], truth: &BTreeMap<String, String>) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Argument("no predictions".into()));
    }
    let mut correct = 0usize;
    for (id, leader) in predictions {
        let t = truth
            .get(id)
            .ok_or_else(|| Error::Argument(format!("no ground truth for interaction {id}")))?;
        correct += usize::from(t == leader);
    }
    Ok(correct as f64 / predictions.len() as f64)
}

/// Expected accuracy of uniform random guessing: mean of `1 / n_i`.
pub fn composition_baseline(group_sizes: &[usize]) -> Result<f64> {
    if group_sizes.is_empty() || group_sizes.contains(&0) {
        return Err(Error::Argument("group sizes must be nonempty and positive".into()));
    }
    Ok(group_sizes.iter().map(|&n| 1.0 / n as f64).sum::<f64>() / group_sizes.len() as f64)
}

/// Central interval of random-guess accuracy holding at least `level` of
/// the probability mass. The number of correct guesses is Poisson-binomial
/// with success probabilities `1 / n_i`.
pub fn chance_interval(group_sizes: &[usize], level: f64) -> Result<(f64, f64)> {
    composition_baseline(group_sizes)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Argument(format!("level must be in (0, 1), got {level}")));
    }
    let mut pmf = vec![1.0];
    for &n in group_sizes {
        let p = 1.0 / n as f64;
        let mut next = vec![0.0; pmf.len() + 1];
        for (k, &mass) in pmf.iter().enumerate() {
            next[k] += mass * (1.0 - p);
            next[k + 1] += mass * p;
        }
        pmf = next;
    }
    let tail = (1.0 - level) / 2.0;
    let mut cdf = 0.0;
    let mut lo = None;
    let mut hi = pmf.len() - 1;
    for (k, &mass) in pmf.iter().enumerate() {
        cdf += mass;
        if lo.is_none() && cdf > tail {
            lo = Some(k);
        }
        if cdf >= 1.0 - tail {
            hi = k;
            break;
        }
    }
    let total = group_sizes.len() as f64;
    Ok((lo.unwrap_or(0) as f64 / total, hi as f64 / total))
}

pub fn group_sizes(corpus: &[InteractionRecord]) -> Vec<usize> {
    corpus.iter().map(|r| r.meta.participants.len()).collect()
}

fn truth_of(record: &InteractionRecord) -> Result<String> {
    record.meta.leader.clone().ok_or_else(|| Error::Label {
        interaction: record.meta.id.clone(),
        message: "no ground-truth leader".into(),
    })
}

fn outcomes(reports: &[PredictionReport], corpus: &[InteractionRecord]) -> Result<Vec<InteractionOutcome>> {
    reports
        .iter()
        .zip(corpus)
        .map(|(r, record)| {
            let truth = truth_of(record)?;
            Ok(InteractionOutcome {
                interaction_id: r.interaction_id.clone(),
                correct: r.leader == truth,
                predicted: r.leader.clone(),
                truth,
            })
        })
        .collect()
}

fn echo(featuresets: &[FeatureSetId], config: &PipelineConfig, seed: u64, extra: serde_json::Value) -> serde_json::Value {
    json!({
        "featuresets": featuresets,
        "seed": seed,
        "pipeline": config,
        "protocol_options": extra,
    })
}

/// Predictions of an already trained model on a labelled target corpus.
pub fn evaluate_model(
    model: &TrainedModel,
    target: &[InteractionRecord],
    minutes: f64,
) -> Result<(Vec<PredictionReport>, Vec<InteractionOutcome>)> {
    for record in target {
        truth_of(record)?;
    }
    let reports = predict_corpus(model, target, minutes)?;
    let outcomes = outcomes(&reports, target)?;
    Ok((reports, outcomes))
}

/// Trains on `source` and predicts every `target` interaction from its first
/// `config.window_minutes`.
pub fn cross_dataset_eval(
    source: &[InteractionRecord],
    target: &[InteractionRecord],
    featuresets: &[FeatureSetId],
    config: &PipelineConfig,
    seed: u64,
) -> Result<ExperimentResult> {
    for record in target {
        truth_of(record)?;
    }
    let model = train_on_corpus(source, featuresets, config, seed)?;
    let (_, outcomes) = evaluate_model(&model, target, config.window_minutes)?;
    Ok(ExperimentResult::new(
        "cross",
        outcomes,
        echo(featuresets, config, seed, json!({ "minutes": config.window_minutes })),
    ))
}

/// Group-wise k-fold over interactions; C is chosen inside each training
/// split.
pub fn within_dataset_eval(
    corpus: &[InteractionRecord],
    featuresets: &[FeatureSetId],
    folds: usize,
    config: &PipelineConfig,
    seed: u64,
) -> Result<ExperimentResult> {
    for record in corpus {
        truth_of(record)?;
    }
    let keys: Vec<usize> = (0..corpus.len()).collect();
    let assignment = group_folds(&keys, folds, derive_seed(seed, 0))?;
    let mut by_index: Vec<Option<InteractionOutcome>> = vec![None; corpus.len()];
    for fold in 0..folds {
        let train: Vec<InteractionRecord> = (0..corpus.len())
            .filter(|&i| assignment[i] != fold)
            .map(|i| corpus[i].clone())
            .collect();
        let held: Vec<usize> = (0..corpus.len()).filter(|&i| assignment[i] == fold).collect();
        let test: Vec<InteractionRecord> = held.iter().map(|&i| corpus[i].clone()).collect();
        let model = train_on_corpus(&train, featuresets, config, derive_seed(seed, fold as u64 + 1))?;
        let (_, fold_outcomes) = evaluate_model(&model, &test, config.window_minutes)?;
        for (i, o) in held.into_iter().zip(fold_outcomes) {
            by_index[i] = Some(o);
        }
    }
    Ok(ExperimentResult::new(
        "within",
        by_index.into_iter().map(|o| o.expect("every interaction is held out once")).collect(),
        echo(featuresets, config, seed, json!({ "folds": folds })),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlinePoint {
    pub minutes: f64,
    pub accuracy: f64,
    pub outcomes: Vec<InteractionOutcome>,
}

/// One model, evaluated on growing target prefixes.
pub fn online_eval(
    source: &[InteractionRecord],
    target: &[InteractionRecord],
    featuresets: &[FeatureSetId],
    minutes_grid: &[f64],
    config: &PipelineConfig,
    seed: u64,
) -> Result<Vec<OnlinePoint>> {
    if minutes_grid.is_empty() {
        return Err(Error::Argument("empty minutes grid".into()));
    }
    if minutes_grid.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(Error::Argument("grid minutes must be positive".into()));
    }
    if minutes_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("minutes grid must be strictly ascending".into()));
    }
    for record in target {
        truth_of(record)?;
    }
    let model = train_on_corpus(source, featuresets, config, seed)?;
    minutes_grid
        .iter()
        .map(|&minutes| {
            let (_, outcomes) = evaluate_model(&model, target, minutes)?;
            Ok(OnlinePoint {
                minutes,
                accuracy: flag_accuracy(&outcomes),
                outcomes,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    #[serde(rename = "+")]
    Max,
    #[serde(rename = "-")]
    Min,
}

impl Orientation {
    pub fn symbol(self) -> &'static str {
        match self {
            Orientation::Max => "+",
            Orientation::Min => "-",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientationRow {
    pub feature: String,
    pub accuracy: f64,
    pub orientation: Orientation,
}

/// One interaction's raw feature rows (participant order) and leader index.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub rows: Vec<Vec<f64>>,
    pub leader: usize,
}

fn pick(rows: &[Vec<f64>], d: usize, better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (p, row) in rows.iter().enumerate().skip(1) {
        if better(row[d], rows[best][d]) {
            best = p;
        }
    }
    best
}

/// Unlearned argmax/argmin pickers per feature over raw feature tables.
pub fn orientation_rows(names: &[String], tables: &[FeatureTable]) -> Result<Vec<OrientationRow>> {
    if tables.is_empty() {
        return Err(Error::Argument("no interactions".into()));
    }
    if tables.iter().flat_map(|t| &t.rows).any(|r| r.len() != names.len()) {
        return Err(Error::Argument("feature rows do not match the name list".into()));
    }
    let n = tables.len() as f64;
    let mut rows: Vec<OrientationRow> = names
        .iter()
        .enumerate()
        .map(|(d, name)| {
            let max_hits = tables.iter().filter(|t| pick(&t.rows, d, |a, b| a > b) == t.leader).count();
            let min_hits = tables.iter().filter(|t| pick(&t.rows, d, |a, b| a < b) == t.leader).count();
            let (hits, orientation) = if min_hits > max_hits {
                (min_hits, Orientation::Min)
            } else {
                (max_hits, Orientation::Max)
            };
            OrientationRow {
                feature: name.clone(),
                accuracy: hits as f64 / n,
                orientation,
            }
        })
        .collect();
    rows.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy).then_with(|| a.feature.cmp(&b.feature)));
    Ok(rows)
}

/// Raw (unnormalized) per-participant features of every interaction over
/// its first `config.window_minutes`.
pub fn feature_tables(
    corpus: &[InteractionRecord],
    featureset: FeatureSetId,
    config: &PipelineConfig,
) -> Result<Vec<FeatureTable>> {
    let policy = WindowPolicy::Full {
        minutes: config.window_minutes,
    };
    let samples = featurize(corpus, &[featureset], &policy, &config.features, T2Mode::PerStream)?;
    let mut tables = Vec::with_capacity(corpus.len());
    for record in corpus {
        let truth = truth_of(record)?;
        let leader = record.meta.participant_index(&truth).ok_or_else(|| Error::Label {
            interaction: record.meta.id.clone(),
            message: format!("leader {truth} is not a participant"),
        })?;
        let rows = samples
            .iter()
            .filter(|s| s.interaction_id == record.meta.id)
            .map(|s| s.values.clone())
            .collect();
        tables.push(FeatureTable { rows, leader });
    }
    Ok(tables)
}

/// Post-hoc single-feature analysis: how well each feature alone picks the
/// leader by its per-interaction maximum or minimum.
pub fn single_feature_analysis(
    corpus: &[InteractionRecord],
    featureset: FeatureSetId,
    config: &PipelineConfig,
) -> Result<Vec<OrientationRow>> {
    let tables = feature_tables(corpus, featureset, config)?;
    orientation_rows(&config.features.feature_names(featureset), &tables)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Argument(format!("csv encoding failed: {e}"));
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(&row).map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Argument(format!("csv encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Columns: protocol, interaction_id, predicted, truth, correct.
pub fn write_result_csv(path: impl AsRef<Path>, result: &ExperimentResult) -> Result<()> {
    let rows = result.outcomes.iter().map(|o| {
        vec![
            result.protocol.clone(),
            o.interaction_id.clone(),
            o.predicted.clone(),
            o.truth.clone(),
            u8::from(o.correct).to_string(),
        ]
    });
    write_text(
        path.as_ref(),
        &csv_text(&["protocol", "interaction_id", "predicted", "truth", "correct"], rows)?,
    )
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes") + "\n";
    write_text(path.as_ref(), &text)
}

/// Columns: minutes, accuracy.
pub fn write_online_csv(path: impl AsRef<Path>, points: &[OnlinePoint]) -> Result<()> {
    let rows = points.iter().map(|p| vec![p.minutes.to_string(), p.accuracy.to_string()]);
    write_text(path.as_ref(), &csv_text(&["minutes", "accuracy"], rows)?)
}

/// Columns: feature, accuracy, orientation.
pub fn write_orientation_csv(path: impl AsRef<Path>, rows: &[OrientationRow]) -> Result<()> {
    let rows = rows.iter().map(|r| {
        vec![
            r.feature.clone(),
            format!("{:.4}", r.accuracy),
            r.orientation.symbol().to_string(),
        ]
    });
    write_text(path.as_ref(), &csv_text(&["feature", "accuracy", "orientation"], rows)?)
}
