//! Facial action unit features: per-AU mean presence and intensity plus the
//! mean and spread of a per-frame positivity score.
//!
//! Positivity is `(I(AU6) + I(AU12)) / 2 - I(AU15)`: cheek raiser and lip
//! corner puller count towards a smile, lip corner depressor against it.

use serde::{Deserialize, Serialize};

use crate::corpus::AuStream;
use crate::error::{Error, Result};

pub const DEFAULT_AU_SET: [&str; 17] = [
    "AU1", "AU2", "AU4", "AU5", "AU6", "AU7", "AU9", "AU10", "AU12", "AU14", "AU15", "AU17", "AU20",
    "AU23", "AU25", "AU26", "AU45",
];

const POSITIVE_AUS: [&str; 2] = ["AU6", "AU12"];
const NEGATIVE_AU: &str = "AU15";

pub fn default_au_set() -> Vec<String> {
    DEFAULT_AU_SET.iter().map(|s| s.to_string()).collect()
}

/// Rejects AU sets that cannot produce the positivity score or repeat an AU.
pub fn validate_au_set(au_set: &[String]) -> Result<()> {
    for required in POSITIVE_AUS.iter().chain(std::iter::once(&NEGATIVE_AU)) {
        if !au_set.iter().any(|a| a == required) {
            return Err(Error::Config(format!("AU set must contain {required}")));
        }
    }
    let unique: std::collections::HashSet<&String> = au_set.iter().collect();
    if unique.len() != au_set.len() {
        return Err(Error::Config("AU set contains duplicates".into()));
    }
    Ok(())
}

pub fn face_feature_names(au_set: &[String]) -> Vec<String> {
    au_set
        .iter()
        .flat_map(|au| [format!("{au}_presence"), format!("{au}_intensity")])
        .chain(["positivity_mean".to_string(), "positivity_std".to_string()])
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceVector(pub Vec<f64>);

pub fn compute_face_features(aus: &AuStream, participant: usize, au_set: &[String]) -> Result<FaceVector> {
    validate_au_set(au_set)?;
    if participant >= aus.values.len() {
        return Err(Error::Argument(format!("participant index {participant} out of range")));
    }
    let columns: Vec<usize> = au_set
        .iter()
        .map(|au| {
            aus.au_index(au)
                .ok_or_else(|| Error::Config(format!("action unit {au} missing from stream")))
        })
        .collect::<Result<_>>()?;
    let frames = aus.frames();
    if frames == 0 {
        return Err(Error::Argument("empty AU window".into()));
    }
    let idx = |name: &str| columns[au_set.iter().position(|a| a == name).expect("validated")];
    let (au6, au12, au15) = (idx("AU6"), idx("AU12"), idx("AU15"));

    let mut presence = vec![0.0; columns.len()];
    let mut intensity = vec![0.0; columns.len()];
    let mut positivity = Vec::with_capacity(frames);
    for f in 0..frames {
        let row = aus.frame(participant, f);
        for (k, &c) in columns.iter().enumerate() {
            presence[k] += f64::from(row[c].presence);
            intensity[k] += row[c].intensity;
        }
        positivity.push((row[au6].intensity + row[au12].intensity) / 2.0 - row[au15].intensity);
    }
    let n = frames as f64;
    let mut out = Vec::with_capacity(2 * columns.len() + 2);
    for k in 0..columns.len() {
        out.push(presence[k] / n);
        out.push(intensity[k] / n);
    }
    out.push(crate::util::mean(&positivity));
    out.push(crate::util::population_std(&positivity));
    Ok(FaceVector(out))
}
