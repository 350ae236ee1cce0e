//! Group-wise cross-validation for choosing C.
//!
//! All samples of one interaction share a fold. Held-out folds are scored by
//! per-unit leader accuracy, where a unit is one (interaction, window) group
//! with exactly one positive sample.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{platt_fit, predict_probability, svm_decision, svm_train, SvmConfig};
use crate::error::{Error, Result};
use crate::util::derive_seed;

/// Training samples with their grouping keys.
#[derive(Clone, Copy, Debug)]
pub struct GroupedSamples<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [f64],
    /// Interaction key per sample; decides the fold.
    pub interaction: &'a [usize],
    /// Scoring unit per sample; one leader per unit.
    pub unit: &'a [usize],
}

impl GroupedSamples<'_> {
    fn check(&self) -> Result<()> {
        let n = self.x.len();
        if self.y.len() != n || self.interaction.len() != n || self.unit.len() != n {
            return Err(Error::Argument("grouped sample arrays differ in length".into()));
        }
        Ok(())
    }

    fn subset(&self, idx: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            idx.iter().map(|&i| self.x[i].clone()).collect(),
            idx.iter().map(|&i| self.y[i]).collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub c: f64,
    /// `(C, mean held-out accuracy)` for every grid point, in grid order.
    pub scores: Vec<(f64, f64)>,
}

/// Fold index per sample: distinct interactions are shuffled with `seed` and
/// dealt round-robin into `k` folds.
pub fn group_folds(interaction: &[usize], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Argument(format!("need at least 2 folds, got {k}")));
    }
    let mut distinct: Vec<usize> = interaction.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < k {
        return Err(Error::Argument(format!(
            "{} interactions cannot fill {k} folds",
            distinct.len()
        )));
    }
    distinct.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fold_of: BTreeMap<usize, usize> = distinct.iter().enumerate().map(|(pos, &g)| (g, pos % k)).collect();
    Ok(interaction.iter().map(|g| fold_of[g]).collect())
}

/// Fraction of units whose highest-scoring sample is the positive one
/// (ties go to the earliest sample).
pub(crate) fn unit_accuracy(units: &[usize], scores: &[f64], labels: &[f64]) -> f64 {
    let mut best: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for ((&u, &s), &l) in units.iter().zip(scores).zip(labels) {
        best.entry(u)
            .and_modify(|e| {
                if s > e.0 {
                    *e = (s, l);
                }
            })
            .or_insert((s, l));
    }
    if best.is_empty() {
        return 0.0;
    }
    best.values().filter(|(_, l)| *l > 0.0).count() as f64 / best.len() as f64
}

fn fold_score(data: &GroupedSamples, folds: &[usize], fold: usize, config: &SvmConfig, seed: u64) -> Result<f64> {
    let train: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] != fold).collect();
    let test: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] == fold).collect();
    let (x, y) = data.subset(&train);
    let model = svm_train(&x, &y, config, seed)?;
    let train_dec: Vec<f64> = x.iter().map(|r| svm_decision(&model, r)).collect::<Result<_>>()?;
    let platt = platt_fit(&train_dec, &y)?;
    let probs: Vec<f64> = test
        .iter()
        .map(|&i| predict_probability(&model, &platt, &data.x[i]))
        .collect::<Result<_>>()?;
    let units: Vec<usize> = test.iter().map(|&i| data.unit[i]).collect();
    let labels: Vec<f64> = test.iter().map(|&i| data.y[i]).collect();
    Ok(unit_accuracy(&units, &probs, &labels))
}

/// Picks the grid value with the best mean held-out accuracy; ties favour
/// the smaller C.
pub fn select_c_by_group_cv(
    data: &GroupedSamples,
    c_grid: &[f64],
    k: usize,
    base: &SvmConfig,
    seed: u64,
) -> Result<CvOutcome> {
    data.check()?;
    if c_grid.is_empty() {
        return Err(Error::Argument("empty C grid".into()));
    }
    let folds = group_folds(data.interaction, k, seed)?;
    let mut scores = Vec::with_capacity(c_grid.len());
    for &c in c_grid {
        let config = SvmConfig { c, ..base.clone() };
        let mut total = 0.0;
        for fold in 0..k {
            total += fold_score(data, &folds, fold, &config, derive_seed(seed, fold as u64 + 1))?;
        }
        scores.push((c, total / k as f64));
    }
    let mut order: Vec<&(f64, f64)> = scores.iter().collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = order[0];
    for cand in order.into_iter().skip(1) {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    Ok(CvOutcome { c: best.0, scores })
}
