//! Binary RBF support vector machine with Platt-calibrated outputs.

mod cv;
mod platt;
mod smo;

pub use cv::{group_folds, select_c_by_group_cv, CvOutcome, GroupedSamples};
pub use platt::{platt_fit, sigmoid_probability, PlattParams};
pub use smo::{dual_objective, solve_dual, DualSolution};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel width; `Auto` resolves to `1 / n_features`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamma {
    Auto,
    Value(f64),
}

impl Gamma {
    pub fn resolve(self, dim: usize) -> Result<f64> {
        let g = match self {
            Gamma::Auto if dim == 0 => return Err(Error::Argument("zero-dimensional features".into())),
            Gamma::Auto => 1.0 / dim as f64,
            Gamma::Value(g) => g,
        };
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::Config(format!("gamma must be positive, got {g}")));
        }
        Ok(g)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub gamma: Gamma,
    pub smo_tolerance: f64,
    /// Iteration guard; `None` means `max(10 n, 100_000)`.
    pub max_iter: Option<usize>,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            gamma: Gamma::Auto,
            smo_tolerance: 1e-3,
            max_iter: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub dim: usize,
    pub n_train: usize,
}

pub fn rbf_kernel(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

pub fn gram_matrix(x: &[Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        k[i][i] = 1.0;
        for j in 0..i {
            let v = rbf_kernel(gamma, &x[i], &x[j]);
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    k
}

fn check_inputs(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!("{} samples but {} labels", x.len(), y.len())));
    }
    let dim = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != dim) {
        return Err(Error::Argument("rows differ in dimension".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Argument("non-finite feature value".into()));
    }
    if y.iter().any(|&l| l != 1.0 && l != -1.0) {
        return Err(Error::Argument("labels must be -1 or +1".into()));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::Training("both classes are required".into()));
    }
    Ok(dim)
}

/// Trains and also returns the raw dual solution (used by diagnostics).
pub fn svm_train_dual(x: &[Vec<f64>], y: &[f64], config: &SvmConfig, seed: u64) -> Result<(SvmModel, DualSolution)> {
    let dim = check_inputs(x, y)?;
    if !(config.c.is_finite() && config.c > 0.0) {
        return Err(Error::Config(format!("C must be positive, got {}", config.c)));
    }
    let gamma = config.gamma.resolve(dim)?;
    let gram = gram_matrix(x, gamma);
    let max_iter = config.max_iter.unwrap_or_else(|| (10 * x.len()).max(100_000));
    let solution = solve_dual(&gram, y, config.c, config.smo_tolerance, max_iter, seed);
    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for (i, &a) in solution.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(x[i].clone());
            dual_coef.push(a * y[i]);
        }
    }
    let model = SvmModel {
        support_vectors,
        dual_coef,
        bias: solution.bias,
        gamma,
        c: config.c,
        dim,
        n_train: x.len(),
    };
    Ok((model, solution))
}

pub fn svm_train(x: &[Vec<f64>], y: &[f64], config: &SvmConfig, seed: u64) -> Result<SvmModel> {
    svm_train_dual(x, y, config, seed).map(|(m, _)| m)
}

pub fn svm_decision(model: &SvmModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.dim {
        return Err(Error::Argument(format!(
            "expected {} features, got {}",
            model.dim,
            x.len()
        )));
    }
    Ok(model
        .support_vectors
        .iter()
        .zip(&model.dual_coef)
        .map(|(sv, coef)| coef * rbf_kernel(model.gamma, sv, x))
        .sum::<f64>()
        + model.bias)
}

pub fn predict_probability(model: &SvmModel, platt: &PlattParams, x: &[f64]) -> Result<f64> {
    Ok(sigmoid_probability(platt, svm_decision(model, x)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_model(c: f64) -> SvmModel {
        let x = vec![vec![0.0, 0.0], vec![2.0, 1.0]];
        svm_train(&x, &[1.0, -1.0], &SvmConfig { c, ..SvmConfig::default() }, 0).unwrap()
    }

    #[test]
    fn symmetric_pair_splits_midway() {
        for c in [0.1, 1.0, 10.0, 1000.0] {
            let m = pair_model(c);
            assert_eq!(m.support_vectors.len(), 2);
            assert!(svm_decision(&m, &[1.0, 0.5]).unwrap().abs() < 1e-6, "C = {c}");
        }
    }

    #[test]
    fn unbounded_pair_has_unit_margin() {
        let m = pair_model(1000.0);
        assert!(svm_decision(&m, &[0.0, 0.0]).unwrap() >= 1.0 - 1e-6);
        assert!(svm_decision(&m, &[2.0, 1.0]).unwrap() <= -1.0 + 1e-6);
    }

    #[test]
    fn xor_is_separable_with_rbf() {
        let base = [([0.0, 0.0], 1.0), ([1.0, 1.0], 1.0), ([0.0, 1.0], -1.0), ([1.0, 0.0], -1.0)];
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..5 {
            for (p, l) in base {
                x.push(p.to_vec());
                y.push(l);
            }
        }
        let cfg = SvmConfig { c: 100.0, gamma: Gamma::Value(1.0), ..SvmConfig::default() };
        let m = svm_train(&x, &y, &cfg, 3).unwrap();
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(p, l)| svm_decision(&m, p).unwrap().signum() == **l)
            .count();
        assert_eq!(correct, 20);
    }

    #[test]
    fn training_errors() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            svm_train(&x, &[1.0, 1.0], &SvmConfig::default(), 0),
            Err(Error::Training(_))
        ));
        let bad = vec![vec![f64::NAN], vec![1.0]];
        assert!(matches!(
            svm_train(&bad, &[1.0, -1.0], &SvmConfig::default(), 0),
            Err(Error::Argument(_))
        ));
        let m = svm_train(&x, &[1.0, -1.0], &SvmConfig::default(), 0).unwrap();
        assert!(matches!(svm_decision(&m, &[1.0, 2.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn auto_gamma_is_inverse_dimension() {
        let x = vec![vec![0.0; 4], vec![1.0; 4]];
        let m = svm_train(&x, &[1.0, -1.0], &SvmConfig::default(), 0).unwrap();
        assert_eq!(m.gamma, 0.25);
    }

    #[test]
    fn sigmoid_centre_and_saturation() {
        let p = PlattParams { a: -1.0, b: 0.0 };
        assert_eq!(sigmoid_probability(&p, 0.0), 0.5);
        assert!(sigmoid_probability(&p, 50.0) > 1.0 - 1e-9);
    }
}
