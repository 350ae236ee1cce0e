//! Platt scaling: `P(+1 | f) = 1 / (1 + exp(a f + b))`.
//!
//! The fit minimises cross-entropy against smoothed targets
//! `t+ = (N+ + 1)/(N+ + 2)` and `t- = 1/(N- + 2)` with a damped Newton method
//! and a tiny ridge on the Hessian diagonal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlattParams {
    pub a: f64,
    pub b: f64,
}

const MAX_ITER: usize = 200;
const MIN_STEP: f64 = 1e-10;
const RIDGE: f64 = 1e-12;
const GRAD_TOL: f64 = 1e-8;

pub fn sigmoid_probability(params: &PlattParams, f: f64) -> f64 {
    let z = params.a * f + params.b;
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Cross-entropy of the targets under `z = a f + b`, written so that
/// neither branch overflows.
fn objective(decision: &[f64], targets: &[f64], a: f64, b: f64) -> f64 {
    decision
        .iter()
        .zip(targets)
        .map(|(&f, &t)| {
            let z = a * f + b;
            if z >= 0.0 {
                t * z + (-z).exp().ln_1p()
            } else {
                (t - 1.0) * z + z.exp().ln_1p()
            }
        })
        .sum()
}

pub fn platt_fit(decision: &[f64], labels: &[f64]) -> Result<PlattParams> {
    if decision.len() != labels.len() {
        return Err(Error::Argument("decision values and labels differ in length".into()));
    }
    if decision.iter().any(|f| !f.is_finite()) {
        return Err(Error::Argument("non-finite decision value".into()));
    }
    let positives = labels.iter().filter(|&&l| l > 0.0).count() as f64;
    let negatives = labels.len() as f64 - positives;
    if positives == 0.0 || negatives == 0.0 {
        return Err(Error::Calibration("both classes are required".into()));
    }
    let hi = (positives + 1.0) / (positives + 2.0);
    let lo = 1.0 / (negatives + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&l| if l > 0.0 { hi } else { lo }).collect();

    let mut a = 0.0;
    let mut b = ((negatives + 1.0) / (positives + 1.0)).ln();
    let mut fval = objective(decision, &targets, a, b);
    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21) = (RIDGE, RIDGE, 0.0);
        let (mut g1, mut g2) = (0.0, 0.0);
        for (&f, &t) in decision.iter().zip(&targets) {
            let z = a * f + b;
            // p = P(+1), q = 1 - p
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.hypot(g2) < GRAD_TOL {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let slope = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(decision, &targets, na, nb);
            if nf < fval + 1e-4 * step * slope {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            // No further decrease is representable.
            break;
        }
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Calibration(format!("sigmoid fit diverged (a = {a}, b = {b})")));
    }
    Ok(PlattParams { a, b })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_scores_give_negative_slope() {
        let dec = [-2.0, -2.0, -2.0, 2.0, 2.0];
        let lab = [-1.0, -1.0, -1.0, 1.0, 1.0];
        let p = platt_fit(&dec, &lab).unwrap();
        assert!(p.a < 0.0);
        // Separable data saturates at the smoothed targets 3/4 and 1/5.
        assert!((sigmoid_probability(&p, 2.0) - 0.75).abs() < 1e-3);
        assert!((sigmoid_probability(&p, -2.0) - 0.2).abs() < 1e-3);
    }

    #[test]
    fn equal_scores_give_smoothed_prior() {
        let dec = [0.7; 9];
        let lab = [1.0, -1.0, -1.0, 1.0, -1.0, -1.0, -1.0, -1.0, 1.0];
        let p = platt_fit(&dec, &lab).unwrap();
        let (np, nn) = (3.0, 6.0);
        let prior = (np * (np + 1.0) / (np + 2.0) + nn / (nn + 2.0)) / 9.0;
        assert!((sigmoid_probability(&p, 0.7) - prior).abs() < 1e-6);
    }

    #[test]
    fn flipped_labels_negate_parameters() {
        let dec = [-1.5, -0.2, 0.3, 0.9, 1.7, -0.8, 2.2];
        let lab = [-1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0];
        let flipped: Vec<f64> = lab.iter().map(|l| -l).collect();
        let p = platt_fit(&dec, &lab).unwrap();
        let q = platt_fit(&dec, &flipped).unwrap();
        assert!((p.a + q.a).abs() < 1e-6 && (p.b + q.b).abs() < 1e-6);
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(matches!(platt_fit(&[1.0, 2.0], &[1.0, 1.0]), Err(Error::Calibration(_))));
    }
}
