//! Independent reference implementations used by several test targets.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    (-gamma * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).exp()
}

/// Euclidean projection onto `{a : 0 <= a_i <= c, y'a = 0}`: the solution
/// is `clip(v - lambda y)` for the `lambda` that zeroes `y'a`, found by
/// bisection.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - lambda * yi).clamp(0.0, c)).collect() };
    let balance = |a: &[f64]| a.iter().zip(y).map(|(ai, yi)| ai * yi).sum::<f64>();
    let spread = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-spread, spread);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if balance(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Accelerated projected gradient (FISTA) on the minimisation form of the
/// dual: `1/2 a'Qa - e'a`.
pub fn qp_oracle(gram: &[Vec<f64>], y: &[f64], c: f64, iterations: usize) -> Vec<f64> {
    let n = y.len();
    let q: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * gram[i][j]).collect()).collect();
    let lipschitz = q.iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..iterations {
        let grad: Vec<f64> = (0..n).map(|i| q[i].iter().zip(&z).map(|(qij, zj)| qij * zj).sum::<f64>() - 1.0).collect();
        let v: Vec<f64> = z.iter().zip(&grad).map(|(zi, gi)| zi - step * gi).collect();
        let next = project(&v, y, c);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = next
            .iter()
            .zip(&a)
            .map(|(ni, ai)| ni + (t - 1.0) / t_next * (ni - ai))
            .collect();
        a = next;
        t = t_next;
    }
    a
}

/// `e'a - 1/2 a'Qa`.
pub fn dual_value(gram: &[Vec<f64>], y: &[f64], a: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += a[i] * a[j] * y[i] * y[j] * gram[i][j];
        }
    }
    a.iter().sum::<f64>() - 0.5 * quad
}

/// Offset from the KKT conditions: mean over margin multipliers, otherwise
/// the middle of the feasible interval.
pub fn oracle_bias(gram: &[Vec<f64>], y: &[f64], a: &[f64], c: f64) -> f64 {
    let n = y.len();
    let margin = |i: usize| (0..n).map(|j| a[j] * y[j] * gram[i][j]).sum::<f64>();
    let tol = 1e-6 * c.max(1.0);
    let free: Vec<usize> = (0..n).filter(|&i| a[i] > tol && a[i] < c - tol).collect();
    if !free.is_empty() {
        return free.iter().map(|&i| y[i] - margin(i)).sum::<f64>() / free.len() as f64;
    }
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..n {
        let b = y[i] - margin(i);
        let at_zero = a[i] <= tol;
        // y_i f_i >= 1 at zero, <= 1 at C.
        if (at_zero && y[i] > 0.0) || (!at_zero && y[i] < 0.0) {
            lo = lo.max(b);
        } else {
            hi = hi.min(b);
        }
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        _ => 0.0,
    }
}

/// Random binary problem with both classes present.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = rng.random_range(6..=40);
    let d = rng.random_range(1..=5);
    loop {
        let shift = rng.random_range(0.0..2.0);
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let label = if rng.random::<bool>() { 1.0 } else { -1.0 };
            x.push((0..d).map(|_| rng.random_range(-1.0..1.0) + label * shift / 2.0).collect::<Vec<f64>>());
            y.push(label);
        }
        if y.contains(&1.0) && y.contains(&-1.0) {
            return (x, y);
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Logistic fit of `P(+|f) = 1/(1+exp(a f + b))` to smoothed targets by
/// plain Newton iterations with step halving, stopping on tiny steps.
pub fn reference_platt(decision: &[f64], labels: &[f64]) -> (f64, f64) {
    let np = labels.iter().filter(|&&l| l > 0.0).count() as f64;
    let nn = labels.len() as f64 - np;
    let t: Vec<f64> = labels
        .iter()
        .map(|&l| if l > 0.0 { (np + 1.0) / (np + 2.0) } else { 1.0 / (nn + 2.0) })
        .collect();
    let loss = |a: f64, b: f64| -> f64 {
        decision
            .iter()
            .zip(&t)
            .map(|(&f, &ti)| {
                let p = 1.0 / (1.0 + (a * f + b).exp());
                -(ti * p.max(1e-300).ln() + (1.0 - ti) * (1.0 - p).max(1e-300).ln())
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, 0.0);
    for _ in 0..500 {
        // d loss / dz = t - p where z = a f + b
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&f, &ti) in decision.iter().zip(&t) {
            let p = 1.0 / (1.0 + (a * f + b).exp());
            let w = p * (1.0 - p);
            ga += (ti - p) * f;
            gb += ti - p;
            haa += w * f * f;
            hab += w * f;
            hbb += w;
        }
        let det = haa * hbb - hab * hab;
        if det.abs() < 1e-300 {
            break;
        }
        let da = -(hbb * ga - hab * gb) / det;
        let db = -(haa * gb - hab * ga) / det;
        let current = loss(a, b);
        let mut s = 1.0;
        while s > 1e-12 && loss(a + s * da, b + s * db) > current {
            s /= 2.0;
        }
        a += s * da;
        b += s * db;
        if (s * da).abs() < 1e-13 && (s * db).abs() < 1e-13 {
            break;
        }
    }
    (a, b)
}
