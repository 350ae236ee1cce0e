//! Sequential minimal optimization for the soft-margin SVM dual
//!
//! ```text
//! min  1/2 a'Qa - e'a   s.t.  y'a = 0,  0 <= a_i <= C,   Q_ij = y_i y_j K_ij
//! ```
//!
//! Working pairs are the maximal KKT violators; equal violators are broken
//! with a seeded RNG so the result is reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dual solution and the offset `b` of `f(x) = sum a_i y_i K(x_i, x) + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Dual objective in maximisation form: `e'a - 1/2 a'Qa`.
pub fn dual_objective(gram: &[Vec<f64>], y: &[f64], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

fn pick(candidates: &[usize], rng: &mut ChaCha8Rng) -> usize {
    if candidates.len() == 1 {
        candidates[0]
    } else {
        candidates[rng.random_range(0..candidates.len())]
    }
}

/// Solves the dual for a precomputed kernel matrix.
pub fn solve_dual(
    gram: &[Vec<f64>],
    y: &[f64],
    c: f64,
    tolerance: f64,
    max_iter: usize,
    seed: u64,
) -> DualSolution {
    let n = y.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alpha = vec![0.0; n];
    // Gradient of the minimisation objective: G = Q a - e.
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * gram[i][j];

    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    let mut up = Vec::with_capacity(n);
    let mut low = Vec::with_capacity(n);
    while iterations < max_iter {
        let mut g_max = f64::NEG_INFINITY;
        let mut g_min = f64::INFINITY;
        up.clear();
        low.clear();
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) {
                if v > g_max {
                    g_max = v;
                    up.clear();
                }
                if v == g_max {
                    up.push(t);
                }
            }
            if in_low(alpha[t], y[t]) {
                if v < g_min {
                    g_min = v;
                    low.clear();
                }
                if v == g_min {
                    low.push(t);
                }
            }
        }
        if up.is_empty() || low.is_empty() || g_max - g_min < tolerance {
            converged = true;
            break;
        }
        let i = pick(&up, &mut rng);
        let j = pick(&low, &mut rng);
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = 1e-12;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = 1e-12;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    DualSolution {
        bias: bias_from_gradient(&alpha, &grad, y, c),
        alpha,
        iterations,
        converged,
    }
}

/// Offset from free multipliers, or the midpoint of the feasible interval
/// when every multiplier sits at a bound.
fn bias_from_gradient(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        match (upper.is_finite(), lower.is_finite()) {
            (true, true) => (upper + lower) / 2.0,
            (true, false) => upper,
            (false, true) => lower,
            (false, false) => 0.0,
        }
    };
    -rho
}
