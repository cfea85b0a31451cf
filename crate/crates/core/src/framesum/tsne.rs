//! Exact-gradient t-SNE into one dimension.
//!
//! Sampled frame counts stay in the low thousands, so the O(n²) affinities
//! and gradient are affordable and no space-partitioning approximation is
//! used.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    /// `None` picks `clamp(floor((n - 1) / 3), 1, 5)`.
    pub perplexity: Option<f64>,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig { perplexity: None, iterations: 500, seed: 0 }
    }
}

const EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;
const MOMENTUM_SWITCH: usize = 250;
const ENTROPY_TOL: f64 = 1e-5;
const MIN_GAIN: f64 = 0.01;
const MIN_LEARNING_RATE: f64 = 1.0;

pub fn default_perplexity(n: usize) -> f64 {
    (n.saturating_sub(1) / 3).clamp(1, 5) as f64
}

fn squared_distances(data: &[Vec<f64>]) -> Vec<f64> {
    let n = data.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = data[i].iter().zip(&data[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Row-conditional Gaussian affinities matching the target perplexity,
/// symmetrized and normalized to sum to 1.
fn joint_probabilities(dist: &[f64], n: usize, perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let mut row = vec![0.0; n];
    for i in 0..n {
        let d = &dist[i * n..(i + 1) * n];
        // Shift by the nearest-neighbour distance so exp() cannot underflow
        // for every j at once.
        let d_min = (0..n)
            .filter(|&j| j != i)
            .map(|j| d[j])
            .fold(f64::INFINITY, f64::min);
        let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
        for _ in 0..200 {
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for j in 0..n {
                row[j] = if j == i { 0.0 } else { (-(d[j] - d_min) * beta).exp() };
                sum += row[j];
                weighted += (d[j] - d_min) * row[j];
            }
            let entropy = sum.ln() + beta * weighted / sum;
            for v in row.iter_mut() {
                *v /= sum;
            }
            let diff = entropy - target;
            if diff.abs() < ENTROPY_TOL {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        p[i * n..(i + 1) * n].copy_from_slice(&row);
    }

    let mut joint = vec![0.0; n * n];
    let norm = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            joint[i * n + j] = ((p[i * n + j] + p[j * n + i]) / norm).max(1e-12);
        }
    }
    joint
}

/// Embeds equal-length feature vectors onto a line. The output is not rescaled.
pub fn embed_1d(data: &[Vec<f64>], config: &TsneConfig) -> Vec<f64> {
    let n = data.len();
    if n <= 1 {
        return vec![0.0; n];
    }
    let perplexity = config.perplexity.unwrap_or_else(|| default_perplexity(n));
    let p = joint_probabilities(&squared_distances(data), n, perplexity);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Normal::new(0.0, 1e-4).unwrap();
    let mut y: Vec<f64> = (0..n).map(|_| init.sample(&mut rng)).collect();
    let mut velocity = vec![0.0; n];
    let mut gains = vec![1.0f64; n];
    let learning_rate = (n as f64 / EXAGGERATION / 4.0).max(MIN_LEARNING_RATE);

    let mut w = vec![0.0; n * n];
    let mut grad = vec![0.0; n];
    for iter in 0..config.iterations {
        let exaggeration = if iter < EXAGGERATION_ITERS { EXAGGERATION } else { 1.0 };
        let momentum = if iter < MOMENTUM_SWITCH { 0.5 } else { 0.8 };

        let mut w_sum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = y[i] - y[j];
                let k = 1.0 / (1.0 + d * d);
                w[i * n + j] = k;
                w[j * n + i] = k;
                w_sum += 2.0 * k;
            }
        }
        for i in 0..n {
            let mut g = 0.0;
            for j in 0..n {
                if i != j {
                    let k = w[i * n + j];
                    let q = (k / w_sum).max(1e-12);
                    g += (exaggeration * p[i * n + j] - q) * k * (y[i] - y[j]);
                }
            }
            grad[i] = 4.0 * g;
        }
        for i in 0..n {
            gains[i] = if (grad[i] > 0.0) != (velocity[i] > 0.0) {
                gains[i] + 0.2
            } else {
                (gains[i] * 0.8).max(MIN_GAIN)
            };
            velocity[i] = momentum * velocity[i] - learning_rate * gains[i] * grad[i];
            y[i] += velocity[i];
        }
        let mean = y.iter().sum::<f64>() / n as f64;
        y.iter_mut().for_each(|v| *v -= mean);
    }
    y
}

/// Min-max rescaling to `[0, 1]`. A single point or a zero range maps to 0.5,
/// except that two points always land on 0 and 1.
pub fn rescale_unit(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if n == 2 {
        return if y[0] <= y[1] { vec![0.0, 1.0] } else { vec![1.0, 0.0] };
    }
    if n < 2 || !(range > 1e-12) {
        return vec![0.5; n];
    }
    y.iter().map(|v| (v - lo) / range).collect()
}
