//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use gendisc::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Discrete naive Bayes by plain counting: integer counts first, then one
/// division per parameter. Returns `(cond_prob[k][i], prior[k])`.
pub fn counting_oracle(d: &Dataset, alpha: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (k, n, m) = (d.k(), d.n(), d.m());
    let mut class = vec![0u64; k];
    let mut ones = vec![vec![0u64; n]; k];
    for s in 0..m {
        let y = d.label(s);
        class[y] += 1;
        for i in 0..n {
            if d.row(s)[i] == 1.0 {
                ones[y][i] += 1;
            }
        }
    }
    let ka = k as f64 * alpha;
    let cond = (0..k)
        .map(|y| {
            (0..n)
                .map(|i| (ones[y][i] as f64 + alpha) / (class[y] as f64 + ka))
                .collect()
        })
        .collect();
    let prior = class.iter().map(|&c| (c as f64 + alpha) / (m as f64 + ka)).collect();
    (cond, prior)
}

/// Gaussian naive Bayes by two passes per class: class means, then
/// within-class MLE variances averaged with empirical class weights.
/// Returns `(mu[k][i], sigma2[i], prior[k])`.
pub fn two_pass_gaussian(d: &Dataset) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let (k, n, m) = (d.k(), d.n(), d.m());
    let members: Vec<Vec<usize>> = (0..k)
        .map(|c| (0..m).filter(|&s| d.label(s) == c).collect())
        .collect();
    let mu: Vec<Vec<f64>> = members
        .iter()
        .map(|idx| {
            (0..n)
                .map(|i| idx.iter().map(|&s| d.row(s)[i]).sum::<f64>() / idx.len() as f64)
                .collect()
        })
        .collect();
    let sigma2 = (0..n)
        .map(|i| {
            let pooled: f64 = members
                .iter()
                .enumerate()
                .map(|(c, idx)| {
                    let within = idx
                        .iter()
                        .map(|&s| (d.row(s)[i] - mu[c][i]).powi(2))
                        .sum::<f64>()
                        / idx.len() as f64;
                    idx.len() as f64 / m as f64 * within
                })
                .sum();
            pooled.max(1e-10)
        })
        .collect();
    let prior = members.iter().map(|idx| idx.len() as f64 / m as f64).collect();
    (mu, sigma2, prior)
}

/// Mean softmax cross-entropy plus `(l2/2)‖W‖²`, written out term by term.
pub fn naive_softmax_loss(params: &[f64], d: &Dataset, l2: f64) -> f64 {
    let (k, n) = (d.k(), d.n());
    let mut total = 0.0;
    for s in 0..d.m() {
        let x = d.row(s);
        let scores: Vec<f64> = (0..k)
            .map(|c| (0..n).map(|i| params[c * n + i] * x[i]).sum::<f64>() + params[k * n + c])
            .collect();
        let z: f64 = scores.iter().map(|v| v.exp()).sum();
        total += z.ln() - scores[d.label(s)];
    }
    let w2: f64 = params[..k * n].iter().map(|w| w * w).sum();
    total / d.m() as f64 + 0.5 * l2 * w2
}

/// Index of the largest value, lowest index on ties, by exhaustive comparison.
pub fn brute_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for j in 0..v.len() {
        if (0..v.len()).all(|o| v[j] > v[o] || (v[j] == v[o] && j <= o)) {
            best = j;
            break;
        }
    }
    best
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random binary dataset; every class gets at least one sample.
pub fn random_binary(rng: &mut ChaCha8Rng, m: usize, n: usize, k: usize) -> Dataset {
    let p_one: f64 = rng.random_range(0.05..0.95);
    let features = (0..m * n).map(|_| if rng.random_bool(p_one) { 1.0 } else { 0.0 }).collect();
    let labels = (0..m).map(|s| if s < k { s } else { rng.random_range(0..k) }).collect();
    Dataset::new(features, labels, n, k).unwrap()
}

/// Random real-valued dataset with shifted class means; every class non-empty.
pub fn random_real(rng: &mut ChaCha8Rng, m: usize, n: usize, k: usize) -> Dataset {
    let labels: Vec<usize> = (0..m).map(|s| if s < k { s } else { rng.random_range(0..k) }).collect();
    let scale: f64 = rng.random_range(0.1..100.0);
    let features = labels
        .iter()
        .flat_map(|&y| (0..n).map(move |i| (y as f64 - i as f64 * 0.1, i)).collect::<Vec<_>>())
        .map(|(shift, _)| scale * (shift + rng.random_range(-1.0..1.0)))
        .collect();
    Dataset::new(features, labels, n, k).unwrap()
}
