//! Affine multiclass hypotheses and the shared prediction rule.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Index of the largest score; ties go to the lowest index.
///
/// NaN scores never win. Returns 0 for an all-NaN or empty slice.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    let mut seen = false;
    for (k, &s) in scores.iter().enumerate() {
        if !seen && !s.is_nan() || s > best_score {
            best = k;
            best_score = s;
            seen = true;
        }
    }
    best
}

/// Anything that scores `k` classes from an `n`-vector and predicts the argmax.
pub trait Classifier {
    fn n_features(&self) -> usize;

    fn n_classes(&self) -> usize;

    /// Writes one score per class into `out` (`out.len() == n_classes()`).
    /// `x` is assumed to have `n_features()` entries.
    fn scores_into(&self, x: &[f64], out: &mut [f64]);

    fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.n_classes()];
        self.scores_into(x, &mut out);
        Ok(out)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Class with the highest score, lowest index on ties.
    fn predict(&self, x: &[f64]) -> Result<usize> {
        self.check_dim(x)?;
        let mut buf = vec![0.0; self.n_classes()];
        self.scores_into(x, &mut buf);
        Ok(argmax(&buf))
    }

    fn predict_all(&self, d: &Dataset) -> Result<Vec<usize>> {
        if d.n() != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                found: d.n(),
            });
        }
        let mut buf = vec![0.0; self.n_classes()];
        Ok(d
            .rows()
            .map(|x| {
                self.scores_into(x, &mut buf);
                argmax(&buf)
            })
            .collect())
    }
}

/// Fraction of samples in `d` that `model` misclassifies.
pub fn zero_one_error<C: Classifier + ?Sized>(model: &C, d: &Dataset) -> Result<f64> {
    let predictions = model.predict_all(d)?;
    let wrong = predictions
        .iter()
        .zip(d.labels())
        .filter(|(p, y)| p != y)
        .count();
    Ok(wrong as f64 / d.m() as f64)
}

/// `x ↦ argmax_k ⟨w_k, x⟩ + b_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHypothesis {
    n: usize,
    k: usize,
    /// Row-major `k × n`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl LinearHypothesis {
    pub fn new(weights: Vec<f64>, biases: Vec<f64>, n: usize) -> Result<Self> {
        let k = biases.len();
        if weights.len() != k * n {
            return Err(Error::Dimension {
                expected: k * n,
                found: weights.len(),
            });
        }
        Ok(LinearHypothesis {
            n,
            k,
            weights,
            biases,
        })
    }

    pub fn zeros(n: usize, k: usize) -> Self {
        LinearHypothesis {
            n,
            k,
            weights: vec![0.0; n * k],
            biases: vec![0.0; k],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn class_weights(&self, k: usize) -> &[f64] {
        &self.weights[k * self.n..(k + 1) * self.n]
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// `W = max_k ‖w_k‖₂`.
    pub fn weight_norm_bound(&self) -> f64 {
        self.weights
            .chunks_exact(self.n)
            .map(|w| w.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// `B = max_k |b_k|`.
    pub fn bias_bound(&self) -> f64 {
        self.biases.iter().map(|b| b.abs()).fold(0.0, f64::max)
    }

    /// `‖W‖_F²` over all class weight vectors.
    pub fn weight_sq_norm(&self) -> f64 {
        self.weights.iter().map(|v| v * v).sum()
    }

    /// Mean multiclass logistic loss `log Σ_j exp(h_j) − h_y` over `d`.
    pub fn log_loss(&self, d: &Dataset) -> Result<f64> {
        if d.n() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: d.n(),
            });
        }
        let mut scores = vec![0.0; self.k];
        let total: f64 = d
            .samples()
            .map(|(x, y)| {
                self.scores_into(x, &mut scores);
                log_sum_exp(&scores) - scores[y]
            })
            .sum();
        Ok(total / d.m() as f64)
    }
}

impl Classifier for LinearHypothesis {
    fn n_features(&self) -> usize {
        self.n
    }

    fn n_classes(&self) -> usize {
        self.k
    }

    fn scores_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, w), b) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.n))
            .zip(&self.biases)
        {
            *o = dot(w, x) + b;
        }
    }
}

/// Dot product with eight independent accumulators so the loop vectorizes.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for j in 0..8 {
            acc[j] += x[j] * y[j];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

/// `log Σ exp(s)`, shifted by the max for stability.
pub fn log_sum_exp(s: &[f64]) -> f64 {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_to_lowest() {
        assert_eq!(argmax(&[1.0, 1.0, 0.5]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0]), 1);
        assert_eq!(argmax(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), 0);
        assert_eq!(argmax(&[f64::NAN, 1.0]), 1);
    }

    #[test]
    fn zero_model_predicts_first_class() {
        let h = LinearHypothesis::zeros(3, 4);
        assert_eq!(h.predict(&[0.3, -2.0, 9.0]).unwrap(), 0);
        assert!(h.predict(&[1.0]).is_err());
    }

    #[test]
    fn bounds_recomputed() {
        let h = LinearHypothesis::new(vec![3.0, 4.0, 1.0, 0.0], vec![-2.5, 1.0], 2).unwrap();
        assert_eq!(h.weight_norm_bound(), 5.0);
        assert_eq!(h.bias_bound(), 2.5);
    }

    #[test]
    fn constant_predictor_error_on_balanced_data() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let d = Dataset::from_rows(&rows, (0..30).map(|i| i % 3).collect(), 3).unwrap();
        let h = LinearHypothesis::zeros(1, 3);
        assert!((zero_one_error(&h, &d).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lse_stable() {
        assert!((log_sum_exp(&[1e4, 1e4]) - (1e4 + 2f64.ln())).abs() < 1e-9);
        assert!((log_sum_exp(&[-1e4, 0.0]) - 0.0).abs() < 1e-12);
    }
}
