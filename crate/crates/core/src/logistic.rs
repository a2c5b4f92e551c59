//! Multiclass softmax logistic regression.
//!
//! Objective: mean cross-entropy `log Σ_j exp(h_j(x)) − h_y(x)` plus
//! `(λ/2)·‖W‖_F²`. Biases are not penalized. Parameters are flattened as the
//! `K×n` weight matrix (row-major) followed by the `K` biases.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linear::{dot, Classifier, LinearHypothesis};
pub use crate::optim::{OptimizerConfig, Termination};
use crate::optim;

/// Softmax cross-entropy with an ℓ2 penalty on weights, bound to a dataset.
#[derive(Debug, Clone, Copy)]
pub struct SoftmaxObjective<'a> {
    data: &'a Dataset,
    l2_weight: f64,
}

impl<'a> SoftmaxObjective<'a> {
    pub fn new(data: &'a Dataset, l2_weight: f64) -> Result<Self> {
        if !(l2_weight >= 0.0 && l2_weight.is_finite()) {
            return Err(Error::invalid(format!("l2 weight must be >= 0, got {l2_weight}")));
        }
        Ok(SoftmaxObjective { data, l2_weight })
    }

    pub fn dim(&self) -> usize {
        self.data.k() * (self.data.n() + 1)
    }

    /// Objective value; writes the gradient into `grad`. No input validation.
    pub fn eval(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let (n, k) = (self.data.n(), self.data.k());
        let (weights, biases) = params.split_at(k * n);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (grad_w, grad_b) = grad.split_at_mut(k * n);
        let mut probs = vec![0.0; k];
        let mut total = 0.0;
        for (x, y) in self.data.samples() {
            let mut max = f64::NEG_INFINITY;
            for ((p, w), b) in probs.iter_mut().zip(weights.chunks_exact(n)).zip(biases) {
                *p = dot(w, x) + b;
                max = max.max(*p);
            }
            let score_y = probs[y];
            let mut z = 0.0;
            for p in probs.iter_mut() {
                *p = (*p - max).exp();
                z += *p;
            }
            total += max + z.ln() - score_y;
            for (c, ((p, gw), gb)) in probs
                .iter()
                .zip(grad_w.chunks_exact_mut(n))
                .zip(grad_b.iter_mut())
                .enumerate()
            {
                let coef = p / z - if c == y { 1.0 } else { 0.0 };
                *gb += coef;
                if coef != 0.0 {
                    gw.iter_mut().zip(x).for_each(|(g, xi)| *g += coef * xi);
                }
            }
        }
        let inv_m = 1.0 / self.data.m() as f64;
        grad.iter_mut().for_each(|g| *g *= inv_m);
        let mut penalty = 0.0;
        if self.l2_weight > 0.0 {
            for (g, w) in grad[..k * n].iter_mut().zip(weights) {
                *g += self.l2_weight * w;
                penalty += w * w;
            }
        }
        total * inv_m + 0.5 * self.l2_weight * penalty
    }
}

/// Mean softmax loss plus `(l2_weight/2)‖W‖²` and its exact gradient.
pub fn loss_and_gradient(params: &[f64], data: &Dataset, l2_weight: f64) -> Result<(f64, Vec<f64>)> {
    let objective = SoftmaxObjective::new(data, l2_weight)?;
    if params.len() != objective.dim() {
        return Err(Error::Dimension {
            expected: objective.dim(),
            found: params.len(),
        });
    }
    if let Some(i) = params.iter().position(|p| !p.is_finite()) {
        return Err(Error::NonFinite(format!("parameter {i}")));
    }
    let mut grad = vec![0.0; params.len()];
    let value = objective.eval(params, &mut grad);
    Ok((value, grad))
}

/// A fitted logistic regression and how the optimizer got there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub hypothesis: LinearHypothesis,
    pub l2_weight: f64,
    /// Objective at zero init and after each accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub gradient_max_abs: f64,
}

impl LogisticModel {
    /// Trains from all-zero parameters with L-BFGS.
    pub fn fit(data: &Dataset, l2_weight: f64, config: &OptimizerConfig) -> Result<Self> {
        config.validate()?;
        let objective = SoftmaxObjective::new(data, l2_weight)?;
        let min = optim::minimize(
            |p, g| objective.eval(p, g),
            vec![0.0; objective.dim()],
            config,
        );
        if min.termination == Termination::LineSearchFailed {
            warn!(
                "line search failed after {} iterations (max |grad| {:.3e}); returning best point",
                min.iterations, min.gradient_max_abs
            );
        }
        let (n, k) = (data.n(), data.k());
        let mut x = min.x;
        let biases = x.split_off(k * n);
        Ok(LogisticModel {
            hypothesis: LinearHypothesis::new(x, biases, n)?,
            l2_weight,
            trace: min.trace,
            iterations: min.iterations,
            termination: min.termination,
            gradient_max_abs: min.gradient_max_abs,
        })
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut p = self.hypothesis.weights().to_vec();
        p.extend_from_slice(self.hypothesis.biases());
        p
    }
}

impl Classifier for LogisticModel {
    fn n_features(&self) -> usize {
        self.hypothesis.n_features()
    }

    fn n_classes(&self) -> usize {
        self.hypothesis.n_classes()
    }

    fn scores_into(&self, x: &[f64], out: &mut [f64]) {
        self.hypothesis.scores_into(x, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::zero_one_error;

    fn ds(rows: &[&[f64]], labels: &[usize], k: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        Dataset::from_rows(&rows, labels.to_vec(), k).unwrap()
    }

    #[test]
    fn uniform_loss_at_zero() {
        let d = ds(&[&[0.3, 0.9]], &[0], 2);
        let (loss, grad) = loss_and_gradient(&[0.0; 6], &d, 0.0).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);
        // bias block: softmax − one-hot
        assert_eq!(&grad[4..], &[-0.5, 0.5]);
    }

    #[test]
    fn rejects_non_finite_and_wrong_length() {
        let d = ds(&[&[0.3]], &[0], 2);
        assert!(matches!(
            loss_and_gradient(&[f64::NAN, 0.0, 0.0, 0.0], &d, 0.0),
            Err(Error::NonFinite(_))
        ));
        assert!(loss_and_gradient(&[0.0; 3], &d, 0.0).is_err());
        assert!(loss_and_gradient(&[0.0; 4], &d, -1.0).is_err());
    }

    #[test]
    fn large_scores_stay_finite() {
        let d = ds(&[&[1.0], &[1.0]], &[0, 1], 2);
        let (loss, grad) = loss_and_gradient(&[1e4, -1e4, 0.0, 0.0], &d, 0.0).unwrap();
        assert!(loss.is_finite() && (loss - 1e4).abs() < 1e-6);
        assert!(grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn separable_toy_reaches_zero_training_error() {
        let d = ds(
            &[&[0.1, 0.2], &[0.2, 0.1], &[0.0, 0.3], &[0.9, 0.8], &[0.8, 0.9], &[1.0, 0.7]],
            &[0, 0, 0, 1, 1, 1],
            2,
        );
        let model = LogisticModel::fit(&d, 1.0, &OptimizerConfig::default()).unwrap();
        assert_eq!(model.termination, Termination::Converged);
        assert_eq!(zero_one_error(&model, &d).unwrap(), 0.0);
        assert!(model.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn heavy_penalty_shrinks_weights() {
        let d = ds(&[&[0.1], &[0.2], &[0.9], &[0.8], &[0.7]], &[0, 0, 1, 1, 1], 2);
        let model = LogisticModel::fit(&d, 1e6, &OptimizerConfig::default()).unwrap();
        assert!(model.hypothesis.weight_norm_bound() < 1e-3);
        // prior-driven: the majority class everywhere
        assert_eq!(model.predict(&[0.0]).unwrap(), 1);
        assert_eq!(model.predict(&[1.0]).unwrap(), 1);
    }
}
