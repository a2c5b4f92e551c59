//! Closed-form naive Bayes estimators.
//!
//! Two variants share the [`GenerativeModel`] interface:
//!
//! * [`DiscreteNbModel`]: Bernoulli features with Laplace smoothing,
//!   `p̂(x_i=1|y=k) = (#{x_i=1,y=k} + α) / (#{y=k} + Kα)` and
//!   `p̂(y=k) = (#{y=k} + α) / (m + Kα)`.
//! * [`GaussianNbModel`]: per-class means with one variance per feature shared
//!   by all classes, which keeps the decision boundary linear.
//!
//! Both convert exactly to a [`LinearHypothesis`] via `to_linear`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::data::{ClassCounts, Dataset};
use crate::error::{Error, Result};
use crate::linear::{Classifier, LinearHypothesis};

/// Smallest pooled variance a Gaussian model will hold.
pub const VARIANCE_FLOOR: f64 = 1e-10;

/// Default Laplace smoothing for discrete fitting.
pub const DEFAULT_ALPHA: f64 = 1.0;

/// Fitted generative classifier with per-class log joint activations.
pub trait GenerativeModel: Classifier {
    /// `a(x, k) = Σ_i log p̂(x_i|y=k) + log p̂(y=k)`.
    fn activation(&self, x: &[f64], k: usize) -> Result<f64> {
        self.check_dim(x)?;
        if k >= self.n_classes() {
            return Err(Error::invalid(format!("class {k} out of range")));
        }
        Ok(self.activation_unchecked(x, k))
    }

    fn activation_unchecked(&self, x: &[f64], k: usize) -> f64;

    /// `Δa(x, k1, k2) = a(x, k1) − a(x, k2)`.
    fn pair_activation(&self, x: &[f64], k1: usize, k2: usize) -> Result<f64> {
        Ok(self.activation(x, k1)? - self.activation(x, k2)?)
    }

    /// Equivalent affine hypothesis (class-independent terms dropped).
    fn to_linear(&self) -> Result<LinearHypothesis>;

    fn priors(&self) -> &[f64];
}

/// Bernoulli naive Bayes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteNbModel {
    k: usize,
    n: usize,
    /// Row-major `k × n`, `p̂(x_i=1|y=k)`.
    cond_prob: Vec<f64>,
    prior: Vec<f64>,
    alpha: f64,
}

impl DiscreteNbModel {
    /// Fits on a dataset whose features are all 0 or 1.
    pub fn fit(d: &Dataset, alpha: f64) -> Result<Self> {
        let counts = ClassCounts::from_binary(d)?;
        Self::from_counts(&counts, alpha)
    }

    pub fn from_counts(counts: &ClassCounts, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("smoothing alpha must be >= 0, got {alpha}")));
        }
        let k = counts.class.len();
        let n = counts.n;
        if alpha == 0.0 {
            if let Some(class) = counts.class.iter().position(|&c| c == 0) {
                return Err(Error::EmptyClass { class });
            }
        }
        let k_alpha = k as f64 * alpha;
        let m = counts.total() as f64;
        let mut cond_prob = Vec::with_capacity(k * n);
        for (y, &cy) in counts.class.iter().enumerate() {
            let denom = cy as f64 + k_alpha;
            cond_prob.extend((0..n).map(|i| (counts.positive(y, i) as f64 + alpha) / denom));
        }
        let prior = counts
            .class
            .iter()
            .map(|&c| (c as f64 + alpha) / (m + k_alpha))
            .collect();
        Ok(DiscreteNbModel {
            k,
            n,
            cond_prob,
            prior,
            alpha,
        })
    }

    pub fn from_parts(cond_prob: Vec<f64>, prior: Vec<f64>, n: usize, alpha: f64) -> Result<Self> {
        let k = prior.len();
        if cond_prob.len() != k * n {
            return Err(Error::Dimension {
                expected: k * n,
                found: cond_prob.len(),
            });
        }
        if cond_prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("conditional probabilities must lie in [0,1]"));
        }
        Ok(DiscreteNbModel {
            k,
            n,
            cond_prob,
            prior,
            alpha,
        })
    }

    pub fn cond_prob(&self, k: usize, i: usize) -> f64 {
        self.cond_prob[k * self.n + i]
    }

    pub fn cond_probs(&self) -> &[f64] {
        &self.cond_prob
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

// x·log p with 0·log 0 = 0
fn xlogp(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * p.ln()
    }
}

impl Classifier for DiscreteNbModel {
    fn n_features(&self) -> usize {
        self.n
    }

    fn n_classes(&self) -> usize {
        self.k
    }

    fn scores_into(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.activation_unchecked(x, k);
        }
    }
}

impl GenerativeModel for DiscreteNbModel {
    fn activation_unchecked(&self, x: &[f64], k: usize) -> f64 {
        let probs = &self.cond_prob[k * self.n..(k + 1) * self.n];
        let ll: f64 = x
            .iter()
            .zip(probs)
            .map(|(&xi, &p)| xlogp(xi, p) + xlogp(1.0 - xi, 1.0 - p))
            .sum();
        ll + self.prior[k].ln()
    }

    fn to_linear(&self) -> Result<LinearHypothesis> {
        if self.cond_prob.iter().any(|&p| p <= 0.0 || p >= 1.0) {
            return Err(Error::NonFinite(
                "saturated conditional probability has infinite log-odds".into(),
            ));
        }
        if self.prior.iter().any(|&p| p <= 0.0) {
            return Err(Error::NonFinite("zero prior has infinite log".into()));
        }
        let weights = self.cond_prob.iter().map(|&p| (p / (1.0 - p)).ln()).collect();
        let biases = self
            .cond_prob
            .chunks_exact(self.n)
            .zip(&self.prior)
            .map(|(probs, prior)| probs.iter().map(|p| (1.0 - p).ln()).sum::<f64>() + prior.ln())
            .collect();
        LinearHypothesis::new(weights, biases, self.n)
    }

    fn priors(&self) -> &[f64] {
        &self.prior
    }
}

/// Gaussian naive Bayes with class-shared per-feature variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbModel {
    k: usize,
    n: usize,
    /// Row-major `k × n`.
    mu: Vec<f64>,
    sigma2: Vec<f64>,
    prior: Vec<f64>,
}

impl GaussianNbModel {
    /// Fits means, pooled MLE variances and unsmoothed priors. Every class
    /// must have at least one sample.
    pub fn fit(d: &Dataset) -> Result<Self> {
        if let Some(class) = d.class_sizes().iter().position(|&c| c == 0) {
            return Err(Error::EmptyClass { class });
        }
        Ok(Self::fit_inner(d))
    }

    /// Like [`GaussianNbModel::fit`], but classes absent from `d` get prior 0
    /// (never predicted) and zero means instead of failing.
    pub fn fit_allow_missing(d: &Dataset) -> Self {
        Self::fit_inner(d)
    }

    fn fit_inner(d: &Dataset) -> Self {
        let (k, n, m) = (d.k(), d.n(), d.m());
        let sizes = d.class_sizes();
        let mut mu = vec![0.0; k * n];
        for (x, y) in d.samples() {
            for (acc, &v) in mu[y * n..(y + 1) * n].iter_mut().zip(x) {
                *acc += v;
            }
        }
        for (y, &size) in sizes.iter().enumerate() {
            if size > 0 {
                mu[y * n..(y + 1) * n]
                    .iter_mut()
                    .for_each(|v| *v /= size as f64);
            }
        }
        // Σ_k p̂_k · (1/m_k) Σ_{y=k} (x − μ_k)² collapses to (1/m) Σ (x − μ_y)²
        let mut sigma2 = vec![0.0; n];
        for (x, y) in d.samples() {
            for ((acc, &v), &c) in sigma2.iter_mut().zip(x).zip(&mu[y * n..(y + 1) * n]) {
                let dev = v - c;
                *acc += dev * dev;
            }
        }
        for s in &mut sigma2 {
            *s = (*s / m as f64).max(VARIANCE_FLOOR);
        }
        let prior = sizes.iter().map(|&c| c as f64 / m as f64).collect();
        GaussianNbModel {
            k,
            n,
            mu,
            sigma2,
            prior,
        }
    }

    pub fn from_parts(mu: Vec<f64>, sigma2: Vec<f64>, prior: Vec<f64>) -> Result<Self> {
        let k = prior.len();
        let n = sigma2.len();
        if mu.len() != k * n {
            return Err(Error::Dimension {
                expected: k * n,
                found: mu.len(),
            });
        }
        if sigma2.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("variances must be positive"));
        }
        Ok(GaussianNbModel {
            k,
            n,
            mu,
            sigma2,
            prior,
        })
    }

    pub fn mean(&self, k: usize, i: usize) -> f64 {
        self.mu[k * self.n + i]
    }

    pub fn class_means(&self, k: usize) -> &[f64] {
        &self.mu[k * self.n..(k + 1) * self.n]
    }

    pub fn means(&self) -> &[f64] {
        &self.mu
    }

    pub fn variances(&self) -> &[f64] {
        &self.sigma2
    }

    /// `log 𝒩(v; μ̂_{ki}, σ̂_i²)`.
    pub fn log_density(&self, k: usize, i: usize, v: f64) -> f64 {
        let s2 = self.sigma2[i];
        let dev = v - self.mu[k * self.n + i];
        -0.5 * (2.0 * PI * s2).ln() - dev * dev / (2.0 * s2)
    }
}

impl Classifier for GaussianNbModel {
    fn n_features(&self) -> usize {
        self.n
    }

    fn n_classes(&self) -> usize {
        self.k
    }

    fn scores_into(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.activation_unchecked(x, k);
        }
    }
}

impl GenerativeModel for GaussianNbModel {
    fn activation_unchecked(&self, x: &[f64], k: usize) -> f64 {
        let means = self.class_means(k);
        let ll: f64 = x
            .iter()
            .zip(means)
            .zip(&self.sigma2)
            .map(|((&v, &mu), &s2)| {
                let dev = v - mu;
                -0.5 * (2.0 * PI * s2).ln() - dev * dev / (2.0 * s2)
            })
            .sum();
        ll + self.prior[k].ln()
    }

    fn to_linear(&self) -> Result<LinearHypothesis> {
        if self.prior.iter().any(|&p| p <= 0.0) {
            return Err(Error::NonFinite("zero prior has infinite log".into()));
        }
        let weights = self
            .mu
            .chunks_exact(self.n)
            .flat_map(|means| means.iter().zip(&self.sigma2).map(|(m, s)| m / s))
            .collect();
        let biases = self
            .mu
            .chunks_exact(self.n)
            .zip(&self.prior)
            .map(|(means, prior)| {
                -means
                    .iter()
                    .zip(&self.sigma2)
                    .map(|(m, s)| m * m / (2.0 * s))
                    .sum::<f64>()
                    + prior.ln()
            })
            .collect();
        LinearHypothesis::new(weights, biases, self.n)
    }

    fn priors(&self) -> &[f64] {
        &self.prior
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[&[f64]], labels: &[usize], k: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        Dataset::from_rows(&rows, labels.to_vec(), k).unwrap()
    }

    /// 20 samples, feature 0 is 1 for three of the ten class-0 samples.
    fn counting_example() -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            rows.push(vec![if i < 3 { 1.0 } else { 0.0 }]);
            labels.push(0);
        }
        for i in 0..10 {
            rows.push(vec![if i < 5 { 1.0 } else { 0.0 }]);
            labels.push(1);
        }
        Dataset::from_rows(&rows, labels, 2).unwrap()
    }

    #[test]
    fn discrete_smoothed_and_unsmoothed() {
        let d = counting_example();
        let nb = DiscreteNbModel::fit(&d, 1.0).unwrap();
        assert!((nb.cond_prob(0, 0) - 4.0 / 12.0).abs() < 1e-15);
        assert!((nb.priors()[0] - 0.5).abs() < 1e-15);
        let raw = DiscreteNbModel::fit(&d, 0.0).unwrap();
        assert!((raw.cond_prob(0, 0) - 0.3).abs() < 1e-15);
        assert!((raw.priors().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discrete_errors() {
        let d = ds(&[&[1.0], &[0.0]], &[0, 0], 2);
        assert!(matches!(DiscreteNbModel::fit(&d, 0.0), Err(Error::EmptyClass { class: 1 })));
        assert!(DiscreteNbModel::fit(&d, 1.0).is_ok());
        let d = ds(&[&[0.3], &[0.0]], &[0, 1], 2);
        assert!(matches!(DiscreteNbModel::fit(&d, 1.0), Err(Error::NonBinary { .. })));
    }

    #[test]
    fn discrete_symmetric_model() {
        let nb = DiscreteNbModel::from_parts(vec![0.5, 0.5], vec![0.5, 0.5], 1, 1.0).unwrap();
        let a0 = nb.activation(&[1.0], 0).unwrap();
        let a1 = nb.activation(&[1.0], 1).unwrap();
        assert_eq!(a0, a1);
        assert_eq!(nb.predict(&[1.0]).unwrap(), 0);
        let h = nb.to_linear().unwrap();
        assert!(h.weights().iter().all(|&w| w == 0.0));
        assert_eq!(h.biases()[0], h.biases()[1]);
    }

    #[test]
    fn discrete_saturated_to_linear_fails() {
        let d = ds(&[&[1.0], &[0.0]], &[0, 1], 2);
        let nb = DiscreteNbModel::fit(&d, 0.0).unwrap();
        assert!(nb.to_linear().is_err());
        // activation stays well defined on the support
        assert_eq!(nb.activation(&[1.0], 0).unwrap(), 0.5f64.ln());
        assert_eq!(nb.activation(&[1.0], 1).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn gaussian_pooled_variance() {
        let d = ds(&[&[0.0], &[1.0], &[0.2], &[0.4]], &[0, 0, 1, 1], 2);
        let nb = GaussianNbModel::fit(&d).unwrap();
        assert!((nb.variances()[0] - 0.13).abs() < 1e-15);
        assert!((nb.mean(0, 0) - 0.5).abs() < 1e-15);
        assert!((nb.mean(1, 0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn gaussian_variance_floor_and_empty_class() {
        let d = ds(&[&[0.2, 1.0], &[0.2, 1.0], &[0.7, 1.0]], &[0, 0, 1], 2);
        let nb = GaussianNbModel::fit(&d).unwrap();
        assert_eq!(nb.variances(), &[VARIANCE_FLOOR, VARIANCE_FLOOR]);
        let d = ds(&[&[0.2], &[0.3]], &[0, 0], 3);
        assert!(matches!(GaussianNbModel::fit(&d), Err(Error::EmptyClass { class: 1 })));
        let lenient = GaussianNbModel::fit_allow_missing(&d);
        assert_eq!(lenient.priors(), &[1.0, 0.0, 0.0]);
        assert_eq!(lenient.predict(&[100.0]).unwrap(), 0);
    }

    #[test]
    fn gaussian_activation_at_mean() {
        let nb = GaussianNbModel::from_parts(vec![0.1, 0.9, 0.6, 0.2], vec![0.04, 0.25], vec![0.3, 0.7])
            .unwrap();
        let a = nb.activation(&[0.6, 0.2], 1).unwrap();
        let expected = (1.0 / (2.0 * PI * 0.04).sqrt()).ln()
            + (1.0 / (2.0 * PI * 0.25).sqrt()).ln()
            + 0.7f64.ln();
        assert!((a - expected).abs() < 1e-12);
        assert_eq!(nb.predict(&[0.6, 0.2]).unwrap(), 1);
        assert!(nb.activation(&[0.6], 1).is_err());
        assert!(nb.activation(&[0.6, 0.2], 2).is_err());
    }

    #[test]
    fn gaussian_zero_means_give_zero_weights() {
        let nb = GaussianNbModel::from_parts(vec![0.0; 6], vec![0.1, 0.2, 0.3], vec![0.5, 0.5]).unwrap();
        let h = nb.to_linear().unwrap();
        assert!(h.weights().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn identical_classes_pair_activation_zero() {
        let nb = GaussianNbModel::from_parts(vec![0.3, 0.3], vec![0.1], vec![0.5, 0.5]).unwrap();
        assert_eq!(nb.pair_activation(&[0.8], 0, 1).unwrap(), 0.0);
        assert_eq!(nb.predict(&[0.8]).unwrap(), 0);
    }
}
