//! Balanced Gaussian mixture with an exact Bayes classifier.
//!
//! Class 0 has mean `−1` in every coordinate and class `c ≥ 1` has mean
//! `2^{c−1}`. All classes share the diagonal covariance whose first `n/2`
//! entries are `n` and last `n/2` entries are `1`. Priors are uniform. For
//! `K > 2` samples are optionally passed through `x ↦ x / 2^{K−3} − 1`.
//!
//! Sampling draws, per row, one label from `0..K` and then `n` standard
//! normals from a ChaCha8 stream keyed by the seed (normals via the
//! `rand_distr` ziggurat). Rows are generated in order, so the first `m` rows
//! of a larger draw with the same seed equal a draw of size `m`.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linear::argmax;
use crate::rng;
use crate::stats::normal_cdf;

const MC_BATCH: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixtureSpec {
    k: usize,
    n: usize,
    scaled: bool,
}

impl MixtureSpec {
    /// Spec with the default scaling choice: scaled iff `k > 2`.
    pub fn new(k: usize, n: usize) -> Result<Self> {
        Self::with_scaling(k, n, k > 2)
    }

    /// `scaled` has no effect when `k == 2`.
    pub fn with_scaling(k: usize, n: usize, scaled: bool) -> Result<Self> {
        if k < 2 {
            return Err(Error::TooFewClasses);
        }
        if k > 60 {
            return Err(Error::invalid("class means 2^(k-2) overflow beyond k = 60"));
        }
        if n == 0 || n % 2 != 0 {
            return Err(Error::invalid(format!("feature dimension must be even and positive, got {n}")));
        }
        Ok(MixtureSpec { k, n, scaled })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Whether the scale map is applied to samples.
    pub fn scaled(&self) -> bool {
        self.scaled && self.k > 2
    }

    /// Mean of every coordinate of class `c` (before scaling).
    pub fn class_mean(&self, c: usize) -> f64 {
        if c == 0 {
            -1.0
        } else {
            2f64.powi(c as i32 - 1)
        }
    }

    /// Variance of coordinate `i` (before scaling).
    pub fn variance(&self, i: usize) -> f64 {
        if i < self.n / 2 {
            self.n as f64
        } else {
            1.0
        }
    }

    fn scale_divisor(&self) -> f64 {
        2f64.powi(self.k as i32 - 3)
    }

    /// `f(x) = x / 2^{K−3} − 1`, or the identity when unscaled.
    pub fn scale(&self, v: f64) -> f64 {
        if self.scaled() {
            v / self.scale_divisor() - 1.0
        } else {
            v
        }
    }

    pub fn unscale(&self, v: f64) -> f64 {
        if self.scaled() {
            (v + 1.0) * self.scale_divisor()
        } else {
            v
        }
    }

    /// Draws `m` labeled samples in dataset coordinates.
    pub fn sample(&self, m: usize, seed: u64) -> Result<Dataset> {
        if m == 0 {
            return Err(Error::invalid("sample size must be >= 1"));
        }
        let mut rng = rng::rng_from_seed(seed);
        let mut features = Vec::with_capacity(m * self.n);
        let mut labels = Vec::with_capacity(m);
        let sd: Vec<f64> = (0..self.n).map(|i| self.variance(i).sqrt()).collect();
        let mut raw = vec![0.0; self.n];
        for _ in 0..m {
            let y = self.draw_raw(&mut rng, &sd, &mut raw);
            labels.push(y);
            features.extend(raw.iter().map(|&v| self.scale(v)));
        }
        Dataset::new(features, labels, self.n, self.k)
    }

    fn draw_raw(&self, rng: &mut rng::Rng, sd: &[f64], out: &mut [f64]) -> usize {
        let y = rng.random_range(0..self.k);
        let mu = self.class_mean(y);
        for (o, s) in out.iter_mut().zip(sd) {
            let z: f64 = rng.sample(StandardNormal);
            *o = mu + s * z;
        }
        y
    }

    fn check_class(&self, c: usize) -> Result<()> {
        if c >= self.k {
            return Err(Error::invalid(format!("class {c} out of range for {} classes", self.k)));
        }
        Ok(())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Exact `log p(x | y=c) + log p(y=c)` for raw (unscaled) `x`.
    pub fn log_joint_raw(&self, x: &[f64], c: usize) -> f64 {
        let mu = self.class_mean(c);
        let ll: f64 = x
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let s2 = self.variance(i);
                let dev = v - mu;
                -0.5 * (2.0 * std::f64::consts::PI * s2).ln() - dev * dev / (2.0 * s2)
            })
            .sum();
        ll - (self.k as f64).ln()
    }

    /// Exact log joint of every class for `x` in dataset coordinates, up to
    /// the (class-independent) Jacobian of the scale map.
    pub fn bayes_activations(&self, x: &[f64], out: &mut [f64]) {
        let raw: Vec<f64> = x.iter().map(|&v| self.unscale(v)).collect();
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.log_joint_raw(&raw, c);
        }
    }

    /// Bayes pair activation `log p(x,k1) − log p(x,k2)` for `x` in dataset
    /// coordinates. The scale map's Jacobian cancels in the difference.
    pub fn bayes_pair_activation(&self, x: &[f64], k1: usize, k2: usize) -> Result<f64> {
        self.check_dim(x)?;
        self.check_class(k1)?;
        self.check_class(k2)?;
        if k1 == k2 {
            return Ok(0.0);
        }
        let raw: Vec<f64> = x.iter().map(|&v| self.unscale(v)).collect();
        Ok(self.log_joint_raw(&raw, k1) - self.log_joint_raw(&raw, k2))
    }

    /// Per-class Bayes scores for raw `x`, up to a class-independent constant.
    ///
    /// With constant class means the log joint reduces to
    /// `μ_c·T − μ_c²(n+1)/4` where `T = Σ_{i<n/2} x_i / n + Σ_{i≥n/2} x_i`.
    fn bayes_scores_raw(&self, x: &[f64], out: &mut [f64]) {
        let half = self.n / 2;
        let t = x[..half].iter().sum::<f64>() / self.n as f64 + x[half..].iter().sum::<f64>();
        let quad = (self.n as f64 + 1.0) / 4.0;
        for (c, o) in out.iter_mut().enumerate() {
            let mu = self.class_mean(c);
            *o = mu * t - mu * mu * quad;
        }
    }

    /// Bayes-optimal class for `x` in dataset coordinates; ties to the lowest index.
    pub fn bayes_predict(&self, x: &[f64]) -> Result<usize> {
        self.check_dim(x)?;
        let raw: Vec<f64> = x.iter().map(|&v| self.unscale(v)).collect();
        let mut scores = vec![0.0; self.k];
        self.bayes_scores_raw(&raw, &mut scores);
        Ok(argmax(&scores))
    }

    /// `Φ(−√((n+1)/2))` for `K = 2`; `None` otherwise.
    pub fn binary_bayes_error(&self) -> Option<f64> {
        (self.k == 2).then(|| normal_cdf(-((self.n as f64 + 1.0) / 2.0).sqrt()))
    }

    /// Error of the infinite-sample classifier used as the convergence target:
    /// the closed form for `K = 2`, zero otherwise.
    pub fn asymptotic_error(&self) -> f64 {
        self.binary_bayes_error().unwrap_or(0.0)
    }

    /// Monte-Carlo misclassification rate of [`MixtureSpec::bayes_predict`].
    pub fn bayes_error(&self, mc_samples: usize, seed: u64, exec: Execution) -> Result<BayesError> {
        if mc_samples < 1000 {
            return Err(Error::invalid("Monte-Carlo estimate needs at least 1000 samples"));
        }
        let batches = mc_samples.div_ceil(MC_BATCH);
        let sd: Vec<f64> = (0..self.n).map(|i| self.variance(i).sqrt()).collect();
        let errors: usize = exec
            .map_range(batches, |b| {
                let size = MC_BATCH.min(mc_samples - b * MC_BATCH);
                let mut rng = rng::rng_stream(seed, b as u64);
                let mut raw = vec![0.0; self.n];
                let mut scores = vec![0.0; self.k];
                (0..size)
                    .filter(|_| {
                        let y = self.draw_raw(&mut rng, &sd, &mut raw);
                        self.bayes_scores_raw(&raw, &mut scores);
                        argmax(&scores) != y
                    })
                    .count()
            })
            .into_iter()
            .sum();
        let p = errors as f64 / mc_samples as f64;
        Ok(BayesError {
            estimate: p,
            standard_error: (p * (1.0 - p) / mc_samples as f64).sqrt(),
            errors,
            samples: mc_samples,
            closed_form: self.binary_bayes_error(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesError {
    pub estimate: f64,
    /// Binomial standard error `√(p(1−p)/N)`.
    pub standard_error: f64,
    pub errors: usize,
    pub samples: usize,
    pub closed_form: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(MixtureSpec::new(1, 4).is_err());
        assert!(MixtureSpec::new(3, 5).is_err());
        assert!(MixtureSpec::new(3, 0).is_err());
        assert!(MixtureSpec::new(2, 4).unwrap().scaled() == false);
        assert!(MixtureSpec::new(5, 4).unwrap().scaled());
        assert!(!MixtureSpec::with_scaling(2, 4, true).unwrap().scaled());
    }

    #[test]
    fn scale_map_endpoints() {
        let spec = MixtureSpec::new(5, 10).unwrap();
        assert_eq!(spec.scale(spec.class_mean(4)), 1.0);
        assert_eq!(spec.scale(0.0), -1.0);
        assert_eq!(spec.unscale(spec.scale(3.7)), 3.7);
    }

    #[test]
    fn binary_boundary_matches_printed_form() {
        let n = 10;
        let spec = MixtureSpec::new(2, n).unwrap();
        let ones = vec![1.0; n];
        let da = spec.bayes_pair_activation(&ones, 1, 0).unwrap();
        assert!((da - (1.0 + n as f64)).abs() < 1e-12);
        assert_eq!(spec.bayes_pair_activation(&vec![0.0; n], 1, 0).unwrap(), 0.0);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let printed: f64 = x[..n / 2].iter().map(|v| 2.0 / n as f64 * v).sum::<f64>()
            + x[n / 2..].iter().map(|v| 2.0 * v).sum::<f64>();
        assert!((spec.bayes_pair_activation(&x, 1, 0).unwrap() - printed).abs() < 1e-12);
    }

    #[test]
    fn multiclass_pair_activation_closed_form() {
        // (μ1 − μ2)·T − (μ1² − μ2²)(n+1)/4 for classes with 2^{c−1} means
        let n = 8;
        let spec = MixtureSpec::with_scaling(5, n, false).unwrap();
        let x: Vec<f64> = (0..n).map(|i| 0.3 * i as f64 - 1.0).collect();
        let t = x[..n / 2].iter().sum::<f64>() / n as f64 + x[n / 2..].iter().sum::<f64>();
        for k1 in 1..5 {
            for k2 in 1..5 {
                let (m1, m2) = (spec.class_mean(k1), spec.class_mean(k2));
                let expected = (m1 - m2) * t - (m1 * m1 - m2 * m2) * (n as f64 + 1.0) / 4.0;
                let got = spec.bayes_pair_activation(&x, k1, k2).unwrap();
                assert!((got - expected).abs() < 1e-10, "{k1},{k2}: {got} vs {expected}");
            }
        }
        assert_eq!(spec.bayes_pair_activation(&x, 2, 2).unwrap(), 0.0);
        assert!(spec.bayes_pair_activation(&x, 0, 5).is_err());
    }

    #[test]
    fn predict_at_class_means() {
        for scaled in [false, true] {
            let spec = MixtureSpec::with_scaling(5, 20, scaled).unwrap();
            for c in 0..5 {
                let x = vec![spec.scale(spec.class_mean(c)); 20];
                assert_eq!(spec.bayes_predict(&x).unwrap(), c);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_prefix_stable() {
        let spec = MixtureSpec::new(3, 4).unwrap();
        let a = spec.sample(50, 11).unwrap();
        assert_eq!(a, spec.sample(50, 11).unwrap());
        assert_eq!(a.prefix(20), spec.sample(20, 11).unwrap());
        assert_ne!(a, spec.sample(50, 12).unwrap());
    }

    #[test]
    fn binary_closed_form_small_n() {
        let spec = MixtureSpec::new(2, 2).unwrap();
        let be = spec.binary_bayes_error().unwrap();
        assert!((be - 0.110_335).abs() < 1e-5, "{be}");
    }
}
