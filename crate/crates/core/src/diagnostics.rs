//! Assumption statistics and bound calculators.
//!
//! * [`assumption_stats`]: variance floor `ρ₀`, per-feature KL separation `β`,
//!   conditional-mean separation `ζ` and log-likelihood-ratio variance `α`,
//!   all estimated from a fitted naive Bayes model and its training data.
//! * [`g_tilde`]: worst-pair mass within `τ·n` of a generative decision boundary.
//! * [`j_transform_log`], [`logistic_threshold`], [`hconsistency_check`]: the
//!   logistic/zero-one H-consistency inequality and its precondition.
//! * [`lr_generalization_bound`]: Rademacher bound on the logistic-loss gap.
//!
//! `β`, `ζ` and `α` are reported per feature, i.e. the raw sums divided by `n`.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linear::{dot, zero_one_error, LinearHypothesis};
use crate::logistic::{LogisticModel, OptimizerConfig};
use crate::naive_bayes::{DiscreteNbModel, GaussianNbModel, GenerativeModel};
use crate::stats;

/// Upper clamp on `ρ₀`.
pub const RHO0_CAP: f64 = 0.1;

/// Relative prior spread under which a model counts as class-balanced.
pub const BALANCE_TOLERANCE: f64 = 0.05;

/// Statistics for one `(k1, k2, k)` triple, `k1 < k2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleStat {
    pub k1: usize,
    pub k2: usize,
    pub k: usize,
    /// `|Σ_i D(p_k‖p_k1) − D(p_k‖p_k2)| / n`.
    pub beta_abs: f64,
    /// `E[Δa(x,k1,k2) | y=k] / n` under the fitted model.
    pub zeta: f64,
    /// `V[Σ_i log p̂(x_i|k1)/p̂(x_i|k2) | y=k] / n` over class-`k` samples.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub rho0: f64,
    pub beta: f64,
    pub zeta: f64,
    pub alpha: f64,
    /// Whether fitted priors are within [`BALANCE_TOLERANCE`] of uniform, in
    /// which case `ζ` and `β` coincide.
    pub balanced: bool,
    pub triples: Vec<TripleStat>,
}

/// `min(v, 0.1)`.
pub fn rho0_from(min_stat: f64) -> f64 {
    min_stat.min(RHO0_CAP)
}

/// Which naive Bayes family to diagnose.
#[derive(Debug, Clone, Copy)]
pub enum NbRef<'a> {
    Gaussian(&'a GaussianNbModel),
    Discrete(&'a DiscreteNbModel),
}

/// Per-class quantities that every statistic is built from.
struct ClassGeometry {
    k: usize,
    n: usize,
    /// `kl[a*k + b] = Σ_i D(p_a,i ‖ p_b,i)`.
    kl: Vec<f64>,
    /// `log p̂(x|c) = ⟨coef_c, x⟩ + (terms shared by all classes) + offset_c`;
    /// only differences of `coef` matter for the log-ratio variance.
    coef: Vec<f64>,
    priors: Vec<f64>,
    rho_stat: f64,
}

fn gaussian_geometry(m: &GaussianNbModel) -> ClassGeometry {
    use crate::linear::Classifier;
    let (k, n) = (m.n_classes(), m.n_features());
    let s2 = m.variances();
    let mut kl = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            kl[a * k + b] = m
                .class_means(a)
                .iter()
                .zip(m.class_means(b))
                .zip(s2)
                .map(|((ma, mb), s)| (ma - mb) * (ma - mb) / (2.0 * s))
                .sum();
        }
    }
    let coef = m
        .means()
        .chunks_exact(n)
        .flat_map(|mu| mu.iter().zip(s2).map(|(u, s)| u / s))
        .collect();
    ClassGeometry {
        k,
        n,
        kl,
        coef,
        priors: m.priors().to_vec(),
        rho_stat: s2.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

fn bernoulli_kl(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

fn discrete_geometry(m: &DiscreteNbModel) -> Result<ClassGeometry> {
    use crate::linear::Classifier;
    let (k, n) = (m.n_classes(), m.n_features());
    if m.cond_probs().iter().any(|&p| p <= 0.0 || p >= 1.0) {
        return Err(Error::NonFinite(
            "saturated conditional probabilities; refit with alpha > 0".into(),
        ));
    }
    let mut kl = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            kl[a * k + b] = (0..n)
                .map(|i| bernoulli_kl(m.cond_prob(a, i), m.cond_prob(b, i)))
                .sum();
        }
    }
    let coef = m.cond_probs().iter().map(|&p| (p / (1.0 - p)).ln()).collect();
    let rho_stat = m
        .cond_probs()
        .iter()
        .map(|&p| p.min(1.0 - p))
        .fold(f64::INFINITY, f64::min);
    Ok(ClassGeometry {
        k,
        n,
        kl,
        coef,
        priors: m.priors().to_vec(),
        rho_stat,
    })
}

/// Assumption statistics of a fitted naive Bayes model over its training data.
///
/// For Gaussian models `ρ₀ = min(min_i σ̂_i², 0.1)`; for discrete models the
/// floor is taken over `min(p̂, 1−p̂)`. KL divergences use the closed forms of
/// the fitted per-feature distributions.
pub fn assumption_stats(model: NbRef<'_>, d: &Dataset) -> Result<AssumptionReport> {
    let geo = match model {
        NbRef::Gaussian(m) => gaussian_geometry(m),
        NbRef::Discrete(m) => discrete_geometry(m)?,
    };
    let (k, n) = (geo.k, geo.n);
    if d.n() != n {
        return Err(Error::Dimension {
            expected: n,
            found: d.n(),
        });
    }
    if d.k() != k {
        return Err(Error::invalid(format!(
            "dataset has {} classes, model has {k}",
            d.k()
        )));
    }
    if let Some((class, &count)) = d.class_sizes().iter().enumerate().find(|(_, &c)| c < 2) {
        return Err(Error::SmallClass {
            class,
            count,
            required: 2,
        });
    }

    // projections ⟨coef_c, x⟩ grouped by true class
    let mut proj_by_class: Vec<Vec<Vec<f64>>> = vec![Vec::new(); k];
    for (x, y) in d.samples() {
        let p: Vec<f64> = geo.coef.chunks_exact(n).map(|c| dot(c, x)).collect();
        proj_by_class[y].push(p);
    }

    let nf = n as f64;
    let mut triples = Vec::with_capacity(k * k * (k - 1) / 2);
    let mut ratios = Vec::new();
    for k1 in 0..k {
        for k2 in (k1 + 1)..k {
            for (kk, projections) in proj_by_class.iter().enumerate() {
                let kl1 = geo.kl[kk * k + k1];
                let kl2 = geo.kl[kk * k + k2];
                let beta_abs = (kl1 - kl2).abs() / nf;
                let zeta = (kl2 - kl1 + (geo.priors[k1] / geo.priors[k2]).ln()) / nf;
                ratios.clear();
                ratios.extend(projections.iter().map(|p| p[k1] - p[k2]));
                let alpha = stats::sample_variance(&ratios) / nf;
                triples.push(TripleStat {
                    k1,
                    k2,
                    k: kk,
                    beta_abs,
                    zeta,
                    alpha,
                });
            }
        }
    }
    let beta = triples.iter().map(|t| t.beta_abs).fold(f64::INFINITY, f64::min);
    let zeta = triples.iter().map(|t| t.zeta.abs()).fold(f64::INFINITY, f64::min);
    let alpha = triples.iter().map(|t| t.alpha).fold(0.0, f64::max);
    let uniform = 1.0 / k as f64;
    let balanced = geo
        .priors
        .iter()
        .all(|&p| (p - uniform).abs() <= BALANCE_TOLERANCE * uniform);
    Ok(AssumptionReport {
        rho0: rho0_from(geo.rho_stat),
        beta,
        zeta,
        alpha,
        balanced,
        triples,
    })
}

/// `max_{k1≠k2}` fraction of samples with `|a(x,k1) − a(x,k2)| ≤ τ·n`.
///
/// `activations(x, out)` writes one activation per class.
pub fn g_tilde<F>(activations: F, k: usize, d: &Dataset, tau: f64) -> Result<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    Ok(g_tilde_curve(activations, k, d, &[tau])?[0])
}

/// [`g_tilde`] at several margins, sharing one activation pass.
pub fn g_tilde_curve<F>(activations: F, k: usize, d: &Dataset, taus: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    if let Some(t) = taus.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::invalid(format!("tau must be >= 0, got {t}")));
    }
    if k < 2 {
        return Err(Error::TooFewClasses);
    }
    let nf = d.n() as f64;
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|a| ((a + 1)..k).map(move |b| (a, b)))
        .collect();
    let mut counts = vec![0usize; pairs.len() * taus.len()];
    let mut acts = vec![0.0; k];
    for x in d.rows() {
        activations(x, &mut acts);
        for (p, &(a, b)) in pairs.iter().enumerate() {
            let gap = (acts[a] - acts[b]).abs();
            for (t, &tau) in taus.iter().enumerate() {
                if gap <= tau * nf {
                    counts[t * pairs.len() + p] += 1;
                }
            }
        }
    }
    let m = d.m() as f64;
    Ok((0..taus.len())
        .map(|t| {
            counts[t * pairs.len()..(t + 1) * pairs.len()]
                .iter()
                .copied()
                .max()
                .unwrap_or(0) as f64
                / m
        })
        .collect())
}

/// [`g_tilde`] using a fitted generative model's activations.
pub fn g_tilde_model<M: GenerativeModel>(model: &M, d: &Dataset, tau: f64) -> Result<f64> {
    model.check_dim(d.row(0))?;
    g_tilde(|x, out| model.scores_into(x, out), model.n_classes(), d, tau)
}

/// `(1+t)/2·log(1+t) + (1−t)/2·log(1−t)` on `[0, 1]`; `log 2` at `t = 1`.
pub fn j_transform_log(t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("t must lie in [0,1], got {t}")));
    }
    let xlogx = |v: f64| if v == 0.0 { 0.0 } else { v * v.ln() };
    // (1±t)/2·log(1±t) = xlogx(1±t)/2
    Ok(0.5 * (xlogx(1.0 + t) + xlogx(1.0 - t)))
}

/// `(e^{2B} − 1) / (e^{2B} + K − 1)`, evaluated without overflow.
pub fn logistic_margin(b: f64, k: usize) -> f64 {
    let e = (-2.0 * b).exp();
    (1.0 - e) / (1.0 + (k as f64 - 1.0) * e)
}

/// Largest logistic-loss gap for which the zero-one bound applies:
/// `½((e^{2B} − 1) / (e^{2B} + K − 1))²`.
pub fn logistic_threshold(b: f64, k: usize) -> f64 {
    0.5 * logistic_margin(b, k).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HConsistency {
    /// `R_{0-1}(h) − R*_{0-1}`.
    pub lhs: f64,
    /// `√2·√max(0, R_log(h) − R*_log)`.
    pub rhs: f64,
    pub log_gap: f64,
    pub risk_log: f64,
    pub risk_01: f64,
    pub threshold: f64,
    pub precondition_ok: bool,
}

impl HConsistency {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// Evaluates both sides of the logistic/zero-one H-consistency inequality on
/// the empirical distribution of `d`. Minimal-risk terms `M` are taken as zero.
pub fn hconsistency_check(
    h: &LinearHypothesis,
    reference_star_log: f64,
    reference_star_01: f64,
    d: &Dataset,
) -> Result<HConsistency> {
    if reference_star_log < 0.0 || reference_star_01 < 0.0 {
        return Err(Error::invalid("reference risks must be non-negative"));
    }
    let risk_log = h.log_loss(d)?;
    let risk_01 = zero_one_error(h, d)?;
    let log_gap = risk_log - reference_star_log;
    let threshold = logistic_threshold(h.bias_bound(), d.k());
    Ok(HConsistency {
        lhs: risk_01 - reference_star_01,
        rhs: std::f64::consts::SQRT_2 * log_gap.max(0.0).sqrt(),
        log_gap,
        risk_log,
        risk_01,
        threshold,
        precondition_ok: log_gap <= threshold,
    })
}

/// Near-optimal reference hypothesis for estimating minimal risks.
#[derive(Debug, Clone)]
pub struct ReferenceRisks {
    pub model: LogisticModel,
    pub risk_log: f64,
    pub risk_01: f64,
}

/// Iteration multiplier of the reference optimizer.
pub const REFERENCE_BUDGET_FACTOR: usize = 20;
/// ℓ2 weight of the reference optimizer.
pub const REFERENCE_L2: f64 = 1e-8;

/// Fits logistic regression with a 20× iteration budget and ℓ2 weight 1e-8
/// and reports its empirical risks on `d`.
pub fn reference_risks(d: &Dataset, base: &OptimizerConfig) -> Result<ReferenceRisks> {
    let config = base.with_max_iterations(base.max_iterations * REFERENCE_BUDGET_FACTOR);
    let model = LogisticModel::fit(d, REFERENCE_L2, &config)?;
    let risk_log = model.hypothesis.log_loss(d)?;
    let risk_01 = zero_one_error(&model.hypothesis, d)?;
    Ok(ReferenceRisks {
        model,
        risk_log,
        risk_01,
    })
}

/// `log(1 + e^a)` without overflow.
fn softplus(a: f64) -> f64 {
    if a > 30.0 {
        a + (-a).exp().ln_1p()
    } else {
        a.exp().ln_1p()
    }
}

/// First term `2W(√(2K³n/m) + √(K²n/m))` of [`lr_generalization_bound`].
pub fn lr_bound_complexity_term(w: f64, k: usize, n: usize, m: usize) -> f64 {
    let (kf, nf, mf) = (k as f64, n as f64, m as f64);
    2.0 * w * ((2.0 * kf.powi(3) * nf / mf).sqrt() + (kf * kf * nf / mf).sqrt())
}

/// `2W(√(2K³n/m) + √(K²n/m)) + 2·log(1 + (K−1)·e^{2(W√n + B)})·√(log(4/δ)/(2m))`.
pub fn lr_generalization_bound(w: f64, b: f64, k: usize, n: usize, m: usize, delta: f64) -> Result<f64> {
    if !(w >= 0.0 && w.is_finite()) || !(b >= 0.0 && b.is_finite()) {
        return Err(Error::invalid("W and B must be finite and non-negative"));
    }
    if k < 2 {
        return Err(Error::TooFewClasses);
    }
    if n == 0 || m == 0 {
        return Err(Error::invalid("n and m must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0,1), got {delta}")));
    }
    let range = softplus((k as f64 - 1.0).ln() + 2.0 * (w * (n as f64).sqrt() + b));
    let confidence = ((4.0 / delta).ln() / (2.0 * m as f64)).sqrt();
    Ok(lr_bound_complexity_term(w, k, n, m) + 2.0 * range * confidence)
}

/// One row of the `𝒥` transform table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JRow {
    pub t: f64,
    pub j: f64,
    pub quadratic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub k: usize,
    pub b: f64,
    pub w: f64,
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    /// Approximation-error budget; recorded, never checked.
    pub nu: f64,
    pub threshold: f64,
    pub generalization_bound: f64,
    pub j_rows: Vec<JRow>,
    /// `(τ, G̃(τ))` pairs when a generative model was supplied.
    pub g_tilde: Vec<(f64, f64)>,
}

#[allow(clippy::too_many_arguments)]
pub fn bound_report(
    k: usize,
    b: f64,
    w: f64,
    n: usize,
    m: usize,
    delta: f64,
    nu: f64,
    t_grid: &[f64],
) -> Result<BoundReport> {
    let j_rows = t_grid
        .iter()
        .map(|&t| {
            Ok(JRow {
                t,
                j: j_transform_log(t)?,
                quadratic: t * t / 2.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport {
        k,
        b,
        w,
        n,
        m,
        delta,
        nu,
        threshold: logistic_threshold(b, k),
        generalization_bound: lr_generalization_bound(w, b, k, n, m, delta)?,
        j_rows,
        g_tilde: Vec::new(),
    })
}
