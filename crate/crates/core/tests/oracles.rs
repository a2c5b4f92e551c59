mod common;

use common::*;
use gendisc::diagnostics::{self, lr_generalization_bound};
use gendisc::experiments::{self, ConvergenceConfig, Source};
use gendisc::linear::argmax;
use gendisc::logistic::loss_and_gradient;
use gendisc::model_io::{AnyModel, ModelDocument};
use gendisc::{
    Classifier, DiscreteNbModel, Execution, GaussianNbModel, GenerativeModel, LogisticModel, MixtureSpec,
    OptimizerConfig,
};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn discrete_fit_matches_counting_oracle() {
    let mut r = rng(11);
    for case in 0..100 {
        let m = r.random_range(5..=10_000);
        let n = r.random_range(1..=12);
        let k = r.random_range(2..=5);
        let d = random_binary(&mut r, m, n, k);
        let alpha = [0.0, 0.5, 1.0, 2.0][case % 4];
        let model = DiscreteNbModel::fit(&d, alpha).unwrap();
        let (cond, prior) = counting_oracle(&d, alpha);
        for y in 0..k {
            for i in 0..n {
                assert_eq!(model.cond_prob(y, i), cond[y][i], "case {case} class {y} feature {i}");
            }
        }
        assert_eq!(model.priors(), prior.as_slice());
    }
}

#[test]
fn gaussian_fit_matches_two_pass_oracle() {
    let mut r = rng(12);
    for case in 0..100 {
        let m = r.random_range(5..=3_000);
        let n = r.random_range(1..=8);
        let k = r.random_range(2..=4);
        let d = random_real(&mut r, m, n, k);
        let model = GaussianNbModel::fit(&d).unwrap();
        let (mu, s2, prior) = two_pass_gaussian(&d);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1e-300);
        for y in 0..k {
            for i in 0..n {
                let (a, b) = (model.mean(y, i), mu[y][i]);
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "case {case}: mean {a} vs {b}");
            }
        }
        for (a, b) in model.variances().iter().zip(&s2) {
            assert!(close(*a, *b), "case {case}: variance {a} vs {b}");
        }
        for (a, b) in model.priors().iter().zip(&prior) {
            assert!(close(*a, *b));
        }
    }
}

#[test]
fn softmax_gradient_matches_finite_differences() {
    let mut r = rng(13);
    for case in 0..20 {
        let (m, n, k) = (r.random_range(1..40), r.random_range(1..6), r.random_range(2..5));
        let d = random_real(&mut r, m, n, k);
        let d = gendisc::data::minmax_scale(&d).0;
        let l2 = [0.0, 0.1, 1.0][case % 3];
        let params: Vec<f64> = (0..k * (n + 1)).map(|_| r.random_range(-2.0..2.0)).collect();
        let (value, grad) = loss_and_gradient(&params, &d, l2).unwrap();
        assert!((value - naive_softmax_loss(&params, &d, l2)).abs() < 1e-12 * value.max(1.0));
        let h = 1e-6;
        for j in 0..params.len() {
            let mut p = params.clone();
            p[j] += h;
            let up = naive_softmax_loss(&p, &d, l2);
            p[j] -= 2.0 * h;
            let down = naive_softmax_loss(&p, &d, l2);
            let fd = (up - down) / (2.0 * h);
            let rel = (grad[j] - fd).abs() / grad[j].abs().max(fd.abs()).max(1e-3);
            assert!(rel < 1e-5, "case {case} component {j}: analytic {} vs fd {fd}", grad[j]);
        }
    }
}

#[test]
fn to_linear_predicts_like_the_generative_model() {
    let mut r = rng(14);
    let d = random_real(&mut r, 500, 6, 4);
    let model = GaussianNbModel::fit(&d).unwrap();
    let lin = model.to_linear().unwrap();
    for _ in 0..100_000 {
        let x: Vec<f64> = (0..6).map(|_| r.random_range(-200.0..200.0)).collect();
        let s = model.scores(&x).unwrap();
        let mut sorted = s.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted[3] - sorted[2] < 1e-6 * sorted[3].abs().max(1.0) {
            continue;
        }
        assert_eq!(lin.predict(&x).unwrap(), model.predict(&x).unwrap());
    }

    let b = random_binary(&mut r, 800, 9, 3);
    let dm = DiscreteNbModel::fit(&b, 1.0).unwrap();
    let lin = dm.to_linear().unwrap();
    for x in b.rows() {
        let s = dm.scores(x).unwrap();
        let l = lin.scores(x).unwrap();
        // same scores up to one class-independent constant
        let shift = s[0] - l[0];
        for (a, c) in s.iter().zip(&l) {
            assert!((a - c - shift).abs() < 1e-9);
        }
    }
}

#[test]
fn gaussian_shared_variance_bayes_matches_mixture_oracle_shape() {
    // With the true parameters plugged in, the fitted-model activation gap equals
    // the mixture's closed-form pair activation.
    let spec = MixtureSpec::with_scaling(5, 10, false).unwrap();
    let n = 10;
    let mu: Vec<f64> = (0..5).flat_map(|c| vec![spec.class_mean(c); n]).collect();
    let s2: Vec<f64> = (0..n).map(|i| spec.variance(i)).collect();
    let model = GaussianNbModel::from_parts(mu, s2, vec![0.2; 5]).unwrap();
    let x = spec.sample(50, 3).unwrap();
    for row in x.rows() {
        for (k1, k2) in [(0, 1), (1, 3), (2, 4)] {
            let a = model.pair_activation(row, k1, k2).unwrap();
            let b = spec.bayes_pair_activation(row, k1, k2).unwrap();
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn g_tilde_matches_double_loop() {
    let mut r = rng(15);
    let d = random_real(&mut r, 700, 3, 3);
    let model = GaussianNbModel::fit(&d).unwrap();
    let mut prev = 0.0;
    for tau in [0.0, 0.01, 0.1, 0.5, 1.0, 10.0] {
        let fast = diagnostics::g_tilde_model(&model, &d, tau).unwrap();
        let mut worst = 0usize;
        for k1 in 0..3 {
            for k2 in 0..3 {
                if k1 == k2 {
                    continue;
                }
                let c = d
                    .rows()
                    .filter(|x| model.pair_activation(x, k1, k2).unwrap().abs() <= tau * 3.0)
                    .count();
                worst = worst.max(c);
            }
        }
        assert_eq!(fast, worst as f64 / 700.0);
        assert!(fast >= prev);
        prev = fast;
    }
}

#[test]
fn bound_matches_independent_evaluation() {
    let mut r = rng(16);
    for _ in 0..200 {
        let w: f64 = r.random_range(0.0..5.0);
        let b: f64 = r.random_range(0.0..5.0);
        let k = r.random_range(2..20);
        let n = r.random_range(1..2000);
        let m = r.random_range(1..1_000_000);
        let delta: f64 = r.random_range(0.001..0.999);
        let (kf, nf, mf) = (k as f64, n as f64, m as f64);
        let expected = 2.0 * w * ((2.0 * kf.powi(3) * nf / mf).sqrt() + (kf.powi(2) * nf / mf).sqrt())
            + 2.0 * (1.0 + (kf - 1.0) * (2.0 * (w * nf.sqrt() + b)).exp()).ln() * ((4.0 / delta).ln() / (2.0 * mf)).sqrt();
        if !expected.is_finite() {
            continue;
        }
        let got = lr_generalization_bound(w, b, k, n, m, delta).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected.abs(), "{got} vs {expected}");
    }
    let first = |m| diagnostics::lr_bound_complexity_term(1.3, 4, 20, m);
    assert!((first(400) - first(100) / 2.0).abs() < 1e-15);
    let values: Vec<f64> = (1..200).map(|m| lr_generalization_bound(1.0, 0.5, 3, 5, m * 10, 0.1).unwrap()).collect();
    assert!(values.windows(2).all(|v| v[1] < v[0]));
}

#[test]
fn convergence_threshold_monotone_and_deterministic() {
    let spec = MixtureSpec::new(3, 10).unwrap();
    let mut config = ConvergenceConfig {
        n_values: vec![10],
        k: 3,
        repeats: 2,
        test_size: 2000,
        m_max: 2000,
        ..ConvergenceConfig::default()
    };
    let mut prev: Vec<Option<usize>> = vec![None, None];
    for eps in [0.02, 0.05, 0.1, 1.0] {
        config.epsilon0 = eps;
        let res = experiments::run_convergence(&Source::Synthetic(spec), &config, Execution::Parallel).unwrap();
        let now: Vec<Option<usize>> = res.records.iter().map(|r| r.m_conv).collect();
        for (p, q) in prev.iter().zip(&now) {
            if let (Some(p), Some(q)) = (p, q) {
                assert!(q <= p, "eps {eps}: {q} > {p}");
            }
            if p.is_some() {
                assert!(q.is_some());
            }
        }
        prev = now;
    }
    // a threshold of 1 is met at the first grid point
    assert!(prev.iter().all(|m| *m == Some(6)));

    config.epsilon0 = 0.05;
    let a = experiments::run_convergence(&Source::Synthetic(spec), &config, Execution::Parallel).unwrap();
    let b = experiments::run_convergence(&Source::Synthetic(spec), &config, Execution::Sequential).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_threshold_never_converges() {
    let spec = MixtureSpec::new(2, 4).unwrap();
    let config = ConvergenceConfig {
        n_values: vec![4],
        k: 2,
        epsilon0: 0.0,
        repeats: 2,
        test_size: 500,
        m_max: 100,
        ..ConvergenceConfig::default()
    };
    let res = experiments::run_convergence(&Source::Synthetic(spec), &config, Execution::Parallel).unwrap();
    assert!(res.records.iter().all(|r| !r.converged && r.m_conv.is_none()));
}

#[test]
fn binary_errors_approach_bayes_error_at_large_m() {
    let spec = MixtureSpec::new(2, 2).unwrap();
    let bayes = spec.binary_bayes_error().unwrap();
    let train = spec.sample(20_000, 1).unwrap();
    let test = spec.sample(50_000, 2).unwrap();
    let nb = GaussianNbModel::fit(&train).unwrap();
    let lr = LogisticModel::fit(&train, 1.0 / 20_000.0, &OptimizerConfig::default()).unwrap();
    for e in [
        gendisc::linear::zero_one_error(&nb, &test).unwrap(),
        gendisc::linear::zero_one_error(&lr, &test).unwrap(),
    ] {
        assert!((e - bayes).abs() < 0.02, "{e} vs {bayes}");
    }
}

#[test]
fn lineval_full_size_has_zero_nb_variance() {
    let spec = MixtureSpec::new(3, 6).unwrap();
    let train = spec.sample(300, 5).unwrap();
    let test = spec.sample(1000, 6).unwrap();
    let config = experiments::LinevalConfig {
        m_grid: vec![6, 30, 300, 500],
        repeats: 4,
        regularization: experiments::Regularization::default(),
        optimizer: OptimizerConfig::default(),
        seed: 9,
    };
    let res = experiments::run_lineval(&train, &test, &config, Execution::Parallel).unwrap();
    // 500 clips to 300 and merges with the existing point
    assert_eq!(res.grid, vec![6, 30, 300]);
    assert_eq!(res.nb_var[2], 0.0);
    assert_eq!(res.rows.len(), 2 * 3 * 4);
    // below-chance naive Bayes at m = 2K
    assert!(res.nb_mean[0] < 2.0 / 3.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn argmax_matches_brute_force(v in prop::collection::vec(prop_oneof![-3.0f64..3.0, Just(1.0)], 1..8)) {
        prop_assert_eq!(argmax(&v), brute_argmax(&v));
    }

    #[test]
    fn pair_activation_telescopes(seed in 0u64..1000, k1 in 0usize..4, k2 in 0usize..4, k3 in 0usize..4) {
        let mut r = rng(seed);
        let d = random_real(&mut r, 60, 3, 4);
        let model = GaussianNbModel::fit(&d).unwrap();
        let x = d.row(0);
        let lhs = model.pair_activation(x, k1, k3).unwrap();
        let rhs = model.pair_activation(x, k1, k2).unwrap() + model.pair_activation(x, k2, k3).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn prediction_ignores_common_shift(seed in 0u64..1000, shift in -1e3f64..1e3) {
        let mut r = rng(seed);
        let d = random_real(&mut r, 40, 2, 3);
        let model = GaussianNbModel::fit(&d).unwrap();
        for x in d.rows() {
            let s: Vec<f64> = model.scores(x).unwrap().iter().map(|v| v + shift).collect();
            prop_assert_eq!(argmax(&s), model.predict(x).unwrap());
        }
    }

    #[test]
    fn smoothing_moves_probabilities_monotonically(ones in 0u64..10, extra in 1u64..30, a in 0.0f64..5.0, da in 0.01f64..5.0) {
        // K = 2: ratio below 1/2 rises with alpha, above 1/2 falls
        let total = ones + extra;
        let at = |alpha: f64| (ones as f64 + alpha) / (total as f64 + 2.0 * alpha);
        let p = ones as f64 / total as f64;
        if p < 0.5 {
            prop_assert!(at(a + da) > at(a));
        } else if p > 0.5 {
            prop_assert!(at(a + da) < at(a));
        }
        let d = gendisc::Dataset::new(
            (0..total).map(|s| if s < ones { 1.0 } else { 0.0 }).chain([0.0]).collect(),
            (0..total).map(|_| 0).chain([1]).collect(),
            1,
            2,
        ).unwrap();
        let m = DiscreteNbModel::fit(&d, a).unwrap();
        prop_assert_eq!(m.cond_prob(0, 0), at(a));
    }

    #[test]
    fn j_transform_dominates_quadratic(t in 0.0f64..=1.0) {
        let j = diagnostics::j_transform_log(t).unwrap();
        prop_assert!(j >= t * t / 2.0);
    }

    #[test]
    fn logistic_document_roundtrip(seed in 0u64..200) {
        let mut r = rng(seed);
        let d = gendisc::data::minmax_scale(&random_real(&mut r, 30, 3, 3)).0;
        let model = LogisticModel::fit(&d, 0.1, &OptimizerConfig::default().with_max_iterations(20)).unwrap();
        let json = ModelDocument::from_logistic(&model).to_json().unwrap();
        let back = ModelDocument::from_json(&json).unwrap().into_model().unwrap();
        prop_assert_eq!(back, AnyModel::Logistic(model.hypothesis));
    }
}
