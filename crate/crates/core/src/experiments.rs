//! Sample-complexity experiments.
//!
//! [`run_convergence`] walks a geometric grid of training-set sizes and records,
//! per classifier, the first size `m_conv` at which test error comes within
//! `ε₀` of the classifier's asymptotic error. [`run_lineval`] produces plain
//! error curves on feature files and [`detect_two_regimes`] classifies a pair
//! of curves.
//!
//! Every cell `(n, repeat, m)` draws its training data from a seed derived
//! from the base seed and the cell coordinates. Training sets for one
//! `(n, repeat)` are nested prefixes of a single stream, and both classifiers
//! see the same data. Output order is fixed at `(classifier, n, m, repeat)`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::data::{fmt_real, Dataset};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linear::zero_one_error;
use crate::logistic::{LogisticModel, OptimizerConfig};
use crate::naive_bayes::GaussianNbModel;
use crate::rng::derive_seed;
use crate::stats;
use crate::synthetic::MixtureSpec;

const TEST_STREAM: u64 = 0x7E57;
const TRAIN_STREAM: u64 = 0x7EA1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    NaiveBayes,
    Logistic,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 2] = [ClassifierKind::NaiveBayes, ClassifierKind::Logistic];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::NaiveBayes => "naive_bayes",
            ClassifierKind::Logistic => "logistic",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the ℓ2 strength relates to the training-set size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L2Convention {
    /// `mean loss + (λ/2)‖W‖²`.
    Mean,
    /// `Σ loss + (λ/2)‖W‖²`, i.e. a mean-loss weight of `λ/m`. This is the
    /// scikit-learn `C = 1/λ` parameterization.
    Sum,
}

impl FromStr for L2Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(L2Convention::Mean),
            "sum" => Ok(L2Convention::Sum),
            other => Err(Error::invalid(format!("unknown l2 convention '{other}' (mean|sum)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularization {
    pub strength: f64,
    pub convention: L2Convention,
}

impl Regularization {
    /// Mean-loss ℓ2 weight for a training set of size `m`.
    pub fn weight_for(&self, m: usize) -> f64 {
        match self.convention {
            L2Convention::Mean => self.strength,
            L2Convention::Sum => self.strength / m as f64,
        }
    }
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization {
            strength: 1.0,
            convention: L2Convention::Sum,
        }
    }
}

/// `round(m_min·ratio^i)` up to `m_max`, forced strictly increasing.
pub fn geometric_grid(m_min: usize, ratio: f64, m_max: usize) -> Result<Vec<usize>> {
    if m_min == 0 || m_min > m_max {
        return Err(Error::invalid(format!("bad grid range {m_min}..={m_max}")));
    }
    if !(ratio > 1.0) {
        return Err(Error::invalid(format!("grid ratio must exceed 1, got {ratio}")));
    }
    let mut grid = vec![m_min];
    let mut exact = m_min as f64;
    loop {
        exact *= ratio;
        let last = *grid.last().expect("non-empty");
        let next = (exact.round() as usize).max(last + 1);
        if next > m_max {
            break;
        }
        grid.push(next);
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub n_values: Vec<usize>,
    pub k: usize,
    pub epsilon0: f64,
    pub repeats: usize,
    pub test_size: usize,
    /// First grid point; `None` means `2K`.
    pub m_min: Option<usize>,
    pub m_ratio: f64,
    pub m_max: usize,
    pub base_seed: u64,
    /// Apply the mixture's scale map (ignored for `K = 2`).
    pub scaled: bool,
    pub regularization: Regularization,
    pub optimizer: OptimizerConfig,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            n_values: (1..=10).map(|i| 100 * i).collect(),
            k: 5,
            epsilon0: 0.01,
            repeats: 5,
            test_size: 10_000,
            m_min: None,
            m_ratio: 1.25,
            m_max: 100_000,
            base_seed: 0,
            scaled: true,
            regularization: Regularization::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl ConvergenceConfig {
    pub fn grid(&self, cap: usize) -> Result<Vec<usize>> {
        let m_min = self.m_min.unwrap_or(2 * self.k);
        geometric_grid(m_min, self.m_ratio, self.m_max.min(cap))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon0 >= 0.0) {
            return Err(Error::invalid("epsilon0 must be >= 0"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be >= 1"));
        }
        if self.test_size == 0 {
            return Err(Error::invalid("test size must be >= 1"));
        }
        if self.k < 2 {
            return Err(Error::TooFewClasses);
        }
        self.optimizer.validate()?;
        self.grid(usize::MAX).map(|_| ())
    }
}

/// One test-error measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub classifier: ClassifierKind,
    pub n: usize,
    pub m: usize,
    pub repeat: usize,
    pub test_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub classifier: ClassifierKind,
    pub n: usize,
    pub asymptotic_error: f64,
    /// First grid size where the mean-over-repeats gap fell below `ε₀`.
    pub m_conv: Option<usize>,
    pub per_repeat_m_conv: Vec<Option<usize>>,
    /// Mean and population variance of `per_repeat_m_conv`, when every repeat converged.
    pub m_conv_mean: Option<f64>,
    pub m_conv_var: Option<f64>,
    /// `(m, mean test error)` over the sizes actually evaluated.
    pub curve: Vec<(usize, f64)>,
    /// False when some repeat never met the threshold before `m_max`.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceResult {
    pub records: Vec<ConvergenceRecord>,
    pub rows: Vec<CurveRow>,
}

/// Where training and test data come from.
pub enum Source<'a> {
    Synthetic(MixtureSpec),
    /// Feature files: fixed train and test sets, repeats are random orderings
    /// of the training set.
    Dataset { train: &'a Dataset, test: &'a Dataset },
}

fn fit_and_score(kind: ClassifierKind, train: &Dataset, test: &Dataset, reg: &Regularization, opt: &OptimizerConfig) -> Result<f64> {
    match kind {
        ClassifierKind::NaiveBayes => zero_one_error(&GaussianNbModel::fit_allow_missing(train), test),
        ClassifierKind::Logistic => {
            let model = LogisticModel::fit(train, reg.weight_for(train.m()), opt)?;
            zero_one_error(&model, test)
        }
    }
}

struct Walker<'a> {
    config: &'a ConvergenceConfig,
    exec: Execution,
}

/// Everything needed to evaluate one `n`.
struct Cell<'a> {
    n: usize,
    test: std::borrow::Cow<'a, Dataset>,
    train_at: Box<dyn Fn(usize, usize) -> Result<Dataset> + Send + Sync + 'a>,
    asymptotic: [f64; 2],
    cap: usize,
}

impl Walker<'_> {
    fn walk(&self, cell: &Cell<'_>) -> Result<(Vec<ConvergenceRecord>, Vec<CurveRow>)> {
        let cfg = self.config;
        let grid = cfg.grid(cell.cap)?;
        let mut rows = Vec::new();
        let mut state: Vec<KindState> = ClassifierKind::ALL
            .iter()
            .map(|_| KindState::new(cfg.repeats))
            .collect();

        for &m in &grid {
            let active: Vec<(usize, usize)> = (0..2)
                .filter(|&c| !state[c].done())
                .flat_map(|c| (0..cfg.repeats).map(move |r| (c, r)))
                .collect();
            if active.is_empty() {
                break;
            }
            let errors = self.exec.map(active.clone(), |(c, r)| {
                let train = (cell.train_at)(r, m)?;
                fit_and_score(ClassifierKind::ALL[c], &train, &cell.test, &cfg.regularization, &cfg.optimizer)
            });
            let errors = errors.into_iter().collect::<Result<Vec<_>>>()?;
            for c in 0..2 {
                let kind_errors: Vec<f64> = active
                    .iter()
                    .zip(&errors)
                    .filter(|((ac, _), _)| *ac == c)
                    .map(|(_, &e)| e)
                    .collect();
                if kind_errors.is_empty() {
                    continue;
                }
                for (r, &e) in kind_errors.iter().enumerate() {
                    rows.push(CurveRow {
                        classifier: ClassifierKind::ALL[c],
                        n: cell.n,
                        m,
                        repeat: r,
                        test_error: e,
                    });
                }
                state[c].observe(m, &kind_errors, cell.asymptotic[c], cfg.epsilon0);
            }
            debug!("n={} m={m}: {} fits", cell.n, active.len());
        }
        info!(
            "n={} done: naive_bayes m_conv {:?}, logistic m_conv {:?}",
            cell.n, state[0].m_conv, state[1].m_conv
        );

        let records = ClassifierKind::ALL
            .iter()
            .zip(state)
            .zip(cell.asymptotic)
            .map(|((&kind, st), asym)| st.into_record(kind, cell.n, asym))
            .collect();
        Ok((records, rows))
    }
}

struct KindState {
    m_conv: Option<usize>,
    per_repeat: Vec<Option<usize>>,
    curve: Vec<(usize, f64)>,
}

impl KindState {
    fn new(repeats: usize) -> Self {
        KindState {
            m_conv: None,
            per_repeat: vec![None; repeats],
            curve: Vec::new(),
        }
    }

    fn done(&self) -> bool {
        self.m_conv.is_some() && self.per_repeat.iter().all(Option::is_some)
    }

    fn observe(&mut self, m: usize, errors: &[f64], asymptotic: f64, eps0: f64) {
        let mean = stats::mean(errors);
        self.curve.push((m, mean));
        if self.m_conv.is_none() && (mean - asymptotic).abs() < eps0 {
            self.m_conv = Some(m);
        }
        for (slot, &e) in self.per_repeat.iter_mut().zip(errors) {
            if slot.is_none() && (e - asymptotic).abs() < eps0 {
                *slot = Some(m);
            }
        }
    }

    fn into_record(self, classifier: ClassifierKind, n: usize, asymptotic_error: f64) -> ConvergenceRecord {
        let all: Option<Vec<f64>> = self.per_repeat.iter().map(|v| v.map(|m| m as f64)).collect();
        ConvergenceRecord {
            classifier,
            n,
            asymptotic_error,
            m_conv: self.m_conv,
            m_conv_mean: all.as_deref().map(stats::mean),
            m_conv_var: all.as_deref().map(stats::variance),
            converged: all.is_some(),
            per_repeat_m_conv: self.per_repeat,
            curve: self.curve,
        }
    }
}

/// Runs the convergence protocol. Synthetic sources sweep `config.n_values`;
/// dataset sources use the dataset's own `n` once.
pub fn run_convergence(source: &Source<'_>, config: &ConvergenceConfig, exec: Execution) -> Result<ConvergenceResult> {
    config.validate()?;
    let walker = Walker { config, exec };
    let cells: Vec<Cell<'_>> = match source {
        Source::Synthetic(base) => {
            if base.k() != config.k {
                return Err(Error::invalid("mixture class count differs from config.k"));
            }
            config
                .n_values
                .iter()
                .map(|&n| {
                    let spec = MixtureSpec::with_scaling(config.k, n, config.scaled)?;
                    let test = spec.sample(config.test_size, derive_seed(config.base_seed, &[TEST_STREAM, n as u64]))?;
                    let seed = config.base_seed;
                    let asym = spec.asymptotic_error();
                    Ok(Cell {
                        n,
                        test: std::borrow::Cow::Owned(test),
                        train_at: Box::new(move |r, m| {
                            spec.sample(m, derive_seed(seed, &[TRAIN_STREAM, n as u64, r as u64]))
                        }),
                        asymptotic: [asym, asym],
                        cap: usize::MAX,
                    })
                })
                .collect::<Result<_>>()?
        }
        Source::Dataset { train, test } => {
            check_compatible(train, test)?;
            let asymptotic = full_data_errors(train, test, config, exec)?;
            info!("full-data test errors: naive_bayes {:.4}, logistic {:.4}", asymptotic[0], asymptotic[1]);
            let orders: Vec<Vec<usize>> = (0..config.repeats)
                .map(|r| train.subsample_indices(train.m(), derive_seed(config.base_seed, &[TRAIN_STREAM, r as u64])))
                .collect::<Result<_>>()?;
            let train: &Dataset = train;
            vec![Cell {
                n: train.n(),
                test: std::borrow::Cow::Borrowed(*test),
                train_at: Box::new(move |r, m| Ok(train.select(&orders[r][..m]))),
                asymptotic,
                cap: train.m(),
            }]
        }
    };

    let outputs = exec.map(cells, |cell| walker.walk(&cell));
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for out in outputs {
        let (rec, r) = out?;
        records.extend(rec);
        rows.extend(r);
    }
    for rec in &records {
        if !rec.converged {
            warn!("{} at n={} did not converge by m={}", rec.classifier, rec.n, config.m_max);
        }
    }
    records.sort_by_key(|r| (r.classifier, r.n));
    rows.sort_by_key(|r| (r.classifier, r.n, r.m, r.repeat));
    Ok(ConvergenceResult { records, rows })
}

fn check_compatible(train: &Dataset, test: &Dataset) -> Result<()> {
    if train.n() != test.n() {
        return Err(Error::Dimension {
            expected: train.n(),
            found: test.n(),
        });
    }
    if train.k() != test.k() {
        return Err(Error::invalid(format!(
            "train has {} classes, test has {}",
            train.k(),
            test.k()
        )));
    }
    Ok(())
}

fn full_data_errors(train: &Dataset, test: &Dataset, config: &ConvergenceConfig, exec: Execution) -> Result<[f64; 2]> {
    let errs = exec.map(ClassifierKind::ALL.to_vec(), |kind| {
        fit_and_score(kind, train, test, &config.regularization, &config.optimizer)
    });
    Ok([errs[0].as_ref().map_err(clone_err)?.to_owned(), errs[1].as_ref().map_err(clone_err)?.to_owned()])
}

fn clone_err(e: &Error) -> Error {
    Error::InvalidArgument(e.to_string())
}

/// Least-squares fits of mean `m_conv` against `n` (logistic regression) and
/// against `ln n` (naive Bayes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFits {
    pub lr_vs_n: stats::LineFit,
    pub nb_vs_log_n: stats::LineFit,
}

/// `None` unless every record converged and at least two `n` values exist.
pub fn scaling_fits(records: &[ConvergenceRecord]) -> Option<ScalingFits> {
    let points = |kind: ClassifierKind, f: fn(f64) -> f64| -> Option<(Vec<f64>, Vec<f64>)> {
        let rs: Vec<&ConvergenceRecord> = records.iter().filter(|r| r.classifier == kind).collect();
        let ys = rs.iter().map(|r| r.m_conv_mean).collect::<Option<Vec<f64>>>()?;
        let xs: Vec<f64> = rs.iter().map(|r| f(r.n as f64)).collect();
        (xs.len() >= 2).then_some((xs, ys))
    };
    let (lx, ly) = points(ClassifierKind::Logistic, |n| n)?;
    let (nx, ny) = points(ClassifierKind::NaiveBayes, f64::ln)?;
    Some(ScalingFits {
        lr_vs_n: stats::fit_line(&lx, &ly),
        nb_vs_log_n: stats::fit_line(&nx, &ny),
    })
}

/// Mean error curves on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinevalResult {
    pub grid: Vec<usize>,
    pub rows: Vec<CurveRow>,
    pub nb_mean: Vec<f64>,
    pub lr_mean: Vec<f64>,
    pub nb_var: Vec<f64>,
    pub lr_var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinevalConfig {
    pub m_grid: Vec<usize>,
    pub repeats: usize,
    pub regularization: Regularization,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

/// Test-error curves of Gaussian naive Bayes and logistic regression on
/// random training subsets of each size in the grid. Sizes beyond the
/// training set are clipped; at full size every repeat uses the same fit.
pub fn run_lineval(train: &Dataset, test: &Dataset, config: &LinevalConfig, exec: Execution) -> Result<LinevalResult> {
    check_compatible(train, test)?;
    if config.repeats == 0 {
        return Err(Error::invalid("repeats must be >= 1"));
    }
    config.optimizer.validate()?;
    let mut grid: Vec<usize> = Vec::new();
    for &m in &config.m_grid {
        if m == 0 {
            return Err(Error::invalid("grid sizes must be >= 1"));
        }
        let clipped = m.min(train.m());
        if clipped < m {
            warn!("grid size {m} exceeds training set ({}); clipped", train.m());
        }
        if grid.last().is_some_and(|&last| clipped <= last) {
            if clipped < *grid.last().unwrap() {
                return Err(Error::invalid("grid sizes must be increasing"));
            }
            continue;
        }
        grid.push(clipped);
    }
    if grid.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    let orders: Vec<Vec<usize>> = (0..config.repeats)
        .map(|r| train.subsample_indices(train.m(), derive_seed(config.seed, &[TRAIN_STREAM, r as u64])))
        .collect::<Result<_>>()?;

    let mut tasks = Vec::new();
    for kind in ClassifierKind::ALL {
        for &m in &grid {
            if m == train.m() {
                tasks.push((kind, m, None));
            } else {
                tasks.extend((0..config.repeats).map(|r| (kind, m, Some(r))));
            }
        }
    }
    let results = exec.map(tasks.clone(), |(kind, m, r)| {
        let data = match r {
            Some(r) => train.select(&orders[r][..m]),
            None => train.clone(),
        };
        fit_and_score(kind, &data, test, &config.regularization, &config.optimizer)
    });

    let mut rows = Vec::new();
    for ((kind, m, r), e) in tasks.into_iter().zip(results) {
        let e = e?;
        match r {
            Some(r) => rows.push(CurveRow { classifier: kind, n: train.n(), m, repeat: r, test_error: e }),
            None => rows.extend((0..config.repeats).map(|r| CurveRow {
                classifier: kind,
                n: train.n(),
                m,
                repeat: r,
                test_error: e,
            })),
        }
    }
    rows.sort_by_key(|r| (r.classifier, r.n, r.m, r.repeat));
    let summarize = |kind: ClassifierKind, f: fn(&[f64]) -> f64| -> Vec<f64> {
        grid.iter()
            .map(|&m| {
                let errs: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.classifier == kind && r.m == m)
                    .map(|r| r.test_error)
                    .collect();
                f(&errs)
            })
            .collect()
    };
    Ok(LinevalResult {
        nb_mean: summarize(ClassifierKind::NaiveBayes, stats::mean),
        lr_mean: summarize(ClassifierKind::Logistic, stats::mean),
        nb_var: summarize(ClassifierKind::NaiveBayes, stats::variance),
        lr_var: summarize(ClassifierKind::Logistic, stats::variance),
        grid,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoRegimesVerdict {
    /// Naive Bayes comes within `ε₀` of its own final error at a strictly
    /// smaller grid size than logistic regression does.
    pub nb_faster: bool,
    /// Naive Bayes is better somewhere on the grid and logistic regression is
    /// better at the largest size.
    pub two_regimes: bool,
    /// Grid interval where naive Bayes stops being better, when two regimes exist.
    pub crossover: Option<(usize, usize)>,
    pub nb_reach_m: usize,
    pub lr_reach_m: usize,
    pub epsilon0: f64,
    /// How "approaches its asymptotic error" was made numeric.
    pub criterion: String,
}

fn first_within(curve: &[f64], eps0: f64) -> usize {
    let last = *curve.last().expect("non-empty curve");
    curve
        .iter()
        .position(|&e| (e - last).abs() <= eps0)
        .expect("last point is always within")
}

/// Classifies mean error curves of naive Bayes and logistic regression.
pub fn detect_two_regimes(grid: &[usize], nb: &[f64], lr: &[f64], eps0: f64) -> Result<TwoRegimesVerdict> {
    if nb.len() != grid.len() || lr.len() != grid.len() {
        return Err(Error::invalid("curves and grid must have equal length"));
    }
    if grid.len() < 3 {
        return Err(Error::invalid("need at least 3 grid points"));
    }
    if !(eps0 >= 0.0) {
        return Err(Error::invalid("epsilon0 must be >= 0"));
    }
    let nb_reach = first_within(nb, eps0);
    let lr_reach = first_within(lr, eps0);
    let last = grid.len() - 1;
    let nb_ever_better = nb.iter().zip(lr).any(|(a, b)| a < b);
    let two_regimes = nb_ever_better && lr[last] < nb[last];
    let crossover = if two_regimes {
        (0..last)
            .rev()
            .find(|&i| nb[i] < lr[i] && nb[i + 1] >= lr[i + 1])
            .map(|i| (grid[i], grid[i + 1]))
    } else {
        None
    };
    Ok(TwoRegimesVerdict {
        nb_faster: grid[nb_reach] < grid[lr_reach],
        two_regimes,
        crossover,
        nb_reach_m: grid[nb_reach],
        lr_reach_m: grid[lr_reach],
        epsilon0: eps0,
        criterion: format!("first grid size with |mean error - final mean error| <= {eps0}"),
    })
}

/// `classifier,n,m,repeat,test_error`.
pub fn write_curve_csv<W: Write>(rows: &[CurveRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["classifier", "n", "m", "repeat", "test_error"])?;
    for r in rows {
        w.write_record([
            r.classifier.as_str().to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.repeat.to_string(),
            fmt_real(r.test_error),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// `classifier,n,m_conv_mean,m_conv_var`; unconverged cells are left empty.
pub fn write_summary_csv<W: Write>(records: &[ConvergenceRecord], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["classifier", "n", "m_conv_mean", "m_conv_var"])?;
    for r in records {
        w.write_record([
            r.classifier.as_str().to_string(),
            r.n.to_string(),
            r.m_conv_mean.map(fmt_real).unwrap_or_default(),
            r.m_conv_var.map(fmt_real).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
