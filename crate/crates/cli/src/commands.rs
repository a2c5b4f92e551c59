use std::fs;
use std::path::{Path, PathBuf};

use gendisc::data::{fmt_real, load_feature_csv, LabelColumn};
use gendisc::diagnostics::{self, NbRef};
use gendisc::experiments::{
    self, ClassifierKind, ConvergenceConfig, ConvergenceRecord, LinevalConfig as CoreLinevalConfig, Regularization,
    Source,
};
use gendisc::plot::{Axis, Plot, Series};
use gendisc::{Dataset, DiscreteNbModel, Execution, GaussianNbModel, MinMaxScaler, MixtureSpec, OptimizerConfig};
use log::info;
use serde::Serialize;

use crate::config::{AssumptionsConfig, BoundsConfig, ConvergeConfig, GenDataConfig, LinevalInputs, ModelChoice};
use crate::CliError;

#[derive(Serialize)]
struct RunManifest<'a, C: Serialize> {
    subcommand: &'a str,
    version: &'a str,
    base_seed: Option<u64>,
    output: &'a Path,
    inputs: Vec<&'a Path>,
    config: &'a C,
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
    text.push('\n');
    write_file(path, text)
}

fn write_manifest<C: Serialize>(
    path: &Path,
    subcommand: &str,
    seed: Option<u64>,
    output: &Path,
    inputs: Vec<&Path>,
    config: &C,
) -> Result<(), CliError> {
    let manifest = RunManifest {
        subcommand,
        version: env!("CARGO_PKG_VERSION"),
        base_seed: seed,
        output,
        inputs,
        config,
    };
    write_json(path, &manifest)
}

/// Writes rows through the csv crate with LF terminators.
fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(runtime)?;
    w.write_record(header).map_err(runtime)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(runtime)?;
    }
    w.flush().map_err(runtime)
}

fn load(path: &Path, label_column: &str) -> Result<gendisc::data::LoadedCsv, CliError> {
    load_feature_csv(path, &LabelColumn::parse(label_column)).map_err(|e| match e {
        gendisc::Error::Io { .. } => CliError::Usage(e.to_string()),
        other => other.into(),
    })
}

/// Loads a train/test pair with test labels aligned to the training classes
/// and, optionally, both sets scaled by the training min/max.
fn load_pair(train: &Path, test: &Path, label_column: &str, scale: bool) -> Result<(Dataset, Dataset), CliError> {
    let tr = load(train, label_column)?;
    let te = load(test, label_column)?;
    if tr.dataset.n() != te.dataset.n() {
        return Err(gendisc::Error::Dimension {
            expected: tr.dataset.n(),
            found: te.dataset.n(),
        }
        .into());
    }
    let test_set = te.relabel_to(&tr.label_values)?;
    if !scale {
        return Ok((tr.dataset, test_set));
    }
    let scaler = MinMaxScaler::fit(&tr.dataset);
    Ok((scaler.transform(&tr.dataset)?, scaler.transform(&test_set)?))
}

pub fn gen_data(config: &GenDataConfig, out: &Path) -> Result<(), CliError> {
    let spec = match config.scaled {
        Some(s) => MixtureSpec::with_scaling(config.k, config.n, s)?,
        None => MixtureSpec::new(config.k, config.n)?,
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut manifest = out.as_os_str().to_owned();
    manifest.push(".manifest.json");
    write_manifest(&PathBuf::from(manifest), "gen-data", Some(config.seed), out, vec![], config)?;
    let data = spec.sample(config.m, config.seed)?;
    data.save_csv(out)?;
    info!("wrote {} rows to {}", data.m(), out.display());
    Ok(())
}

fn optimizer(max_iter: usize) -> OptimizerConfig {
    OptimizerConfig::default().with_max_iterations(max_iter)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "not converged".to_string(), |v| format!("{v:.1}"))
}

pub fn converge(config: &ConvergeConfig, out_dir: &Path, exec: Execution) -> Result<(), CliError> {
    create_dir(out_dir)?;
    let inputs: Vec<&Path> = config.train.iter().chain(&config.test).map(PathBuf::as_path).collect();
    write_manifest(&out_dir.join("manifest.json"), "converge", Some(config.seed), out_dir, inputs, config)?;

    let mut core = ConvergenceConfig {
        n_values: config.n_list.clone(),
        k: config.k,
        epsilon0: config.eps0,
        repeats: config.repeats,
        test_size: config.test_size,
        m_min: config.m_min,
        m_ratio: config.m_ratio,
        m_max: config.m_max,
        base_seed: config.seed,
        scaled: config.scaled,
        regularization: Regularization {
            strength: config.l2,
            convention: config.l2_convention,
        },
        optimizer: optimizer(config.max_iter),
    };
    let result = match (&config.train, &config.test) {
        (Some(train), Some(test)) => {
            let (train, test) = load_pair(train, test, &config.label_column, true)?;
            core.k = train.k();
            core.n_values = vec![train.n()];
            experiments::run_convergence(&Source::Dataset { train: &train, test: &test }, &core, exec)?
        }
        _ => {
            if config.n_list.is_empty() {
                return Err(CliError::Usage("--n-list must not be empty".into()));
            }
            let spec = MixtureSpec::with_scaling(config.k, config.n_list[0], config.scaled)?;
            experiments::run_convergence(&Source::Synthetic(spec), &core, exec)?
        }
    };

    let results = fs::File::create(out_dir.join("results.csv")).map_err(runtime)?;
    experiments::write_curve_csv(&result.rows, results)?;
    let summary = fs::File::create(out_dir.join("summary.csv")).map_err(runtime)?;
    experiments::write_summary_csv(&result.records, summary)?;
    write_json(&out_dir.join("records.json"), &result.records)?;
    let fits = experiments::scaling_fits(&result.records);
    write_json(&out_dir.join("scaling.json"), &fits)?;
    if config.plots {
        write_convergence_plots(&result.records, out_dir)?;
    }

    for r in &result.records {
        println!(
            "{:<12} n={:<6} m_conv_mean={:<14} asymptotic_error={:.5}",
            r.classifier.as_str(),
            r.n,
            fmt_opt(r.m_conv_mean),
            r.asymptotic_error
        );
    }
    if let Some(f) = fits {
        println!(
            "logistic m_conv vs n: R^2={:.4} slope={:.4}; naive_bayes m_conv vs ln n: R^2={:.4} slope={:.4}",
            f.lr_vs_n.r_squared, f.lr_vs_n.slope, f.nb_vs_log_n.r_squared, f.nb_vs_log_n.slope
        );
    }
    Ok(())
}

fn write_convergence_plots(records: &[ConvergenceRecord], out_dir: &Path) -> Result<(), CliError> {
    let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    ns.dedup();
    for &n in &ns {
        let series = records
            .iter()
            .filter(|r| r.n == n)
            .map(|r| Series {
                label: r.classifier.as_str().to_string(),
                points: r.curve.iter().map(|&(m, e)| (m as f64, e)).collect(),
                line: true,
            })
            .collect();
        let plot = Plot {
            title: format!("Mean test error, n = {n}"),
            x_label: "training size m".into(),
            y_label: "test error".into(),
            x_axis: Axis::Log,
            series,
        };
        write_file(&out_dir.join(format!("curves_n{n}.svg")), plot.to_svg())?;
    }
    let series: Vec<Series> = ClassifierKind::ALL
        .iter()
        .map(|&kind| Series {
            label: kind.as_str().to_string(),
            points: records
                .iter()
                .filter(|r| r.classifier == kind)
                .filter_map(|r| r.m_conv_mean.map(|m| (r.n as f64, m)))
                .collect(),
            line: false,
        })
        .collect();
    for (axis, name) in [(Axis::Linear, "m_conv.svg"), (Axis::Log, "m_conv_logx.svg")] {
        let plot = Plot {
            title: "Mean m_conv against n".into(),
            x_label: "n".into(),
            y_label: "m_conv".into(),
            x_axis: axis,
            series: series.clone(),
        };
        write_file(&out_dir.join(name), plot.to_svg())?;
    }
    Ok(())
}

fn is_binary(d: &Dataset) -> bool {
    d.features().iter().all(|&v| v == 0.0 || v == 1.0)
}

/// `(lo, hi, count)` over `bins` equal-width bins spanning the data.
fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || bins == 0 {
        return Vec::new();
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * width, lo + (i + 1) as f64 * width, c))
        .collect()
}

pub fn assumptions(config: &AssumptionsConfig, train: &Path, out_dir: &Path) -> Result<(), CliError> {
    create_dir(out_dir)?;
    write_manifest(&out_dir.join("manifest.json"), "assumptions", None, out_dir, vec![train], config)?;
    let loaded = load(train, &config.label_column)?;
    let data = if config.scale {
        MinMaxScaler::fit(&loaded.dataset).transform(&loaded.dataset)?
    } else {
        loaded.dataset
    };
    let discrete = match config.model {
        ModelChoice::Auto => is_binary(&data),
        ModelChoice::Gaussian => false,
        ModelChoice::Discrete => true,
    };
    let (report, g_tilde, model_name) = if discrete {
        let model = DiscreteNbModel::fit(&data, config.alpha)?;
        let g = config
            .taus
            .iter()
            .map(|&t| diagnostics::g_tilde_model(&model, &data, t).map(|g| (t, g)))
            .collect::<gendisc::Result<Vec<_>>>()?;
        (diagnostics::assumption_stats(NbRef::Discrete(&model), &data)?, g, "discrete_nb")
    } else {
        let model = GaussianNbModel::fit(&data)?;
        let g = config
            .taus
            .iter()
            .map(|&t| diagnostics::g_tilde_model(&model, &data, t).map(|g| (t, g)))
            .collect::<gendisc::Result<Vec<_>>>()?;
        (diagnostics::assumption_stats(NbRef::Gaussian(&model), &data)?, g, "gaussian_nb")
    };
    let method = config.method.clone().unwrap_or_else(|| {
        train
            .file_stem()
            .map_or_else(|| "features".to_string(), |s| s.to_string_lossy().into_owned())
    });

    write_csv(
        &out_dir.join("assumptions.csv"),
        &["method", "rho0", "beta", "alpha"],
        [[method.clone(), fmt_real(report.rho0), fmt_real(report.beta), fmt_real(report.alpha)]],
    )?;
    write_csv(
        &out_dir.join("triples.csv"),
        &["k1", "k2", "k", "beta_abs", "zeta", "alpha"],
        report.triples.iter().map(|t| {
            [
                t.k1.to_string(),
                t.k2.to_string(),
                t.k.to_string(),
                fmt_real(t.beta_abs),
                fmt_real(t.zeta),
                fmt_real(t.alpha),
            ]
        }),
    )?;
    let stats: [(&str, fn(&diagnostics::TripleStat) -> f64); 3] =
        [("beta", |t| t.beta_abs), ("zeta", |t| t.zeta), ("alpha", |t| t.alpha)];
    for (name, get) in stats {
        let values: Vec<f64> = report.triples.iter().map(get).collect();
        write_csv(
            &out_dir.join(format!("hist_{name}.csv")),
            &["bin_lo", "bin_hi", "count"],
            histogram(&values, config.bins)
                .into_iter()
                .map(|(lo, hi, c)| [fmt_real(lo), fmt_real(hi), c.to_string()]),
        )?;
    }
    write_csv(
        &out_dir.join("g_tilde.csv"),
        &["tau", "g_tilde"],
        g_tilde.iter().map(|&(t, g)| [fmt_real(t), fmt_real(g)]),
    )?;
    #[derive(Serialize)]
    struct Full<'a> {
        method: &'a str,
        model: &'a str,
        report: &'a diagnostics::AssumptionReport,
        g_tilde: &'a [(f64, f64)],
    }
    write_json(
        &out_dir.join("assumptions.json"),
        &Full {
            method: &method,
            model: model_name,
            report: &report,
            g_tilde: &g_tilde,
        },
    )?;
    println!(
        "{method} ({model_name}): rho0={:.6} beta={:.6} zeta={:.6} alpha={:.6} balanced={}",
        report.rho0, report.beta, report.zeta, report.alpha, report.balanced
    );
    Ok(())
}

pub fn lineval(inputs: &LinevalInputs, exec: Execution) -> Result<(), CliError> {
    let config = &inputs.config;
    create_dir(&inputs.out_dir)?;
    write_manifest(
        &inputs.out_dir.join("manifest.json"),
        "lineval",
        Some(config.seed),
        &inputs.out_dir,
        vec![&inputs.train, &inputs.test],
        config,
    )?;
    let (train, test) = load_pair(&inputs.train, &inputs.test, &config.label_column, config.scale)?;
    let m_grid = match &config.m_grid {
        Some(g) => g.clone(),
        None => {
            let m_min = (2 * train.k()).min(train.m());
            let mut g = experiments::geometric_grid(m_min, 1.25, train.m())?;
            if g.last() != Some(&train.m()) {
                g.push(train.m());
            }
            g
        }
    };
    let core = CoreLinevalConfig {
        m_grid,
        repeats: config.repeats,
        regularization: Regularization {
            strength: config.l2.expect("checked at resolution"),
            convention: config.l2_convention,
        },
        optimizer: optimizer(config.max_iter),
        seed: config.seed,
    };
    let result = experiments::run_lineval(&train, &test, &core, exec)?;
    let verdict = experiments::detect_two_regimes(&result.grid, &result.nb_mean, &result.lr_mean, config.eps0)?;

    let out = &inputs.out_dir;
    let curves = fs::File::create(out.join("curves.csv")).map_err(runtime)?;
    experiments::write_curve_csv(&result.rows, curves)?;
    let mut summary = Vec::new();
    for (kind, mean, var) in [
        (ClassifierKind::NaiveBayes, &result.nb_mean, &result.nb_var),
        (ClassifierKind::Logistic, &result.lr_mean, &result.lr_var),
    ] {
        for ((m, e), v) in result.grid.iter().zip(mean).zip(var) {
            summary.push([kind.as_str().to_string(), m.to_string(), fmt_real(*e), fmt_real(*v)]);
        }
    }
    write_csv(
        &out.join("summary.csv"),
        &["classifier", "m", "mean_test_error", "var_test_error"],
        summary,
    )?;
    write_json(&out.join("verdict.json"), &verdict)?;
    let plot = Plot {
        title: "Mean test error".into(),
        x_label: "training size m".into(),
        y_label: "test error".into(),
        x_axis: Axis::Log,
        series: vec![
            Series {
                label: "naive_bayes".into(),
                points: result.grid.iter().zip(&result.nb_mean).map(|(&m, &e)| (m as f64, e)).collect(),
                line: true,
            },
            Series {
                label: "logistic".into(),
                points: result.grid.iter().zip(&result.lr_mean).map(|(&m, &e)| (m as f64, e)).collect(),
                line: true,
            },
        ],
    };
    write_file(&out.join("curves.svg"), plot.to_svg())?;
    println!(
        "nb_faster={} two_regimes={} crossover={:?}",
        verdict.nb_faster, verdict.two_regimes, verdict.crossover
    );
    Ok(())
}

pub fn bounds(config: &BoundsConfig, out_dir: &Path) -> Result<(), CliError> {
    create_dir(out_dir)?;
    write_manifest(&out_dir.join("manifest.json"), "bounds", None, out_dir, vec![], config)?;
    let report = diagnostics::bound_report(
        config.k,
        config.b,
        config.w,
        config.n,
        config.m,
        config.delta,
        config.nu,
        &config.t_grid,
    )?;
    let complexity = diagnostics::lr_bound_complexity_term(config.w, config.k, config.n, config.m);
    write_csv(
        &out_dir.join("bounds.csv"),
        &["quantity", "value"],
        [
            ("threshold", report.threshold),
            ("generalization_bound", report.generalization_bound),
            ("complexity_term", complexity),
            ("nu", report.nu),
        ]
        .into_iter()
        .map(|(q, v)| [q.to_string(), fmt_real(v)]),
    )?;
    write_csv(
        &out_dir.join("j_transform.csv"),
        &["t", "j", "half_t_squared"],
        report.j_rows.iter().map(|r| [fmt_real(r.t), fmt_real(r.j), fmt_real(r.quadratic)]),
    )?;
    write_json(&out_dir.join("report.json"), &report)?;
    println!(
        "threshold={:.6} generalization_bound={:.6}",
        report.threshold, report.generalization_bound
    );
    Ok(())
}
