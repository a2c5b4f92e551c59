//! Flag parsing and config resolution.
//!
//! Each subcommand has a clap argument struct whose optional fields mirror a
//! fully-defaulted config struct. Resolution layers defaults, then the
//! `--config` file, then explicit flags, all through JSON objects so that the
//! manifest records exactly what ran.

use std::path::{Path, PathBuf};

use clap::{ArgAction, Args};
use gendisc::experiments::L2Convention;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

fn overlay(base: &mut Map<String, Value>, top: Map<String, Value>, source: &str) -> Result<(), CliError> {
    for (key, value) in top {
        if !base.contains_key(&key) {
            return Err(CliError::Usage(format!("unknown key '{key}' in {source}")));
        }
        if !value.is_null() {
            base.insert(key, value);
        }
    }
    Ok(())
}

fn as_object(v: Value, source: &str) -> Result<Map<String, Value>, CliError> {
    match v {
        Value::Object(m) => Ok(m),
        _ => Err(CliError::Usage(format!("{source} must be a JSON object"))),
    }
}

fn resolve<C, A>(flags: &A, file: Option<&Path>) -> Result<C, CliError>
where
    C: Default + Serialize + DeserializeOwned,
    A: Serialize,
{
    let json = |e: serde_json::Error| CliError::Usage(e.to_string());
    let mut merged = as_object(serde_json::to_value(C::default()).map_err(json)?, "defaults")?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        overlay(&mut merged, as_object(v, "config file")?, "config file")?;
    }
    overlay(&mut merged, as_object(serde_json::to_value(flags).map_err(json)?, "flags")?, "flags")?;
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("config: {e}")))
}

#[derive(Debug, Args, Serialize)]
pub struct GenDataArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Apply the feature scale map (default: on for K > 2).
    #[arg(long, action = ArgAction::Set)]
    pub scaled: Option<bool>,
    /// Output CSV path.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenDataConfig {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub scaled: Option<bool>,
}

impl Default for GenDataConfig {
    fn default() -> Self {
        GenDataConfig {
            k: 2,
            n: 10,
            m: 100,
            seed: 0,
            scaled: None,
        }
    }
}

impl GenDataArgs {
    pub fn resolve(&self, file: Option<&Path>) -> Result<(GenDataConfig, PathBuf), CliError> {
        Ok((resolve(self, file)?, self.out.clone()))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ConvergeArgs {
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated feature dimensions.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    #[arg(long)]
    pub eps0: Option<f64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub test_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// First grid size (default 2K).
    #[arg(long)]
    pub m_min: Option<usize>,
    #[arg(long)]
    pub m_ratio: Option<f64>,
    #[arg(long)]
    pub m_max: Option<usize>,
    #[arg(long, action = ArgAction::Set)]
    pub scaled: Option<bool>,
    /// Logistic-regression l2 strength.
    #[arg(long)]
    pub l2: Option<f64>,
    /// `sum` (weight l2/m on the mean loss) or `mean`.
    #[arg(long)]
    pub l2_convention: Option<L2Convention>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Training feature CSV; switches to feature-file mode together with --test.
    #[arg(long, requires = "test")]
    pub train: Option<PathBuf>,
    #[arg(long, requires = "train")]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long, action = ArgAction::Set)]
    pub plots: Option<bool>,
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergeConfig {
    pub k: usize,
    pub n_list: Vec<usize>,
    pub eps0: f64,
    pub repeats: usize,
    pub test_size: usize,
    pub seed: u64,
    pub m_min: Option<usize>,
    pub m_ratio: f64,
    pub m_max: usize,
    pub scaled: bool,
    pub l2: f64,
    pub l2_convention: L2Convention,
    pub max_iter: usize,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub label_column: String,
    pub plots: bool,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        ConvergeConfig {
            k: 5,
            n_list: (1..=10).map(|i| 100 * i).collect(),
            eps0: 0.01,
            repeats: 5,
            test_size: 10_000,
            seed: 0,
            m_min: None,
            m_ratio: 1.25,
            m_max: 100_000,
            scaled: true,
            l2: 1.0,
            l2_convention: L2Convention::Sum,
            max_iter: 1000,
            train: None,
            test: None,
            label_column: "label".into(),
            plots: true,
        }
    }
}

impl ConvergeArgs {
    pub fn resolve(&self, file: Option<&Path>) -> Result<(ConvergeConfig, PathBuf), CliError> {
        Ok((resolve(self, file)?, self.out_dir.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    /// Discrete if every feature is 0/1, Gaussian otherwise.
    Auto,
    Gaussian,
    Discrete,
}

#[derive(Debug, Args, Serialize)]
pub struct AssumptionsArgs {
    #[arg(long)]
    #[serde(skip)]
    pub train: PathBuf,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long, value_enum)]
    pub model: Option<ModelChoice>,
    /// Laplace smoothing for the discrete model.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Min-max scale features before fitting.
    #[arg(long, action = ArgAction::Set)]
    pub scale: Option<bool>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Comma-separated margins τ for the boundary-mass curve.
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    /// Row label in the summary CSV (default: training file stem).
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionsConfig {
    pub label_column: String,
    pub model: ModelChoice,
    pub alpha: f64,
    pub scale: bool,
    pub bins: usize,
    pub taus: Vec<f64>,
    pub method: Option<String>,
}

impl Default for AssumptionsConfig {
    fn default() -> Self {
        AssumptionsConfig {
            label_column: "label".into(),
            model: ModelChoice::Auto,
            alpha: gendisc::naive_bayes::DEFAULT_ALPHA,
            scale: true,
            bins: 20,
            taus: vec![0.0, 0.001, 0.01, 0.1, 1.0],
            method: None,
        }
    }
}

impl AssumptionsArgs {
    pub fn resolve(&self, file: Option<&Path>) -> Result<(AssumptionsConfig, PathBuf, PathBuf), CliError> {
        Ok((resolve(self, file)?, self.train.clone(), self.out_dir.clone()))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct LinevalArgs {
    #[arg(long)]
    #[serde(skip)]
    pub train: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub test: PathBuf,
    /// Logistic-regression l2 strength; required, there is no neutral default.
    #[arg(long)]
    pub l2: Option<f64>,
    /// `mean` (l2 is the mean-loss weight) or `sum`.
    #[arg(long)]
    pub l2_convention: Option<L2Convention>,
    /// Comma-separated training sizes (default: geometric from 2K to the full set).
    #[arg(long, value_delimiter = ',')]
    pub m_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub eps0: Option<f64>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, action = ArgAction::Set)]
    pub scale: Option<bool>,
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinevalConfig {
    pub l2: Option<f64>,
    pub l2_convention: L2Convention,
    pub m_grid: Option<Vec<usize>>,
    pub repeats: usize,
    pub seed: u64,
    pub eps0: f64,
    pub label_column: String,
    pub max_iter: usize,
    pub scale: bool,
}

impl Default for LinevalConfig {
    fn default() -> Self {
        LinevalConfig {
            l2: None,
            l2_convention: L2Convention::Mean,
            m_grid: None,
            repeats: 5,
            seed: 0,
            eps0: 0.01,
            label_column: "label".into(),
            max_iter: 1000,
            scale: true,
        }
    }
}

pub struct LinevalInputs {
    pub config: LinevalConfig,
    pub train: PathBuf,
    pub test: PathBuf,
    pub out_dir: PathBuf,
}

impl LinevalArgs {
    pub fn resolve(&self, file: Option<&Path>) -> Result<LinevalInputs, CliError> {
        let config: LinevalConfig = resolve(self, file)?;
        if config.l2.is_none() {
            return Err(CliError::Usage(
                "--l2 is required: choose the logistic-regression penalty explicitly".into(),
            ));
        }
        Ok(LinevalInputs {
            config,
            train: self.train.clone(),
            test: self.test.clone(),
            out_dir: self.out_dir.clone(),
        })
    }
}

#[derive(Debug, Args, Serialize)]
pub struct BoundsArgs {
    #[arg(long)]
    pub k: Option<usize>,
    /// Bias bound B.
    #[arg(long)]
    pub b: Option<f64>,
    /// Weight-norm bound W.
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Approximation-error budget; recorded only.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Comma-separated t values in [0, 1].
    #[arg(long, value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsConfig {
    pub k: usize,
    pub b: f64,
    pub w: f64,
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    pub nu: f64,
    pub t_grid: Vec<f64>,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            k: 10,
            b: 1.0,
            w: 1.0,
            n: 100,
            m: 1000,
            delta: 0.05,
            nu: 0.0,
            t_grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

impl BoundsArgs {
    pub fn resolve(&self, file: Option<&Path>) -> Result<(BoundsConfig, PathBuf), CliError> {
        Ok((resolve(self, file)?, self.out_dir.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"k": 3, "n": 20}"#).unwrap();
        let args = GenDataArgs {
            k: None,
            n: Some(40),
            m: None,
            seed: None,
            scaled: None,
            out: PathBuf::from("x.csv"),
        };
        let (c, _) = args.resolve(Some(&path)).unwrap();
        assert_eq!((c.k, c.n, c.m), (3, 40, 100));
    }

    #[test]
    fn unknown_file_key_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"kk": 3}"#).unwrap();
        let args = BoundsArgs {
            k: None,
            b: None,
            w: None,
            n: None,
            m: None,
            delta: None,
            nu: None,
            t_grid: None,
            out_dir: PathBuf::new(),
        };
        assert!(matches!(args.resolve(Some(&path)), Err(CliError::Usage(_))));
    }
}
