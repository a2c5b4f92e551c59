//! JSON model documents: `{kind, K, n, parameters, alpha}`.
//!
//! Reals are written in shortest round-trip form, so a save/load cycle
//! reproduces every parameter bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{Classifier, LinearHypothesis};
use crate::logistic::LogisticModel;
use crate::naive_bayes::{DiscreteNbModel, GaussianNbModel, GenerativeModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum Parameters {
    DiscreteNb {
        cond_prob: Vec<Vec<f64>>,
        prior: Vec<f64>,
    },
    GaussianNb {
        mu: Vec<Vec<f64>>,
        sigma2: Vec<f64>,
        prior: Vec<f64>,
    },
    Logistic {
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
        l2_weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    #[serde(rename = "K")]
    pub k: usize,
    pub n: usize,
    #[serde(flatten)]
    pub parameters: Parameters,
    pub alpha: Option<f64>,
}

/// A model rebuilt from a document.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    DiscreteNb(DiscreteNbModel),
    GaussianNb(GaussianNbModel),
    Logistic(LinearHypothesis),
}

fn rows(flat: &[f64], n: usize) -> Vec<Vec<f64>> {
    flat.chunks_exact(n).map(<[f64]>::to_vec).collect()
}

fn flatten(rows: &[Vec<f64>], n: usize) -> Result<Vec<f64>> {
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::Dimension {
            expected: n,
            found: r.len(),
        });
    }
    Ok(rows.concat())
}

impl ModelDocument {
    pub fn from_discrete(m: &DiscreteNbModel) -> Self {
        let n = m.n_features();
        ModelDocument {
            k: m.n_classes(),
            n,
            parameters: Parameters::DiscreteNb {
                cond_prob: rows(m.cond_probs(), n),
                prior: m.priors().to_vec(),
            },
            alpha: Some(m.alpha()),
        }
    }

    pub fn from_gaussian(m: &GaussianNbModel) -> Self {
        let n = m.n_features();
        ModelDocument {
            k: m.n_classes(),
            n,
            parameters: Parameters::GaussianNb {
                mu: rows(m.means(), n),
                sigma2: m.variances().to_vec(),
                prior: m.priors().to_vec(),
            },
            alpha: None,
        }
    }

    pub fn from_logistic(m: &LogisticModel) -> Self {
        let h = &m.hypothesis;
        let n = h.n_features();
        ModelDocument {
            k: h.n_classes(),
            n,
            parameters: Parameters::Logistic {
                weights: rows(h.weights(), n),
                biases: h.biases().to_vec(),
                l2_weight: m.l2_weight,
            },
            alpha: None,
        }
    }

    pub fn into_model(self) -> Result<AnyModel> {
        let n = self.n;
        let model = match self.parameters {
            Parameters::DiscreteNb { cond_prob, prior } => AnyModel::DiscreteNb(
                DiscreteNbModel::from_parts(flatten(&cond_prob, n)?, prior, n, self.alpha.unwrap_or(0.0))?,
            ),
            Parameters::GaussianNb { mu, sigma2, prior } => {
                AnyModel::GaussianNb(GaussianNbModel::from_parts(flatten(&mu, n)?, sigma2, prior)?)
            }
            Parameters::Logistic { weights, biases, .. } => {
                AnyModel::Logistic(LinearHypothesis::new(flatten(&weights, n)?, biases, n)?)
            }
        };
        let k = match &model {
            AnyModel::DiscreteNb(m) => m.n_classes(),
            AnyModel::GaussianNb(m) => m.n_classes(),
            AnyModel::Logistic(h) => h.n_classes(),
        };
        if k != self.k {
            return Err(Error::invalid(format!("document declares K={} but holds {k} classes", self.k)));
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

impl AnyModel {
    /// Linear form of the model (exact for naive Bayes, identity for logistic).
    pub fn to_linear(&self) -> Result<LinearHypothesis> {
        match self {
            AnyModel::DiscreteNb(m) => m.to_linear(),
            AnyModel::GaussianNb(m) => m.to_linear(),
            AnyModel::Logistic(h) => Ok(h.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn document_shape() {
        let m = GaussianNbModel::from_parts(vec![0.1, 0.2, 0.3, 0.4], vec![0.5, 0.25], vec![0.4, 0.6]).unwrap();
        let doc = ModelDocument::from_gaussian(&m);
        let v: serde_json::Value = serde_json::from_str(&doc.to_json().unwrap()).unwrap();
        assert_eq!(v["kind"], "gaussian_nb");
        assert_eq!(v["K"], 2);
        assert_eq!(v["n"], 2);
        assert!(v["alpha"].is_null());
        assert_eq!(v["parameters"]["sigma2"][1], 0.25);
    }

    proptest! {
        #[test]
        fn gaussian_roundtrip_bit_exact(
            mu in prop::collection::vec(-1e6f64..1e6, 6),
            s2 in prop::collection::vec(1e-9f64..1e3, 3),
            p in 0.0001f64..0.9999,
        ) {
            let m = GaussianNbModel::from_parts(mu, s2, vec![p, 1.0 - p]).unwrap();
            let json = ModelDocument::from_gaussian(&m).to_json().unwrap();
            let back = ModelDocument::from_json(&json).unwrap().into_model().unwrap();
            prop_assert_eq!(back, AnyModel::GaussianNb(m));
        }

        #[test]
        fn discrete_roundtrip_bit_exact(
            probs in prop::collection::vec(1e-12f64..(1.0 - 1e-12), 8),
            alpha in 0.0f64..10.0,
        ) {
            let m = DiscreteNbModel::from_parts(probs, vec![0.25; 4], 2, alpha).unwrap();
            let json = ModelDocument::from_discrete(&m).to_json().unwrap();
            let back = ModelDocument::from_json(&json).unwrap().into_model().unwrap();
            prop_assert_eq!(back, AnyModel::DiscreteNb(m));
        }
    }
}
