use std::path::Path;

use serde::{Deserialize, Serialize};

use super::marginal::{Marginal, MarginalKind};
use crate::error::{Error, Result};

/// Independent random variables, one marginal per input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<VariableSpec>", into = "Vec<VariableSpec>")]
pub struct ProbabilisticModel {
    names: Vec<String>,
    marginals: Vec<Marginal>,
}

/// JSON form of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: String,
    pub kind: MarginalKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<[f64; 2]>,
}

impl VariableSpec {
    fn to_marginal(&self) -> Result<Marginal> {
        let base = match (self.kind, self.lo, self.hi, self.mean, self.sd) {
            (MarginalKind::Uniform, Some(lo), Some(hi), _, _) => Marginal::uniform(lo, hi)?,
            (kind, _, _, Some(mean), Some(sd)) => Marginal::from_moments(kind, mean, sd)?,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "variable '{}': expected mean/sd (or lo/hi for uniform)",
                    self.name
                )))
            }
        };
        match self.truncation {
            Some([a, b]) => base.truncated(a, b),
            None => Ok(base),
        }
    }

    fn from_marginal(name: &str, m: &Marginal) -> Self {
        let (lo, hi, mean, sd) = match m.kind() {
            MarginalKind::Uniform => {
                let (lo, hi) = match m.params() {
                    super::Params::Uniform { lo, hi } => (lo, hi),
                    _ => unreachable!(),
                };
                (Some(lo), Some(hi), None, None)
            }
            _ => (None, None, Some(m.mean()), Some(m.sd())),
        };
        Self {
            name: name.to_string(),
            kind: m.kind(),
            mean,
            sd,
            lo,
            hi,
            truncation: m.truncation().map(|(a, b)| [a, b]),
        }
    }
}

impl TryFrom<Vec<VariableSpec>> for ProbabilisticModel {
    type Error = Error;

    fn try_from(specs: Vec<VariableSpec>) -> Result<Self> {
        let marginals = specs
            .iter()
            .map(VariableSpec::to_marginal)
            .collect::<Result<Vec<_>>>()?;
        let names = specs.into_iter().map(|s| s.name).collect();
        Self::with_names(names, marginals)
    }
}

impl From<ProbabilisticModel> for Vec<VariableSpec> {
    fn from(model: ProbabilisticModel) -> Self {
        model
            .names
            .iter()
            .zip(&model.marginals)
            .map(|(n, m)| VariableSpec::from_marginal(n, m))
            .collect()
    }
}

impl ProbabilisticModel {
    /// Variables are named `x1`, `x2`, ...
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        let names = (1..=marginals.len()).map(|i| format!("x{i}")).collect();
        Self::with_names(names, marginals)
    }

    pub fn with_names(names: Vec<String>, marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::ParameterDomain(
                "a probabilistic model needs at least one variable".into(),
            ));
        }
        if names.len() != marginals.len() {
            return Err(Error::DimensionMismatch {
                expected: marginals.len(),
                got: names.len(),
            });
        }
        Ok(Self { names, marginals })
    }

    /// `dim` i.i.d. copies of one marginal.
    pub fn iid(marginal: Marginal, dim: usize) -> Result<Self> {
        Self::new(vec![marginal; dim])
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Same marginals with every truncation interval removed.
    pub fn without_truncation(&self) -> Self {
        Self {
            names: self.names.clone(),
            marginals: self.marginals.iter().map(Marginal::without_truncation).collect(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}
