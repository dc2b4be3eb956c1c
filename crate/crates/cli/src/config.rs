//! Study configuration files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use sashpcfe::benchmarks::{benchmark, StudySizes, TrussGeometry, TrussLimitState, TRUSS_U0};
use sashpcfe::hpcfe::HpcfeConfig;
use sashpcfe::probspace::ProbabilisticModel;
use sashpcfe::reliability::{LimitState, Method, PipelineConfig};
use sashpcfe::spce::SpceConfig;
use serde::Deserialize;

use crate::external::ExternalLimitState;
use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Registered benchmark name.
    pub benchmark: Option<String>,
    /// External limit state: a command reading CSV rows on stdin.
    pub limit_state: Option<ExternalSpec>,
    /// Probabilistic model file; overrides the benchmark's own model.
    pub model: Option<PathBuf>,
    /// Replacement geometry for the truss benchmark.
    pub truss_geometry: Option<PathBuf>,
    #[serde(default = "yes")]
    pub truncation: bool,
    pub methods: Vec<Method>,
    #[serde(default = "one")]
    pub seed: u64,
    #[serde(default)]
    pub mcs: MethodParams,
    #[serde(default)]
    pub spce: MethodParams,
    #[serde(default)]
    pub sas_hpcfe: MethodParams,
    pub output: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

fn one() -> u64 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSpec {
    pub command: Vec<String>,
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodParams {
    pub n_train: Option<usize>,
    pub n_mcs: Option<usize>,
    pub p_max: Option<usize>,
    pub max_candidates: Option<usize>,
    pub mu: Option<f64>,
    /// Gradient sample count for the subspace estimate.
    pub n_grad: Option<usize>,
    pub n_preview: Option<usize>,
    pub hpcfe: Option<HpcfeConfig>,
}

/// A validated study ready to run.
pub struct Study {
    pub name: String,
    pub limit_state: Box<dyn LimitState + Send>,
    pub model: ProbabilisticModel,
    pub methods: Vec<Method>,
    pub n_mcs: usize,
    pub spce: PipelineConfig,
    pub sas: PipelineConfig,
    pub seed: u64,
    pub output: PathBuf,
}

/// Command-line overrides.
#[derive(Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub no_truncation: bool,
}

/// 1-based line of the first occurrence of `"key"` in the source text.
fn key_line(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map_or(1, |i| i + 1)
}

pub fn load(path: &Path, ov: &Overrides) -> Result<Study, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg: StudyConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), e.line())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let err = |key: &str, msg: String| CliError::Config(format!("{}:{}: {msg}", path.display(), key_line(&text, key)));

    let (name, limit_state, default_model, sizes): (String, Box<dyn LimitState + Send>, Option<ProbabilisticModel>, StudySizes) =
        match (&cfg.benchmark, &cfg.limit_state) {
            (Some(b), None) => {
                let bm = benchmark(b).map_err(|e| err("benchmark", e.to_string()))?;
                let ls: Box<dyn LimitState + Send> = match &cfg.truss_geometry {
                    Some(g) if b == "truss" => {
                        let geo = TrussGeometry::load(base.join(g)).map_err(|e| err("truss_geometry", e.to_string()))?;
                        Box::new(TrussLimitState::new(geo, TRUSS_U0))
                    }
                    Some(_) => return Err(err("truss_geometry", "truss_geometry only applies to the truss benchmark".into())),
                    None => bm.limit_state,
                };
                (bm.name, ls, Some(bm.model), bm.sizes)
            }
            (None, Some(ext)) => {
                if ext.command.is_empty() {
                    return Err(err("command", "limit_state.command must not be empty".into()));
                }
                let sizes = StudySizes { n_train: 800, n_train_spce: 1000, n_mcs: 100_000 };
                // the dimension comes from the model file, checked below
                let name = ext.name.clone().unwrap_or_else(|| "external".into());
                (name.clone(), Box::new(ExternalLimitState::new(name, ext.command.clone(), 0)), None, sizes)
            }
            (Some(_), Some(_)) => return Err(err("limit_state", "give either benchmark or limit_state, not both".into())),
            (None, None) => return Err(CliError::Config(format!("{}:1: missing benchmark or limit_state", path.display()))),
        };

    let mut model = match &cfg.model {
        Some(p) => ProbabilisticModel::load(base.join(p)).map_err(|e| err("model", format!("{}: {e}", p.display())))?,
        None => default_model.ok_or_else(|| err("limit_state", "an external limit state needs a model file".into()))?,
    };
    if !cfg.truncation || ov.no_truncation {
        model = model.without_truncation();
    }
    let limit_state: Box<dyn LimitState + Send> = if cfg.limit_state.is_some() {
        let ext = cfg.limit_state.as_ref().expect("checked");
        Box::new(ExternalLimitState::new(name.clone(), ext.command.clone(), model.dim()))
    } else {
        limit_state
    };
    if limit_state.dim() != model.dim() {
        return Err(err(
            "model",
            format!("model has {} variables but {name} takes {}", model.dim(), limit_state.dim()),
        ));
    }

    if cfg.methods.is_empty() {
        return Err(err("methods", "methods must name at least one of mcs, spce, sas-hpcfe".into()));
    }
    let mut seen = BTreeSet::new();
    if let Some(m) = cfg.methods.iter().find(|m| !seen.insert(**m)) {
        return Err(err("methods", format!("method {m} listed twice")));
    }

    let seed = ov.seed.unwrap_or(cfg.seed);
    let n_mcs = cfg.mcs.n_mcs.unwrap_or(sizes.n_mcs);
    if n_mcs == 0 {
        return Err(err("mcs", "n_mcs must be at least 1".into()));
    }
    let spce = pipeline(&cfg.spce, sizes.n_train_spce, sizes.n_mcs, seed).map_err(|m| err("spce", m))?;
    let sas = pipeline(&cfg.sas_hpcfe, sizes.n_train, sizes.n_mcs, seed).map_err(|m| err("sas_hpcfe", m))?;
    let output = match (&ov.out, &cfg.output) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => PathBuf::from("results").join(&name),
    };
    Ok(Study { name, limit_state, model, methods: cfg.methods, n_mcs, spce, sas, seed, output })
}

fn pipeline(p: &MethodParams, n_train: usize, n_mcs: usize, seed: u64) -> Result<PipelineConfig, String> {
    let defaults = PipelineConfig::default();
    let cfg = PipelineConfig {
        n_train: p.n_train.unwrap_or(n_train),
        spce: SpceConfig {
            p_max: p.p_max.unwrap_or(defaults.spce.p_max),
            max_candidates: p.max_candidates.unwrap_or(defaults.spce.max_candidates),
        },
        mu: p.mu.unwrap_or(defaults.mu),
        hpcfe: p.hpcfe.clone().unwrap_or_default(),
        n_mcs: p.n_mcs.unwrap_or(n_mcs),
        n_grad: p.n_grad,
        seed,
        n_preview: p.n_preview.unwrap_or(defaults.n_preview),
    };
    if !(1..=10).contains(&cfg.spce.p_max) {
        return Err(format!("p_max must be between 1 and 10, got {}", cfg.spce.p_max));
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}
