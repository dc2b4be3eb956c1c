//! Failure-probability estimators and the surrogate pipelines.
//!
//! `g(x) < 0` is failure; `g = 0` counts as safe. The SAS-HPCFE pipeline
//! calls the true limit state only on its Sobol training design: the sparse
//! PCE, its gradients, the active subspace, the hybrid surrogate and the
//! final Monte Carlo run all work from those `N_s` values.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::activesub::{fd_cost, ActiveSubspace};
use crate::error::{Error, Result};
use crate::hpcfe::{self, HpcfeConfig, HpcfeModel};
use crate::par;
use crate::probspace::{
    mc_sample, sobol_points, sobol_points_from, std_normal_cdf, std_normal_ppf, transform,
    uniform_samples, ProbabilisticModel, SampleMatrix, Space,
};
use crate::spce::{fit_lar, SparsePceModel, SpceConfig};

/// Rough cost of one evaluation, for callers deciding how to schedule work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostClass {
    Cheap,
    Moderate,
    Expensive,
}

/// A deterministic scalar performance function of physical inputs.
pub trait LimitState: Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn cost_class(&self) -> CostClass {
        CostClass::Cheap
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64>;

    /// Evaluates every row of a physical-space sample matrix. The default
    /// runs [`LimitState::evaluate`] over row chunks in parallel.
    fn evaluate_batch(&self, x: &SampleMatrix) -> Result<Vec<f64>> {
        check_batch(self.dim(), x)?;
        let n_chunks = x.rows().div_ceil(par::CHUNK_ROWS);
        let parts = par::map_chunks(n_chunks, |c| {
            let start = c * par::CHUNK_ROWS;
            let end = (start + par::CHUNK_ROWS).min(x.rows());
            (start..end).map(|i| self.evaluate(x.row(i))).collect::<Result<Vec<f64>>>()
        });
        let mut out = Vec::with_capacity(x.rows());
        for p in parts {
            out.extend(p?);
        }
        check_finite(&out)?;
        Ok(out)
    }
}

fn check_batch(dim: usize, x: &SampleMatrix) -> Result<()> {
    if x.cols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x.cols() });
    }
    if x.space() != Space::Physical {
        return Err(Error::InvalidConfig("limit states take physical-space samples".into()));
    }
    Ok(())
}

fn check_finite(g: &[f64]) -> Result<()> {
    match g.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what: "limit-state value", index }),
        None => Ok(()),
    }
}

impl<L: LimitState + ?Sized> LimitState for &L {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn cost_class(&self) -> CostClass {
        (**self).cost_class()
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        (**self).evaluate(x)
    }
    fn evaluate_batch(&self, x: &SampleMatrix) -> Result<Vec<f64>> {
        (**self).evaluate_batch(x)
    }
}

impl<L: LimitState + ?Sized + Send> LimitState for Box<L> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn cost_class(&self) -> CostClass {
        (**self).cost_class()
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        (**self).evaluate(x)
    }
    fn evaluate_batch(&self, x: &SampleMatrix) -> Result<Vec<f64>> {
        (**self).evaluate_batch(x)
    }
}

/// Wraps a closure as a limit state.
pub struct FnLimitState<F> {
    name: String,
    dim: usize,
    f: F,
}

impl<F> FnLimitState<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(name: impl Into<String>, dim: usize, f: F) -> Self {
        Self { name: name.into(), dim, f }
    }
}

impl<F> LimitState for FnLimitState<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok((self.f)(x))
    }
}

/// Counts every evaluation that reaches the wrapped limit state.
pub struct CountingLimitState<L> {
    inner: L,
    count: AtomicUsize,
}

impl<L: LimitState> CountingLimitState<L> {
    pub fn new(inner: L) -> Self {
        Self { inner, count: AtomicUsize::new(0) }
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::SeqCst)
    }

    pub fn into_inner(self) -> L {
        self.inner
    }
}

impl<L: LimitState> LimitState for CountingLimitState<L> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn cost_class(&self) -> CostClass {
        self.inner.cost_class()
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.count.fetch_add(1, Ordering::SeqCst);
        self.inner.evaluate(x)
    }
    fn evaluate_batch(&self, x: &SampleMatrix) -> Result<Vec<f64>> {
        self.count.fetch_add(x.rows(), Ordering::SeqCst);
        self.inner.evaluate_batch(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "mcs")]
    Mcs,
    #[serde(rename = "spce")]
    Spce,
    #[serde(rename = "sas-hpcfe")]
    SasHpcfe,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mcs => "mcs",
            Method::Spce => "spce",
            Method::SasHpcfe => "sas-hpcfe",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mcs" => Ok(Method::Mcs),
            "spce" => Ok(Method::Spce),
            "sas-hpcfe" => Ok(Method::SasHpcfe),
            other => Err(Error::InvalidConfig(format!(
                "unknown method {other:?} (expected mcs, spce or sas-hpcfe)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityResult {
    pub method: Method,
    pub pf: f64,
    /// `+inf` when `pf = 0`, `-inf` when `pf = 1`.
    pub beta: f64,
    /// True limit-state evaluations.
    pub n_model_evals: usize,
    pub n_surrogate_evals: usize,
    /// Coefficient of variation of the Monte Carlo estimate; `None` when
    /// `pf = 0`.
    pub cov: Option<f64>,
    /// Active subspace rank, for the subspace pipeline.
    pub r: Option<usize>,
    /// Monte Carlo seed.
    pub seed: u64,
    pub warnings: Vec<String>,
}

/// `beta = Phi^{-1}(1 - pf)`, with `+inf`/`-inf` for `pf = 0`/`pf = 1`.
pub fn reliability_index(pf: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pf) {
        return Err(Error::ParameterDomain(format!("failure probability {pf} outside [0, 1]")));
    }
    Ok(if pf == 0.0 {
        f64::INFINITY
    } else if pf == 1.0 {
        f64::NEG_INFINITY
    } else {
        -std_normal_ppf(pf)
    })
}

/// Inverse of [`reliability_index`]: `pf = Phi(-beta)`.
pub fn failure_probability(beta: f64) -> f64 {
    std_normal_cdf(-beta)
}

/// Percentage error `|beta_ref - beta| / beta_ref * 100`.
pub fn beta_error_percent(beta_ref: f64, beta: f64) -> f64 {
    (beta_ref - beta).abs() / beta_ref.abs() * 100.0
}

/// `sqrt((1 - p) / (n p))`, or `None` for `p = 0`.
pub fn mc_cov(pf: f64, n: usize) -> Option<f64> {
    (pf > 0.0).then(|| ((1.0 - pf) / (n as f64 * pf)).sqrt())
}

/// Fraction of strictly negative values; rejects non-finite values.
fn failure_fraction(g: &[f64]) -> Result<f64> {
    check_finite(g)?;
    Ok(g.iter().filter(|v| **v < 0.0).count() as f64 / g.len() as f64)
}

fn mc_result(method: Method, g: &[f64], seed: u64) -> Result<ReliabilityResult> {
    let pf = failure_fraction(g)?;
    Ok(ReliabilityResult {
        method,
        pf,
        beta: reliability_index(pf)?,
        n_model_evals: 0,
        n_surrogate_evals: 0,
        cov: mc_cov(pf, g.len()),
        r: None,
        seed,
        warnings: vec![],
    })
}

/// Crude Monte Carlo on the true limit state.
pub fn mcs_probability<L: LimitState + ?Sized>(
    limit_state: &L,
    model: &ProbabilisticModel,
    n: usize,
    seed: u64,
) -> Result<ReliabilityResult> {
    if n == 0 {
        return Err(Error::ParameterDomain("Monte Carlo needs n >= 1".into()));
    }
    if model.dim() != limit_state.dim() {
        return Err(Error::DimensionMismatch { expected: limit_state.dim(), got: model.dim() });
    }
    let x = mc_sample(model, n, seed)?;
    let g = limit_state.evaluate_batch(&x)?;
    let mut res = mc_result(Method::Mcs, &g, seed)?;
    res.n_model_evals = n;
    Ok(res)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Training design size `N_s` (true-model evaluations).
    pub n_train: usize,
    pub spce: SpceConfig,
    /// Spectral share retained by the active subspace.
    pub mu: f64,
    pub hpcfe: HpcfeConfig,
    /// Surrogate Monte Carlo sample size.
    pub n_mcs: usize,
    /// Points at which sparse-PCE gradients are averaged; `None` means `10 N`.
    pub n_grad: Option<usize>,
    /// Seed of the surrogate Monte Carlo samples.
    pub seed: u64,
    /// Number of surrogate Monte Carlo points kept for plotting.
    pub n_preview: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_train: 800,
            spce: SpceConfig::default(),
            mu: 0.98,
            hpcfe: HpcfeConfig::default(),
            n_mcs: 100_000,
            n_grad: None,
            seed: 1,
            n_preview: 2000,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n_train < 4 {
            return bad("n_train must be at least 4");
        }
        if self.n_mcs == 0 {
            return bad("n_mcs must be at least 1");
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return bad("mu must lie in (0, 1)");
        }
        if self.spce.p_max == 0 {
            return bad("p_max must be at least 1");
        }
        if self.n_grad == Some(0) {
            return bad("n_grad must be at least 1");
        }
        Ok(())
    }

    pub fn n_grad_for(&self, dim: usize) -> usize {
        self.n_grad.unwrap_or(10 * dim)
    }
}

/// Everything the pipelines learn besides the probability itself.
#[derive(Debug, Clone)]
pub struct PipelineArtifacts {
    pub spce: SparsePceModel,
    pub subspace: Option<ActiveSubspace>,
    pub hpcfe: Option<HpcfeModel>,
    /// Training design in Legendre coordinates.
    pub xi_train: SampleMatrix,
    /// Projected training design, `n_train x r` row-major.
    pub z_train: Vec<f64>,
    pub y_train: Vec<f64>,
    /// Model evaluations a finite-difference gradient estimate would need.
    pub fd_cost: Option<u64>,
    /// Leading surrogate Monte Carlo points in reduced coordinates
    /// (row-major) with their predicted responses.
    pub preview_z: Vec<f64>,
    pub preview_g: Vec<f64>,
}

/// Steps shared by both surrogate pipelines: Sobol design, true-model
/// evaluation and the sparse PCE fit.
fn train_spce<L: LimitState + ?Sized>(
    limit_state: &L,
    model: &ProbabilisticModel,
    config: &PipelineConfig,
) -> Result<(SampleMatrix, Vec<f64>, SparsePceModel, usize)> {
    config.validate()?;
    let dim = limit_state.dim();
    if model.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: model.dim() });
    }
    let counted = CountingLimitState::new(limit_state);
    let u = sobol_points(config.n_train, dim)?;
    let x = transform(&u, Space::Physical, model)?;
    let y = counted.evaluate_batch(&x)?;
    let xi = transform(&u, Space::StdLegendre, model)?;
    let spce = fit_lar(&xi, &y, &config.spce)?;
    Ok((xi, y, spce, counted.count()))
}

fn legendre_mc(n: usize, dim: usize, seed: u64) -> Result<SampleMatrix> {
    let u = uniform_samples(n, dim, seed)?;
    let data = u.into_vec().into_iter().map(|v| 2.0 * v - 1.0).collect();
    SampleMatrix::new(data, n, dim, Space::StdLegendre)
}

/// S-PCE, active subspace, H-PCFE on the projected design, then Monte Carlo
/// on the H-PCFE predictive mean.
pub fn sas_hpcfe_pipeline<L: LimitState + ?Sized>(
    limit_state: &L,
    model: &ProbabilisticModel,
    config: &PipelineConfig,
) -> Result<(ReliabilityResult, PipelineArtifacts)> {
    let (xi, y, spce, n_evals) = train_spce(limit_state, model, config)?;
    let dim = xi.cols();
    let mut warnings = spce.warnings.clone();

    let n_grad = config.n_grad_for(dim);
    let u_grad = sobol_points_from(n_grad, dim, config.n_train as u64 + 1)?;
    let xi_grad = transform(&u_grad, Space::StdLegendre, model)?;
    let subspace = ActiveSubspace::compute(|x| spce.gradient(x), &xi_grad, config.mu)?;
    let r = subspace.r;
    if r == dim {
        warnings.push(format!("active subspace kept all {dim} directions; no reduction"));
    }

    let z_train = subspace.project_rows(&xi)?;
    let hp = hpcfe::fit(&z_train, r, &y, &config.hpcfe)?;
    warnings.extend(hp.warnings.iter().cloned());

    let xi_mc = legendre_mc(config.n_mcs, dim, config.seed)?;
    let z_mc = subspace.project_rows(&xi_mc)?;
    drop(xi_mc);
    let g = hp.predict_mean_batch(&z_mc)?;
    let outside = hp.count_outside(&z_mc);
    if outside > 0 {
        warnings.push(format!(
            "{outside} of {} Monte Carlo points lie outside the training box (extrapolated)",
            config.n_mcs
        ));
    }

    let mut res = mc_result(Method::SasHpcfe, &g, config.seed)?;
    res.n_model_evals = n_evals;
    res.n_surrogate_evals = config.n_mcs;
    res.r = Some(r);
    res.warnings = warnings;

    let n_preview = config.n_preview.min(config.n_mcs);
    let artifacts = PipelineArtifacts {
        fd_cost: Some(fd_cost(dim, n_grad)),
        preview_z: z_mc[..n_preview * r].to_vec(),
        preview_g: g[..n_preview].to_vec(),
        spce,
        subspace: Some(subspace),
        hpcfe: Some(hp),
        xi_train: xi,
        z_train,
        y_train: y,
    };
    Ok((res, artifacts))
}

/// Monte Carlo directly on the sparse PCE.
pub fn spce_only_pipeline<L: LimitState + ?Sized>(
    limit_state: &L,
    model: &ProbabilisticModel,
    config: &PipelineConfig,
) -> Result<(ReliabilityResult, PipelineArtifacts)> {
    let (xi, y, spce, n_evals) = train_spce(limit_state, model, config)?;
    let dim = xi.cols();
    let xi_mc = legendre_mc(config.n_mcs, dim, config.seed)?;
    let n_chunks = config.n_mcs.div_ceil(par::CHUNK_ROWS);
    let parts = par::map_chunks(n_chunks, |c| {
        let start = c * par::CHUNK_ROWS;
        let end = (start + par::CHUNK_ROWS).min(config.n_mcs);
        let block = xi_mc.as_slice()[start * dim..end * dim].to_vec();
        spce.predict_batch(&SampleMatrix::new(block, end - start, dim, Space::StdLegendre)?)
    });
    let mut g = Vec::with_capacity(config.n_mcs);
    for p in parts {
        g.extend(p?);
    }

    let mut res = mc_result(Method::Spce, &g, config.seed)?;
    res.n_model_evals = n_evals;
    res.n_surrogate_evals = config.n_mcs;
    res.warnings = spce.warnings.clone();
    let artifacts = PipelineArtifacts {
        spce,
        subspace: None,
        hpcfe: None,
        xi_train: xi,
        z_train: vec![],
        y_train: y,
        fd_cost: None,
        preview_z: vec![],
        preview_g: vec![],
    };
    Ok((res, artifacts))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n_train: usize,
    pub pf: f64,
    pub beta: f64,
    /// Relative change of beta from the previous row, in percent.
    pub change_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// First training size whose beta moved less than 1% from the previous one.
    pub converged_at: Option<usize>,
}

/// Runs `pipeline` for each training size in `schedule`.
pub fn convergence_study<F>(schedule: &[usize], mut pipeline: F) -> Result<ConvergenceStudy>
where
    F: FnMut(usize) -> Result<ReliabilityResult>,
{
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(schedule.len());
    let mut converged_at = None;
    for &n in schedule {
        let res = pipeline(n)?;
        let change_percent = rows.last().map(|prev| beta_error_percent(prev.beta, res.beta));
        if converged_at.is_none() && change_percent.is_some_and(|c| c < 1.0) {
            converged_at = Some(n);
        }
        rows.push(ConvergenceRow { n_train: n, pf: res.pf, beta: res.beta, change_percent });
    }
    Ok(ConvergenceStudy { rows, converged_at })
}
