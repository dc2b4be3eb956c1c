//! Benchmark limit states: the Sobol g-function, a composite beam and a
//! 25-bar space truss, each with its probabilistic input model.

mod truss;

pub use truss::{Load, TrussGeometry, TrussLimitState};

use crate::error::{Error, Result};
use crate::probspace::{Marginal, ProbabilisticModel};
use crate::reliability::LimitState;

/// Names accepted by [`benchmark`]. Any `sobol-m<k>` with `k >= 2` works too.
pub const BENCHMARK_NAMES: &[&str] = &["sobol-m10", "sobol-m40", "sobol-m100", "beam", "truss"];

/// `g(x) = prod_i (|4 x_i - 2| + a_i) / (1 + a_i) - b` on `[0, 1]^m`.
#[derive(Debug, Clone)]
pub struct SobolG {
    pub a: Vec<f64>,
    pub b: f64,
}

impl SobolG {
    pub fn new(a: Vec<f64>, b: f64) -> Result<Self> {
        if a.is_empty() || a.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::ParameterDomain("g-function weights must be nonnegative".into()));
        }
        Ok(Self { a, b })
    }

    /// Two influential inputs (`a = 1`) followed by `m - 2` inert ones (`a = 500`), `b = 0.35`.
    pub fn standard(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::ParameterDomain(format!("g-function needs m >= 2, got {m}")));
        }
        let mut a = vec![500.0; m];
        a[0] = 1.0;
        a[1] = 1.0;
        Self::new(a, 0.35)
    }

    pub fn model(&self) -> ProbabilisticModel {
        let names = (1..=self.a.len()).map(|i| format!("X{i}")).collect();
        let u = Marginal::uniform(0.0, 1.0).expect("valid bounds");
        ProbabilisticModel::with_names(names, vec![u; self.a.len()]).expect("matching lengths")
    }

    /// Exact failure probability of [`SobolG::standard`] in the limit of
    /// inert factors equal to one: `P(UV < b)` with `U, V ~ U[0.5, 1.5]`.
    /// Valid for `0.25 <= b <= 0.75`.
    pub fn reference_pf(b: f64) -> f64 {
        b * (4.0 * b).ln() - b + 0.25
    }
}

impl LimitState for SobolG {
    fn name(&self) -> &str {
        "sobol-g"
    }

    fn dim(&self) -> usize {
        self.a.len()
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.a.len() {
            return Err(Error::DimensionMismatch { expected: self.a.len(), got: x.len() });
        }
        let mut prod = 1.0;
        for (&xi, &ai) in x.iter().zip(&self.a) {
            if !(0.0..=1.0).contains(&xi) {
                return Err(Error::Evaluation(format!("g-function input {xi} outside [0, 1]")));
            }
            prod *= ((4.0 * xi - 2.0).abs() + ai) / (1.0 + ai);
        }
        Ok(prod - self.b)
    }
}

/// Wooden beam with a bonded aluminium plate under six point loads;
/// `g = S - sigma`. Inputs (in order): `A, B, C, D` (mm), `L1..L6`, `L` (mm),
/// `P1..P6` (kN), `Ea`, `Ew` (GPa), `S` (MPa).
#[derive(Debug, Clone, Copy, Default)]
pub struct CompositeBeam;

impl CompositeBeam {
    pub const DIM: usize = 20;

    /// Neutral-axis depth `K`, second moment `I` and the moment at `L3`.
    pub fn section(x: &[f64]) -> Result<(f64, f64, f64)> {
        let (a, b, c, d) = (x[0], x[1], x[2], x[3]);
        let li = &x[4..10];
        let l = x[10];
        let p = &x[11..17];
        let ratio = x[17] / x[18];
        let den = a * b + ratio * d * c;
        if !(den > 0.0) || !(l > 0.0) || !(x[18] > 0.0) {
            return Err(Error::Evaluation("composite beam: nonpositive section or span".into()));
        }
        let k = (0.5 * a * b * b + ratio * d * c * (b + 0.5 * d)) / den;
        let reaction: f64 = p.iter().zip(li).map(|(pi, lii)| pi * (l - lii)).sum::<f64>() / l;
        let m = reaction * li[2] - p[0] * (li[2] - li[0]) - p[1] * (li[2] - li[1]);
        let i = a * b.powi(3) / 12.0
            + a * b * (k - 0.5 * b).powi(2)
            + ratio * c * d.powi(3) / 12.0
            + ratio * d * c * (b + 0.5 * d - k).powi(2);
        if !(i > 0.0) {
            return Err(Error::Evaluation("composite beam: nonpositive second moment".into()));
        }
        Ok((k, i, m))
    }

    /// Peak stress in MPa (`kN mm / mm^3 = GPa`, hence the factor 1000).
    pub fn stress(x: &[f64]) -> Result<f64> {
        let (k, i, m) = Self::section(x)?;
        Ok(m * k / i * 1000.0)
    }

    pub fn model(truncated: bool) -> ProbabilisticModel {
        let normal = |mean: f64, sd: f64, lo: f64, hi: f64| {
            let m = Marginal::normal(mean, sd).expect("valid moments");
            if truncated {
                m.truncated(lo, hi).expect("valid truncation")
            } else {
                m
            }
        };
        let gumbel = |mean: f64, sd: f64, lo: f64, hi: f64| {
            let m = Marginal::gumbel(mean, sd).expect("valid moments");
            if truncated {
                m.truncated(lo, hi).expect("valid truncation")
            } else {
                m
            }
        };
        let mut names: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
        let mut marginals = vec![];
        for mean in [100.0, 200.0, 80.0, 20.0] {
            marginals.push(normal(mean, 0.2, mean - 0.6, mean + 0.6));
        }
        for i in 1..=6 {
            let mean = 200.0 * i as f64;
            names.push(format!("L{i}"));
            marginals.push(normal(mean, 1.0, mean - 3.0, mean + 3.0));
        }
        names.push("L".into());
        marginals.push(normal(1400.0, 2.0, 1394.0, 1406.0));
        for i in 1..=6 {
            names.push(format!("P{i}"));
            marginals.push(gumbel(15.0, 1.5, 5.0, 19.0));
        }
        names.extend(["Ea", "Ew", "S"].iter().map(|s| s.to_string()));
        marginals.push(normal(70.0, 7.0, 49.0, 91.0));
        marginals.push(normal(8.75, 0.875, 6.125, 11.375));
        marginals.push(gumbel(21.0, 2.1, 16.0, 35.0));
        ProbabilisticModel::with_names(names, marginals).expect("matching lengths")
    }
}

impl LimitState for CompositeBeam {
    fn name(&self) -> &str {
        "beam"
    }

    fn dim(&self) -> usize {
        Self::DIM
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != Self::DIM {
            return Err(Error::DimensionMismatch { expected: Self::DIM, got: x.len() });
        }
        Ok(x[19] - Self::stress(x)?)
    }
}

/// Allowable peak displacement of the truss benchmark.
pub const TRUSS_U0: f64 = 0.4;

/// Inputs `P1..P7`, `E`, `A1..A25`, all lognormal.
pub fn truss_model() -> ProbabilisticModel {
    let ln = |mean: f64, sd: f64| Marginal::lognormal(mean, sd).expect("valid moments");
    let mut names = vec![];
    let mut marginals = vec![];
    for (i, mean) in [1000.0, 1e4, 1e4, 1e4, 1e4, 600.0, 500.0].into_iter().enumerate() {
        names.push(format!("P{}", i + 1));
        let sd = if (1..5).contains(&i) { 500.0 } else { 0.1 * mean };
        marginals.push(ln(mean, sd));
    }
    names.push("E".into());
    marginals.push(ln(1e7, 5e5));
    let groups: [(usize, f64); 8] =
        [(1, 0.4), (4, 0.1), (4, 3.4), (2, 0.4), (2, 1.3), (4, 0.9), (4, 1.0), (4, 3.4)];
    for (count, mean) in groups {
        for _ in 0..count {
            names.push(format!("A{}", names.len() - 7));
            marginals.push(ln(mean, 0.1 * mean));
        }
    }
    ProbabilisticModel::with_names(names, marginals).expect("matching lengths")
}

/// Default sample sizes for a benchmark study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StudySizes {
    /// Training size of the subspace pipeline.
    pub n_train: usize,
    /// Training size of the plain sparse-PCE baseline.
    pub n_train_spce: usize,
    pub n_mcs: usize,
}

pub struct Benchmark {
    pub name: String,
    pub limit_state: Box<dyn LimitState + Send>,
    /// Input model with the documented truncations (where any apply).
    pub model: ProbabilisticModel,
    pub sizes: StudySizes,
}

/// Looks up a benchmark by name; see [`BENCHMARK_NAMES`].
pub fn benchmark(name: &str) -> Result<Benchmark> {
    let sizes = |n_train, n_train_spce, n_mcs| StudySizes { n_train, n_train_spce, n_mcs };
    let (limit_state, model, sizes): (Box<dyn LimitState + Send>, _, _) = match name {
        "beam" => (Box::new(CompositeBeam), CompositeBeam::model(true), sizes(800, 1000, 1_000_000)),
        "truss" => (
            Box::new(TrussLimitState::new(TrussGeometry::tower25(), TRUSS_U0)),
            truss_model(),
            sizes(1000, 1100, 100_000),
        ),
        _ => {
            let m = name
                .strip_prefix("sobol-m")
                .and_then(|k| k.parse::<usize>().ok())
                .ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "unknown benchmark {name:?} (expected one of {})",
                        BENCHMARK_NAMES.join(", ")
                    ))
                })?;
            let g = SobolG::standard(m)?;
            let n_train = match m {
                ..=10 => 800,
                ..=40 => 900,
                _ => 1100,
            };
            let model = g.model();
            (Box::new(g), model, sizes(n_train, 1300, 100_000))
        }
    };
    Ok(Benchmark { name: name.to_string(), limit_state, model, sizes })
}
