use sashpcfe::benchmarks::SobolG;
use sashpcfe::hpcfe::{self, HpcfeConfig};
use sashpcfe::probspace::{Marginal, MarginalKind};
use sashpcfe::reliability::{sas_hpcfe_pipeline, PipelineConfig};
use serde::Serialize;

type Out = Result<String, String>;

fn json<T: Serialize>(v: &T) -> Out {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SubspaceRun {
    pf: f64,
    beta: f64,
    reference_pf: f64,
    r: usize,
    eigenvalues: Vec<f64>,
    n_model_evals: usize,
    loo_error: f64,
    /// Preview points in reduced coordinates, `r` values per point.
    z: Vec<f64>,
    g: Vec<f64>,
    warnings: Vec<String>,
}

/// Runs the full subspace pipeline on the standard `m`-variable Sobol-g
/// limit state.
pub fn sobol_subspace(m: usize, n_train: usize, n_mcs: usize, mu: f64, seed: u64) -> Out {
    let ls = SobolG::standard(m).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig { n_train, n_mcs, mu, seed, n_preview: 600, ..PipelineConfig::default() };
    let (res, art) = sas_hpcfe_pipeline(&ls, &ls.model(), &cfg).map_err(|e| e.to_string())?;
    let sub = art.subspace.expect("the subspace pipeline always projects");
    json(&SubspaceRun {
        pf: res.pf,
        beta: res.beta,
        reference_pf: SobolG::reference_pf(ls.b),
        r: sub.r,
        eigenvalues: sub.eigenvalues,
        n_model_evals: res.n_model_evals,
        loo_error: art.spce.loo_error,
        z: art.preview_z,
        g: art.preview_g,
        warnings: res.warnings,
    })
}

#[derive(Serialize)]
struct Curve {
    x: Vec<f64>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    theta: f64,
    warnings: Vec<String>,
}

/// Fits a one-dimensional H-PCFE model and evaluates it on an even grid
/// spanning the data plus a 10% margin.
pub fn hpcfe_curve(xs: &[f64], ys: &[f64], degree: usize, points: usize) -> Out {
    if xs.len() != ys.len() {
        return Err(format!("{} inputs but {} outputs", xs.len(), ys.len()));
    }
    if points < 2 {
        return Err("need at least two grid points".into());
    }
    let cfg = HpcfeConfig { max_order: 1, degree, ..HpcfeConfig::default() };
    let model = hpcfe::fit(xs, 1, ys, &cfg).map_err(|e| e.to_string())?;
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    let pad = 0.1 * (hi - lo).max(1e-9);
    let x: Vec<f64> = (0..points)
        .map(|i| lo - pad + (hi - lo + 2.0 * pad) * i as f64 / (points - 1) as f64)
        .collect();
    let mean = model.predict_mean_batch(&x).map_err(|e| e.to_string())?;
    let sd = x
        .iter()
        .map(|&v| model.predict_variance(&[v]).map(|s| s.max(0.0).sqrt()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    json(&Curve { x, mean, sd, theta: model.theta[0], warnings: model.warnings.clone() })
}

#[derive(Serialize)]
struct Density {
    x: Vec<f64>,
    pdf: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
    sd: f64,
}

/// Density and distribution function of a moment-matched marginal,
/// optionally truncated to `[lo, hi]` (pass NaN bounds to skip truncation).
pub fn marginal_curve(kind: &str, mean: f64, sd: f64, lo: f64, hi: f64, points: usize) -> Out {
    let kind: MarginalKind = serde_json::from_value(serde_json::Value::String(kind.to_lowercase()))
        .map_err(|_| format!("unknown distribution {kind:?}"))?;
    let mut m = Marginal::from_moments(kind, mean, sd).map_err(|e| e.to_string())?;
    if lo.is_finite() && hi.is_finite() {
        m = m.truncated(lo, hi).map_err(|e| e.to_string())?;
    }
    let (a, b) = (m.ppf(1e-4), m.ppf(1.0 - 1e-4));
    let n = points.max(2);
    let x: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
    json(&Density {
        pdf: x.iter().map(|&v| m.pdf(v)).collect(),
        cdf: x.iter().map(|&v| m.cdf(v)).collect(),
        mean: m.mean(),
        sd: m.sd(),
        x,
    })
}
