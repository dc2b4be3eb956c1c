//! Runs a study and writes its artifacts.

use std::fs;
use std::path::Path;
use std::time::Instant;

use sashpcfe::reliability::{
    beta_error_percent, mcs_probability, sas_hpcfe_pipeline, spce_only_pipeline, Method, PipelineArtifacts,
    ReliabilityResult,
};
use serde::{Deserialize, Serialize};

use crate::config::Study;
use crate::CliError;

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub pf: f64,
    pub beta: f64,
    pub n_model_evals: usize,
    pub n_surrogate_evals: usize,
    pub cov: Option<f64>,
    pub r: Option<usize>,
    pub seed: u64,
    /// Reliability-index error against the MCS row, in percent.
    pub eps_percent: Option<f64>,
}

fn rows(results: &[ReliabilityResult]) -> Vec<ResultRow> {
    let reference = results.iter().find(|r| r.method == Method::Mcs).map(|r| r.beta);
    results
        .iter()
        .map(|r| ResultRow {
            method: r.method.to_string(),
            pf: r.pf,
            beta: r.beta,
            n_model_evals: r.n_model_evals,
            n_surrogate_evals: r.n_surrogate_evals,
            cov: r.cov,
            r: r.r,
            seed: r.seed,
            eps_percent: match reference {
                Some(b) if r.method != Method::Mcs && b.is_finite() && b != 0.0 && r.beta.is_finite() => {
                    Some(beta_error_percent(b, r.beta))
                }
                _ => None,
            },
        })
        .collect()
}

pub fn write_results(dir: &Path, results: &[ReliabilityResult]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(dir.join("results.csv"))?;
    for row in rows(results) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_subspace_artifacts(dir: &Path, art: &PipelineArtifacts) -> Result<(), CliError> {
    write_json(&dir.join("spce.json"), &art.spce)?;
    let Some(sub) = &art.subspace else { return Ok(()) };
    write_json(&dir.join("active_subspace.json"), sub)?;
    if let Some(h) = &art.hpcfe {
        write_json(&dir.join("hpcfe.json"), h)?;
    }

    let mut w = csv::Writer::from_path(dir.join("eigenvalues.csv"))?;
    w.write_record(["index", "eigenvalue", "cumulative_share"])?;
    let total: f64 = sub.eigenvalues.iter().sum();
    let mut acc = 0.0;
    for (i, l) in sub.eigenvalues.iter().enumerate() {
        acc += l;
        w.write_record([(i + 1).to_string(), l.to_string(), (acc / total).to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("reduced_scatter.csv"))?;
    w.write_record(["z1", "z2", "g", "label"])?;
    for (z, g) in art.preview_z.chunks(sub.r).zip(&art.preview_g) {
        let z2 = z.get(1).map_or(String::new(), f64::to_string);
        let label = if *g < 0.0 { "fail" } else { "safe" };
        w.write_record([z[0].to_string(), z2, g.to_string(), label.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every configured method, rewriting `results.csv` after each one so
/// that a later failure keeps the finished rows.
pub fn run(study: &Study) -> Result<Vec<ReliabilityResult>, CliError> {
    let dir = &study.output;
    fs::create_dir_all(dir)?;
    let ls = study.limit_state.as_ref();
    let mut results = Vec::new();
    for &method in &study.methods {
        let started = Instant::now();
        eprintln!("{}: running {method}", study.name);
        let res = match method {
            Method::Mcs => mcs_probability(ls, &study.model, study.n_mcs, study.seed)?,
            Method::Spce => {
                let (res, art) = spce_only_pipeline(ls, &study.model, &study.spce)?;
                write_json(&dir.join("spce_baseline.json"), &art.spce)?;
                res
            }
            Method::SasHpcfe => {
                let (res, art) = sas_hpcfe_pipeline(ls, &study.model, &study.sas)?;
                write_subspace_artifacts(dir, &art)?;
                res
            }
        };
        for w in &res.warnings {
            eprintln!("warning: {method}: {w}");
        }
        eprintln!(
            "{}: {method} pf = {:e}, beta = {:.4} ({:.1} s)",
            study.name,
            res.pf,
            res.beta,
            started.elapsed().as_secs_f64()
        );
        results.push(res);
        write_results(dir, &results)?;
    }
    Ok(results)
}
