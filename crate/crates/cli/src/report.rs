//! Summaries of finished runs.

use std::path::Path;

use crate::run::ResultRow;
use crate::CliError;

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".into(), |v| v.to_string())
}

/// Renders the results of one output directory as a table.
pub fn report(dir: &Path) -> Result<String, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Config(format!("{}: not a directory", dir.display())));
    }
    let results = dir.join("results.csv");
    if !results.exists() {
        return Ok(format!("{}: no results\n", dir.display()));
    }
    let mut rows: Vec<ResultRow> = csv::Reader::from_path(&results)?
        .deserialize()
        .collect::<Result<_, _>>()?;
    rows.sort_by(|a, b| a.method.cmp(&b.method));

    let mut out = format!(
        "{:<10} {:>12} {:>9} {:>9} {:>9} {:>8} {:>3} {:>7}\n",
        "method", "pf", "beta", "evals", "surr", "cov", "r", "eps%"
    );
    for r in &rows {
        out += &format!(
            "{:<10} {:>12.5e} {:>9.4} {:>9} {:>9} {:>8} {:>3} {:>7}\n",
            r.method,
            r.pf,
            r.beta,
            r.n_model_evals,
            r.n_surrogate_evals,
            cell(r.cov.map(|c| format!("{c:.4}"))),
            cell(r.r),
            cell(r.eps_percent.map(|e| format!("{e:.2}"))),
        );
    }
    let mut expected = Vec::new();
    if rows.iter().any(|r| r.method == "spce") {
        expected.push("spce_baseline.json");
    }
    if rows.iter().any(|r| r.method == "sas-hpcfe") {
        expected.extend(["spce.json", "active_subspace.json", "hpcfe.json", "eigenvalues.csv", "reduced_scatter.csv"]);
    }
    for f in expected {
        if !dir.join(f).exists() {
            out += &format!("missing {f}\n");
        }
    }
    Ok(out)
}
