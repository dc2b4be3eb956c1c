//! Least-angle-regression sparse polynomial chaos expansion.
//!
//! The LAR path runs on centered, unit-norm candidate columns of a
//! total-degree Legendre basis. Every model on the path is refit by ordinary
//! least squares and scored by the corrected leave-one-out error; the best
//! scoring model is returned. One incremental QR factorization of the active
//! columns serves both the equiangular direction and the OLS/LOO refits.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polybasis::{
    eval_multibasis, eval_multibasis_grad, total_degree_cardinality, BasisSet, MultiIndex,
};
use crate::probspace::{SampleMatrix, Space};

/// Normalized LOO values closer than this to the best are treated as ties;
/// the sparsest tied model wins.
const LOO_TIE: f64 = 1e-12;
/// Relative norm below which a new column is numerically dependent on the active set.
const DEPENDENT_COL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpceConfig {
    /// Maximum total degree of the candidate basis.
    pub p_max: usize,
    /// If the total-degree candidate set exceeds this many terms, the degree is
    /// lowered until it fits.
    pub max_candidates: usize,
}

impl Default for SpceConfig {
    fn default() -> Self {
        Self {
            p_max: 5,
            max_candidates: 20_000,
        }
    }
}

impl SpceConfig {
    /// Degree actually used for a `dim`-dimensional problem.
    pub fn effective_degree(&self, dim: usize) -> usize {
        let mut p = self.p_max.max(1);
        while p > 1 && total_degree_cardinality(dim, p) - 1 > self.max_candidates as u128 {
            p -= 1;
        }
        p
    }
}

/// Sparse expansion `intercept + sum_j a_j psi_j(xi)` in Legendre coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsePceModel {
    /// Degree of the candidate set the model was selected from.
    pub p_max: usize,
    pub intercept: f64,
    /// Active non-constant terms in canonical order.
    pub basis: BasisSet,
    pub coefficients: Vec<f64>,
    /// Corrected leave-one-out error, relative to the response variance.
    pub loo_error: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl SparsePceModel {
    fn constant(dim: usize, p_max: usize, value: f64) -> Self {
        Self {
            p_max,
            intercept: value,
            basis: BasisSet::from_indices(dim, vec![]).expect("empty basis"),
            coefficients: vec![],
            loo_error: 0.0,
            warnings: vec![],
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn active_indices(&self) -> &[MultiIndex] {
        self.basis.indices()
    }

    pub fn predict(&self, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: xi.len(),
            });
        }
        if self.coefficients.is_empty() {
            return Ok(self.intercept);
        }
        let psi = eval_multibasis(xi, &self.basis)?;
        Ok(self.intercept + psi.iter().zip(&self.coefficients).map(|(p, a)| p * a).sum::<f64>())
    }

    /// Gradient with respect to the Legendre coordinates.
    pub fn gradient(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: xi.len(),
            });
        }
        if self.coefficients.is_empty() {
            return Ok(vec![0.0; self.dim()]);
        }
        let g = eval_multibasis_grad(xi, &self.basis)?;
        let a = nalgebra::DVector::from_column_slice(&self.coefficients);
        Ok((g.transpose() * a).iter().copied().collect())
    }

    pub fn predict_batch(&self, xi: &SampleMatrix) -> Result<Vec<f64>> {
        if xi.space() != Space::StdLegendre {
            return Err(Error::InvalidConfig(
                "sparse PCE expects Legendre-space samples".into(),
            ));
        }
        if self.coefficients.is_empty() {
            return Ok(vec![self.intercept; xi.rows()]);
        }
        let psi = self.basis.design_matrix(xi.iter_rows())?;
        let a = nalgebra::DVector::from_column_slice(&self.coefficients);
        Ok((psi * a).iter().map(|v| v + self.intercept).collect())
    }
}

/// One step of the LAR path, recorded when a column enters.
#[derive(Debug, Clone)]
pub struct LarStep {
    /// Candidate position (into the candidate basis) of the entering column.
    pub entered: usize,
    /// Absolute correlations of all active columns with the current residual.
    pub active_abs_corr: Vec<f64>,
    /// Largest absolute correlation among inactive columns.
    pub max_inactive_abs_corr: f64,
    /// Corrected LOO error of the OLS refit on the active set after this step.
    pub loo: f64,
}

#[derive(Debug, Clone)]
pub struct LarPath {
    pub candidates: BasisSet,
    /// LOO of the intercept-only model.
    pub loo_constant: f64,
    pub steps: Vec<LarStep>,
    /// Number of path steps in the selected model.
    pub selected: usize,
}

/// LOO error of a least-squares fit with `design` (intercept column included by the caller).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LooError {
    /// Mean squared LOO residual divided by the response variance.
    pub raw: f64,
    /// `raw` times the finite-sample correction `n/(n-P) (1 + tr((D^T D)^-1))`.
    pub corrected: f64,
}

/// Leave-one-out error by the hat-matrix identity `e_i / (1 - h_i)`.
///
/// Returns `+inf` when some `h_i` reaches 1 (interpolated point) or `n ≤ P`.
pub fn loo_error(design: &DMatrix<f64>, y: &[f64]) -> Result<LooError> {
    let (n, p) = design.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let inf = LooError {
        raw: f64::INFINITY,
        corrected: f64::INFINITY,
    };
    if n <= p {
        return Ok(inf);
    }
    let qr = design.clone().qr();
    let q = qr.q();
    let r = qr.r();
    if (0..p).any(|i| r[(i, i)].abs() <= DEPENDENT_COL * design.column(i).norm().max(1e-300)) {
        return Err(Error::InvalidConfig("regressor matrix is rank deficient".into()));
    }
    let yv = nalgebra::DVector::from_column_slice(y);
    let qty = q.transpose() * &yv;
    let resid = &yv - &q * qty;
    let var = variance(y);
    let mut sum = 0.0;
    for i in 0..n {
        let h: f64 = q.row(i).iter().map(|v| v * v).sum();
        if 1.0 - h <= 1e-12 {
            return Ok(inf);
        }
        sum += (resid[i] / (1.0 - h)).powi(2);
    }
    let raw = sum / n as f64 / var;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::InvalidConfig("singular R factor".into()))?;
    let trace = r_inv.iter().map(|v| v * v).sum::<f64>();
    let corr = n as f64 / (n - p) as f64 * (1.0 + trace);
    Ok(LooError {
        raw,
        corrected: raw * corr,
    })
}

fn variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits a sparse PCE on a Legendre-space design.
pub fn fit_lar(xi: &SampleMatrix, y: &[f64], config: &SpceConfig) -> Result<SparsePceModel> {
    fit_lar_with_path(xi, y, config).map(|(m, _)| m)
}

/// [`fit_lar`] also returning the recorded LAR path.
pub fn fit_lar_with_path(
    xi: &SampleMatrix,
    y: &[f64],
    config: &SpceConfig,
) -> Result<(SparsePceModel, LarPath)> {
    let n = xi.rows();
    let dim = xi.cols();
    if xi.space() != Space::StdLegendre {
        return Err(Error::InvalidConfig(
            "sparse PCE must be trained on Legendre-space samples".into(),
        ));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if n < 3 {
        return Err(Error::ParameterDomain(format!(
            "sparse PCE needs at least 3 samples, got {n}"
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "response",
            index: i,
        });
    }
    let p_eff = config.effective_degree(dim);
    let full = BasisSet::total_degree(dim, p_eff);
    let candidates = full.select(&(1..full.len()).collect::<Vec<_>>());
    let k_cand = candidates.len();

    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let y_norm = dot(&yc, &yc).sqrt();
    let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    if y_norm <= 1e-13 * scale * (n as f64).sqrt() {
        let model = SparsePceModel::constant(dim, p_eff, y_mean);
        let path = LarPath {
            candidates,
            loo_constant: 0.0,
            steps: vec![],
            selected: 0,
        };
        return Ok((model, path));
    }
    let y_var = y_norm * y_norm / n as f64;

    // standardized candidate columns, column-major contiguous
    let psi = candidates.design_matrix(xi.iter_rows())?;
    let mut x = vec![0.0; n * k_cand];
    let mut means = vec![0.0; k_cand];
    let mut norms = vec![0.0; k_cand];
    let mut usable = vec![true; k_cand];
    for j in 0..k_cand {
        let col = psi.column(j);
        let m = col.sum() / n as f64;
        let dst = &mut x[j * n..(j + 1) * n];
        for (d, v) in dst.iter_mut().zip(col.iter()) {
            *d = v - m;
        }
        let s = dot(dst, dst).sqrt();
        means[j] = m;
        norms[j] = s;
        if s <= 1e-12 * (n as f64).sqrt() {
            usable[j] = false;
        } else {
            dst.iter_mut().for_each(|v| *v /= s);
        }
    }
    drop(psi);
    let col = |j: usize| &x[j * n..(j + 1) * n];

    let max_steps = k_cand.min(n - 1);
    let mut warnings = Vec::new();

    let mut active: Vec<usize> = Vec::new();
    let mut in_active = vec![false; k_cand];
    // incremental QR of the active standardized columns
    let mut q_cols: Vec<Vec<f64>> = Vec::new();
    let mut r_inv: Vec<Vec<f64>> = Vec::new(); // column k has k+1 entries
    let mut qty: Vec<f64> = Vec::new();
    // OLS residual, hat diagonal and trace-correction accumulators
    let mut ols_resid = yc.clone();
    let mut hat = vec![1.0 / n as f64; n];
    let mut tr_m = 0.0;
    let mut zt_m: Vec<f64> = Vec::new();

    let score = |ols_resid: &[f64], hat: &[f64], tr_m: f64, zt_m: &[f64], p: usize| -> f64 {
        if n <= p {
            return f64::INFINITY;
        }
        let mut sum = 0.0;
        for i in 0..n {
            let d = 1.0 - hat[i];
            if d <= 1e-12 {
                return f64::INFINITY;
            }
            sum += (ols_resid[i] / d).powi(2);
        }
        let trace = 1.0 / n as f64 + tr_m + zt_m.iter().map(|v| v * v).sum::<f64>();
        sum / n as f64 / y_var * (n as f64 / (n - p) as f64) * (1.0 + trace)
    };
    let loo_constant = score(&ols_resid, &hat, 0.0, &[], 1);

    let mut resid = yc.clone();
    let mut corr: Vec<f64> = (0..k_cand)
        .map(|j| if usable[j] { dot(col(j), &resid) } else { 0.0 })
        .collect();
    let c0 = corr.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let mut steps: Vec<LarStep> = Vec::new();

    while active.len() < max_steps {
        // entering column: largest |corr| among inactive, lowest index on ties
        let mut best: Option<(usize, f64)> = None;
        for j in 0..k_cand {
            if in_active[j] || !usable[j] {
                continue;
            }
            let c = corr[j].abs();
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((j, c));
            }
        }
        let Some((j_new, c_new)) = best else { break };
        if c_new <= 1e-12 * c0 {
            break;
        }

        // Gram-Schmidt with one reorthogonalization pass
        let mut v = col(j_new).to_vec();
        let mut rcol = vec![0.0; q_cols.len()];
        for _ in 0..2 {
            for (k, q) in q_cols.iter().enumerate() {
                let h = dot(q, &v);
                rcol[k] += h;
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= h * b);
            }
        }
        let rho = dot(&v, &v).sqrt();
        if rho <= DEPENDENT_COL {
            usable[j_new] = false;
            warnings.push(format!(
                "candidate {:?} is numerically dependent on the active set; dropped",
                candidates.indices()[j_new].exponents()
            ));
            continue;
        }
        v.iter_mut().for_each(|a| *a /= rho);

        // new column of R^-1: [-R^-1 r / rho; 1 / rho]
        let k = q_cols.len();
        let mut new_inv = vec![0.0; k + 1];
        for (i, ni) in new_inv.iter_mut().enumerate().take(k) {
            *ni = -(i..k).map(|l| r_inv[l][i] * rcol[l]).sum::<f64>() / rho;
        }
        new_inv[k] = 1.0 / rho;

        active.push(j_new);
        in_active[j_new] = true;

        // OLS/LOO bookkeeping
        let qy = dot(&v, &yc);
        qty.push(qy);
        ols_resid.iter_mut().zip(&v).for_each(|(e, q)| *e -= qy * q);
        hat.iter_mut().zip(&v).for_each(|(h, q)| *h += q * q);
        // Z = S^-1 R^-1 over the active columns in entry order
        let mut zt = 0.0;
        for (i, &ji) in active.iter().enumerate() {
            let z = new_inv[i] / norms[ji];
            tr_m += z * z;
            zt += means[ji] * z;
        }
        zt_m.push(zt);
        r_inv.push(new_inv);
        q_cols.push(v);
        let loo = score(&ols_resid, &hat, tr_m, &zt_m, active.len() + 1);

        // equiangular direction: w = G^-1 s with G = R^T R
        let signs: Vec<f64> = active.iter().map(|&j| corr[j].signum()).collect();
        let ka = active.len();
        let mut t = vec![0.0; ka]; // R^-T s
        for (c, col_inv) in r_inv.iter().enumerate() {
            t[c] = col_inv.iter().zip(&signs).map(|(a, s)| a * s).sum();
        }
        let mut w = vec![0.0; ka]; // R^-1 t
        for (c, col_inv) in r_inv.iter().enumerate() {
            for (i, a) in col_inv.iter().enumerate() {
                w[i] += a * t[c];
            }
        }
        let norm_a = 1.0 / dot(&signs, &w).sqrt();
        w.iter_mut().for_each(|v| *v *= norm_a);
        let mut u = vec![0.0; n];
        for (&j, &wj) in active.iter().zip(&w) {
            u.iter_mut().zip(col(j)).for_each(|(a, b)| *a += wj * b);
        }

        let c_max = active.iter().map(|&j| corr[j].abs()).fold(0.0f64, f64::max);
        let mut max_inactive = 0.0f64;
        let a: Vec<f64> = (0..k_cand)
            .map(|j| if usable[j] { dot(col(j), &u) } else { 0.0 })
            .collect();
        let mut gamma = c_max / norm_a;
        for j in 0..k_cand {
            if in_active[j] || !usable[j] {
                continue;
            }
            max_inactive = max_inactive.max(corr[j].abs());
            for g in [
                (c_max - corr[j]) / (norm_a - a[j]),
                (c_max + corr[j]) / (norm_a + a[j]),
            ] {
                if g > 1e-15 * gamma && g < gamma {
                    gamma = g;
                }
            }
        }
        steps.push(LarStep {
            entered: j_new,
            active_abs_corr: active.iter().map(|&j| corr[j].abs()).collect(),
            max_inactive_abs_corr: max_inactive,
            loo,
        });

        resid.iter_mut().zip(&u).for_each(|(r, v)| *r -= gamma * v);
        for j in 0..k_cand {
            corr[j] -= gamma * a[j];
        }
        // periodic exact refresh against drift
        if active.len() % 16 == 0 {
            for j in 0..k_cand {
                if usable[j] {
                    corr[j] = dot(col(j), &resid);
                }
            }
        }
    }

    // model selection: sparsest model within the tie tolerance of the best LOO
    let best = steps.iter().map(|s| s.loo).fold(loo_constant, f64::min);
    let selected = if loo_constant <= best + LOO_TIE {
        0
    } else {
        steps.iter().position(|s| s.loo <= best + LOO_TIE).unwrap() + 1
    };
    let loo_sel = if selected == 0 {
        loo_constant
    } else {
        steps[selected - 1].loo
    };

    // standardized OLS coefficients: R_k^-1 (Q_k^T yc)
    let mut beta_std = vec![0.0; selected];
    for (c, col_inv) in r_inv.iter().enumerate().take(selected) {
        for (i, a) in col_inv.iter().enumerate() {
            beta_std[i] += a * qty[c];
        }
    }
    let mut terms: Vec<(usize, f64)> = active[..selected]
        .iter()
        .zip(&beta_std)
        .map(|(&j, &b)| (j, b / norms[j]))
        .collect();
    let intercept = y_mean - terms.iter().map(|&(j, a)| a * means[j]).sum::<f64>();
    terms.sort_by_key(|&(j, _)| j);
    let positions: Vec<usize> = terms.iter().map(|&(j, _)| j).collect();
    let model = SparsePceModel {
        p_max: p_eff,
        intercept,
        basis: candidates.select(&positions),
        coefficients: terms.iter().map(|&(_, a)| a).collect(),
        loo_error: loo_sel,
        warnings,
    };
    Ok((
        model,
        LarPath {
            candidates,
            loo_constant,
            steps,
            selected,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probspace::{sobol_points, transform, Marginal, ProbabilisticModel};
    use approx::assert_relative_eq;

    fn legendre_design(n: usize, d: usize) -> SampleMatrix {
        let u = sobol_points(n, d).unwrap();
        let m = ProbabilisticModel::iid(Marginal::uniform(0.0, 1.0).unwrap(), d).unwrap();
        transform(&u, Space::StdLegendre, &m).unwrap()
    }

    #[test]
    fn linear_response_selects_single_term() {
        let xi = legendre_design(50, 5);
        let y: Vec<f64> = xi.iter_rows().map(|r| 2.0 + 3.0 * r[0]).collect();
        let m = fit_lar(&xi, &y, &SpceConfig::default()).unwrap();
        assert_eq!(m.active_indices(), &[MultiIndex::new(vec![1, 0, 0, 0, 0])]);
        assert_relative_eq!(m.coefficients[0], 3.0 / 3f64.sqrt(), max_relative = 1e-10);
        assert_relative_eq!(m.intercept, 2.0, epsilon = 1e-10);
        assert!(m.loo_error < 1e-12);
        let mut x = vec![0.0; 5];
        x[0] = 1.0;
        assert_relative_eq!(m.predict(&x).unwrap(), 5.0, max_relative = 1e-10);
        let g = m.gradient(&[0.1, 0.2, -0.3, 0.0, 0.5]).unwrap();
        assert_relative_eq!(g[0], 3.0, max_relative = 1e-10);
        assert!(g[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn constant_response() {
        let xi = legendre_design(20, 3);
        let m = fit_lar(&xi, &[4.5; 20], &SpceConfig::default()).unwrap();
        assert!(m.coefficients.is_empty());
        assert_eq!(m.predict(&[0.3, 0.1, -0.2]).unwrap(), 4.5);
        assert_eq!(m.gradient(&[0.3, 0.1, -0.2]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn input_validation() {
        let xi = legendre_design(20, 2);
        assert!(fit_lar(&xi, &[1.0; 19], &SpceConfig::default()).is_err());
        let mut y = vec![1.0; 20];
        y[3] = f64::NAN;
        assert!(matches!(
            fit_lar(&xi, &y, &SpceConfig::default()),
            Err(Error::NonFinite { index: 3, .. })
        ));
        let u = sobol_points(20, 2).unwrap();
        assert!(fit_lar(&u, &[1.0; 20], &SpceConfig::default()).is_err());
    }

    #[test]
    fn degree_is_lowered_for_large_candidate_sets() {
        let cfg = SpceConfig::default();
        assert_eq!(cfg.effective_degree(10), 5);
        assert_eq!(cfg.effective_degree(20), 4);
        assert_eq!(cfg.effective_degree(40), 3);
        assert_eq!(cfg.effective_degree(100), 2);
    }
}
