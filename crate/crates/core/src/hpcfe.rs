//! Hybrid polynomial correlated function expansion: a PCFE trend over
//! extended Legendre bases plus a Gaussian-process residual.
//!
//! Reduced coordinates are mapped affinely onto `[-1, 1]` using the training
//! box (widened by 5% on each side). The trend has no constant column; the
//! constant is the response mean `g0`, and every trend column is centered on
//! its training mean so that `g0` plus the trend reproduces any function in
//! the span of the constant and the basis. Length scales come from maximizing the
//! concentrated log-likelihood with a bounded, log-parameterized
//! Nelder–Mead search from several Sobol-spread starts.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::polybasis::{BasisSet, MultiIndex};
use crate::probspace::sobol_points;

const BOX_MARGIN: f64 = 0.05;
const NUGGET_RETRIES: usize = 3;
const HOMOTOPY_RANK_TOL: f64 = 1e-10;
/// Floor on the process variance inside the likelihood so that exactly
/// representable data do not produce `ln 0`.
const SIGMA2_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HpcfeConfig {
    /// Highest interaction order of the component functions.
    pub max_order: usize,
    /// Highest Legendre degree per variable inside a component.
    pub degree: usize,
    pub nugget: f64,
    pub theta_bounds: (f64, f64),
    pub restarts: usize,
    /// Objective evaluations per start; `None` means `40 (r + 1)`.
    pub max_evals: Option<usize>,
    /// The likelihood is maximized on at most this many leading training
    /// points; the final model always uses all of them.
    pub mle_max_points: usize,
}

impl Default for HpcfeConfig {
    fn default() -> Self {
        Self {
            max_order: 2,
            degree: 3,
            nugget: 1e-8,
            theta_bounds: (1e-2, 1e2),
            restarts: 8,
            max_evals: None,
            mle_max_points: 400,
        }
    }
}

impl HpcfeConfig {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.theta_bounds;
        if self.max_order == 0 || self.degree == 0 || self.degree > u8::MAX as usize {
            return Err(Error::InvalidConfig("H-PCFE order and degree must be at least 1".into()));
        }
        if !(self.nugget > 0.0) {
            return Err(Error::InvalidConfig("nugget must be positive".into()));
        }
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!("bad theta bounds ({lo}, {hi})")));
        }
        if self.restarts == 0 || self.mle_max_points < 4 {
            return Err(Error::InvalidConfig("need at least one start and four MLE points".into()));
        }
        Ok(())
    }
}

/// Affine map of each reduced coordinate onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ScalingBox {
    fn from_rows(z: &[f64], dim: usize) -> Self {
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for row in z.chunks_exact(dim) {
            for k in 0..dim {
                lo[k] = lo[k].min(row[k]);
                hi[k] = hi[k].max(row[k]);
            }
        }
        for k in 0..dim {
            let range = hi[k] - lo[k];
            let pad = if range > 0.0 { BOX_MARGIN * range } else { 1.0 };
            lo[k] -= pad;
            hi[k] += pad;
        }
        Self { lo, hi }
    }

    pub fn scale_into(&self, z: &[f64], out: &mut [f64]) {
        for k in 0..self.lo.len() {
            out[k] = 2.0 * (z[k] - self.lo[k]) / (self.hi[k] - self.lo[k]) - 1.0;
        }
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *l <= *v && *v <= *h)
    }
}

/// Every component-function term of order `<= max_order` with per-variable
/// degree in `1..=degree`, gathered component by component and deduplicated
/// by multi-index. The constant is excluded.
pub fn extended_basis(dim: usize, max_order: usize, degree: usize) -> Result<BasisSet> {
    if dim == 0 || max_order == 0 || degree == 0 {
        return Err(Error::InvalidConfig("empty H-PCFE basis".into()));
    }
    let mut terms = Vec::new();
    let mut subset = Vec::new();
    for order in 1..=max_order.min(dim) {
        for_each_subset(dim, order, 0, &mut subset, &mut |u| {
            // component u expands over every nonempty sub-support of u, which
            // repeats the lower-order terms; the dedup below removes them
            let mut exps = vec![0u8; u.len()];
            loop {
                let mut k = 0;
                while k < u.len() {
                    if (exps[k] as usize) < degree {
                        exps[k] += 1;
                        break;
                    }
                    exps[k] = 0;
                    k += 1;
                }
                if k == u.len() {
                    break;
                }
                let mut e = vec![0u8; dim];
                for (&i, &p) in u.iter().zip(&exps) {
                    e[i] = p;
                }
                terms.push(MultiIndex::new(e));
            }
        });
    }
    BasisSet::from_indices(dim, terms)
}

fn for_each_subset(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if cur.len() == k {
        f(cur);
        return;
    }
    for i in start..n {
        cur.push(i);
        for_each_subset(n, k, i + 1, cur, f);
        cur.pop();
    }
}

/// Trend design matrix for already scaled points (row-major, `basis.dim()` columns).
pub fn build_design_matrix(s: &[f64], basis: &BasisSet) -> Result<DMatrix<f64>> {
    if basis.is_empty() {
        return Err(Error::InvalidConfig("H-PCFE basis has no terms".into()));
    }
    let dim = basis.dim();
    let n = s.len() / dim;
    let mut psi = DMatrix::zeros(n, basis.len());
    let mut table = Vec::new();
    let mut row = vec![0.0; basis.len()];
    for (i, z) in s.chunks_exact(dim).enumerate() {
        basis.eval_extended(z, &mut table, &mut row);
        for (j, v) in row.iter().enumerate() {
            psi[(i, j)] = *v;
        }
    }
    Ok(psi)
}

/// Trend matrix with each column centered on its mean over `s`.
fn centered_design(s: &[f64], basis: &BasisSet) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let mut psi = build_design_matrix(s, basis)?;
    let n = psi.nrows() as f64;
    let means: Vec<f64> = psi.column_iter().map(|c| c.sum() / n).collect();
    for (j, m) in means.iter().enumerate() {
        psi.column_mut(j).add_scalar_mut(-m);
    }
    Ok((psi, means))
}

#[inline]
fn kernel(a: &[f64], b: &[f64], theta: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..theta.len() {
        let d = a[k] - b[k];
        s += theta[k] * d * d;
    }
    (-s).exp()
}

/// `R_ij = exp(-sum_k theta_k (z_ik - z_jk)^2) + nugget [i == j]`.
pub fn correlation_matrix(z: &[f64], theta: &[f64], nugget: f64) -> DMatrix<f64> {
    let dim = theta.len();
    let n = z.len() / dim;
    let mut r = DMatrix::zeros(n, n);
    for j in 0..n {
        let zj = &z[j * dim..(j + 1) * dim];
        r[(j, j)] = 1.0 + nugget;
        for i in j + 1..n {
            let v = kernel(&z[i * dim..(i + 1) * dim], zj, theta);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

/// Cholesky factor of the correlation matrix, escalating the nugget tenfold
/// up to three times if the factorization fails.
fn factorize(z: &[f64], theta: &[f64], nugget: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut r = correlation_matrix(z, theta, 0.0);
    let mut nug = nugget;
    let mut applied = 0.0;
    for _ in 0..=NUGGET_RETRIES {
        for i in 0..r.nrows() {
            r[(i, i)] += nug - applied;
        }
        applied = nug;
        if let Some(c) = Cholesky::new(r.clone()) {
            return Ok((c, nug));
        }
        nug *= 10.0;
    }
    Err(Error::NotPositiveDefinite)
}

fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = f64::EPSILON * a.nrows().max(a.ncols()) as f64 * smax;
    svd.pseudo_inverse(eps).expect("eps is non-negative")
}

/// Result of [`homotopy_solve`].
#[derive(Debug, Clone)]
pub struct HomotopySolution {
    pub alpha: DVector<f64>,
    pub warning: Option<String>,
}

/// Solution of the possibly singular system `A alpha = B` selected through the
/// null-space construction with weight matrix `W`. Starts from the
/// pseudo-inverse solution `alpha0` and applies
/// `V_t (U_t^T V_t)^{-1} U_t^T alpha0`, with `U_t, V_t` the singular vectors
/// of `(I - A^+ A) W` belonging to zero singular values. With `W = I` this
/// is the minimum-norm solution.
pub fn homotopy_solve(a: &DMatrix<f64>, b: &DVector<f64>, w: &DMatrix<f64>) -> Result<HomotopySolution> {
    let q = a.ncols();
    if a.nrows() != b.len() || w.nrows() != q || w.ncols() != q {
        return Err(Error::DimensionMismatch { expected: q, got: b.len() });
    }
    let a_pinv = pinv(a);
    let alpha0 = &a_pinv * b;
    let p = DMatrix::identity(q, q) - &a_pinv * a;
    homotopy_from_projector(alpha0, p, w)
}

/// Shared tail of the homotopy construction given `alpha0` and the null-space
/// projector `P`.
fn homotopy_from_projector(alpha0: DVector<f64>, p: DMatrix<f64>, w: &DMatrix<f64>) -> Result<HomotopySolution> {
    let q = alpha0.len();
    // P is a projector, so "zero" singular values are judged against |W|
    let tol = HOMOTOPY_RANK_TOL * w.norm().max(f64::MIN_POSITIVE);
    let svd = (p * w).svd(true, true);
    let u = svd.u.expect("requested");
    let v = svd.v_t.expect("requested").transpose();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let rank = order.iter().filter(|&&i| svd.singular_values[i] > tol).count();
    let trailing = &order[rank..];
    if trailing.is_empty() {
        return Ok(HomotopySolution {
            alpha: DVector::zeros(q),
            warning: None,
        });
    }
    let ut = DMatrix::from_fn(q, trailing.len(), |i, k| u[(i, trailing[k])]);
    let vt = DMatrix::from_fn(q, trailing.len(), |i, k| v[(i, trailing[k])]);
    let m = ut.tr_mul(&vt);
    let fallback = |why: &str| HomotopySolution {
        alpha: alpha0.clone(),
        warning: Some(format!("homotopy block {why}; using the pseudo-inverse solution")),
    };
    let svd_m = m.clone().svd(false, false);
    let (mmax, mmin) = (svd_m.singular_values.max(), svd_m.singular_values.min());
    if !(mmin > 1e-12 * mmax) {
        return Ok(fallback("is singular"));
    }
    let Some(rhs) = m.lu().solve(&ut.tr_mul(&alpha0)) else {
        return Ok(fallback("solve failed"));
    };
    Ok(HomotopySolution {
        alpha: vt * rhs,
        warning: None,
    })
}

struct Gls {
    alpha0: DVector<f64>,
    projector: DMatrix<f64>,
    a_pinv: DMatrix<f64>,
}

/// Quantities derived from one factorization of `R` at fixed `theta`.
#[derive(Debug, Clone)]
struct Profile {
    chol: Cholesky<f64, Dyn>,
    nugget: f64,
    /// `L^{-1} Psi`
    q: DMatrix<f64>,
    /// `L^{-1} d`
    qd: DVector<f64>,
    log_det: f64,
}

impl Profile {
    fn new(s: &[f64], psi: &DMatrix<f64>, d: &DVector<f64>, theta: &[f64], nugget: f64) -> Result<Self> {
        let (chol, nugget) = factorize(s, theta, nugget)?;
        let l = chol.l_dirty();
        let q = l.solve_lower_triangular(psi).ok_or(Error::NotPositiveDefinite)?;
        let qd = l.solve_lower_triangular(d).ok_or(Error::NotPositiveDefinite)?;
        let log_det = 2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>();
        Ok(Self { chol, nugget, q, qd, log_det })
    }

    /// Minimum-norm GLS solution and null-space projector from an SVD of
    /// `L^{-1} Psi`. This equals the pseudo-inverse solution of the normal
    /// equations `A' alpha = B'` without squaring the condition number.
    fn gls(&self) -> Gls {
        let (n, q) = self.q.shape();
        let svd = self.q.clone().svd(true, true);
        let u = svd.u.as_ref().expect("requested");
        let v_t = svd.v_t.as_ref().expect("requested");
        let smax = svd.singular_values.max();
        let tol = f64::EPSILON * n.max(q) as f64 * smax;
        let mut alpha0 = DVector::zeros(q);
        let mut range = DMatrix::zeros(q, q);
        let mut a_pinv = DMatrix::zeros(q, q);
        for (k, &sv) in svd.singular_values.iter().enumerate() {
            if sv <= tol || sv == 0.0 {
                continue;
            }
            let vk = v_t.row(k).transpose();
            alpha0 += &vk * (u.column(k).dot(&self.qd) / sv);
            range += &vk * vk.transpose();
            a_pinv += &vk * vk.transpose() / (sv * sv);
        }
        Gls {
            alpha0,
            projector: DMatrix::identity(q, q) - range,
            a_pinv,
        }
    }

    /// Process variance of the best trend fit, for use inside the optimizer.
    /// The residual of a least-squares fit is only second-order sensitive to
    /// errors in `alpha`, so a lightly regularized normal-equation solve is
    /// accurate enough here; the SVD path is the fallback.
    fn fast_sigma2(&self) -> f64 {
        let a = self.q.tr_mul(&self.q);
        let b = self.q.tr_mul(&self.qd);
        let ridge = 1e-12 * a.diagonal().max().max(f64::MIN_POSITIVE);
        let mut reg = a;
        for i in 0..reg.nrows() {
            reg[(i, i)] += ridge;
        }
        match Cholesky::new(reg) {
            Some(c) => self.sigma2(&c.solve(&b)),
            None => self.sigma2(&self.gls().alpha0),
        }
    }

    fn sigma2(&self, alpha: &DVector<f64>) -> f64 {
        let res = &self.qd - &self.q * alpha;
        res.norm_squared() / self.qd.len() as f64
    }

    fn log_likelihood(&self, sigma2: f64) -> f64 {
        let n = self.qd.len() as f64;
        -0.5 * n * sigma2.max(SIGMA2_FLOOR).ln() - 0.5 * self.log_det
    }
}

fn concentrated_ll(s: &[f64], psi: &DMatrix<f64>, d: &DVector<f64>, theta: &[f64], nugget: f64) -> f64 {
    match Profile::new(s, psi, d, theta, nugget) {
        Ok(p) => {
            let ll = p.log_likelihood(p.fast_sigma2());
            if ll.is_finite() {
                ll
            } else {
                f64::NEG_INFINITY
            }
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Bounded Nelder–Mead minimization; vertices are clamped into `[lo, hi]`.
fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    lo: f64,
    hi: f64,
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let clamp = |x: &mut Vec<f64>| x.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
    let step = 0.1 * (hi - lo).max(1e-3);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut start = x0.to_vec();
    clamp(&mut start);
    let f0 = f(&start);
    simplex.push((start.clone(), f0));
    for i in 0..n {
        let mut x = start.clone();
        x[i] = if x[i] + step <= hi { x[i] + step } else { x[i] - step };
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let mut evals = n + 1;
    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    order(&mut simplex);
    while evals < max_evals {
        let (fbest, fworst) = (simplex[0].1, simplex[n].1);
        let spread = simplex
            .iter()
            .skip(1)
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if fbest.is_finite() && (fworst - fbest).abs() <= 1e-6 * (1.0 + fbest.abs()) && spread <= 1e-2 {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for k in 0..n {
                centroid[k] += x[k] / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = (0..n).map(|k| centroid[k] + t * (simplex[n].0[k] - centroid[k])).collect();
            clamp(&mut x);
            x
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let x = along(-0.5);
                let fx = f(&x);
                (x, fx)
            } else {
                let x = along(0.5);
                let fx = f(&x);
                (x, fx)
            };
            evals += 1;
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for (x, fx) in simplex.iter_mut().skip(1) {
                    for k in 0..n {
                        x[k] = best[k] + 0.5 * (x[k] - best[k]);
                    }
                    *fx = f(x);
                }
                evals += n;
            }
        }
        order(&mut simplex);
    }
    simplex.swap_remove(0)
}

/// Fitted H-PCFE surrogate. The correlation factorization and the other
/// derived matrices are rebuilt from the stored fields on deserialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "HpcfeRepr", into = "HpcfeRepr")]
pub struct HpcfeModel {
    pub g0: f64,
    /// Deduplicated trend terms in canonical order.
    pub basis: BasisSet,
    pub alpha: Vec<f64>,
    pub theta: Vec<f64>,
    pub sigma2: f64,
    /// Nugget actually used after any escalation.
    pub nugget: f64,
    /// Training inputs in reduced (unscaled) coordinates, row-major.
    pub z_train: Vec<f64>,
    /// Centered responses `y - g0`.
    pub d: Vec<f64>,
    pub scaling: ScalingBox,
    pub log_likelihood: f64,
    pub warnings: Vec<String>,
    cache: Cache,
}

#[derive(Debug, Clone)]
struct Cache {
    s_train: Vec<f64>,
    /// Training means of the trend columns.
    psi_mean: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    q: DMatrix<f64>,
    /// `R^{-1} (d - Psi alpha)`
    weights: DVector<f64>,
    /// `(Psi^T R^{-1} Psi)^+`
    a_pinv: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct HpcfeRepr {
    g0: f64,
    basis: BasisSet,
    alpha: Vec<f64>,
    theta: Vec<f64>,
    sigma2: f64,
    nugget: f64,
    z_train: Vec<f64>,
    d: Vec<f64>,
    scaling: ScalingBox,
    #[serde(default)]
    log_likelihood: f64,
    #[serde(default)]
    warnings: Vec<String>,
}

impl From<HpcfeModel> for HpcfeRepr {
    fn from(m: HpcfeModel) -> Self {
        Self {
            g0: m.g0,
            basis: m.basis,
            alpha: m.alpha,
            theta: m.theta,
            sigma2: m.sigma2,
            nugget: m.nugget,
            z_train: m.z_train,
            d: m.d,
            scaling: m.scaling,
            log_likelihood: m.log_likelihood,
            warnings: m.warnings,
        }
    }
}

impl TryFrom<HpcfeRepr> for HpcfeModel {
    type Error = Error;

    fn try_from(r: HpcfeRepr) -> Result<Self> {
        let dim = r.theta.len();
        if dim == 0
            || r.basis.dim() != dim
            || r.alpha.len() != r.basis.len()
            || r.z_train.len() != r.d.len() * dim
            || r.scaling.lo.len() != dim
            || r.scaling.hi.len() != dim
        {
            return Err(Error::InvalidConfig("inconsistent H-PCFE model shapes".into()));
        }
        let s_train = scale_rows(&r.scaling, &r.z_train, dim);
        let (psi, psi_mean) = centered_design(&s_train, &r.basis)?;
        let d = DVector::from_column_slice(&r.d);
        let prof = Profile::new(&s_train, &psi, &d, &r.theta, r.nugget)?;
        let alpha = DVector::from_column_slice(&r.alpha);
        let a_pinv = prof.gls().a_pinv;
        let cache = Cache::new(prof, a_pinv, &alpha);
        Ok(Self {
            g0: r.g0,
            basis: r.basis,
            alpha: r.alpha,
            theta: r.theta,
            sigma2: r.sigma2,
            nugget: r.nugget,
            z_train: r.z_train,
            d: r.d,
            scaling: r.scaling,
            log_likelihood: r.log_likelihood,
            warnings: r.warnings,
            cache: Cache { s_train, psi_mean, ..cache },
        })
    }
}

impl Cache {
    fn new(prof: Profile, a_pinv: DMatrix<f64>, alpha: &DVector<f64>) -> Self {
        let res = &prof.qd - &prof.q * alpha;
        let weights = prof.chol.l_dirty().tr_solve_lower_triangular(&res).expect("factor is nonsingular");
        Self {
            s_train: Vec::new(),
            psi_mean: Vec::new(),
            a_pinv,
            chol: prof.chol,
            q: prof.q,
            weights,
        }
    }
}

fn scale_rows(scaling: &ScalingBox, z: &[f64], dim: usize) -> Vec<f64> {
    let mut s = vec![0.0; z.len()];
    for (src, dst) in z.chunks_exact(dim).zip(s.chunks_exact_mut(dim)) {
        scaling.scale_into(src, dst);
    }
    s
}

/// Fits the hybrid surrogate to reduced inputs `z` (row-major, `dim` columns)
/// and responses `y`.
pub fn fit(z: &[f64], dim: usize, y: &[f64], config: &HpcfeConfig) -> Result<HpcfeModel> {
    config.validate()?;
    if dim == 0 || z.len() != y.len() * dim {
        return Err(Error::DimensionMismatch { expected: y.len() * dim.max(1), got: z.len() });
    }
    let n = y.len();
    if n < 4 {
        return Err(Error::ParameterDomain(format!("H-PCFE needs at least 4 training points, got {n}")));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "response", index: i });
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "reduced input", index: i / dim });
    }
    let basis = extended_basis(dim, config.max_order, config.degree)?;
    let scaling = ScalingBox::from_rows(z, dim);
    let s = scale_rows(&scaling, z, dim);
    let (psi, psi_mean) = centered_design(&s, &basis)?;
    let g0 = y.iter().sum::<f64>() / n as f64;
    let d = DVector::from_iterator(n, y.iter().map(|v| v - g0));

    // length scales from the leading (space-filling) part of the design
    let m = n.min(config.mle_max_points);
    let s_m = &s[..m * dim];
    let psi_m = psi.rows(0, m).into_owned();
    let d_m = d.rows(0, m).into_owned();
    let (lo, hi) = (config.theta_bounds.0.ln(), config.theta_bounds.1.ln());
    let objective = |x: &[f64]| -> f64 {
        let theta: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        -concentrated_ll(s_m, &psi_m, &d_m, &theta, config.nugget)
    };
    let starts = sobol_points(config.restarts, dim)?;
    let max_evals = config.max_evals.unwrap_or(40 * (dim + 1));
    let runs = par::map_chunks(config.restarts, |k| {
        let x0: Vec<f64> = starts.row(k).iter().map(|u| lo + u * (hi - lo)).collect();
        nelder_mead(&objective, &x0, lo, hi, max_evals)
    });
    let (best_x, best_f) = runs
        .into_iter()
        .min_by(|a, b| {
            a.1.total_cmp(&b.1).then_with(|| {
                a.0.iter()
                    .zip(&b.0)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        })
        .expect("at least one start");
    if !best_f.is_finite() {
        return Err(Error::NotPositiveDefinite);
    }
    let theta: Vec<f64> = best_x.iter().map(|v| v.exp()).collect();
    let mut warnings = Vec::new();
    if psi.ncols() >= m {
        warnings.push(format!(
            "{} trend terms for {m} likelihood points: the trend interpolates and length scales are weakly identified",
            psi.ncols()
        ));
    }
    for (k, x) in best_x.iter().enumerate() {
        if (x - lo).abs() < 1e-6 || (x - hi).abs() < 1e-6 {
            let side = if (x - lo).abs() < 1e-6 { "lower" } else { "upper" };
            warnings.push(format!("theta[{k}] = {:e} at the {side} bound", theta[k]));
        }
    }

    let prof = Profile::new(&s, &psi, &d, &theta, config.nugget)?;
    if prof.nugget > config.nugget {
        warnings.push(format!("nugget raised to {:e}", prof.nugget));
    }
    let gls = prof.gls();
    let q = gls.alpha0.len();
    let sol = homotopy_from_projector(gls.alpha0, gls.projector, &DMatrix::identity(q, q))?;
    warnings.extend(sol.warning);
    let sigma2 = prof.sigma2(&sol.alpha);
    let log_likelihood = prof.log_likelihood(sigma2);
    let nugget = prof.nugget;
    let cache = Cache::new(prof, gls.a_pinv, &sol.alpha);
    Ok(HpcfeModel {
        g0,
        basis,
        alpha: sol.alpha.iter().copied().collect(),
        theta,
        sigma2,
        nugget,
        z_train: z.to_vec(),
        d: d.iter().copied().collect(),
        scaling,
        log_likelihood,
        warnings,
        cache: Cache {
            s_train: s,
            psi_mean,
            ..cache
        },
    })
}

/// Scratch buffers for repeated single-point predictions.
struct Scratch {
    s: Vec<f64>,
    table: Vec<f64>,
    phi: Vec<f64>,
    k: DVector<f64>,
}

impl HpcfeModel {
    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn n_train(&self) -> usize {
        self.d.len()
    }

    /// Concentrated log-likelihood at arbitrary length scales on the full
    /// training set (`-inf` when the factorization fails).
    pub fn log_likelihood_at(&self, theta: &[f64]) -> f64 {
        let (psi, _) = centered_design(&self.cache.s_train, &self.basis).expect("non-empty basis");
        concentrated_ll(&self.cache.s_train, &psi, &DVector::from_column_slice(&self.d), theta, self.nugget)
    }

    fn scratch(&self) -> Scratch {
        Scratch {
            s: vec![0.0; self.dim()],
            table: Vec::new(),
            phi: vec![0.0; self.basis.len()],
            k: DVector::zeros(self.n_train()),
        }
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: z.len() });
        }
        Ok(())
    }

    fn prepare(&self, z: &[f64], sc: &mut Scratch) {
        self.scaling.scale_into(z, &mut sc.s);
        self.basis.eval_extended(&sc.s, &mut sc.table, &mut sc.phi);
        for (p, m) in sc.phi.iter_mut().zip(&self.cache.psi_mean) {
            *p -= m;
        }
        let dim = self.dim();
        for (i, zi) in self.cache.s_train.chunks_exact(dim).enumerate() {
            sc.k[i] = kernel(&sc.s, zi, &self.theta);
        }
    }

    fn mean_prepared(&self, sc: &Scratch) -> f64 {
        let trend: f64 = sc.phi.iter().zip(&self.alpha).map(|(p, a)| p * a).sum();
        self.g0 + trend + sc.k.dot(&self.cache.weights)
    }

    fn variance_prepared(&self, sc: &Scratch) -> f64 {
        let v = self
            .cache
            .chol
            .l_dirty()
            .solve_lower_triangular(&sc.k)
            .expect("factor is nonsingular");
        let u = self.cache.q.tr_mul(&v) - DVector::from_column_slice(&sc.phi);
        let s2 = self.sigma2 * (1.0 - v.norm_squared() + u.dot(&(&self.cache.a_pinv * &u)));
        s2.max(0.0)
    }

    /// Predictive mean `g0 + phi(z)^T alpha + r(z)^T R^{-1} (d - Psi alpha)`,
    /// with `phi` and `Psi` centered on the training means.
    pub fn predict_mean(&self, z: &[f64]) -> Result<f64> {
        self.check(z)?;
        let mut sc = self.scratch();
        self.prepare(z, &mut sc);
        Ok(self.mean_prepared(&sc))
    }

    /// Universal-kriging predictive variance, clipped at zero.
    pub fn predict_variance(&self, z: &[f64]) -> Result<f64> {
        self.check(z)?;
        let mut sc = self.scratch();
        self.prepare(z, &mut sc);
        Ok(self.variance_prepared(&sc))
    }

    /// Predictive means for row-major points with `dim()` columns.
    pub fn predict_mean_batch(&self, z: &[f64]) -> Result<Vec<f64>> {
        let dim = self.dim();
        if z.len() % dim != 0 {
            return Err(Error::DimensionMismatch { expected: dim, got: z.len() % dim });
        }
        let mut out = vec![0.0; z.len() / dim];
        par::fill_chunks(&mut out, 1, |c, chunk| {
            let mut sc = self.scratch();
            let base = c * par::CHUNK_ROWS;
            for (i, o) in chunk.iter_mut().enumerate() {
                let row = &z[(base + i) * dim..(base + i + 1) * dim];
                self.prepare(row, &mut sc);
                *o = self.mean_prepared(&sc);
            }
        });
        Ok(out)
    }

    /// Number of row-major points outside the training box (extrapolation).
    pub fn count_outside(&self, z: &[f64]) -> usize {
        z.chunks_exact(self.dim()).filter(|p| !self.scaling.contains(p)).count()
    }
}
