//! Active subspace from averaged gradient outer products.
//!
//! `C = E[grad f grad f^T]` is estimated by Monte Carlo over surrogate
//! gradients, eigendecomposed, and truncated at the smallest rank whose
//! cumulative eigenvalue share reaches the threshold `mu`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::probspace::{SampleMatrix, Space};

const SYMMETRY_TOL: f64 = 1e-8;

/// Monte Carlo estimate of the average gradient outer product over the rows of
/// `samples` (Legendre coordinates). Summation is per fixed-size chunk, then in
/// chunk order, so the result does not depend on the thread count.
pub fn estimate_c<F>(grad_fn: F, samples: &SampleMatrix) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync + Send,
{
    if samples.space() != Space::StdLegendre {
        return Err(Error::InvalidConfig(
            "gradient samples must be in Legendre coordinates".into(),
        ));
    }
    let n = samples.rows();
    let d = samples.cols();
    if n == 0 {
        return Err(Error::ParameterDomain("need at least one gradient sample".into()));
    }
    let n_chunks = n.div_ceil(par::CHUNK_ROWS);
    let partial = par::map_chunks(n_chunks, |c| -> Result<DMatrix<f64>> {
        let mut acc = DMatrix::<f64>::zeros(d, d);
        let start = c * par::CHUNK_ROWS;
        let end = (start + par::CHUNK_ROWS).min(n);
        for i in start..end {
            let g = grad_fn(samples.row(i))?;
            if g.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: g.len() });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: "gradient", index: i });
            }
            let g = DVector::from_vec(g);
            acc.syger(1.0, &g, &g, 1.0);
        }
        Ok(acc)
    });
    let mut c = DMatrix::<f64>::zeros(d, d);
    for p in partial {
        c += p?;
    }
    // syger only writes the lower triangle
    for j in 0..d {
        for i in 0..j {
            c[(i, j)] = c[(j, i)];
        }
    }
    Ok(c / n as f64)
}

/// Symmetric eigendecomposition sorted by descending eigenvalue. Each
/// eigenvector is signed so that its largest-magnitude component is positive.
pub fn eigendecompose(c: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if !c.is_square() {
        return Err(Error::DimensionMismatch { expected: c.nrows(), got: c.ncols() });
    }
    let scale = c.amax().max(f64::MIN_POSITIVE);
    let asym = (c - c.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = (c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..c.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let n = c.nrows();
    let mut w = DMatrix::<f64>::zeros(n, n);
    let mut lambda = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(j).into_owned();
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v.neg_mut();
        }
        w.set_column(k, &v);
        lambda.push(eig.eigenvalues[j]);
    }
    Ok((w, lambda))
}

/// Smallest `r` whose leading eigenvalues carry at least a `mu` share of the
/// total. Negative round-off eigenvalues count as zero.
pub fn choose_rank(eigenvalues: &[f64], mu: f64) -> Result<usize> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::ParameterDomain(format!("threshold mu must be in (0, 1), got {mu}")));
    }
    let total: f64 = eigenvalues.iter().map(|l| l.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(Error::NoVariability);
    }
    let mut cum = 0.0;
    for (i, l) in eigenvalues.iter().enumerate() {
        cum += l.max(0.0);
        if cum / total >= mu {
            return Ok(i + 1);
        }
    }
    Ok(eigenvalues.len())
}

/// `z = W1^T x`.
pub fn project(w1: &DMatrix<f64>, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != w1.nrows() {
        return Err(Error::DimensionMismatch { expected: w1.nrows(), got: x.len() });
    }
    Ok((0..w1.ncols())
        .map(|k| w1.column(k).iter().zip(x).map(|(w, v)| w * v).sum())
        .collect())
}

/// Model evaluations a one-sided finite-difference estimate of `C` would need.
pub fn fd_cost(n: usize, n_grad_samples: usize) -> u64 {
    n_grad_samples as u64 * (n as u64 + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ActiveSubspaceRepr", into = "ActiveSubspaceRepr")]
pub struct ActiveSubspace {
    /// All eigenvalues of `C`, descending.
    pub eigenvalues: Vec<f64>,
    /// `N x r` orthonormal basis of the active directions.
    pub w1: DMatrix<f64>,
    pub r: usize,
    pub mu: f64,
    pub n_grad_samples: usize,
}

#[derive(Serialize, Deserialize)]
struct ActiveSubspaceRepr {
    eigenvalues: Vec<f64>,
    /// Row-major, one inner vector per input dimension.
    #[serde(rename = "W1")]
    w1: Vec<Vec<f64>>,
    r: usize,
    mu: f64,
    #[serde(default)]
    n_grad_samples: usize,
}

impl From<ActiveSubspace> for ActiveSubspaceRepr {
    fn from(a: ActiveSubspace) -> Self {
        let w1 = a.w1.row_iter().map(|row| row.iter().copied().collect()).collect();
        Self {
            eigenvalues: a.eigenvalues,
            w1,
            r: a.r,
            mu: a.mu,
            n_grad_samples: a.n_grad_samples,
        }
    }
}

impl TryFrom<ActiveSubspaceRepr> for ActiveSubspace {
    type Error = Error;

    fn try_from(s: ActiveSubspaceRepr) -> Result<Self> {
        let n = s.w1.len();
        if n != s.eigenvalues.len() || s.r == 0 || s.w1.iter().any(|row| row.len() != s.r) {
            return Err(Error::InvalidConfig("inconsistent active subspace shape".into()));
        }
        let w1 = DMatrix::from_fn(n, s.r, |i, k| s.w1[i][k]);
        Ok(Self {
            eigenvalues: s.eigenvalues,
            w1,
            r: s.r,
            mu: s.mu,
            n_grad_samples: s.n_grad_samples,
        })
    }
}

impl ActiveSubspace {
    /// Estimates `C` from `grad_fn` at `samples` and keeps the leading
    /// directions carrying a `mu` share of the spectrum.
    pub fn compute<F>(grad_fn: F, samples: &SampleMatrix, mu: f64) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Sync + Send,
    {
        let c = estimate_c(grad_fn, samples)?;
        let (w, eigenvalues) = eigendecompose(&c)?;
        let r = choose_rank(&eigenvalues, mu)?;
        Ok(Self {
            w1: w.columns(0, r).into_owned(),
            eigenvalues,
            r,
            mu,
            n_grad_samples: samples.rows(),
        })
    }

    pub fn dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        project(&self.w1, x)
    }

    /// Projects every row; returns an `n x r` row-major buffer.
    pub fn project_rows(&self, x: &SampleMatrix) -> Result<Vec<f64>> {
        if x.cols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.cols() });
        }
        let r = self.r;
        let mut out = vec![0.0; x.rows() * r];
        par::fill_chunks(&mut out, r, |c, chunk| {
            let base = c * par::CHUNK_ROWS;
            for (i, z) in chunk.chunks_exact_mut(r).enumerate() {
                let row = x.row(base + i);
                for (k, zk) in z.iter_mut().enumerate() {
                    *zk = self.w1.column(k).iter().zip(row).map(|(w, v)| w * v).sum();
                }
            }
        });
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn legendre(n: usize, d: usize) -> SampleMatrix {
        let u = crate::probspace::uniform_samples(n, d, 5).unwrap();
        let data = u.as_slice().iter().map(|v| 2.0 * v - 1.0).collect();
        SampleMatrix::new(data, n, d, Space::StdLegendre).unwrap()
    }

    #[test]
    fn linear_function_gives_outer_product() {
        let w = [1.0, -2.0, 0.5];
        let c = estimate_c(|_| Ok(w.to_vec()), &legendre(17, 3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(c[(i, j)], w[i] * w[j], epsilon = 1e-14);
            }
        }
        let c0 = estimate_c(|_| Ok(vec![0.0; 3]), &legendre(5, 3)).unwrap();
        assert_eq!(c0.amax(), 0.0);
    }

    #[test]
    fn non_finite_gradient_names_sample() {
        let x = legendre(10, 2);
        let err = estimate_c(
            |p| if p == x.row(7) { Ok(vec![f64::NAN, 0.0]) } else { Ok(vec![1.0, 0.0]) },
            &x,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 7, .. }));
    }

    #[test]
    fn eigen_examples() {
        let (w, l) = eigendecompose(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]))).unwrap();
        assert_eq!(l, vec![3.0, 1.0]);
        assert_relative_eq!(w, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = DVector::from_vec(vec![s, s]);
        let (w, l) = eigendecompose(&(&v * v.transpose())).unwrap();
        assert_relative_eq!(l[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(w[(0, 0)], s, epsilon = 1e-14);
        assert_relative_eq!(w[(1, 0)], s, epsilon = 1e-14);

        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(eigendecompose(&bad), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn rank_selection() {
        assert_eq!(choose_rank(&[10.0, 0.1, 0.01], 0.98).unwrap(), 1);
        assert_eq!(choose_rank(&[1.0, 1.0, 0.0, 0.0], 0.98).unwrap(), 2);
        assert!(matches!(choose_rank(&[0.0, 0.0], 0.5), Err(Error::NoVariability)));
        assert!(choose_rank(&[1.0], 1.0).is_err());
    }

    #[test]
    fn cost_formula() {
        assert_eq!(fd_cost(10, 100), 1100);
        assert_eq!(fd_cost(100, 100), 10100);
        assert_eq!(fd_cost(40, 50), 2050);
    }

    #[test]
    fn json_round_trip() {
        let a = ActiveSubspace::compute(|x| Ok(vec![2.0 * x[0], 0.1, 0.0]), &legendre(50, 3), 0.9).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert!(s.contains("\"W1\""));
        let b: ActiveSubspace = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
    }
}
