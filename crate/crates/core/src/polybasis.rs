//! Orthonormal Legendre polynomials on `[-1, 1]` and total-degree tensor bases.
//!
//! `psi_k(t) = sqrt(2k + 1) P_k(t)` is orthonormal under the uniform density
//! 1/2 on `[-1, 1]`, so the multivariate products form an orthonormal family
//! under the uniform measure on `[-1, 1]^N`.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DOMAIN_TOL: f64 = 1e-12;

fn check_domain(t: f64) -> Result<()> {
    if t.abs() <= 1.0 + DOMAIN_TOL {
        Ok(())
    } else {
        Err(Error::OutOfDomain(t))
    }
}

/// Orthonormal Legendre `psi_k(t)`.
pub fn legendre_eval(k: usize, t: f64) -> Result<f64> {
    check_domain(t)?;
    let mut vals = vec![0.0; k + 1];
    legendre_values(t, &mut vals);
    Ok(vals[k])
}

/// Fills `out[k] = psi_k(t)` for `k < out.len()`.
pub fn legendre_values(t: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    // three-term recurrence on the classical P_k, normalized at the end
    let (mut p_prev, mut p) = (1.0, t);
    out[0] = 1.0;
    if n > 1 {
        out[1] = t;
    }
    for k in 1..n.saturating_sub(1) {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * t * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
        out[k + 1] = p;
    }
    for (k, v) in out.iter_mut().enumerate() {
        *v *= ((2 * k + 1) as f64).sqrt();
    }
}

/// Fills orthonormal values and first derivatives for orders `0..vals.len()`.
pub fn legendre_values_and_derivatives(t: f64, vals: &mut [f64], ders: &mut [f64]) {
    let n = vals.len();
    assert_eq!(n, ders.len());
    if n == 0 {
        return;
    }
    let mut p = vec![0.0; n];
    let mut dp = vec![0.0; n];
    p[0] = 1.0;
    if n > 1 {
        p[1] = t;
        dp[1] = 1.0;
    }
    for k in 1..n.saturating_sub(1) {
        let kf = k as f64;
        p[k + 1] = ((2.0 * kf + 1.0) * t * p[k] - kf * p[k - 1]) / (kf + 1.0);
        // P'_{k+1} = P'_{k-1} + (2k + 1) P_k
        dp[k + 1] = dp[k - 1] + (2.0 * kf + 1.0) * p[k];
    }
    for k in 0..n {
        let c = ((2 * k + 1) as f64).sqrt();
        vals[k] = c * p[k];
        ders[k] = c * dp[k];
    }
}

/// Exponent vector of a multivariate polynomial.
///
/// Ordered graded-lexicographically: by total degree, then by exponents with
/// larger powers of earlier variables first, so `(1,0) < (0,1) < (2,0)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u8>);

impl MultiIndex {
    pub fn new(exponents: Vec<u8>) -> Self {
        Self(exponents)
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    /// Unit multi-index `degree * e_var`.
    pub fn univariate(dim: usize, var: usize, degree: u8) -> Self {
        let mut e = vec![0; dim];
        e[var] = degree;
        Self(e)
    }

    pub fn exponents(&self) -> &[u8] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// Number of variables with a nonzero exponent.
    pub fn interaction_order(&self) -> usize {
        self.0.iter().filter(|&&e| e > 0).count()
    }

    /// `(variable, exponent)` for nonzero exponents.
    pub fn support(&self) -> Vec<(usize, usize)> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| (i, e as usize))
            .collect()
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Binomial coefficient `C(dim + degree, degree)`, the total-degree cardinality.
pub fn total_degree_cardinality(dim: usize, degree: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 1..=degree as u128 {
        c = c * (dim as u128 + i) / i;
    }
    c
}

/// Visits every multi-index of total degree `≤ degree` in canonical order,
/// reusing one buffer.
pub fn for_each_total_degree(dim: usize, degree: usize, mut f: impl FnMut(&[u8])) {
    fn rec(buf: &mut [u8], pos: usize, left: usize, f: &mut dyn FnMut(&[u8])) {
        if pos + 1 == buf.len() {
            buf[pos] = left as u8;
            f(buf);
            buf[pos] = 0;
            return;
        }
        for e in (0..=left).rev() {
            buf[pos] = e as u8;
            rec(buf, pos + 1, left - e, f);
        }
        buf[pos] = 0;
    }
    let mut buf = vec![0u8; dim];
    for d in 0..=degree {
        if dim == 0 {
            if d == 0 {
                f(&buf);
            }
            continue;
        }
        rec(&mut buf, 0, d, &mut f);
    }
}

/// Ordered, duplicate-free set of multi-indices of a common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BasisSetRepr", into = "BasisSetRepr")]
pub struct BasisSet {
    dim: usize,
    indices: Vec<MultiIndex>,
    support: Vec<Vec<(usize, usize)>>,
    max_degree: usize,
}

#[derive(Serialize, Deserialize)]
struct BasisSetRepr {
    dim: usize,
    indices: Vec<MultiIndex>,
}

impl TryFrom<BasisSetRepr> for BasisSet {
    type Error = Error;
    fn try_from(r: BasisSetRepr) -> Result<Self> {
        BasisSet::from_indices(r.dim, r.indices)
    }
}

impl From<BasisSet> for BasisSetRepr {
    fn from(b: BasisSet) -> Self {
        Self {
            dim: b.dim,
            indices: b.indices,
        }
    }
}

impl BasisSet {
    /// All multi-indices with total degree `≤ degree`; index 0 is the constant.
    pub fn total_degree(dim: usize, degree: usize) -> Self {
        let mut indices = Vec::with_capacity(total_degree_cardinality(dim, degree) as usize);
        for_each_total_degree(dim, degree, |e| indices.push(MultiIndex(e.to_vec())));
        Self::from_sorted(dim, indices)
    }

    /// Builds a set from arbitrary indices: sorted canonically, duplicates removed.
    pub fn from_indices(dim: usize, mut indices: Vec<MultiIndex>) -> Result<Self> {
        if let Some(bad) = indices.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.dim(),
            });
        }
        indices.sort();
        indices.dedup();
        Ok(Self::from_sorted(dim, indices))
    }

    fn from_sorted(dim: usize, indices: Vec<MultiIndex>) -> Self {
        let support = indices.iter().map(MultiIndex::support).collect();
        let max_degree = indices.iter().map(MultiIndex::total_degree).max().unwrap_or(0);
        Self {
            dim,
            indices,
            support,
            max_degree,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Highest single-variable exponent present.
    pub fn max_univariate_degree(&self) -> usize {
        self.support
            .iter()
            .flat_map(|s| s.iter().map(|&(_, e)| e))
            .max()
            .unwrap_or(0)
    }

    /// Like [`eval_multibasis`] but without the domain check: the polynomials
    /// are simply continued outside `[-1, 1]`. `table` is scratch space.
    pub(crate) fn eval_extended(&self, xi: &[f64], table: &mut Vec<f64>, out: &mut [f64]) {
        let w = self.max_degree + 1;
        table.resize(self.dim * w, 0.0);
        for (i, &t) in xi.iter().enumerate() {
            legendre_values(t, &mut table[i * w..(i + 1) * w]);
        }
        for (o, sup) in out.iter_mut().zip(&self.support) {
            *o = sup.iter().map(|&(i, e)| table[i * w + e]).product();
        }
    }

    /// Subset keeping the entries at `positions` (canonical order restored).
    pub fn select(&self, positions: &[usize]) -> Self {
        let idx = positions.iter().map(|&p| self.indices[p].clone()).collect();
        Self::from_indices(self.dim, idx).expect("same dimension")
    }

    fn univariate_table(&self, xi: &[f64]) -> Vec<f64> {
        let w = self.max_univariate_degree() + 1;
        let mut table = vec![0.0; self.dim * w];
        for (i, &t) in xi.iter().enumerate() {
            legendre_values(t, &mut table[i * w..(i + 1) * w]);
        }
        table
    }

    fn check_point(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: xi.len(),
            });
        }
        xi.iter().try_for_each(|&t| check_domain(t))
    }

    /// `Psi` with `rows.len()` rows and one column per basis term.
    pub fn design_matrix<'a>(&self, rows: impl ExactSizeIterator<Item = &'a [f64]>) -> Result<DMatrix<f64>> {
        let n = rows.len();
        let mut psi = DMatrix::zeros(n, self.len());
        let w = self.max_univariate_degree() + 1;
        for (r, xi) in rows.enumerate() {
            self.check_point(xi)?;
            let table = self.univariate_table(xi);
            for (j, sup) in self.support.iter().enumerate() {
                psi[(r, j)] = sup.iter().map(|&(i, e)| table[i * w + e]).product();
            }
        }
        Ok(psi)
    }
}

/// Entry `j` is `prod_i psi_{beta_j,i}(xi_i)`.
pub fn eval_multibasis(xi: &[f64], basis: &BasisSet) -> Result<Vec<f64>> {
    basis.check_point(xi)?;
    let table = basis.univariate_table(xi);
    let w = basis.max_univariate_degree() + 1;
    Ok(basis
        .support
        .iter()
        .map(|sup| sup.iter().map(|&(i, e)| table[i * w + e]).product())
        .collect())
}

/// `card x N` matrix of partial derivatives `d psi_beta / d xi_i`.
pub fn eval_multibasis_grad(xi: &[f64], basis: &BasisSet) -> Result<DMatrix<f64>> {
    basis.check_point(xi)?;
    let w = basis.max_univariate_degree() + 1;
    let mut vals = vec![0.0; basis.dim * w];
    let mut ders = vec![0.0; basis.dim * w];
    for (i, &t) in xi.iter().enumerate() {
        legendre_values_and_derivatives(t, &mut vals[i * w..(i + 1) * w], &mut ders[i * w..(i + 1) * w]);
    }
    let mut grad = DMatrix::zeros(basis.len(), basis.dim);
    for (j, sup) in basis.support.iter().enumerate() {
        for (a, &(i, e)) in sup.iter().enumerate() {
            let mut g = ders[i * w + e];
            for (b, &(k, f)) in sup.iter().enumerate() {
                if a != b {
                    g *= vals[k * w + f];
                }
            }
            grad[(j, i)] = g;
        }
    }
    Ok(grad)
}
