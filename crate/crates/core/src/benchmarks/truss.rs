//! Linear-elastic 3-D pin-jointed truss.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reliability::{CostClass, LimitState};

/// Node indices in the geometry file are zero-based; DOF `3 i + k` is
/// translation of node `i` along axis `k` (x, y, z).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometryFile", into = "GeometryFile")]
pub struct TrussGeometry {
    pub nodes: Vec<[f64; 3]>,
    pub elements: Vec<[usize; 2]>,
    /// Fixed degrees of freedom.
    pub supports: Vec<usize>,
    /// Loads in input order (`P1`, `P2`, ...).
    pub loads: Vec<Load>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub name: String,
    pub node: usize,
    pub axis: usize,
    pub sign: f64,
}

#[derive(Serialize, Deserialize)]
struct GeometryFile {
    nodes: Vec<[f64; 3]>,
    elements: Vec<[usize; 2]>,
    supports: Vec<usize>,
    loads: BTreeMap<String, (usize, String)>,
}

fn natural_key(name: &str) -> (String, u64) {
    let split = name.find(|c: char| c.is_ascii_digit()).unwrap_or(name.len());
    (name[..split].to_string(), name[split..].parse().unwrap_or(0))
}

impl TryFrom<GeometryFile> for TrussGeometry {
    type Error = Error;

    fn try_from(f: GeometryFile) -> Result<Self> {
        let mut loads = Vec::with_capacity(f.loads.len());
        for (name, (node, dir)) in f.loads {
            let (sign, axis) = match dir.trim() {
                "x" | "+x" => (1.0, 0),
                "y" | "+y" => (1.0, 1),
                "z" | "+z" => (1.0, 2),
                "-x" => (-1.0, 0),
                "-y" => (-1.0, 1),
                "-z" => (-1.0, 2),
                other => {
                    return Err(Error::InvalidConfig(format!("load {name}: unknown direction {other:?}")))
                }
            };
            loads.push(Load { name, node, axis, sign });
        }
        loads.sort_by_key(|l| natural_key(&l.name));
        let g = Self {
            nodes: f.nodes,
            elements: f.elements,
            supports: f.supports,
            loads,
        };
        g.validate()?;
        Ok(g)
    }
}

impl From<TrussGeometry> for GeometryFile {
    fn from(g: TrussGeometry) -> Self {
        let axis = ["x", "y", "z"];
        let loads = g
            .loads
            .into_iter()
            .map(|l| {
                let dir = format!("{}{}", if l.sign < 0.0 { "-" } else { "+" }, axis[l.axis]);
                (l.name, (l.node, dir))
            })
            .collect();
        Self {
            nodes: g.nodes,
            elements: g.elements,
            supports: g.supports,
            loads,
        }
    }
}

impl TrussGeometry {
    /// The 25-bar transmission tower shipped with the crate.
    pub fn tower25() -> Self {
        serde_json::from_str(include_str!("../../data/truss25.json")).expect("bundled geometry is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if let Some(e) = self.elements.iter().find(|e| e[0] >= n || e[1] >= n || e[0] == e[1]) {
            return bad(format!("element {e:?} references an invalid node"));
        }
        if let Some(d) = self.supports.iter().find(|&&d| d >= 3 * n) {
            return bad(format!("support DOF {d} out of range"));
        }
        if let Some(l) = self.loads.iter().find(|l| l.node >= n) {
            return bad(format!("load {} on missing node {}", l.name, l.node));
        }
        if self.free_dofs().is_empty() {
            return bad("every degree of freedom is fixed".into());
        }
        Ok(())
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Input dimension: loads, one modulus, one area per element.
    pub fn n_inputs(&self) -> usize {
        self.loads.len() + 1 + self.elements.len()
    }

    pub fn free_dofs(&self) -> Vec<usize> {
        (0..3 * self.nodes.len()).filter(|d| !self.supports.contains(d)).collect()
    }

    fn length_and_cosines(&self, e: usize) -> (f64, [f64; 3]) {
        let [i, j] = self.elements[e];
        let d: Vec<f64> = (0..3).map(|k| self.nodes[j][k] - self.nodes[i][k]).collect();
        let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        (len, [d[0] / len, d[1] / len, d[2] / len])
    }

    /// Global stiffness matrix over all DOFs.
    pub fn stiffness(&self, modulus: f64, areas: &[f64]) -> DMatrix<f64> {
        let ndof = 3 * self.nodes.len();
        let mut k = DMatrix::zeros(ndof, ndof);
        for (e, &[i, j]) in self.elements.iter().enumerate() {
            let (len, l) = self.length_and_cosines(e);
            let c = modulus * areas[e] / len;
            for a in 0..3 {
                for b in 0..3 {
                    let v = c * (l[a] * l[b]);
                    k[(3 * i + a, 3 * i + b)] += v;
                    k[(3 * j + a, 3 * j + b)] += v;
                    k[(3 * i + a, 3 * j + b)] -= v;
                    k[(3 * j + a, 3 * i + b)] -= v;
                }
            }
        }
        k
    }

    /// Nodal displacements (all DOFs, zeros at supports) for the input vector
    /// `[loads..., E, areas...]`.
    pub fn displacements(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_inputs() {
            return Err(Error::DimensionMismatch { expected: self.n_inputs(), got: x.len() });
        }
        let nl = self.loads.len();
        let modulus = x[nl];
        let areas = &x[nl + 1..];
        if !(modulus > 0.0) || areas.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Evaluation("truss modulus and areas must be positive".into()));
        }
        let ndof = 3 * self.nodes.len();
        let mut f = vec![0.0; ndof];
        for (l, &p) in self.loads.iter().zip(&x[..nl]) {
            f[3 * l.node + l.axis] += l.sign * p;
        }
        let free = self.free_dofs();
        let k = self.stiffness(modulus, areas);
        let kf = DMatrix::from_fn(free.len(), free.len(), |a, b| k[(free[a], free[b])]);
        let ff = DVector::from_iterator(free.len(), free.iter().map(|&d| f[d]));
        let uf = kf.cholesky().ok_or(Error::Mechanism)?.solve(&ff);
        if uf.iter().any(|v| !v.is_finite()) {
            return Err(Error::Mechanism);
        }
        let mut u = vec![0.0; ndof];
        for (&d, v) in free.iter().zip(uf.iter()) {
            u[d] = *v;
        }
        Ok(u)
    }

    /// Peak horizontal (largest |x| or |y| component) and vertical (|z|)
    /// displacement over the unsupported nodes.
    pub fn solve(&self, x: &[f64]) -> Result<(f64, f64)> {
        let u = self.displacements(x)?;
        let mut horiz = 0.0f64;
        let mut vert = 0.0f64;
        for node in 0..self.nodes.len() {
            if (0..3).all(|k| self.supports.contains(&(3 * node + k))) {
                continue;
            }
            horiz = horiz.max(u[3 * node].abs()).max(u[3 * node + 1].abs());
            vert = vert.max(u[3 * node + 2].abs());
        }
        Ok((horiz, vert))
    }
}

/// `g = u0 - max(u_horizontal, u_vertical)`.
#[derive(Debug, Clone)]
pub struct TrussLimitState {
    pub geometry: TrussGeometry,
    pub u0: f64,
}

impl TrussLimitState {
    pub fn new(geometry: TrussGeometry, u0: f64) -> Self {
        Self { geometry, u0 }
    }
}

impl LimitState for TrussLimitState {
    fn name(&self) -> &str {
        "truss"
    }

    fn dim(&self) -> usize {
        self.geometry.n_inputs()
    }

    fn cost_class(&self) -> CostClass {
        CostClass::Moderate
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let (h, v) = self.geometry.solve(x)?;
        Ok(self.u0 - h.max(v))
    }
}
