use serde::{Deserialize, Serialize};

use super::model::ProbabilisticModel;
use crate::error::{Error, Result};

/// Coordinate system a sample matrix lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Physical,
    /// Per-marginal CDF values in `[0, 1]`.
    StdUniform,
    /// `2u - 1`, the Legendre domain `[-1, 1]`.
    StdLegendre,
}

/// Row-major `rows x cols` samples tagged with their space.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
    space: Space,
}

impl SampleMatrix {
    pub fn new(data: Vec<f64>, rows: usize, cols: usize, space: Space) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        let range = match space {
            Space::Physical => None,
            Space::StdUniform => Some((0.0, 1.0)),
            Space::StdLegendre => Some((-1.0, 1.0)),
        };
        if let Some((lo, hi)) = range {
            if let Some(pos) = data.iter().position(|v| !(*v >= lo && *v <= hi)) {
                return Err(Error::TransformDomain {
                    dim: pos % cols.max(1),
                    value: data[pos],
                });
            }
        }
        Ok(Self {
            data,
            rows,
            cols,
            space,
        })
    }

    pub(crate) fn from_raw(data: Vec<f64>, rows: usize, cols: usize, space: Space) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self {
            data,
            rows,
            cols,
            space,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter_rows().map(|r| r[j]).collect()
    }
}

/// Maps samples between physical, standard-uniform and Legendre coordinates.
pub fn transform(x: &SampleMatrix, to: Space, model: &ProbabilisticModel) -> Result<SampleMatrix> {
    if x.cols != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.cols,
        });
    }
    if x.space == to {
        return Ok(x.clone());
    }
    let marginals = model.marginals();
    let mut out = Vec::with_capacity(x.data.len());
    for row in x.iter_rows() {
        for (j, (&v, m)) in row.iter().zip(marginals).enumerate() {
            let u = match x.space {
                Space::Physical => {
                    if !m.contains(v) {
                        return Err(Error::TransformDomain { dim: j, value: v });
                    }
                    m.cdf(v)
                }
                Space::StdUniform => v,
                Space::StdLegendre => 0.5 * (v + 1.0),
            };
            if !(0.0..=1.0).contains(&u) {
                return Err(Error::TransformDomain { dim: j, value: v });
            }
            out.push(match to {
                Space::Physical => m.ppf(u),
                Space::StdUniform => u,
                Space::StdLegendre => 2.0 * u - 1.0,
            });
        }
    }
    Ok(SampleMatrix::from_raw(out, x.rows, x.cols, to))
}
