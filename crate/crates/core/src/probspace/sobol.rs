//! Unscrambled Sobol low-discrepancy sequence with Joe–Kuo direction numbers.
//!
//! Points are produced in Gray-code order (the ordering of the reference
//! generator), so `point(i)` equals the `i`-th point of the classic
//! Antonov–Saleev recursion. Index 0 is the all-zeros point and is skipped
//! by [`sobol_points`].

use std::sync::OnceLock;

use super::sample::{SampleMatrix, Space};
use crate::error::{Error, Result};

pub const MAX_DIM: usize = 1000;
const BITS: usize = 32;

const TABLE: &str = include_str!("../../data/sobol_joe_kuo_1000.txt");

fn direction_table() -> &'static [[u32; BITS]] {
    static CELL: OnceLock<Vec<[u32; BITS]>> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut dirs = Vec::with_capacity(MAX_DIM);
        let mut first = [0u32; BITS];
        for (k, v) in first.iter_mut().enumerate() {
            *v = 1u32 << (BITS - 1 - k);
        }
        dirs.push(first);
        for line in TABLE.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
            let nums: Vec<u32> = line
                .split_whitespace()
                .map(|t| t.parse().expect("malformed direction-number table"))
                .collect();
            let (s, a) = (nums[1] as usize, nums[2]);
            let m = &nums[3..3 + s];
            let mut v = [0u32; BITS];
            for k in 0..BITS {
                v[k] = if k < s {
                    m[k] << (BITS - 1 - k)
                } else {
                    let mut x = v[k - s] ^ (v[k - s] >> s);
                    for j in 1..s {
                        if (a >> (s - 1 - j)) & 1 == 1 {
                            x ^= v[k - j];
                        }
                    }
                    x
                };
            }
            dirs.push(v);
        }
        assert_eq!(dirs.len(), MAX_DIM);
        dirs
    })
}

/// Random-access Sobol generator for a fixed dimension.
#[derive(Debug, Clone)]
pub struct Sobol {
    dirs: &'static [[u32; BITS]],
}

impl Sobol {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::UnsupportedDimension {
                requested: dim,
                max: MAX_DIM,
            });
        }
        Ok(Self {
            dirs: &direction_table()[..dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.dirs.len()
    }

    /// Writes point `index` (Gray-code order) into `out`.
    pub fn point_into(&self, index: u64, out: &mut [f64]) {
        assert!(index < 1 << BITS, "Sobol index exceeds 2^32");
        let gray = (index ^ (index >> 1)) as u32;
        const SCALE: f64 = 1.0 / (1u64 << BITS) as f64;
        for (o, v) in out.iter_mut().zip(self.dirs) {
            let mut x = 0u32;
            let mut g = gray;
            let mut k = 0;
            while g != 0 {
                if g & 1 == 1 {
                    x ^= v[k];
                }
                g >>= 1;
                k += 1;
            }
            *o = x as f64 * SCALE;
        }
    }
}

/// The first `n` nonzero Sobol points in `d` dimensions (indices `1..=n`).
pub fn sobol_points(n: usize, d: usize) -> Result<SampleMatrix> {
    sobol_points_from(n, d, 1)
}

/// `n` consecutive Sobol points starting at sequence index `start` (must be ≥ 1).
pub fn sobol_points_from(n: usize, d: usize, start: u64) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::ParameterDomain("Sobol point count must be ≥ 1".into()));
    }
    if start == 0 {
        return Err(Error::ParameterDomain(
            "the all-zeros Sobol point is excluded; start at index 1".into(),
        ));
    }
    let gen = Sobol::new(d)?;
    let mut data = vec![0.0; n * d];
    for (i, row) in data.chunks_exact_mut(d).enumerate() {
        gen.point_into(start + i as u64, row);
    }
    Ok(SampleMatrix::from_raw(data, n, d, Space::StdUniform))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_point_is_one_half() {
        let p = sobol_points(1, 1).unwrap();
        assert_eq!(p.row(0), &[0.5]);
    }

    #[test]
    fn small_points_in_open_unit_interval() {
        let p = sobol_points(3, 2).unwrap();
        assert!(p.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    // Reference values from an independent implementation (scipy.stats.qmc.Sobol,
    // scramble=False), which uses the same direction numbers and Gray-code order.
    #[test]
    fn matches_reference_generator_5d() {
        let expect = [
            [0.5, 0.5, 0.5, 0.5, 0.5],
            [0.75, 0.25, 0.25, 0.25, 0.75],
            [0.25, 0.75, 0.75, 0.75, 0.25],
            [0.375, 0.375, 0.625, 0.875, 0.375],
            [0.875, 0.875, 0.125, 0.375, 0.875],
            [0.625, 0.125, 0.875, 0.625, 0.625],
            [0.125, 0.625, 0.375, 0.125, 0.125],
            [0.1875, 0.3125, 0.9375, 0.4375, 0.5625],
        ];
        let p = sobol_points(8, 5).unwrap();
        for (i, row) in expect.iter().enumerate() {
            assert_eq!(p.row(i), row);
        }
    }

    #[test]
    fn matches_reference_generator_high_dims() {
        let dims = [0, 1, 2, 9, 99, 499, 998, 999];
        let expect: [(u64, [f64; 8]); 3] = [
            (
                2,
                [0.75, 0.25, 0.25, 0.75, 0.75, 0.25, 0.25, 0.75],
            ),
            (
                100,
                [
                    0.4140625, 0.2578125, 0.7734375, 0.6953125, 0.8828125, 0.4921875, 0.3203125,
                    0.9140625,
                ],
            ),
            (
                1024,
                [
                    0.00146484375,
                    0.37646484375,
                    0.44775390625,
                    0.67138671875,
                    0.35791015625,
                    0.62548828125,
                    0.56982421875,
                    0.66259765625,
                ],
            ),
        ];
        let gen = Sobol::new(1000).unwrap();
        let mut buf = vec![0.0; 1000];
        for (idx, vals) in expect {
            gen.point_into(idx, &mut buf);
            for (d, v) in dims.iter().zip(vals) {
                assert_eq!(buf[*d], v, "index {idx} dim {d}");
            }
        }
    }

    #[test]
    fn unsupported_dimension() {
        assert!(matches!(
            sobol_points(4, 1001),
            Err(Error::UnsupportedDimension { requested: 1001, .. })
        ));
        assert!(sobol_points(4, 0).is_err());
    }

    #[test]
    fn deterministic() {
        assert_eq!(sobol_points(64, 7).unwrap(), sobol_points(64, 7).unwrap());
        let tail = sobol_points_from(10, 3, 55).unwrap();
        let full = sobol_points(64, 3).unwrap();
        assert_eq!(tail.row(0), full.row(54));
    }
}
