use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::ProbabilisticModel;
use super::sample::{SampleMatrix, Space};
use crate::error::{Error, Result};
use crate::par;

/// Maps 53 random bits to the open interval (0, 1).
#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// `n x d` pseudo-random uniforms in (0, 1). Chunk `c` of 4096 rows
/// draws from ChaCha8 stream `c` of `seed`, so output is independent of threading.
pub fn uniform_samples(n: usize, d: usize, seed: u64) -> Result<SampleMatrix> {
    if n == 0 || d == 0 {
        return Err(Error::ParameterDomain(format!(
            "sample matrix must be non-empty (n={n}, d={d})"
        )));
    }
    let mut data = vec![0.0; n * d];
    par::fill_chunks(&mut data, d, |c, chunk| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        for v in chunk.iter_mut() {
            *v = open_unit(rng.next_u64());
        }
    });
    Ok(SampleMatrix::from_raw(data, n, d, Space::StdUniform))
}

/// Seeded Monte Carlo draws from the model, by inverse CDF of each marginal.
pub fn mc_sample(model: &ProbabilisticModel, n: usize, seed: u64) -> Result<SampleMatrix> {
    let u = uniform_samples(n, model.dim(), seed)?;
    let marginals = model.marginals();
    let d = model.dim();
    let mut data = u.into_vec();
    par::fill_chunks(&mut data, d, |_, chunk| {
        for row in chunk.chunks_exact_mut(d) {
            for (v, m) in row.iter_mut().zip(marginals) {
                *v = m.ppf(*v);
            }
        }
    });
    Ok(SampleMatrix::from_raw(data, n, d, Space::Physical))
}
