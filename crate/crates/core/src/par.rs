//! Chunked data-parallel helpers. Results never depend on the thread count:
//! work is split into fixed-size chunks and reduced in chunk order.

pub(crate) const CHUNK_ROWS: usize = 4096;

/// Fills `out` (row-major, `width` values per row) chunk by chunk.
pub(crate) fn fill_chunks<F>(out: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let chunk_len = CHUNK_ROWS * width.max(1);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(c, chunk)| f(c, chunk));
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(c, chunk)| f(c, chunk));
    }
}

/// Maps each chunk index in `0..n_chunks` and returns the results in order.
pub(crate) fn map_chunks<T, F>(n_chunks: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n_chunks).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_chunks).map(f).collect()
    }
}
