//! Execution strategy for data-parallel loops.
//!
//! Every hot loop in the crate (gate kernels, multistart schedulers,
//! mixability columns, experiment repetitions) goes through these helpers.
//! With the `parallel` feature disabled, [`Parallelism::Parallel`] silently
//! degrades to sequential execution so results never depend on the build.
//!
//! Floating-point reductions are always performed over fixed-size chunks and
//! combined in index order, so parallel and sequential runs are bit-identical.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used for deterministic reductions.
pub const REDUCTION_CHUNK: usize = 1 << 12;

/// Below this many elements a kernel is run sequentially regardless of mode.
pub const MIN_PARALLEL_LEN: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parallelism {
    Sequential,
    Parallel,
}

impl Default for Parallelism {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Parallelism::Parallel
        } else {
            Parallelism::Sequential
        }
    }
}

impl Parallelism {
    /// True when this mode will actually fan out work.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }

    /// Run `f` over disjoint mutable chunks of `data`. `chunk` must divide
    /// `data.len()` for kernels that rely on block alignment.
    pub fn for_each_chunk_mut<T, F>(self, data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        let chunk = chunk.max(1);
        #[cfg(feature = "parallel")]
        if self.is_parallel() && data.len() >= MIN_PARALLEL_LEN && data.len() > chunk {
            data.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i * chunk, c));
            return;
        }
        for (i, c) in data.chunks_mut(chunk).enumerate() {
            f(i * chunk, c);
        }
    }

    /// Like [`for_each_chunk_mut`](Self::for_each_chunk_mut) with a second,
    /// read-only slice split at the same boundaries.
    pub fn zip_chunks_mut<T, U, F>(self, data: &mut [T], other: &[U], chunk: usize, f: F)
    where
        T: Send,
        U: Sync,
        F: Fn(&mut [T], &[U]) + Sync + Send,
    {
        assert_eq!(data.len(), other.len());
        let chunk = chunk.max(1);
        #[cfg(feature = "parallel")]
        if self.is_parallel() && data.len() >= MIN_PARALLEL_LEN {
            data.par_chunks_mut(chunk)
                .zip(other.par_chunks(chunk))
                .for_each(|(a, b)| f(a, b));
            return;
        }
        for (a, b) in data.chunks_mut(chunk).zip(other.chunks(chunk)) {
            f(a, b);
        }
    }

    /// Deterministic sum of `f` over `data`: per-chunk partial sums are
    /// combined sequentially in chunk order.
    pub fn sum_by<T, F>(self, data: &[T], f: F) -> f64
    where
        T: Sync,
        F: Fn(&T) -> f64 + Sync + Send,
    {
        let partial = |c: &[T]| c.iter().map(&f).sum::<f64>();
        #[cfg(feature = "parallel")]
        if self.is_parallel() && data.len() >= MIN_PARALLEL_LEN {
            let parts: Vec<f64> = data.par_chunks(REDUCTION_CHUNK).map(partial).collect();
            return parts.into_iter().sum();
        }
        data.chunks(REDUCTION_CHUNK).map(partial).sum()
    }

    /// Map over `0..n` and collect results in index order.
    pub fn map_indexed<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() && n > 1 {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_is_identical_across_modes() {
        let data: Vec<f64> = (0..100_000).map(|i| ((i as f64) * 0.37).sin()).collect();
        let a = Parallelism::Sequential.sum_by(&data, |x| *x);
        let b = Parallelism::Parallel.sum_by(&data, |x| *x);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn chunk_offsets_are_global() {
        let mut data = vec![0usize; 1 << 15];
        Parallelism::Parallel.for_each_chunk_mut(&mut data, 1 << 10, |offset, c| {
            for (k, v) in c.iter_mut().enumerate() {
                *v = offset + k;
            }
        });
        assert!(data.iter().enumerate().all(|(i, v)| i == *v));
    }

    #[test]
    fn map_keeps_order() {
        let v = Parallelism::Parallel.map_indexed(50, |i| i * i);
        assert_eq!(v, (0..50).map(|i| i * i).collect::<Vec<_>>());
    }
}
