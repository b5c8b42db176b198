use std::sync::Arc;

use faer::Mat;

use crate::distributions::EntryDistribution;
use crate::error::{LabError, Result};
use crate::seed::{rng_from_seed, LabRng};

#[derive(Debug, Clone)]
enum Source {
    Sampled {
        dist: EntryDistribution,
        seed: u64,
        rng: LabRng,
    },
    Fixed(Arc<[Mat<f64>]>),
}

/// The factors `W_1, ..., W_N` of a product, in multiplication order.
///
/// A sampled stream draws `W_t = (mu-matrix) / sqrt(n)` from its own seeded
/// generator and can be replayed from the start with [`ProductStream::replay`].
#[derive(Debug, Clone)]
pub struct ProductStream {
    source: Source,
    n: usize,
    len: usize,
    cursor: usize,
}

impl ProductStream {
    pub fn sampled(dist: EntryDistribution, n: usize, len: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(LabError::invalid("n", "matrix size must be >= 1"));
        }
        if len == 0 {
            return Err(LabError::invalid("N", "number of factors must be >= 1"));
        }
        Ok(Self {
            source: Source::Sampled {
                dist,
                seed,
                rng: rng_from_seed(seed),
            },
            n,
            len,
            cursor: 0,
        })
    }

    /// A stream over explicitly given square factors of equal size.
    pub fn from_matrices(factors: Vec<Mat<f64>>) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| LabError::invalid("N", "need at least one factor"))?;
        let n = first.nrows();
        if n == 0 || factors.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(LabError::invalid("factors", "all factors must be n x n with n >= 1"));
        }
        let len = factors.len();
        Ok(Self {
            source: Source::Fixed(factors.into()),
            n,
            len,
            cursor: 0,
        })
    }

    /// `len` copies of the `n x n` identity.
    pub fn identity(n: usize, len: usize) -> Result<Self> {
        if n == 0 || len == 0 {
            return Err(LabError::invalid("n", "n and N must be >= 1"));
        }
        Self::from_matrices(vec![Mat::identity(n, n); len])
    }

    /// A fresh copy of this stream positioned at `W_1`.
    pub fn replay(&self) -> Self {
        let source = match &self.source {
            Source::Sampled { dist, seed, .. } => Source::Sampled {
                dist: *dist,
                seed: *seed,
                rng: rng_from_seed(*seed),
            },
            Source::Fixed(f) => Source::Fixed(Arc::clone(f)),
        };
        Self {
            source,
            n: self.n,
            len: self.len,
            cursor: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of factors `N`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn seed(&self) -> Option<u64> {
        match &self.source {
            Source::Sampled { seed, .. } => Some(*seed),
            Source::Fixed(_) => None,
        }
    }

    pub fn dist(&self) -> Option<EntryDistribution> {
        match &self.source {
            Source::Sampled { dist, .. } => Some(*dist),
            Source::Fixed(_) => None,
        }
    }

    /// Index (0-based) of the next factor to be emitted.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Writes the next factor into `buf` (resized if needed). Returns `false`
    /// once all `N` factors have been emitted.
    pub fn next_into(&mut self, buf: &mut Mat<f64>) -> bool {
        if self.cursor >= self.len {
            return false;
        }
        let n = self.n;
        if buf.nrows() != n || buf.ncols() != n {
            *buf = Mat::zeros(n, n);
        }
        match &mut self.source {
            Source::Sampled { dist, rng, .. } => {
                let scale = 1.0 / (n as f64).sqrt();
                for j in 0..n {
                    for x in buf.col_as_slice_mut(j) {
                        *x = dist.sample(rng) * scale;
                    }
                }
            }
            Source::Fixed(f) => buf.copy_from(&f[self.cursor]),
        }
        self.cursor += 1;
        true
    }
}

impl Iterator for ProductStream {
    type Item = Mat<f64>;

    fn next(&mut self) -> Option<Mat<f64>> {
        let mut buf = Mat::zeros(self.n, self.n);
        self.next_into(&mut buf).then_some(buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emits_exactly_n_factors() {
        let s = ProductStream::sampled(EntryDistribution::gaussian(), 3, 5, 1).unwrap();
        assert_eq!(s.count(), 5);
    }

    #[test]
    fn replay_reproduces_factors() {
        let mut s = ProductStream::sampled(EntryDistribution::uniform(), 4, 3, 42).unwrap();
        let first: Vec<_> = s.by_ref().take(2).collect();
        let again: Vec<_> = s.replay().take(2).collect();
        assert_eq!(first, again);
    }

    #[test]
    fn factors_are_scaled() {
        let s = ProductStream::sampled(EntryDistribution::rademacher(), 16, 1, 0).unwrap();
        let w = s.into_iter().next().unwrap();
        for j in 0..16 {
            for &x in w.col_as_slice(j) {
                assert!((x.abs() - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ProductStream::sampled(EntryDistribution::gaussian(), 0, 1, 0).is_err());
        assert!(ProductStream::sampled(EntryDistribution::gaussian(), 2, 0, 0).is_err());
        assert!(ProductStream::from_matrices(vec![]).is_err());
        assert!(ProductStream::from_matrices(vec![Mat::identity(2, 2), Mat::identity(3, 3)]).is_err());
    }
}
