//! Compressed sparse row matrices.

use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct Csr<T> {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Real> Csr<T> {
    /// Build from triplets; duplicates are summed in insertion order.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(usize, usize, T)>) -> Self {
        // stable sort keeps the summation order of duplicates deterministic
        trip.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<T> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Csr { nrows, ncols, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let (idx, val) = self.row(r);
        match idx.binary_search(&c) {
            Ok(p) => val[p],
            Err(_) => T::zero(),
        }
    }

    /// y = A x
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let (a, b) = (self.indptr[r], self.indptr[r + 1]);
            let mut s = T::zero();
            for p in a..b {
                s += self.values[p] * x[self.indices[p]];
            }
            *yr = s;
        }
    }

    pub fn mul(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.matvec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|r| self.get(r, r)).collect()
    }

    /// Largest |A_ij - A_ji| over stored entries.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for r in 0..self.nrows {
            let (idx, val) = self.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<T> {
        // column-major
        let mut d = vec![T::zero(); self.nrows * self.ncols];
        for r in 0..self.nrows {
            let (idx, val) = self.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                d[r + c * self.nrows] = v;
            }
        }
        d
    }

    /// Sub-matrix restricted to the given row and column index ranges, dense column-major.
    pub fn block_dense(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Vec<T> {
        let m = rows.len();
        let mut d = vec![T::zero(); m * cols.len()];
        for (ri, r) in rows.clone().enumerate() {
            let (idx, val) = self.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                if cols.contains(&c) {
                    d[ri + (c - cols.start) * m] = v;
                }
            }
        }
        d
    }

    /// Largest Gershgorin row bound, an upper estimate of the spectral radius.
    pub fn gershgorin_max(&self) -> T {
        (0..self.nrows)
            .map(|r| self.row(r).1.iter().fold(T::zero(), |s, &v| s + v.abs()))
            .fold(T::zero(), T::max)
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale<T: Real>(alpha: T, x: &mut [T]) {
    for v in x {
        *v *= alpha;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let a = Csr::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (0, 1, -1.0)]);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.mul(&[1.0, 1.0]), vec![3.0, 2.0]);
        assert_eq!(a.nnz(), 3);
    }
}
